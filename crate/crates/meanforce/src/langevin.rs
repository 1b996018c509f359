//! Classical Langevin validation path.
//!
//! Two equivalent integrators for the same finite bath:
//!
//! * explicit bath — velocity Verlet on all 3 + 3N coordinates;
//! * generalized-Langevin — the bath eliminated exactly, leaving the memory
//!   force ∫₀^t K_N(t−s) q(s) ds with K_N(t) = Σ_n B_nB_nᵀ sin(ω_n t)/ω_n
//!   and the induced noise ζ_N(t) = Σ_n B_n [X_n(0) cos ω_n t +
//!   Ẋ_n(0) sin(ω_n t)/ω_n].
//!
//! K_N(0) = 0, so the trapezoid memory force at the new time never needs the
//! new position and both paths stay explicit. Bath initial conditions are
//! classical Gibbs of the free bath; the induced noise then satisfies
//! ⟨ζ(t)ζ(t′)ᵀ⟩ = k_BT Σ_n B_nB_nᵀ cos(ω_n(t−t′))/ω_n², the classical
//! fluctuation–dissipation pairing with the memory kernel.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SusceptibilityModel;
use crate::oracle::{build_discrete_bath, DiscreteBath};
use crate::rng::NoiseStream;

/// Relative energy-drift limit per oscillator period for the step-size probe.
pub const DRIFT_LIMIT: f64 = 1e-3;

/// Ensemble simulation configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub temperature: f64,
    pub dt: f64,
    /// Total steps per trajectory, including burn-in.
    pub n_steps: usize,
    /// Steps discarded before accumulation starts.
    pub burn_in: usize,
    pub n_traj: usize,
    /// Bath modes in the explicit realization.
    pub n_bath: usize,
    /// Bath grid cutoff (absolute frequency).
    pub omega_max: f64,
    pub seed: u64,
    /// Number of autocorrelation lags recorded.
    pub acf_lags: usize,
    /// Steps between autocorrelation samples.
    pub acf_stride: usize,
}

impl SimConfig {
    /// Reasonable defaults for a given model: bath spectrum covered with
    /// margin, ~80 post-burn-in relaxation spans, moderate lag grid.
    pub fn baseline(model: &SusceptibilityModel, temperature: f64, seed: u64) -> Self {
        let scale = model.frequency_scale();
        let omega_max = 6.0 * scale;
        let dt = 0.08 / omega_max;
        let burn_time = 100.0 / scale;
        let span = 480.0 / scale;
        let burn_in = (burn_time / dt).ceil() as usize;
        SimConfig {
            temperature,
            dt,
            n_steps: burn_in + (span / dt).ceil() as usize,
            burn_in,
            n_traj: 2000,
            n_bath: 200,
            omega_max,
            seed,
            acf_lags: 64,
            acf_stride: ((30.0 / scale / dt) as usize / 64).max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "temperature {} must be finite and > 0",
                self.temperature
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig(format!("dt {} must be finite and > 0", self.dt)));
        }
        if self.burn_in >= self.n_steps {
            return Err(Error::InvalidConfig(format!(
                "burn_in {} must be smaller than n_steps {}",
                self.burn_in, self.n_steps
            )));
        }
        if self.n_traj == 0 || self.n_bath == 0 {
            return Err(Error::InvalidConfig("n_traj and n_bath must be ≥ 1".into()));
        }
        if !(self.omega_max > 0.0 && self.omega_max.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "omega_max {} must be finite and > 0",
                self.omega_max
            )));
        }
        if self.acf_lags == 0 || self.acf_stride == 0 {
            return Err(Error::InvalidConfig("acf_lags and acf_stride must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Classical free-bath Gibbs initial conditions (flat 3N layout).
#[derive(Debug, Clone)]
pub struct BathInitials {
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
}

/// Draw bath initials from the free classical Gibbs measure:
/// X_{n,j} ~ N(0, k_BT/ω_n²), Ẋ_{n,j} ~ N(0, k_BT).
pub fn sample_bath_initials(
    bath: &DiscreteBath,
    temperature: f64,
    stream: &NoiseStream,
) -> BathInitials {
    let kt = bath.k_b() * temperature;
    let n = bath.n_modes();
    let mut positions = vec![0.0f64; 3 * n];
    let mut velocities = vec![0.0f64; 3 * n];
    for (m, &w) in bath.mode_frequencies.iter().enumerate() {
        let sx = kt.sqrt() / w;
        let sv = kt.sqrt();
        for j in 0..3 {
            positions[3 * m + j] = sx * stream.standard_normal(m as u64, j as u64);
            velocities[3 * m + j] = sv * stream.standard_normal(m as u64, 3 + j as u64);
        }
    }
    BathInitials {
        positions,
        velocities,
    }
}

/// Induced noise ζ_N(t) for a frozen set of bath initials.
pub fn induced_noise(bath: &DiscreteBath, initials: &BathInitials, t: f64) -> Vector3<f64> {
    let mut zeta = Vector3::zeros();
    for (n, (&w, b)) in bath
        .mode_frequencies
        .iter()
        .zip(&bath.coupling_blocks)
        .enumerate()
    {
        let (s, c) = (w * t).sin_cos();
        let amp = Vector3::new(
            initials.positions[3 * n] * c + initials.velocities[3 * n] * s / w,
            initials.positions[3 * n + 1] * c + initials.velocities[3 * n + 1] * s / w,
            initials.positions[3 * n + 2] * c + initials.velocities[3 * n + 2] * s / w,
        );
        zeta += b * amp;
    }
    zeta
}

/// Discrete memory kernel K_N(t) = Σ_n B_nB_nᵀ sin(ω_n t)/ω_n.
pub fn discrete_memory_kernel(bath: &DiscreteBath, t: f64) -> Matrix3<f64> {
    let mut k = Matrix3::zeros();
    for (&w, b) in bath.mode_frequencies.iter().zip(&bath.coupling_blocks) {
        k += b * b.transpose() * ((w * t).sin() / w);
    }
    k
}

/// Trapezoid convolution ∫₀^{t_n} K(t_n − s) q(s) ds for a uniformly sampled
/// history. `history[j]` is q(j·dt) with j = 0..=n; `kernel[k]` is K(k·dt)
/// and must cover k ≤ n. Endpoint weights are ½; with K(0) = 0 the newest
/// point never contributes, which keeps explicit integrators explicit.
pub fn memory_convolution(history: &[Vector3<f64>], kernel: &[Matrix3<f64>], dt: f64) -> Vector3<f64> {
    let n = history.len() - 1;
    assert!(kernel.len() > n, "kernel samples must cover the history span");
    let mut acc = Vector3::zeros();
    for (j, q) in history.iter().enumerate() {
        let weight = if j == 0 || j == n { 0.5 } else { 1.0 };
        acc += kernel[n - j] * q * weight;
    }
    acc * dt
}

struct BathArrays {
    omega_sq: Vec<f64>,
    blocks: Vec<[f64; 9]>,
    w0sq: f64,
}

impl BathArrays {
    fn new(bath: &DiscreteBath) -> Self {
        BathArrays {
            omega_sq: bath.mode_frequencies.iter().map(|w| w * w).collect(),
            blocks: bath
                .coupling_blocks
                .iter()
                .map(|b| {
                    [
                        b[(0, 0)],
                        b[(0, 1)],
                        b[(0, 2)],
                        b[(1, 0)],
                        b[(1, 1)],
                        b[(1, 2)],
                        b[(2, 0)],
                        b[(2, 1)],
                        b[(2, 2)],
                    ]
                })
                .collect(),
            w0sq: bath.omega0() * bath.omega0(),
        }
    }

    /// One fused force pass: fills the oscillator and bath accelerations.
    #[inline]
    fn accel(&self, q: &[f64; 3], x: &[f64], aq: &mut [f64; 3], ax: &mut [f64]) {
        let mut f0 = -self.w0sq * q[0];
        let mut f1 = -self.w0sq * q[1];
        let mut f2 = -self.w0sq * q[2];
        for (n, b) in self.blocks.iter().enumerate() {
            let base = 3 * n;
            let (x0, x1, x2) = (x[base], x[base + 1], x[base + 2]);
            f0 += b[0] * x0 + b[1] * x1 + b[2] * x2;
            f1 += b[3] * x0 + b[4] * x1 + b[5] * x2;
            f2 += b[6] * x0 + b[7] * x1 + b[8] * x2;
            let wsq = self.omega_sq[n];
            ax[base] = -wsq * x0 + b[0] * q[0] + b[3] * q[1] + b[6] * q[2];
            ax[base + 1] = -wsq * x1 + b[1] * q[0] + b[4] * q[1] + b[7] * q[2];
            ax[base + 2] = -wsq * x2 + b[2] * q[0] + b[5] * q[1] + b[8] * q[2];
        }
        aq[0] = f0;
        aq[1] = f1;
        aq[2] = f2;
    }

    fn total_energy(&self, q: &[f64; 3], v: &[f64; 3], x: &[f64], vx: &[f64]) -> f64 {
        let mut h = 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
            + 0.5 * self.w0sq * (q[0] * q[0] + q[1] * q[1] + q[2] * q[2]);
        for (n, b) in self.blocks.iter().enumerate() {
            let base = 3 * n;
            let wsq = self.omega_sq[n];
            for j in 0..3 {
                h += 0.5 * vx[base + j] * vx[base + j] + 0.5 * wsq * x[base + j] * x[base + j];
            }
            for i in 0..3 {
                h -= q[i]
                    * (b[3 * i] * x[base] + b[3 * i + 1] * x[base + 1] + b[3 * i + 2] * x[base + 2]);
            }
        }
        h
    }
}

/// Deterministic one-period probe: a displaced oscillator over an otherwise
/// quiet bath must conserve energy to [`DRIFT_LIMIT`] per period, otherwise
/// the step is too coarse for the fastest bath mode.
fn step_size_probe(arrays: &BathArrays, omega0: f64, dt: f64, n_bath: usize) -> Result<()> {
    let mut q = [1.0, 0.7, -0.4];
    let mut v = [0.0; 3];
    let mut x = vec![0.0f64; 3 * n_bath];
    let mut vx = vec![0.0f64; 3 * n_bath];
    let mut aq = [0.0; 3];
    let mut ax = vec![0.0f64; 3 * n_bath];
    let h0 = arrays.total_energy(&q, &v, &x, &vx);
    let steps = (2.0 * std::f64::consts::PI / omega0 / dt).ceil() as usize;
    arrays.accel(&q, &x, &mut aq, &mut ax);
    let mut worst = 0.0f64;
    for _ in 0..steps {
        for i in 0..3 {
            v[i] += 0.5 * dt * aq[i];
            q[i] += dt * v[i];
        }
        for k in 0..x.len() {
            vx[k] += 0.5 * dt * ax[k];
            x[k] += dt * vx[k];
        }
        arrays.accel(&q, &x, &mut aq, &mut ax);
        for i in 0..3 {
            v[i] += 0.5 * dt * aq[i];
        }
        for k in 0..x.len() {
            vx[k] += 0.5 * dt * ax[k];
        }
        let h = arrays.total_energy(&q, &v, &x, &vx);
        let drift = ((h - h0) / h0).abs();
        if !drift.is_finite() {
            return Err(Error::StepSizeTooLarge {
                drift: f64::INFINITY,
                limit: DRIFT_LIMIT,
            });
        }
        worst = worst.max(drift);
    }
    if worst > DRIFT_LIMIT {
        return Err(Error::StepSizeTooLarge {
            drift: worst,
            limit: DRIFT_LIMIT,
        });
    }
    Ok(())
}

/// One autocorrelation sample: lag (time units) and ⟨q(t) ⊗ q(t+lag)⟩.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AcfSample {
    pub lag: f64,
    pub tensor: Matrix3<f64>,
}

/// Ensemble statistics from [`simulate`].
#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryEnsemble {
    pub position_cov: Matrix3<f64>,
    /// Standard error of each entry, from the scatter of per-trajectory
    /// time averages.
    pub position_cov_se: Matrix3<f64>,
    pub velocity_cov: Matrix3<f64>,
    pub velocity_cov_se: Matrix3<f64>,
    /// Position covariance over the first and second halves of the
    /// accumulation window (stationarity check).
    pub half_position_cov: [Matrix3<f64>; 2],
    pub acf: Vec<AcfSample>,
    /// Effective number of independent samples behind `position_cov`,
    /// n_traj · samples / (1 + 2Σρ_ℓ) with ρ the trace-normalized ACF.
    pub n_effective: f64,
    pub n_traj: usize,
    /// Post-burn-in time span per trajectory.
    pub sampled_time: f64,
}

struct TrajStats {
    qq: [f64; 6],
    vv: [f64; 6],
    qq_half: [[f64; 6]; 2],
    acf: Vec<[f64; 9]>,
    acf_pairs: Vec<u64>,
    samples: u64,
    half_samples: [u64; 2],
}

fn run_trajectory(
    arrays: &BathArrays,
    bath: &DiscreteBath,
    cfg: &SimConfig,
    traj: usize,
) -> TrajStats {
    let stream = NoiseStream::new(cfg.seed, traj as u64);
    let kt = bath.k_b() * cfg.temperature;
    let n3 = 3 * cfg.n_bath;
    let osc_id = cfg.n_bath as u64;

    let init = sample_bath_initials(bath, cfg.temperature, &stream);
    let mut x = init.positions;
    let mut vx = init.velocities;
    let sq = (kt / arrays.w0sq).sqrt();
    let sv = kt.sqrt();
    let mut q = [0.0f64; 3];
    let mut v = [0.0f64; 3];
    for j in 0..3 {
        q[j] = sq * stream.standard_normal(osc_id, j as u64);
        v[j] = sv * stream.standard_normal(osc_id, 3 + j as u64);
    }

    let mut aq = [0.0; 3];
    let mut ax = vec![0.0f64; n3];
    arrays.accel(&q, &x, &mut aq, &mut ax);

    let mut stats = TrajStats {
        qq: [0.0; 6],
        vv: [0.0; 6],
        qq_half: [[0.0; 6]; 2],
        acf: vec![[0.0; 9]; cfg.acf_lags],
        acf_pairs: vec![0; cfg.acf_lags],
        samples: 0,
        half_samples: [0; 2],
    };
    let mut ring = vec![[0.0f64; 3]; cfg.acf_lags];
    let mut ring_filled = 0usize;
    let mut ring_w = 0usize;

    let post = cfg.n_steps - cfg.burn_in;
    let half_at = cfg.burn_in + post / 2;

    for step in 0..cfg.n_steps {
        for i in 0..3 {
            v[i] += 0.5 * cfg.dt * aq[i];
            q[i] += cfg.dt * v[i];
        }
        for k in 0..n3 {
            vx[k] += 0.5 * cfg.dt * ax[k];
            x[k] += cfg.dt * vx[k];
        }
        arrays.accel(&q, &x, &mut aq, &mut ax);
        for i in 0..3 {
            v[i] += 0.5 * cfg.dt * aq[i];
        }
        for k in 0..n3 {
            vx[k] += 0.5 * cfg.dt * ax[k];
        }

        if step >= cfg.burn_in {
            let qq = [
                q[0] * q[0],
                q[1] * q[1],
                q[2] * q[2],
                q[0] * q[1],
                q[0] * q[2],
                q[1] * q[2],
            ];
            let vv = [
                v[0] * v[0],
                v[1] * v[1],
                v[2] * v[2],
                v[0] * v[1],
                v[0] * v[2],
                v[1] * v[2],
            ];
            for i in 0..6 {
                stats.qq[i] += qq[i];
                stats.vv[i] += vv[i];
            }
            let half = usize::from(step >= half_at);
            for (acc, x) in stats.qq_half[half].iter_mut().zip(&qq) {
                *acc += x;
            }
            stats.half_samples[half] += 1;
            stats.samples += 1;

            if (step - cfg.burn_in).is_multiple_of(cfg.acf_stride) {
                ring[ring_w] = q;
                let depth = (ring_filled + 1).min(cfg.acf_lags);
                for lag in 0..depth {
                    let idx = (ring_w + cfg.acf_lags - lag) % cfg.acf_lags;
                    let old = ring[idx];
                    let acc = &mut stats.acf[lag];
                    for i in 0..3 {
                        for j in 0..3 {
                            acc[3 * i + j] += old[i] * q[j];
                        }
                    }
                    stats.acf_pairs[lag] += 1;
                }
                ring_w = (ring_w + 1) % cfg.acf_lags;
                ring_filled += 1;
            }
        }
    }
    stats
}

fn sym_from(raw: &[f64; 6]) -> Matrix3<f64> {
    Matrix3::new(
        raw[0], raw[3], raw[4], //
        raw[3], raw[1], raw[5], //
        raw[4], raw[5], raw[2],
    )
}

/// Run the classical ensemble and return covariance statistics.
///
/// Deterministic for a fixed seed regardless of thread count: every
/// trajectory derives its own counter-based noise stream and the reduction
/// is ordered.
pub fn simulate(model: &SusceptibilityModel, cfg: &SimConfig) -> Result<TrajectoryEnsemble> {
    cfg.validate()?;
    let bath = build_discrete_bath(model, cfg.n_bath, cfg.omega_max)?;
    let arrays = BathArrays::new(&bath);
    step_size_probe(&arrays, model.omega0(), cfg.dt, cfg.n_bath)?;

    let stats: Vec<TrajStats> = (0..cfg.n_traj)
        .into_par_iter()
        .map(|k| run_trajectory(&arrays, &bath, cfg, k))
        .collect();

    let nt = cfg.n_traj as f64;
    let mut mean_qq = [0.0f64; 6];
    let mut mean_vv = [0.0f64; 6];
    let mut m2_qq = [0.0f64; 6];
    let mut m2_vv = [0.0f64; 6];
    // two-pass: means of per-trajectory time averages, then scatter
    let per_traj: Vec<([f64; 6], [f64; 6])> = stats
        .iter()
        .map(|s| {
            let inv = 1.0 / s.samples as f64;
            let mut a = [0.0; 6];
            let mut b = [0.0; 6];
            for i in 0..6 {
                a[i] = s.qq[i] * inv;
                b[i] = s.vv[i] * inv;
            }
            (a, b)
        })
        .collect();
    for (a, b) in &per_traj {
        for i in 0..6 {
            mean_qq[i] += a[i] / nt;
            mean_vv[i] += b[i] / nt;
        }
    }
    for (a, b) in &per_traj {
        for i in 0..6 {
            m2_qq[i] += (a[i] - mean_qq[i]).powi(2);
            m2_vv[i] += (b[i] - mean_vv[i]).powi(2);
        }
    }
    let mut se_qq = [0.0f64; 6];
    let mut se_vv = [0.0f64; 6];
    if cfg.n_traj > 1 {
        for i in 0..6 {
            se_qq[i] = (m2_qq[i] / (nt - 1.0) / nt).sqrt();
            se_vv[i] = (m2_vv[i] / (nt - 1.0) / nt).sqrt();
        }
    }

    let mut halves = [[0.0f64; 6]; 2];
    for s in &stats {
        for (h, half_acc) in halves.iter_mut().enumerate() {
            let inv = 1.0 / s.half_samples[h] as f64;
            for (acc, x) in half_acc.iter_mut().zip(&s.qq_half[h]) {
                *acc += x * inv / nt;
            }
        }
    }

    let mut acf = Vec::with_capacity(cfg.acf_lags);
    for lag in 0..cfg.acf_lags {
        let mut acc = [0.0f64; 9];
        let mut pairs = 0u64;
        for s in &stats {
            for (a, x) in acc.iter_mut().zip(&s.acf[lag]) {
                *a += x;
            }
            pairs += s.acf_pairs[lag];
        }
        let inv = 1.0 / pairs.max(1) as f64;
        acf.push(AcfSample {
            lag: (lag * cfg.acf_stride) as f64 * cfg.dt,
            tensor: Matrix3::from_fn(|i, j| acc[3 * i + j] * inv),
        });
    }

    // integrated autocorrelation time in sample units
    let c0 = acf[0].tensor.trace();
    let mut tau = 1.0;
    for sample in acf.iter().skip(1) {
        let rho = sample.tensor.trace() / c0;
        // stop at the first lag that is noise-level — or NaN, if c0 is zero
        if rho.is_nan() || rho <= 0.05 {
            break;
        }
        tau += 2.0 * rho;
    }
    let samples = stats.first().map(|s| s.samples).unwrap_or(0) as f64;
    let samples_per_traj = samples / cfg.acf_stride as f64;
    let n_effective = nt * samples_per_traj / tau;

    Ok(TrajectoryEnsemble {
        position_cov: sym_from(&mean_qq),
        position_cov_se: sym_from(&se_qq),
        velocity_cov: sym_from(&mean_vv),
        velocity_cov_se: sym_from(&se_vv),
        half_position_cov: [sym_from(&halves[0]), sym_from(&halves[1])],
        acf,
        n_effective,
        n_traj: cfg.n_traj,
        sampled_time: (cfg.n_steps - cfg.burn_in) as f64 * cfg.dt,
    })
}

/// Velocity-Verlet trajectory of the explicit (3 + 3N)-coordinate system;
/// returns q at every step including t = 0.
pub fn explicit_bath_trajectory(
    bath: &DiscreteBath,
    q0: Vector3<f64>,
    v0: Vector3<f64>,
    initials: &BathInitials,
    dt: f64,
    n_steps: usize,
) -> Vec<Vector3<f64>> {
    let arrays = BathArrays::new(bath);
    let n3 = 3 * bath.n_modes();
    let mut q = [q0[0], q0[1], q0[2]];
    let mut v = [v0[0], v0[1], v0[2]];
    let mut x = initials.positions.clone();
    let mut vx = initials.velocities.clone();
    let mut aq = [0.0; 3];
    let mut ax = vec![0.0f64; n3];
    arrays.accel(&q, &x, &mut aq, &mut ax);

    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(q0);
    for _ in 0..n_steps {
        for i in 0..3 {
            v[i] += 0.5 * dt * aq[i];
            q[i] += dt * v[i];
        }
        for k in 0..n3 {
            vx[k] += 0.5 * dt * ax[k];
            x[k] += dt * vx[k];
        }
        arrays.accel(&q, &x, &mut aq, &mut ax);
        for i in 0..3 {
            v[i] += 0.5 * dt * aq[i];
        }
        for k in 0..n3 {
            vx[k] += 0.5 * dt * ax[k];
        }
        out.push(Vector3::new(q[0], q[1], q[2]));
    }
    out
}

/// The same dynamics through the memory-kernel route: velocity Verlet on q
/// alone, with the trapezoid convolution force and the induced noise. Same
/// bath initials ⇒ trajectories agree with [`explicit_bath_trajectory`] up
/// to integrator truncation (both are O(dt²)).
pub fn gle_trajectory(
    bath: &DiscreteBath,
    q0: Vector3<f64>,
    v0: Vector3<f64>,
    initials: &BathInitials,
    dt: f64,
    n_steps: usize,
) -> Vec<Vector3<f64>> {
    let w0sq = bath.omega0() * bath.omega0();
    let kernel: Vec<Matrix3<f64>> = (0..=n_steps)
        .map(|k| discrete_memory_kernel(bath, k as f64 * dt))
        .collect();
    let noise: Vec<Vector3<f64>> = (0..=n_steps)
        .map(|k| induced_noise(bath, initials, k as f64 * dt))
        .collect();

    let mut history = Vec::with_capacity(n_steps + 1);
    history.push(q0);
    let mut q = q0;
    let mut v = v0;
    let accel = |history: &[Vector3<f64>], step: usize| -> Vector3<f64> {
        let q_now = history[step];
        -w0sq * q_now + noise[step] + memory_convolution(&history[..=step], &kernel, dt)
    };
    let mut a = accel(&history, 0);
    for step in 0..n_steps {
        v += 0.5 * dt * a;
        q += dt * v;
        history.push(q);
        a = accel(&history, step + 1);
        v += 0.5 * dt * a;
    }
    history
}
