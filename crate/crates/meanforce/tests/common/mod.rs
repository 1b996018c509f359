//! Shared fixtures for the integration suites: pinned test models, a seeded
//! random-model generator, and an independently written one-dimensional
//! pipeline used to cross-check the tensor code in the isotropic limit.

#![allow(dead_code)]

use nalgebra::{Matrix3, SVector, Vector3};

use meanforce::model::{
    lorentz_scalar, lorentz_scalar_derivative, rotation_axis_angle, LorentzBand,
    SusceptibilityModel,
};
use meanforce::quad::{self, QuadratureSpec};
use meanforce::rng::NoiseStream;

/// Two rotated anisotropic bands around a unit-frequency oscillator; the
/// standard fixture for oracle comparisons, consistency residuals and
/// rotation checks. Units: ħ = k_B = ω₀ = 1.
pub fn reference_model() -> SusceptibilityModel {
    let band_a = LorentzBand::axis_aligned(
        [0.30, 0.20, 0.10],
        [0.80, 1.30, 1.90],
        [0.30, 0.40, 0.50],
    )
    .unwrap();
    let rot = rotation_axis_angle(Vector3::new(1.0, 1.0, 1.0), 0.7);
    let band_b = LorentzBand::new(
        rot,
        [0.15, 0.10, 0.05],
        [2.30, 2.90, 3.40],
        [0.60, 0.50, 0.40],
    )
    .unwrap();
    SusceptibilityModel::new(1.0, vec![band_a, band_b]).unwrap()
}

/// Single axis-aligned band with heavy damping and a compact spectrum —
/// cheap to discretize, so the stochastic ensemble stays affordable.
pub fn langevin_model() -> SusceptibilityModel {
    let band = LorentzBand::axis_aligned(
        [0.30, 0.20, 0.15],
        [0.90, 1.10, 1.30],
        [0.50, 0.60, 0.70],
    )
    .unwrap();
    SusceptibilityModel::new(1.0, vec![band]).unwrap()
}

/// Well-separated resonances so Kramers–Kronig can be probed far from any
/// |ω − ν| < 2γ neighborhood.
pub fn sparse_resonance_model() -> SusceptibilityModel {
    let rot = rotation_axis_angle(Vector3::new(0.3, -1.0, 0.5), 1.1);
    let band = LorentzBand::new(
        rot,
        [0.30, 0.25, 0.20],
        [1.00, 1.50, 2.20],
        [0.15, 0.20, 0.25],
    )
    .unwrap();
    SusceptibilityModel::new(1.0, vec![band]).unwrap()
}

/// Seeded random valid model: one or two bands, random frames, strengths
/// capped so the static stiffness stays comfortably positive definite.
pub fn random_model(index: u64) -> SusceptibilityModel {
    let stream = NoiseStream::new(0xA11CE, index);
    let n_bands = 1 + (index % 2) as usize;
    let mut bands = Vec::new();
    for b in 0..n_bands {
        let id = 10 * (b as u64 + 1);
        let u = |c: u64| stream.uniform(id, c);
        let strengths = [
            0.05 + 0.20 * u(0),
            0.05 + 0.20 * u(1),
            0.05 + 0.20 * u(2),
        ];
        let resonances = [
            0.5 + 2.5 * u(3),
            0.5 + 2.5 * u(4),
            0.5 + 2.5 * u(5),
        ];
        let dampings = [
            0.2 + 0.6 * u(6),
            0.2 + 0.6 * u(7),
            0.2 + 0.6 * u(8),
        ];
        let rotation = random_rotation(&stream, id + 5);
        bands.push(LorentzBand::new(rotation, strengths, resonances, dampings).unwrap());
    }
    SusceptibilityModel::new(1.0, bands).unwrap()
}

/// Haar-ish random rotation: Gaussian axis, uniform angle.
pub fn random_rotation(stream: &NoiseStream, id: u64) -> Matrix3<f64> {
    let axis = Vector3::new(
        stream.standard_normal(id, 0),
        stream.standard_normal(id, 1),
        stream.standard_normal(id, 2),
    );
    let angle = 2.0 * std::f64::consts::PI * stream.uniform(id, 3);
    rotation_axis_angle(axis, angle)
}

/// Max-norm relative deviation between two tensors.
pub fn rel_dev(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).abs().max() / b.abs().max().max(1e-300)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

// --- independent scalar pipeline -----------------------------------------
//
// A one-axis version of the whole thermodynamic stack, written from the
// scalar formulas directly (complex arithmetic on f64 pairs, no tensors).
// The tensor code must reduce to exactly this in the isotropic limit.

fn coth_s(x: f64) -> f64 {
    if x < 1e-6 {
        1.0 / x + x / 3.0
    } else {
        1.0 / x.tanh()
    }
}

fn ln_2sinh_s(x: f64) -> f64 {
    x + (-(-2.0 * x).exp_m1()).ln()
}

fn entropy_kernel_s(x: f64) -> f64 {
    let em = (-2.0 * x).exp_m1();
    -2.0 * x * (1.0 + em) / em - (-em).ln()
}

/// Scalar thermodynamic outputs for a single-axis oscillator.
#[derive(Debug, Clone, Copy)]
pub struct ScalarThermo {
    pub u_mean_force: f64,
    pub u_alternative: f64,
    pub f_mean_force: f64,
    pub s_mean_force: f64,
    pub bath_energy: f64,
    pub interaction_energy: f64,
    pub position_variance: f64,
}

/// One-dimensional mean-force thermodynamics of a single Lorentz band.
#[allow(clippy::too_many_arguments)]
pub fn scalar_thermo(
    alpha: f64,
    nu: f64,
    gamma: f64,
    omega0: f64,
    hbar: f64,
    k_b: f64,
    temperature: f64,
    quad: &QuadratureSpec,
) -> ScalarThermo {
    use std::f64::consts::PI;
    let w0sq = omega0 * omega0;
    let beta_scale = hbar / (2.0 * k_b * temperature);

    let f = |omega: f64| -> SVector<f64, 7> {
        let chi = lorentz_scalar(alpha, nu, gamma, omega);
        let dchi = lorentz_scalar_derivative(alpha, nu, gamma, omega);
        let g = 1.0 / (w0sq * (1.0 - chi) - omega * omega);
        let a_total = (w0sq * (omega * dchi - chi + 1.0) + omega * omega) * g;
        let a_alt = (omega * omega + w0sq) * g;
        let a_bath = ((chi + omega * dchi) * g).im;
        let a_int = (chi * g).im;
        let x = beta_scale * omega;
        let c = coth_s(x);
        SVector::<f64, 7>::from([
            c * a_total.im,
            c * a_alt.im,
            c * a_bath,
            c * a_int,
            ln_2sinh_s(x) * a_total.im / omega,
            entropy_kernel_s(x) * a_total.im / omega,
            c * g.im,
        ])
    };

    // full sorted partition of (0, cutoff], origin and cutoff included
    let cutoff = quad.omega_max_factor * omega0.max(nu);
    let mut breaks = vec![0.0, omega0, nu, cutoff];
    breaks.retain(|&b| b <= cutoff);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let out = quad::integrate_half_line(&f, &breaks, quad).expect("scalar pipeline quadrature");
    let v = out.value;

    ScalarThermo {
        u_mean_force: hbar / (2.0 * PI) * v[0],
        u_alternative: hbar / (2.0 * PI) * v[1],
        f_mean_force: k_b * temperature / PI * v[4],
        s_mean_force: k_b / PI * v[5],
        bath_energy: hbar * w0sq / (2.0 * PI) * v[2],
        interaction_energy: -hbar * w0sq / PI * v[3],
        position_variance: hbar / PI * v[6],
    }
}

/// Free 3-D quantum oscillator closed forms (decoupled limit targets).
pub fn free_oscillator_ufs(omega0: f64, hbar: f64, k_b: f64, temperature: f64) -> (f64, f64, f64) {
    let x = hbar * omega0 / (2.0 * k_b * temperature);
    let u = 3.0 * 0.5 * hbar * omega0 * coth_s(x);
    let f = 3.0 * k_b * temperature * ln_2sinh_s(x);
    ((u), (f), (u - f) / temperature)
}
