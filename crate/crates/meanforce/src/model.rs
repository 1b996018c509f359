//! Anisotropic Lorentz-band susceptibility model.
//!
//! The medium is a sum of damped-resonance bands. Band `b` has three
//! principal axes (an orthogonal rotation `R_b`) and per-axis oscillator
//! strength α, resonance ν and damping γ, contributing
//!
//!   χ_b(ω) = R_b · diag( α_i ν_i² / (ν_i² − ω² − iγ_i ω) ) · R_bᵀ
//!
//! and the full tensor is χ̃(ω) = Σ_b χ_b(ω). With α_i ≥ 0 every band is
//! passive (Im χ̃ ⪰ 0 for ω ≥ 0) by construction; static stability of the
//! dressed oscillator additionally requires ω₀²(I − χ̃(0)) ≻ 0, which is
//! checked when a model is built.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quad::{self, QuadratureSpec};
use crate::tensor::ComplexTensor;

/// Orthogonality tolerance for band rotation matrices.
const ROTATION_TOL: f64 = 1e-12;

/// Eigenvalues of Im χ̃ below `-PASSIVITY_TOL` are a passivity violation;
/// anything in `[-PASSIVITY_TOL, 0]` is treated as zero dissipation.
pub const PASSIVITY_TOL: f64 = 1e-12;

/// One damped-resonance band with its own principal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzBand {
    rotation: Matrix3<f64>,
    strengths: [f64; 3],
    resonances: [f64; 3],
    dampings: [f64; 3],
}

impl LorentzBand {
    /// `rotation` maps the band's principal frame to the lab frame and must
    /// be orthogonal to 1e-12; strengths must be ≥ 0, resonances and
    /// dampings > 0.
    pub fn new(
        rotation: Matrix3<f64>,
        strengths: [f64; 3],
        resonances: [f64; 3],
        dampings: [f64; 3],
    ) -> Result<Self> {
        let gram = rotation.transpose() * rotation;
        let defect = (gram - Matrix3::identity()).abs().max();
        if !defect.is_finite() || defect > ROTATION_TOL {
            return Err(Error::InvalidModel(format!(
                "band rotation is not orthogonal: |RᵀR − I| = {defect:e}"
            )));
        }
        for i in 0..3 {
            if !(strengths[i] >= 0.0 && strengths[i].is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "band strength α[{i}] = {} must be finite and ≥ 0",
                    strengths[i]
                )));
            }
            if !(resonances[i] > 0.0 && resonances[i].is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "band resonance ν[{i}] = {} must be finite and > 0",
                    resonances[i]
                )));
            }
            if !(dampings[i] > 0.0 && dampings[i].is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "band damping γ[{i}] = {} must be finite and > 0",
                    dampings[i]
                )));
            }
        }
        Ok(LorentzBand {
            rotation,
            strengths,
            resonances,
            dampings,
        })
    }

    /// Band aligned with the lab axes.
    pub fn axis_aligned(strengths: [f64; 3], resonances: [f64; 3], dampings: [f64; 3]) -> Result<Self> {
        Self::new(Matrix3::identity(), strengths, resonances, dampings)
    }

    /// Isotropic band: the same (α, ν, γ) on all three axes.
    pub fn isotropic(strength: f64, resonance: f64, damping: f64) -> Result<Self> {
        Self::axis_aligned([strength; 3], [resonance; 3], [damping; 3])
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }
    pub fn strengths(&self) -> [f64; 3] {
        self.strengths
    }
    pub fn resonances(&self) -> [f64; 3] {
        self.resonances
    }
    pub fn dampings(&self) -> [f64; 3] {
        self.dampings
    }

    /// Scalar response of principal axis `i`.
    fn axis_response(&self, i: usize, omega: f64) -> Complex64 {
        lorentz_scalar(self.strengths[i], self.resonances[i], self.dampings[i], omega)
    }

    fn axis_response_derivative(&self, i: usize, omega: f64) -> Complex64 {
        lorentz_scalar_derivative(self.strengths[i], self.resonances[i], self.dampings[i], omega)
    }

    fn axis_kernel(&self, i: usize, t: f64) -> f64 {
        lorentz_kernel(self.strengths[i], self.resonances[i], self.dampings[i], t)
    }
}

/// Scalar Lorentz response α ν² / (ν² − ω² − iγω).
pub fn lorentz_scalar(alpha: f64, nu: f64, gamma: f64, omega: f64) -> Complex64 {
    let denom = Complex64::new(nu * nu - omega * omega, -gamma * omega);
    Complex64::new(alpha * nu * nu, 0.0) / denom
}

/// dχ/dω of the scalar Lorentz response: α ν² (2ω + iγ) / (ν² − ω² − iγω)².
pub fn lorentz_scalar_derivative(alpha: f64, nu: f64, gamma: f64, omega: f64) -> Complex64 {
    let denom = Complex64::new(nu * nu - omega * omega, -gamma * omega);
    Complex64::new(alpha * nu * nu, 0.0) * Complex64::new(2.0 * omega, gamma) / (denom * denom)
}

/// Time-domain kernel of the scalar Lorentz response,
/// χ(t) = α ν² e^{−γt/2} sin(ω₁ t)/ω₁ with ω₁² = ν² − γ²/4.
///
/// The underdamped (sin), critically damped (t) and overdamped (sinh)
/// branches are the same analytic function of d = ν² − γ²/4; a short series
/// is used near d = 0 so the expression stays smooth as γ crosses 2ν.
pub fn lorentz_kernel(alpha: f64, nu: f64, gamma: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0, "memory kernel is causal; got t = {t}");
    let d = nu * nu - 0.25 * gamma * gamma;
    let x2 = d * t * t;
    let s = if x2.abs() < 1e-6 {
        // sin(√d t)/√d = t (1 − x²/6 + x⁴/120 − …), x² = d t²; also valid for d < 0
        t * (1.0 - x2 / 6.0 * (1.0 - x2 / 20.0))
    } else if d > 0.0 {
        let w1 = d.sqrt();
        (w1 * t).sin() / w1
    } else {
        let k = (-d).sqrt();
        // γ/2 > k here, so e^{−γt/2} sinh(kt) still decays
        (k * t).sinh() / k
    };
    alpha * nu * nu * (-0.5 * gamma * t).exp() * s
}

/// The oscillator–bath model: bare frequency ω₀, unit constants, and the
/// set of susceptibility bands describing the medium.
#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityModel {
    omega0: f64,
    hbar: f64,
    k_b: f64,
    bands: Vec<LorentzBand>,
}

impl SusceptibilityModel {
    /// Build and check static stability (ω₀²(I − χ̃(0)) ≻ 0). ħ = k_B = 1.
    pub fn new(omega0: f64, bands: Vec<LorentzBand>) -> Result<Self> {
        Self::with_units(omega0, bands, 1.0, 1.0)
    }

    /// As [`new`](Self::new) with explicit unit constants.
    pub fn with_units(omega0: f64, bands: Vec<LorentzBand>, hbar: f64, k_b: f64) -> Result<Self> {
        let model = Self::new_unvalidated(omega0, bands, hbar, k_b)?;
        let min_eig = model.static_stability_margin();
        if min_eig <= 0.0 {
            return Err(Error::Unstable { min_eig });
        }
        Ok(model)
    }

    /// Build without the static-stability check. Intended for diagnostic
    /// flows that want to run [`validate`](Self::validate) on bad inputs and
    /// report what failed; thermodynamic quantities of an unstable model are
    /// meaningless.
    pub fn new_unvalidated(
        omega0: f64,
        bands: Vec<LorentzBand>,
        hbar: f64,
        k_b: f64,
    ) -> Result<Self> {
        if !(omega0 > 0.0 && omega0.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "oscillator frequency ω₀ = {omega0} must be finite and > 0"
            )));
        }
        if !(hbar > 0.0 && hbar.is_finite()) || !(k_b > 0.0 && k_b.is_finite()) {
            return Err(Error::InvalidModel("unit constants must be finite and > 0".into()));
        }
        Ok(SusceptibilityModel {
            omega0,
            hbar,
            k_b,
            bands,
        })
    }

    pub fn omega0(&self) -> f64 {
        self.omega0
    }
    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn k_b(&self) -> f64 {
        self.k_b
    }
    pub fn bands(&self) -> &[LorentzBand] {
        &self.bands
    }

    /// min eigenvalue of ω₀²(I − χ̃(0))); positive iff statically stable.
    pub fn static_stability_margin(&self) -> f64 {
        let k = self.static_stiffness();
        SymmetricEigen::new(k).eigenvalues.min()
    }

    /// Static stiffness of the dressed oscillator, ω₀²(I − χ̃(0)).
    pub fn static_stiffness(&self) -> Matrix3<f64> {
        let chi0 = self.susceptibility(0.0).re();
        (Matrix3::identity() - chi0) * (self.omega0 * self.omega0)
    }

    /// χ̃(ω) = Σ_b R_b diag(χ_b,i(ω)) R_bᵀ; symmetric by construction.
    pub fn susceptibility(&self, omega: f64) -> ComplexTensor {
        self.assemble(|band, i| band.axis_response(i, omega))
    }

    /// dχ̃/dω, assembled from the closed-form scalar derivative.
    pub fn susceptibility_derivative(&self, omega: f64) -> ComplexTensor {
        self.assemble(|band, i| band.axis_response_derivative(i, omega))
    }

    /// Real time-domain memory kernel χ̃(t) for t ≥ 0. χ̃(0) = 0 exactly.
    pub fn memory_kernel(&self, t: f64) -> Matrix3<f64> {
        assert!(t >= 0.0, "memory kernel is causal; got t = {t}");
        let mut total = Matrix3::zeros();
        for band in &self.bands {
            let d = Matrix3::from_diagonal(&Vector3::new(
                band.axis_kernel(0, t),
                band.axis_kernel(1, t),
                band.axis_kernel(2, t),
            ));
            total += band.rotation * d * band.rotation.transpose();
        }
        0.5 * (total + total.transpose())
    }

    fn assemble(&self, f: impl Fn(&LorentzBand, usize) -> Complex64) -> ComplexTensor {
        let mut total = Matrix3::<Complex64>::zeros();
        for band in &self.bands {
            let d = Matrix3::from_diagonal(&Vector3::new(f(band, 0), f(band, 1), f(band, 2)));
            let r = band.rotation.map(|x| Complex64::new(x, 0.0));
            total += r * d * r.transpose();
        }
        ComplexTensor::from_entries_symmetrized(total)
    }

    /// Oscillator–bath coupling tensor f(ω): the principal (PSD) matrix
    /// square root of (2ωω₀²/π)·Im χ̃(ω).
    ///
    /// Eigenvalues of Im χ̃ in [−1e-12, 0] are clamped to zero (no coupling
    /// on that axis at that frequency); anything below −1e-12 is a passivity
    /// violation and an error.
    pub fn coupling_tensor(&self, omega: f64) -> Result<Matrix3<f64>> {
        debug_assert!(omega >= 0.0);
        let im = self.susceptibility(omega).im();
        let scale = 2.0 * omega * self.omega0 * self.omega0 / std::f64::consts::PI;
        let eig = SymmetricEigen::new(im);
        let mut vals = eig.eigenvalues;
        for i in 0..3 {
            if vals[i] < -PASSIVITY_TOL {
                return Err(Error::NotPassive {
                    omega,
                    min_eig: vals[i],
                });
            }
            vals[i] = (vals[i].max(0.0) * scale).sqrt();
        }
        let q = eig.eigenvectors;
        let f = q * Matrix3::from_diagonal(&vals) * q.transpose();
        Ok(0.5 * (f + f.transpose()))
    }

    /// Largest frequency scale of the model, max(ω₀, ν_i over all bands).
    pub fn frequency_scale(&self) -> f64 {
        let mut s = self.omega0;
        for band in &self.bands {
            for nu in band.resonances {
                s = s.max(nu);
            }
        }
        s
    }

    /// Upper integration cutoff for this model under a given quadrature
    /// configuration: `omega_max_factor · frequency_scale`. The remaining
    /// ω⁻ᵖ tail is folded in by a change of variables, not truncated.
    pub fn omega_cutoff(&self, quad: &QuadratureSpec) -> f64 {
        quad.omega_max_factor * self.frequency_scale()
    }

    /// The same model rigidly rotated: χ̃'(ω) = R χ̃(ω) Rᵀ.
    pub fn rotated(&self, r: &Matrix3<f64>) -> Result<Self> {
        let bands = self
            .bands
            .iter()
            .map(|b| LorentzBand::new(r * b.rotation, b.strengths, b.resonances, b.dampings))
            .collect::<Result<Vec<_>>>()?;
        Self::with_units(self.omega0, bands, self.hbar, self.k_b)
    }

    /// Sorted breakpoints for frequency integrals over (0, cutoff]:
    /// band resonances plus the dressed resonances of the coupled oscillator
    /// (roots of det Re Λ(ω)), each dressed root bracketed at a few multiples
    /// of its damping width so narrow peaks are split before adaptive
    /// refinement starts.
    pub fn spectral_breakpoints(&self, cutoff: f64) -> Vec<f64> {
        let mut pts = vec![0.0, cutoff];
        pts.push(self.omega0.min(cutoff * 0.999));
        for band in &self.bands {
            for nu in band.resonances {
                if nu < cutoff {
                    pts.push(nu);
                }
            }
        }
        for root in self.dressed_resonances(cutoff) {
            // half-width of the peak from the local dissipation rate
            let im = self.susceptibility(root).im();
            let w = (self.omega0 * self.omega0 * im.trace() / 3.0 / (2.0 * root)).max(root * 1e-9);
            pts.push(root);
            for c in [1.0, 4.0, 16.0] {
                let lo = root - c * w;
                let hi = root + c * w;
                if lo > 0.0 {
                    pts.push(lo);
                }
                if hi < cutoff {
                    pts.push(hi);
                }
            }
        }
        pts.retain(|w| w.is_finite() && *w >= 0.0 && *w <= cutoff);
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * cutoff.max(1.0));
        pts
    }

    /// Roots of det[ω₀²(I − Re χ̃(ω)) − ω²I] on (0, hi): the undamped
    /// locations of the dressed oscillator peaks. Sign-scan plus bisection.
    pub fn dressed_resonances(&self, hi: f64) -> Vec<f64> {
        let upper = (3.0 * self.frequency_scale()).min(hi);
        let det = |w: f64| -> f64 {
            let re_chi = self.susceptibility(w).re();
            let m = (Matrix3::identity() - re_chi) * (self.omega0 * self.omega0)
                - Matrix3::identity() * (w * w);
            m.determinant()
        };
        let n = 2400;
        let mut roots = Vec::new();
        let mut prev_w = upper * 1e-6;
        let mut prev_d = det(prev_w);
        for k in 1..=n {
            let w = upper * k as f64 / n as f64;
            let d = det(w);
            if prev_d == 0.0 {
                roots.push(prev_w);
            } else if prev_d.signum() != d.signum() {
                let (mut a, mut b) = (prev_w, w);
                let mut fa = prev_d;
                for _ in 0..80 {
                    let m = 0.5 * (a + b);
                    let fm = det(m);
                    if fm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if fa.signum() != fm.signum() {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            prev_w = w;
            prev_d = d;
        }
        roots
    }

    /// Kramers–Kronig reconstruction of Re χ̃(ω) from the dissipative part:
    ///
    ///   Re χ̃(ω) = (2/π) P∫₀^∞ ξ Im χ̃(ξ) / (ξ² − ω²) dξ
    ///
    /// The principal value is taken symmetrically on [ω−δ, ω+δ] and the
    /// remainder integrated adaptively with the usual tail substitution.
    pub fn kk_real_part(&self, omega: f64, quad: &QuadratureSpec) -> Result<Matrix3<f64>> {
        let cutoff = self.omega_cutoff(quad);
        if !(omega > 0.0 && omega < 0.9 * cutoff) {
            return Err(Error::InvalidConfig(format!(
                "Kramers–Kronig evaluation point ω = {omega} must lie in (0, 0.9·cutoff)"
            )));
        }
        let two_over_pi = std::f64::consts::FRAC_2_PI;
        // numerator g(ξ) = (2/π) ξ Im χ̃(ξ), packed symmetric
        let g = |xi: f64| -> nalgebra::SVector<f64, 6> {
            let im = self.susceptibility(xi).im();
            crate::quad::pack_sym(&(im * (two_over_pi * xi)))
        };

        let delta = 0.5 * omega.min(cutoff - omega);
        // P∫_{ω−δ}^{ω+δ} g(ξ)/((ξ−ω)(ξ+ω)) dξ, with h(ξ) = g(ξ)/(ξ+ω)
        let h = |xi: f64| g(xi) / (xi + omega);
        let core = quad::pv_symmetric(&h, omega, delta, quad)?;

        // the rest of the half line, with the pole excised
        let mut breaks = self.spectral_breakpoints(cutoff);
        breaks.retain(|w| *w < omega - delta || *w > omega + delta);
        breaks.push(omega - delta);
        breaks.push(omega + delta);
        breaks.sort_by(f64::total_cmp);
        let lower: Vec<f64> = breaks.iter().copied().filter(|w| *w <= omega - delta).collect();
        let upper: Vec<f64> = breaks.iter().copied().filter(|w| *w >= omega + delta).collect();
        let rest_f = |xi: f64| g(xi) / (xi * xi - omega * omega);
        let below = quad::integrate_segments(&rest_f, &lower, quad)?;
        let above = quad::integrate_segments(&rest_f, &upper, quad)?;
        let tail = quad::integrate_tail(&rest_f, cutoff, quad)?;

        let total = core.value + below.value + above.value + tail.value;
        Ok(quad::unpack_sym(&total))
    }

    /// Diagnostic validation: static stability, passivity on a frequency
    /// grid, and Kramers–Kronig consistency at a few off-resonance probes.
    pub fn validate(&self, grid: &[f64], quad: &QuadratureSpec) -> ValidationReport {
        let static_margin = self.static_stability_margin();
        let static_stability = CheckResult {
            passed: static_margin > 0.0,
            worst_value: static_margin,
            at: 0.0,
        };

        let mut worst_im = f64::INFINITY;
        let mut worst_at = f64::NAN;
        for &w in grid {
            let im = self.susceptibility(w).im();
            let min_eig = SymmetricEigen::new(im).eigenvalues.min();
            if min_eig < worst_im {
                worst_im = min_eig;
                worst_at = w;
            }
        }
        let passivity = CheckResult {
            passed: worst_im >= -PASSIVITY_TOL,
            worst_value: worst_im,
            at: worst_at,
        };

        let kramers_kronig = self.kk_spot_check(grid, quad);

        ValidationReport {
            static_stability,
            passivity,
            kramers_kronig,
        }
    }

    fn kk_spot_check(&self, grid: &[f64], quad: &QuadratureSpec) -> CheckResult {
        let cutoff = self.omega_cutoff(quad);
        let scale = self.frequency_scale();
        let candidates = [0.37 * scale, 1.53 * scale, 2.41 * scale];
        let mut worst = 0.0f64;
        let mut at = f64::NAN;
        let mut passed = true;
        for mut w in candidates {
            if let (Some(&lo), Some(&hi)) = (
                grid.iter().min_by(|a, b| a.total_cmp(b)),
                grid.iter().max_by(|a, b| a.total_cmp(b)),
            ) {
                w = w.clamp(lo.max(1e-3 * scale), hi.min(0.89 * cutoff));
            }
            // nudge off any resonance so the probe is in smooth territory
            for _ in 0..8 {
                let near = self.bands.iter().any(|b| {
                    (0..3).any(|i| (w - b.resonances[i]).abs() < 0.5 * b.dampings[i])
                });
                if !near {
                    break;
                }
                w *= 1.11;
            }
            match self.kk_real_part(w, quad) {
                Ok(re) => {
                    let reference = self.susceptibility(w).re();
                    let denom = reference.abs().max().max(1e-12);
                    let resid = crate::tensor::max_abs_diff(&re, &reference) / denom;
                    if resid > worst {
                        worst = resid;
                        at = w;
                    }
                    if resid > 1e-3 {
                        passed = false;
                    }
                }
                Err(_) => {
                    passed = false;
                    worst = f64::INFINITY;
                    at = w;
                }
            }
        }
        CheckResult {
            passed,
            worst_value: worst,
            at,
        }
    }
}

/// Outcome of one validation check.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CheckResult {
    pub passed: bool,
    /// The extremal quantity the check looked at (min eigenvalue, worst
    /// relative residual, …).
    pub worst_value: f64,
    /// Frequency at which the extremum occurred (0 for static checks).
    pub at: f64,
}

/// Report from [`SusceptibilityModel::validate`].
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ValidationReport {
    pub static_stability: CheckResult,
    pub passivity: CheckResult,
    pub kramers_kronig: CheckResult,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.static_stability.passed && self.passivity.passed && self.kramers_kronig.passed
    }
}

/// Rotation about `axis` by `angle` (radians), for building band frames.
pub fn rotation_axis_angle(axis: Vector3<f64>, angle: f64) -> Matrix3<f64> {
    nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn simple_model() -> SusceptibilityModel {
        let band = LorentzBand::isotropic(0.3, 1.2, 0.4).unwrap();
        SusceptibilityModel::new(1.0, vec![band]).unwrap()
    }

    #[test]
    fn static_limit_is_strength() {
        // χ(0) = α on each axis, no dissipation at ω = 0
        let m = simple_model();
        let chi0 = m.susceptibility(0.0);
        assert_abs_diff_eq!(chi0.re()[(0, 0)], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(chi0.im().abs().max(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn scalar_response_at_resonance() {
        // at ω = ν the denominator is −iγν: χ = iαν/γ
        let chi = lorentz_scalar(0.5, 2.0, 0.25, 2.0);
        assert_abs_diff_eq!(chi.re, 0.0, epsilon = 1e-15);
        assert_relative_eq!(chi.im, 0.5 * 2.0 / 0.25, max_relative = 1e-14);
    }

    #[test]
    fn two_rotated_bands_match_direct_summation() {
        // independent reassembly of χ̃ from scalars, written out long-hand
        let r1 = rotation_axis_angle(Vector3::new(0.0, 0.0, 1.0), 0.5);
        let r2 = rotation_axis_angle(Vector3::new(1.0, 1.0, 0.0), -0.8);
        let b1 = LorentzBand::new(r1, [0.2, 0.1, 0.05], [0.9, 1.1, 1.3], [0.3, 0.2, 0.4]).unwrap();
        let b2 = LorentzBand::new(r2, [0.1, 0.15, 0.02], [1.7, 0.7, 2.0], [0.5, 0.25, 0.6]).unwrap();
        let m = SusceptibilityModel::new(1.0, vec![b1.clone(), b2.clone()]).unwrap();

        let omega = 0.7;
        let chi = m.susceptibility(omega);

        let mut direct = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (r, al, nu, ga) in [
            (&r1, b1.strengths(), b1.resonances(), b1.dampings()),
            (&r2, b2.strengths(), b2.resonances(), b2.dampings()),
        ] {
            for i in 0..3 {
                for j in 0..3 {
                    for k in 0..3 {
                        let scalar = lorentz_scalar(al[k], nu[k], ga[k], omega);
                        direct[i][j] += scalar * r[(i, k)] * r[(j, k)];
                    }
                }
            }
        }
        for (i, row) in direct.iter().enumerate() {
            for (j, d) in row.iter().enumerate() {
                assert_abs_diff_eq!(chi.entries()[(i, j)].re, d.re, epsilon = 1e-14);
                assert_abs_diff_eq!(chi.entries()[(i, j)].im, d.im, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let m = simple_model();
        let w = 0.9;
        let h = 1e-6;
        let d = m.susceptibility_derivative(w);
        let hi = m.susceptibility(w + h);
        let lo = m.susceptibility(w - h);
        for i in 0..3 {
            for j in 0..3 {
                let fd = (hi.entries()[(i, j)] - lo.entries()[(i, j)]) / Complex64::new(2.0 * h, 0.0);
                assert_abs_diff_eq!(d.entries()[(i, j)].re, fd.re, epsilon = 1e-7);
                assert_abs_diff_eq!(d.entries()[(i, j)].im, fd.im, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn kernel_zero_at_origin_and_smooth_at_critical_damping() {
        assert_eq!(lorentz_kernel(0.4, 1.0, 0.3, 0.0), 0.0);
        // scan γ through 2ν at fixed t: the kernel must vary smoothly
        let t = 1.7;
        let mut prev: Option<f64> = None;
        for k in 0..400 {
            let gamma = 1.8 + 0.001 * k as f64; // crosses 2ν = 2.0
            let v = lorentz_kernel(0.4, 1.0, gamma, t);
            if let Some(p) = prev {
                assert!((v - p).abs() < 1e-3, "jump at γ = {gamma}");
            }
            prev = Some(v);
        }
    }

    #[test]
    fn kernel_matches_quadrature_of_spectral_form() {
        // χ(t) = (2/π)∫ Im χ(ω) sin(ωt) dω, cross-checked by raw Simpson sum
        let (alpha, nu, gamma) = (0.35, 1.1, 0.5);
        let t = 2.3;
        let n = 2_000_000;
        let wmax = 2000.0;
        let h = wmax / n as f64;
        let f = |w: f64| lorentz_scalar(alpha, nu, gamma, w).im * (w * t).sin();
        let mut s = f(0.0) + f(wmax);
        for k in 1..n {
            let w = k as f64 * h;
            s += f(w) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        let integral = s * h / 3.0 * std::f64::consts::FRAC_2_PI;
        assert_relative_eq!(lorentz_kernel(alpha, nu, gamma, t), integral, max_relative = 1e-6);
    }

    #[test]
    fn unstable_model_rejected_at_construction() {
        let band = LorentzBand::isotropic(2.0, 1.2, 0.4).unwrap(); // χ(0) = 2 > 1
        match SusceptibilityModel::new(1.0, vec![band]) {
            Err(Error::Unstable { min_eig }) => assert!(min_eig < 0.0),
            other => panic!("expected Unstable, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_band_parameters() {
        let id = Matrix3::identity();
        assert!(LorentzBand::new(id, [-0.1, 0.0, 0.0], [1.0; 3], [0.1; 3]).is_err());
        assert!(LorentzBand::new(id, [0.1; 3], [0.0, 1.0, 1.0], [0.1; 3]).is_err());
        assert!(LorentzBand::new(id, [0.1; 3], [1.0; 3], [0.0, 0.1, 0.1]).is_err());
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(LorentzBand::new(skew, [0.1; 3], [1.0; 3], [0.1; 3]).is_err());
    }

    #[test]
    fn coupling_tensor_squares_back() {
        let m = simple_model();
        for w in [0.05, 0.7, 1.2, 3.0] {
            let f = m.coupling_tensor(w).unwrap();
            let target = m.susceptibility(w).im() * (2.0 * w / std::f64::consts::PI);
            let back = (f * f) / (m.omega0() * m.omega0());
            assert_abs_diff_eq!(crate::tensor::max_abs_diff(&back, &target), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn coupling_tensor_vanishes_at_zero_frequency() {
        let m = simple_model();
        let f = m.coupling_tensor(0.0).unwrap();
        assert_abs_diff_eq!(f.abs().max(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn dressed_resonances_found_for_simple_model() {
        // isotropic model: det root where ω² = ω₀²(1 − Re χ(ω)), triple
        let m = simple_model();
        let roots = m.dressed_resonances(10.0);
        assert!(!roots.is_empty());
        for r in &roots {
            let re_chi = m.susceptibility(*r).re()[(0, 0)];
            assert_abs_diff_eq!(r * r, 1.0 - re_chi, epsilon = 1e-8);
        }
    }
}
