//! Linear response of the dressed oscillator: resolvent, fluctuation–
//! dissipation identity, and thermal correlation tensors.

use nalgebra::{Matrix3, SVector};
use num_complex::Complex64;
use std::cell::RefCell;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::SusceptibilityModel;
use crate::quad::{self, QuadratureSpec};
use crate::tensor::ComplexTensor;
use crate::thermo::coth;

/// Condition-number estimate above which the resolvent is treated as
/// numerically singular.
pub const SINGULAR_COND: f64 = 1e14;

/// Λ(ω) = ω₀²(I − χ̃(ω)) − ω²I.
pub fn lambda_matrix(model: &SusceptibilityModel, omega: f64) -> ComplexTensor {
    ComplexTensor::from_entries_symmetrized(lambda_raw(model, omega))
}

fn lambda_raw(model: &SusceptibilityModel, omega: f64) -> Matrix3<Complex64> {
    let chi = model.susceptibility(omega);
    let w0sq = Complex64::new(model.omega0() * model.omega0(), 0.0);
    let id = Matrix3::<Complex64>::identity();
    (id - chi.entries()) * w0sq - id * Complex64::new(omega * omega, 0.0)
}

/// G(ω) = Λ(ω)⁻¹, the displacement resolvent.
pub fn green_tensor(model: &SusceptibilityModel, omega: f64) -> Result<ComplexTensor> {
    Ok(ComplexTensor::from_entries_symmetrized(green_raw(model, omega)?))
}

pub(crate) fn green_raw(model: &SusceptibilityModel, omega: f64) -> Result<Matrix3<Complex64>> {
    let lambda = lambda_raw(model, omega);
    let inv = lambda.try_inverse().ok_or(Error::SingularResolvent {
        omega,
        cond: f64::INFINITY,
    })?;
    let cond = one_norm(&lambda) * one_norm(&inv);
    if !cond.is_finite() || cond > SINGULAR_COND {
        return Err(Error::SingularResolvent { omega, cond });
    }
    Ok(inv)
}

fn one_norm(m: &Matrix3<Complex64>) -> f64 {
    (0..3)
        .map(|j| (0..3).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Im G(ω) as a real symmetric matrix. PSD for ω ≥ 0 (it is G B G† with
/// B = ω₀² Im χ̃ ⪰ 0), which is what makes the correlator integrands
/// positive along the diagonal.
pub fn imag_green(model: &SusceptibilityModel, omega: f64) -> Result<Matrix3<f64>> {
    let g = green_raw(model, omega)?;
    let im = g.map(|z| z.im);
    Ok(0.5 * (im + im.transpose()))
}

/// Residual of the fluctuation–dissipation closure at ω:
///
///   ‖ (π/2ω) G†(ω) f(ω)f(ω) G(ω) − Im G(ω) ‖_max
///
/// The coupling enters between the resolvent factors: Λ − Λ† = −2i·ω₀² Im χ̃
/// = −i(π/ω) f f, so G − G† = G(Λ† − Λ)G† gives Im G = (π/2ω) G (ff) G†,
/// and transposition symmetry lets G and G† trade places. Orderings that
/// put both resolvents on the same side fail for anisotropic models because
/// Re χ̃ and Im χ̃ need not commute.
pub fn fdt_identity_residual(model: &SusceptibilityModel, omega: f64) -> Result<f64> {
    assert!(omega > 0.0, "the closure is stated for ω > 0");
    let g = green_raw(model, omega)?;
    let f = model.coupling_tensor(omega)?;
    let ff = (f * f).map(|x| Complex64::new(x, 0.0));
    let lhs = g.adjoint() * ff * g * Complex64::new(PI / (2.0 * omega), 0.0);
    let im_g = imag_green(model, omega)?;
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            let diff = lhs[(i, j)] - Complex64::new(im_g[(i, j)], 0.0);
            worst = worst.max(diff.norm());
        }
    }
    Ok(worst)
}

/// A correlation tensor with quadrature diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct CorrelatorResult {
    pub tensor: Matrix3<f64>,
    pub est_error: f64,
    pub evaluations: usize,
}

/// Captures the first error raised inside an integrand closure so it can be
/// re-thrown after the integrator returns.
struct FailCapture {
    first: RefCell<Option<Error>>,
}

impl FailCapture {
    fn new() -> Self {
        FailCapture {
            first: RefCell::new(None),
        }
    }

    fn guard<const N: usize>(&self, r: Result<SVector<f64, N>>) -> SVector<f64, N> {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.first.borrow_mut().get_or_insert(e);
                SVector::zeros()
            }
        }
    }

    fn check(self) -> Result<()> {
        match self.first.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

fn weighted_green_integral(
    model: &SusceptibilityModel,
    temperature: f64,
    quad: &QuadratureSpec,
    weight: impl Fn(f64) -> f64,
    prefactor: f64,
) -> Result<CorrelatorResult> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "temperature {temperature} must be finite and > 0"
        )));
    }
    let cutoff = model.omega_cutoff(quad);
    let breaks = model.spectral_breakpoints(cutoff);
    let capture = FailCapture::new();
    let f = |omega: f64| -> SVector<f64, 6> {
        capture.guard(imag_green(model, omega).map(|img| quad::pack_sym(&img) * weight(omega)))
    };
    let out = quad::integrate_half_line(&f, &breaks, quad)?;
    capture.check()?;
    Ok(CorrelatorResult {
        tensor: quad::unpack_sym(&out.value) * prefactor,
        est_error: out.est_error * prefactor.abs(),
        evaluations: out.evaluations,
    })
}

/// Equal-time-or-lagged position correlation tensor,
///
///   P_q(τ, T) = (ħ/π) ∫₀^∞ cos(ωτ) coth(ħω/2k_BT) Im G(ω) dω .
pub fn position_correlator(
    model: &SusceptibilityModel,
    tau: f64,
    temperature: f64,
    quad: &QuadratureSpec,
) -> Result<CorrelatorResult> {
    let hbar = model.hbar();
    let beta_scale = hbar / (2.0 * model.k_b() * temperature);
    weighted_green_integral(
        model,
        temperature,
        quad,
        |w| (w * tau).cos() * coth(beta_scale * w),
        hbar / PI,
    )
}

/// Momentum counterpart (unit mass): the integrand carries an extra ω².
pub fn momentum_correlator(
    model: &SusceptibilityModel,
    tau: f64,
    temperature: f64,
    quad: &QuadratureSpec,
) -> Result<CorrelatorResult> {
    let hbar = model.hbar();
    let beta_scale = hbar / (2.0 * model.k_b() * temperature);
    weighted_green_integral(
        model,
        temperature,
        quad,
        |w| w * w * (w * tau).cos() * coth(beta_scale * w),
        hbar / PI,
    )
}

/// Classical (coth → 2k_BT/ħω) equal-time position covariance,
/// (2k_BT/π) ∫₀^∞ Im G(ω)/ω dω. This is what a classical Langevin
/// simulation of the same model should reproduce.
pub fn classical_position_covariance(
    model: &SusceptibilityModel,
    temperature: f64,
    quad: &QuadratureSpec,
) -> Result<CorrelatorResult> {
    let kt = model.k_b() * temperature;
    weighted_green_integral(model, temperature, quad, |w| 1.0 / w, 2.0 * kt / PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rotation_axis_angle, LorentzBand};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use nalgebra::Vector3;

    fn anisotropic_model() -> SusceptibilityModel {
        let r1 = rotation_axis_angle(Vector3::new(0.0, 0.0, 1.0), 0.6);
        let r2 = rotation_axis_angle(Vector3::new(1.0, 1.0, 0.0), -0.9);
        let b1 = LorentzBand::new(r1, [0.25, 0.15, 0.1], [0.8, 1.1, 1.4], [0.3, 0.25, 0.35]).unwrap();
        let b2 = LorentzBand::new(r2, [0.12, 0.2, 0.08], [1.8, 0.6, 2.2], [0.5, 0.2, 0.6]).unwrap();
        SusceptibilityModel::new(1.0, vec![b1, b2]).unwrap()
    }

    #[test]
    fn green_inverts_lambda() {
        let m = anisotropic_model();
        for w in [0.05, 0.61, 1.0, 2.4, 7.0] {
            let lam = lambda_matrix(&m, w);
            let g = green_tensor(&m, w).unwrap();
            let prod = lam.entries() * g.entries();
            for i in 0..3 {
                for j in 0..3 {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert_abs_diff_eq!(prod[(i, j)].re, expect, epsilon = 1e-12);
                    assert_abs_diff_eq!(prod[(i, j)].im, 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn imag_green_is_psd() {
        let m = anisotropic_model();
        for w in [0.1, 0.5, 0.93, 1.7, 4.0] {
            let img = imag_green(&m, w).unwrap();
            let eigs = nalgebra::SymmetricEigen::new(img).eigenvalues;
            assert!(eigs.min() > -1e-14, "Im G not PSD at ω = {w}: {eigs:?}");
        }
    }

    #[test]
    fn fdt_residual_small_for_anisotropic_model() {
        let m = anisotropic_model();
        for w in [0.2, 0.77, 1.3, 2.9] {
            let r = fdt_identity_residual(&m, w).unwrap();
            assert!(r < 1e-11, "residual {r:e} at ω = {w}");
        }
    }

    #[test]
    fn same_side_resolvent_ordering_fails() {
        // the ordering f f G† G (both resolvents to the right) is NOT the
        // identity for anisotropic models; make sure we would catch that
        let m = anisotropic_model();
        let w = 0.9;
        let g = green_raw(&m, w).unwrap();
        let f = m.coupling_tensor(w).unwrap();
        let ff = (f * f).map(|x| Complex64::new(x, 0.0));
        let wrong = ff * g.adjoint() * g * Complex64::new(PI / (2.0 * w), 0.0);
        let im_g = imag_green(&m, w).unwrap();
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((wrong[(i, j)] - Complex64::new(im_g[(i, j)], 0.0)).norm());
            }
        }
        assert!(worst > 1e-6, "same-side ordering unexpectedly matched: {worst:e}");
    }

    #[test]
    fn ground_state_variances_in_weak_coupling() {
        // α → 0, T → 0: ⟨q²⟩ → ħ/2ω₀ and ⟨p²⟩ → ħω₀/2 per axis
        let band = LorentzBand::isotropic(1e-5, 1.3, 0.4).unwrap();
        let m = SusceptibilityModel::new(1.0, vec![band]).unwrap();
        let quad = QuadratureSpec::default();
        let t = 0.01;
        let q = position_correlator(&m, 0.0, t, &quad).unwrap();
        let p = momentum_correlator(&m, 0.0, t, &quad).unwrap();
        for i in 0..3 {
            assert_relative_eq!(q.tensor[(i, i)], 0.5, max_relative = 1e-3);
            assert_relative_eq!(p.tensor[(i, i)], 0.5, max_relative = 1e-3);
            for j in 0..3 {
                if i != j {
                    assert_abs_diff_eq!(q.tensor[(i, j)], 0.0, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn classical_covariance_matches_static_resolvent() {
        // contour identity: (2kT/π)∫ Im G/ω dω = kT·G(0) = kT[ω₀²(I−χ̃(0))]⁻¹
        let m = anisotropic_model();
        let t = 7.0;
        let quad = QuadratureSpec::default().tightened(1e-10, 1e-13);
        let cov = classical_position_covariance(&m, t, &quad).unwrap();
        let reference = m.static_stiffness().try_inverse().unwrap() * t;
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(cov.tensor[(i, j)], reference[(i, j)], epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn correlator_decays_in_lag() {
        let m = anisotropic_model();
        let quad = QuadratureSpec::default();
        let p0 = position_correlator(&m, 0.0, 1.0, &quad).unwrap();
        let p_late = position_correlator(&m, 40.0, 1.0, &quad).unwrap();
        assert!(p_late.tensor.abs().max() < 0.2 * p0.tensor.abs().max());
    }
}
