//! Complex symmetric 3×3 tensors.
//!
//! Everything the response theory produces — χ̃(ω), Λ(ω), G(ω) — is complex
//! *symmetric* (not Hermitian): time-reversal symmetry of the microscopic
//! model makes the tensors symmetric while dissipation makes them complex.

use nalgebra::Matrix3;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest tolerated asymmetry |m − mᵀ| when constructing from raw entries.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A complex symmetric 3×3 tensor.
///
/// The `symmetric` flag records that the entries have been checked and
/// symmetrized; constructors reject data whose asymmetry exceeds
/// [`SYMMETRY_TOL`] relative to the largest entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexTensor {
    entries: Matrix3<Complex64>,
    symmetric: bool,
}

impl ComplexTensor {
    /// Build from entries, enforcing symmetry.
    ///
    /// Asymmetry up to [`SYMMETRY_TOL`] (relative to the largest entry) is
    /// attributed to rounding and averaged away; anything larger is an error.
    pub fn from_entries(m: Matrix3<Complex64>) -> Result<Self> {
        let scale = m.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
        let asym = max_asymmetry(&m);
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidModel(format!(
                "tensor entries are not symmetric: |m - mᵀ| = {asym:e}"
            )));
        }
        Ok(Self::from_entries_symmetrized(m))
    }

    /// Symmetrize (m + mᵀ)/2 without checking. For internal assembly where
    /// symmetry holds by construction and only rounding noise is present.
    pub(crate) fn from_entries_symmetrized(m: Matrix3<Complex64>) -> Self {
        let sym = (m + m.transpose()) * Complex64::new(0.5, 0.0);
        ComplexTensor {
            entries: sym,
            symmetric: true,
        }
    }

    /// Build from real and imaginary parts (each must be symmetric).
    pub fn from_re_im(re: Matrix3<f64>, im: Matrix3<f64>) -> Result<Self> {
        Self::from_entries(Matrix3::from_fn(|i, j| Complex64::new(re[(i, j)], im[(i, j)])))
    }

    pub fn zero() -> Self {
        ComplexTensor {
            entries: Matrix3::zeros(),
            symmetric: true,
        }
    }

    pub fn identity() -> Self {
        ComplexTensor {
            entries: Matrix3::identity(),
            symmetric: true,
        }
    }

    /// Raw entries.
    pub fn entries(&self) -> &Matrix3<Complex64> {
        &self.entries
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn re(&self) -> Matrix3<f64> {
        self.entries.map(|z| z.re)
    }

    pub fn im(&self) -> Matrix3<f64> {
        self.entries.map(|z| z.im)
    }

    pub fn trace(&self) -> Complex64 {
        self.entries.trace()
    }

    /// max |entry| over the tensor.
    pub fn max_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// max_ij |m_ij − m_ji|
pub(crate) fn max_asymmetry(m: &Matrix3<Complex64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in (i + 1)..3 {
            worst = worst.max((m[(i, j)] - m[(j, i)]).norm());
        }
    }
    worst
}

/// max_ij |a_ij − b_ij| for real matrices (handy in tests and checks).
pub fn max_abs_diff(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            worst = worst.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    worst
}
