//! Adaptive Gauss–Kronrod quadrature for vector-valued integrands.
//!
//! A 7/15-point Gauss–Kronrod rule drives bisection of the worst interval
//! until the summed error estimate meets the tolerance. Integrands are
//! `SVector<f64, N>` so a whole symmetric tensor (or a family of thermal
//! integrals sharing one expensive evaluation) converges in a single pass;
//! the interval error is the worst component's estimate.
//!
//! Semi-infinite tails are folded onto [0, 1) by ω = a/(1 − u), which turns
//! an ω⁻ᵖ tail into a (1 − u)^{p−2} integrand — smooth for every integrand
//! in this crate (p ≥ 3). Nothing is ever evaluated at the endpoint.

use nalgebra::{Matrix3, SVector};
use serde::{Deserialize, Serialize};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Tolerances and budgets for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    /// Relative tolerance against the largest component of the result.
    pub rel_tol: f64,
    /// Absolute floor, for components that are legitimately ~0.
    pub abs_tol: f64,
    /// Bisection budget per integral piece.
    pub max_subdivisions: usize,
    /// Upper integration cutoff as a multiple of the model's largest
    /// frequency scale; beyond it the tail substitution takes over.
    pub omega_max_factor: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_subdivisions: 2000,
            omega_max_factor: 60.0,
        }
    }
}

impl QuadratureSpec {
    /// Same budgets with tighter tolerances, for inner cross-checks.
    pub fn tightened(&self, rel_tol: f64, abs_tol: f64) -> Self {
        QuadratureSpec {
            rel_tol: self.rel_tol.min(rel_tol),
            abs_tol: self.abs_tol.min(abs_tol),
            ..*self
        }
    }
}

/// An integral value with its error estimate and evaluation count.
#[derive(Debug, Clone, Copy)]
pub struct QuadValue<const N: usize> {
    pub value: SVector<f64, N>,
    pub est_error: f64,
    pub evaluations: usize,
}

impl<const N: usize> QuadValue<N> {
    fn zero() -> Self {
        QuadValue {
            value: SVector::zeros(),
            est_error: 0.0,
            evaluations: 0,
        }
    }

    /// Combine independent pieces of one integral.
    pub fn merge(&self, other: &Self) -> Self {
        QuadValue {
            value: self.value + other.value,
            est_error: self.est_error + other.est_error,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

impl QuadValue<1> {
    pub fn scalar(&self) -> f64 {
        self.value[0]
    }
}

// 15-point Kronrod nodes (positive half) and weights, with the embedded
// 7-point Gauss weights on the odd-indexed nodes. Tabulated values are kept
// at full published precision; the compiler rounds them to the nearest f64.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss–Kronrod pass over [a, b]: Kronrod value and a per-interval
/// error estimate (worst component, rescaled the way QUADPACK does so the
/// estimate is sharp rather than merely |K − G|).
fn gk15<const N: usize>(
    f: &dyn Fn(f64) -> SVector<f64, N>,
    a: f64,
    b: f64,
) -> (SVector<f64, N>, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = fc.abs() * WGK[7];
    let mut samples = [[SVector::<f64, N>::zeros(); 2]; 7];

    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        resk += (f1 + f2) * WGK[j];
        resabs += (f1.abs() + f2.abs()) * WGK[j];
        if j % 2 == 1 {
            resg += (f1 + f2) * WG[j / 2];
        }
        samples[j] = [f1, f2];
    }

    let reskh = resk * 0.5;
    let mut resasc = (fc - reskh).abs() * WGK[7];
    for j in 0..7 {
        resasc += ((samples[j][0] - reskh).abs() + (samples[j][1] - reskh).abs()) * WGK[j];
    }

    let mut err = 0.0f64;
    for i in 0..N {
        let raw = ((resk[i] - resg[i]) * half).abs();
        let asc = resasc[i] * half.abs();
        let mut e = raw;
        if asc != 0.0 && raw != 0.0 {
            let scale = (200.0 * raw / asc).powf(1.5);
            e = if scale < 1.0 { asc * scale } else { asc };
        }
        let abs = resabs[i] * half.abs();
        if abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e = e.max(50.0 * f64::EPSILON * abs);
        }
        err = err.max(e);
    }

    (resk * half, err)
}

struct Interval<const N: usize> {
    a: f64,
    b: f64,
    value: SVector<f64, N>,
    err: f64,
}

#[derive(PartialEq)]
struct HeapEntry {
    err: f64,
    seq: u64,
    idx: usize,
}

impl Eq for HeapEntry {}
impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // max-heap on error; sequence number breaks ties deterministically
        self.err
            .total_cmp(&other.err)
            .then(other.seq.cmp(&self.seq))
    }
}

/// Adaptive integration over a pre-partitioned range. `points` must be
/// ascending; each consecutive pair seeds one interval.
pub fn integrate_segments<const N: usize>(
    f: &dyn Fn(f64) -> SVector<f64, N>,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadValue<N>> {
    let mut intervals: Vec<Interval<N>> = Vec::new();
    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    let mut seq = 0u64;
    let mut evaluations = 0usize;

    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        assert!(b >= a, "integration points must be ascending");
        if b - a <= 0.0 {
            continue;
        }
        let (value, err) = gk15(f, a, b);
        evaluations += 15;
        intervals.push(Interval { a, b, value, err });
        heap.push(HeapEntry {
            err,
            seq,
            idx: intervals.len() - 1,
        });
        seq += 1;
    }
    if intervals.is_empty() {
        return Ok(QuadValue::zero());
    }

    let mut splits = 0usize;
    loop {
        let total_err: f64 = intervals.iter().map(|iv| iv.err).sum();
        let mut max_comp = 0.0f64;
        let mut totals = SVector::<f64, N>::zeros();
        for iv in &intervals {
            totals += iv.value;
        }
        for i in 0..N {
            max_comp = max_comp.max(totals[i].abs());
        }
        let target = spec.abs_tol.max(spec.rel_tol * max_comp);
        if total_err <= target {
            break;
        }
        if splits >= spec.max_subdivisions {
            return Err(Error::QuadratureFailure {
                est_error: total_err,
                target,
                subdivisions: splits,
            });
        }
        let top = heap.pop().expect("non-empty heap while error > target");
        let iv = &intervals[top.idx];
        if top.err != iv.err {
            continue; // stale entry
        }
        let (a, b) = (iv.a, iv.b);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            // interval at floating-point resolution: cannot split further
            return Err(Error::QuadratureFailure {
                est_error: total_err,
                target,
                subdivisions: splits,
            });
        }
        let (v1, e1) = gk15(f, a, mid);
        let (v2, e2) = gk15(f, mid, b);
        evaluations += 30;
        intervals[top.idx] = Interval {
            a,
            b: mid,
            value: v1,
            err: e1,
        };
        heap.push(HeapEntry {
            err: e1,
            seq,
            idx: top.idx,
        });
        seq += 1;
        intervals.push(Interval {
            a: mid,
            b,
            value: v2,
            err: e2,
        });
        heap.push(HeapEntry {
            err: e2,
            seq,
            idx: intervals.len() - 1,
        });
        seq += 1;
        splits += 1;
    }

    // deterministic final summation: left-to-right, compensated
    intervals.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = SVector::<f64, N>::zeros();
    for i in 0..N {
        let mut acc = Neumaier::new();
        for iv in &intervals {
            acc.add(iv.value[i]);
        }
        value[i] = acc.total();
    }
    let est_error = intervals.iter().map(|iv| iv.err).sum();
    Ok(QuadValue {
        value,
        est_error,
        evaluations,
    })
}

/// ∫_a^∞ f dω via ω = a/(1 − u), u ∈ [0, 1). Needs f = O(ω⁻³) or faster.
pub fn integrate_tail<const N: usize>(
    f: &dyn Fn(f64) -> SVector<f64, N>,
    a: f64,
    spec: &QuadratureSpec,
) -> Result<QuadValue<N>> {
    assert!(a > 0.0, "tail start must be positive");
    let g = move |u: f64| {
        let r = 1.0 - u;
        let omega = a / r;
        f(omega) * (a / (r * r))
    };
    integrate_segments(&g, &[0.0, 0.5, 1.0], spec)
}

/// Adaptive integral over (0, ∞) split as pre-partitioned [0, cutoff] plus
/// the folded tail.
pub fn integrate_half_line<const N: usize>(
    f: &dyn Fn(f64) -> SVector<f64, N>,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadValue<N>> {
    let finite = integrate_segments(f, breakpoints, spec)?;
    let cutoff = *breakpoints.last().expect("breakpoints must be non-empty");
    let tail = integrate_tail(f, cutoff, spec)?;
    Ok(finite.merge(&tail))
}

/// Symmetric principal value: P∫_{p−δ}^{p+δ} h(ξ)/(ξ − p) dξ rewritten as
/// ∫₀^δ [h(p + u) − h(p − u)]/u du, which is smooth at u = 0.
pub fn pv_symmetric<const N: usize>(
    h: &dyn Fn(f64) -> SVector<f64, N>,
    pole: f64,
    delta: f64,
    spec: &QuadratureSpec,
) -> Result<QuadValue<N>> {
    assert!(delta > 0.0);
    let g = move |u: f64| (h(pole + u) - h(pole - u)) / u;
    integrate_segments(&g, &[0.0, delta], spec)
}

/// Pack a symmetric 3×3 matrix as (xx, yy, zz, xy, xz, yz).
pub fn pack_sym(m: &Matrix3<f64>) -> SVector<f64, 6> {
    SVector::<f64, 6>::from([
        m[(0, 0)],
        m[(1, 1)],
        m[(2, 2)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 2)],
    ])
}

/// Inverse of [`pack_sym`].
pub fn unpack_sym(v: &SVector<f64, 6>) -> Matrix3<f64> {
    Matrix3::new(
        v[0], v[3], v[4], //
        v[3], v[1], v[5], //
        v[4], v[5], v[2],
    )
}

/// Neumaier-compensated accumulator; used wherever long sums with heavy
/// cancellation must stay far below the target tolerance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
