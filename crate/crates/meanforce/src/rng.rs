//! Counter-based Gaussian noise streams.
//!
//! Trajectories are integrated in parallel, so stateful generators would
//! make results depend on scheduling. Instead every draw is a pure function
//! of (seed, trajectory, id, component): a splitmix64-style finalizer mixes
//! the counters and Box–Muller turns two derived uniforms into one normal.
//! Identical seeds give identical ensembles for any thread count.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn feed(state: u64, word: u64) -> u64 {
    mix64(state ^ word.wrapping_mul(GOLDEN).wrapping_add(0xD1B5_4A32_D192_ED03))
}

/// Uniform in the open interval (0, 1); never exactly 0 or 1, so logs are
/// always safe.
#[inline]
fn unit_open(z: u64) -> f64 {
    (((z >> 11) as f64) + 0.5) / (1u64 << 53) as f64
}

/// A deterministic noise stream for one trajectory.
#[derive(Debug, Clone, Copy)]
pub struct NoiseStream {
    base: u64,
}

impl NoiseStream {
    pub fn new(seed: u64, trajectory: u64) -> Self {
        let mut s = feed(seed ^ GOLDEN, 0x6D65_616E_666F_7263); // stream domain tag
        s = feed(s, trajectory);
        NoiseStream { base: s }
    }

    /// Standard normal draw addressed by (id, component).
    pub fn standard_normal(&self, id: u64, component: u64) -> f64 {
        let k = feed(feed(self.base, id), component);
        let u1 = unit_open(mix64(k ^ 0x243F_6A88_85A3_08D3));
        let u2 = unit_open(mix64(k ^ 0x1319_8A2E_0370_7344));
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform (0, 1) draw addressed by (id, component).
    pub fn uniform(&self, id: u64, component: u64) -> f64 {
        unit_open(feed(feed(self.base, id), component))
    }
}
