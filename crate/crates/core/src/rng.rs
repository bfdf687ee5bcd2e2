//! Deterministic random streams for reproducible replications.
//!
//! Every replication derives its own stream from `(master_seed, index)`
//! through a 64-bit avalanche mixer, so results never depend on worker
//! count or execution order. The generator is splitmix64 (Steele, Lea
//! and Flood's published algorithm): platform-independent, one 64-bit
//! add plus a three-stage finalizer per draw.
//!
//! Gaussian draws use the Box-Muller cosine branch and consume exactly
//! two uniforms each; no second-value caching, so stream positions are
//! a pure function of the draw counts.

use crate::policy::sample_perturbation;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finalizer: a bijective 64-bit avalanche mix.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for substream `index` of `master`.
///
/// Double-mixed so that close master seeds or close indices still land
/// on unrelated streams.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index ^ 0x94D0_49BB_1331_11EB))
}

/// Source of the random draws an episode consumes.
///
/// The canonical per-batch order is fixed: one [`perturbation`] per arm
/// in arm order, then one [`normal`] for the selected arm's batch noise.
/// Concrete and invariant runs built on the same stream therefore see
/// identical realizations draw by draw.
///
/// [`perturbation`]: NoiseStream::perturbation
/// [`normal`]: NoiseStream::normal
pub trait NoiseStream {
    /// Standard exponential draw (density e^-x on x > 0).
    fn perturbation(&mut self) -> f64;
    /// Standard normal draw.
    fn normal(&mut self) -> f64;
}

/// splitmix64-backed [`NoiseStream`].
#[derive(Clone, Debug)]
pub struct SeededStream {
    state: u64,
}

impl SeededStream {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in the half-open interval [0, 1).
    pub fn unit(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform draw in the half-open interval (0, 1]; safe to pass to ln.
    pub fn unit_open(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        ((self.next_u64() >> 11) + 1) as f64 * SCALE
    }
}

impl NoiseStream for SeededStream {
    fn perturbation(&mut self) -> f64 {
        let u = self.unit_open();
        sample_perturbation(u).expect("unit_open draw lies in (0, 1]")
    }

    fn normal(&mut self) -> f64 {
        let u1 = self.unit_open();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Stream that returns zero for every draw. Degenerate, for tests that
/// need the noise-free process.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroStream;

impl NoiseStream for ZeroStream {
    fn perturbation(&mut self) -> f64 {
        0.0
    }

    fn normal(&mut self) -> f64 {
        0.0
    }
}

/// Compensated (Neumaier) accumulator. Keeps long income and noise sums
/// within the coupling tolerance over 1e4-step episodes.
#[derive(Clone, Copy, Debug, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}
