//! Counter-based Gaussian increment streams.
//!
//! Every increment is a pure function of `(seed, path, player, step, lane)`,
//! so the same tuple yields bit-identical values no matter which worker asks
//! first or how many systems share the stream. Player index 0 addresses the
//! common noise W0; indices >= 1 address the idiosyncratic noises Wi. That
//! addressing is what makes common-random-number coupling across the finite,
//! limiting and deviation systems exact.
//!
//! Uniforms come from a SplitMix64-style avalanche over the mixed counter;
//! normals from Box-Muller on two uniforms per lane (fixed consumption, no
//! rejection, so the addressing stays pure).

const GOLDEN: u64 = 0x9e3779b97f4a7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Uniform in the open interval (0, 1); never returns 0 or 1, which keeps
/// the Box-Muller logarithm finite.
#[inline]
fn to_open_unit(bits: u64) -> f64 {
    (((bits >> 11) as f64) + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Deterministic Gaussian stream addressed by (path, player, step).
#[derive(Clone, Copy, Debug)]
pub struct NoiseSource {
    seed: u64,
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    fn word(&self, path: u64, player: u64, step: u64, lane: u64) -> u64 {
        let mut h = mix(self.seed ^ GOLDEN);
        h = mix(h ^ path.wrapping_mul(0xa0761d6478bd642f));
        h = mix(h ^ player.wrapping_mul(0xe7037ed1a0b428db));
        h = mix(h ^ step.wrapping_mul(0x8ebc6af09c88c6e3));
        mix(h ^ lane.wrapping_mul(0x589965cc75374cc3))
    }

    /// Standard normal draw for one lane of the (path, player, step) cell.
    #[inline]
    pub fn normal(&self, path: usize, player: usize, step: usize, lane: usize) -> f64 {
        let u1 = to_open_unit(self.word(path as u64, player as u64, step as u64, 2 * lane as u64));
        let u2 = to_open_unit(self.word(
            path as u64,
            player as u64,
            step as u64,
            2 * lane as u64 + 1,
        ));
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Write a Brownian increment (standard normals scaled by `sqrt_h`) for
    /// the given player into `out`, one lane per component.
    #[inline]
    pub fn increment(&self, path: usize, player: usize, step: usize, sqrt_h: f64, out: &mut [f64]) {
        for (lane, slot) in out.iter_mut().enumerate() {
            *slot = sqrt_h * self.normal(path, player, step, lane);
        }
    }
}
