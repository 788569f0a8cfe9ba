//! Seeded random sources.
//!
//! All randomness in the crate flows through ChaCha8 streams so results are
//! identical across platforms. Gaussian variates use the Box–Muller transform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Build a ChaCha8 stream from a base seed and a list of stream selectors.
///
/// Selectors are mixed with SplitMix64 so that nearby seeds do not yield
/// correlated streams.
pub fn stream(seed: u64, selectors: &[u64]) -> ChaCha8Rng {
    let mut state = splitmix(seed ^ 0x6c65_6166_2d72_6e67);
    for &s in selectors {
        state = splitmix(state ^ splitmix(s.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    ChaCha8Rng::seed_from_u64(state)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Unit-variance Gaussian generator (Box–Muller, pairs cached).
pub struct Gaussian {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Gaussian {
    pub fn new(rng: ChaCha8Rng) -> Self {
        Gaussian { rng, spare: None }
    }

    pub fn from_seed(seed: u64) -> Self {
        Gaussian::new(stream(seed, &[0x6761_7573_73]))
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the logarithm finite.
        let u1: f64 = 1.0 - self.rng.gen::<f64>();
        let u2: f64 = self.rng.gen::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn fill(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.sample()).collect()
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
