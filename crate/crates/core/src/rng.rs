//! Random-number helpers shared by the samplers.
//!
//! All randomness flows through an externally owned [`RngCore`]; nothing in
//! this crate keeps generator state of its own.

use rand_core::RngCore;
// unused only when a dependency links std and its inherent f64 methods
#[allow(unused_imports)]
use num_traits::Float;

use crate::special::normal_quantile;

/// The generator used by the harness for every seeded stream.
pub type StreamRng = rand_chacha::ChaCha8Rng;

/// Uniform draw on the open interval `(0, 1)`, 52 bits of resolution (the
/// half-step offset is exact at 52 bits, so 1 is never reached).
#[inline]
pub fn open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

#[inline]
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    normal_quantile(open01(rng))
}

/// Gamma(shape, 1) by Marsaglia–Tsang, boosted for `shape < 1`.
pub fn gamma<R: RngCore + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let g = gamma(shape + 1.0, rng);
        return g * open01(rng).powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open01(rng);
        if u.ln() < 0.5 * x * x + d - d * v + d * v.ln() {
            return d * v;
        }
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the stream owned by one `(master_seed, config, seed)` run.
pub fn stream_seed(master_seed: u64, config_hash: u64, seed: u64) -> u64 {
    mix64(master_seed ^ mix64(config_hash ^ mix64(seed)))
}

pub fn stream(seed: u64) -> StreamRng {
    use rand_core::SeedableRng;
    StreamRng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open01_never_hits_endpoints() {
        struct Fixed(u64);
        impl RngCore for Fixed {
            fn next_u32(&mut self) -> u32 {
                self.0 as u32
            }
            fn next_u64(&mut self) -> u64 {
                self.0
            }
            fn fill_bytes(&mut self, _: &mut [u8]) {}
        }
        assert!(open01(&mut Fixed(0)) > 0.0);
        assert!(open01(&mut Fixed(u64::MAX)) < 1.0);
    }

    #[test]
    fn gamma_sampler_moments() {
        let mut rng = stream(7);
        for &shape in &[0.5, 1.0, 3.0] {
            let n = 100_000;
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..n {
                let g = gamma(shape, &mut rng);
                s += g;
                s2 += g * g;
            }
            let mean = s / n as f64;
            let var = s2 / n as f64 - mean * mean;
            let se = (shape / n as f64).sqrt();
            assert!((mean - shape).abs() < 4.0 * se, "shape {shape}: mean {mean}");
            assert!((var - shape).abs() < 0.05 * shape + 0.02, "shape {shape}: var {var}");
        }
    }

    #[test]
    fn stream_seeds_differ() {
        assert_ne!(stream_seed(1, 2, 3), stream_seed(1, 2, 4));
        assert_ne!(stream_seed(1, 2, 3), stream_seed(1, 3, 3));
        assert_eq!(stream_seed(9, 9, 9), stream_seed(9, 9, 9));
    }
}
