use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::{Error, Result};

/// Random generator used for all simulation. Owned per rollout or worker.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform draw in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn uniform01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Draws index `i` with probability `weights[i] / sum(weights)`.
pub fn sample_categorical<R: RngCore + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let mut total = 0.0;
    for &w in weights {
        if !(w >= 0.0) || !w.is_finite() {
            return Err(Error::InvalidWeights("negative or non-finite weight"));
        }
        total += w;
    }
    if total <= 0.0 {
        return Err(Error::InvalidWeights("weights sum to zero"));
    }
    let target = uniform01(rng) * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return Ok(i);
            }
        }
    }
    Ok(last_positive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    #[test]
    fn degenerate_distribution_always_returns_its_support() {
        let mut rng = rng_from_seed(7);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&[1.0, 0.0, 0.0], &mut rng).unwrap(), 0);
            assert_eq!(sample_categorical(&[0.0, 0.0, 2.5], &mut rng).unwrap(), 2);
        }
    }

    #[test]
    fn fair_coin_frequency() {
        let mut rng = rng_from_seed(11);
        let n = 100_000;
        let zeros = (0..n)
            .filter(|_| sample_categorical(&[0.5, 0.5], &mut rng).unwrap() == 0)
            .count();
        let freq = zeros as f64 / n as f64;
        assert!((0.49..=0.51).contains(&freq), "freq {freq}");
    }

    #[test]
    fn same_seed_same_sequence() {
        let draw = |seed| {
            let mut rng = rng_from_seed(seed);
            (0..64)
                .map(|_| sample_categorical(&[0.2, 0.3, 0.5], &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(3), draw(3));
        assert_ne!(draw(3), draw(4));
    }

    #[test]
    fn rejects_bad_weights() {
        let mut rng = rng_from_seed(0);
        assert!(sample_categorical(&[0.0, 0.0], &mut rng).is_err());
        assert!(sample_categorical(&[1.0, -0.1], &mut rng).is_err());
        assert!(sample_categorical(&[f64::NAN], &mut rng).is_err());
        assert!(sample_categorical(&[], &mut rng).is_err());
    }
}
