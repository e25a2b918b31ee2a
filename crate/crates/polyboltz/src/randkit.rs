//! Small sampling primitives over `dyn RngCore` shared by the samplers.
//!
//! Everything here draws from `RngCore::next_u64` directly so the helpers stay
//! object-safe and independent of the `Rng` extension trait.

use rand::RngCore;

/// Uniform double in `[0, 1)` with 53 random bits.
pub(crate) fn u01(rng: &mut dyn RngCore) -> f64 {
    let bits = rng.next_u64() >> 11;
    bits as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Fair coin.
pub(crate) fn coin(rng: &mut dyn RngCore) -> bool {
    rng.next_u64() & 1 == 1
}

/// Bernoulli draw with success probability `p` (clamped to `[0, 1]`).
pub(crate) fn bernoulli(rng: &mut dyn RngCore, p: f64) -> bool {
    u01(rng) < p
}

/// Uniform index in `0..k`, unbiased via rejection. `k` must be positive.
pub(crate) fn uniform_index(rng: &mut dyn RngCore, k: usize) -> usize {
    debug_assert!(k > 0);
    let k64 = k as u64;
    let zone = u64::MAX - u64::MAX % k64;
    loop {
        let r = rng.next_u64();
        if r < zone {
            return (r % k64) as usize;
        }
    }
}

/// Number of failures before the first success, `P(j) = (1 - q) q^j`.
///
/// `q` is the failure probability; values outside `(0, 1)` yield `0`.
pub(crate) fn geometric(rng: &mut dyn RngCore, q: f64) -> usize {
    if !(q > 0.0 && q < 1.0) {
        return 0;
    }
    let u = u01(rng);
    let j = ((1.0 - u).ln() / q.ln()).floor();
    if j.is_finite() && j >= 0.0 {
        (j as u64).min(1 << 40) as usize
    } else {
        0
    }
}

/// Poisson draw by sequential inversion; intended for small means.
pub(crate) fn poisson(rng: &mut dyn RngCore, lambda: f64) -> usize {
    debug_assert!(lambda >= 0.0 && lambda < 700.0);
    if lambda <= 0.0 {
        return 0;
    }
    let u = u01(rng);
    let mut p = (-lambda).exp();
    let mut cdf = p;
    let mut k = 0usize;
    while u > cdf && k < 1_000_000 {
        k += 1;
        p *= lambda / k as f64;
        cdf += p;
    }
    k
}

/// Index drawn proportionally to the nonnegative `weights`.
///
/// The caller guarantees at least one strictly positive weight.
pub(crate) fn pick_weighted(rng: &mut dyn RngCore, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0);
    let mut r = u01(rng) * total;
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn geometric_matches_mean() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let q = 0.3;
        let n = 200_000;
        let mut total = 0usize;
        for _ in 0..n {
            total += geometric(&mut rng, q);
        }
        let mean = total as f64 / n as f64;
        let expect = q / (1.0 - q);
        assert!((mean - expect).abs() < 0.01, "mean {mean} vs {expect}");
    }

    #[test]
    fn poisson_matches_mean() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let lambda = 1.3;
        let n = 200_000;
        let mut total = 0usize;
        for _ in 0..n {
            total += poisson(&mut rng, lambda);
        }
        let mean = total as f64 / n as f64;
        assert!((mean - lambda).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn uniform_index_covers_range() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let mut seen = [0usize; 5];
        for _ in 0..5_000 {
            seen[uniform_index(&mut rng, 5)] += 1;
        }
        for (i, count) in seen.iter().enumerate() {
            assert!(*count > 800, "index {i} drawn {count} times");
        }
    }

    #[test]
    fn pick_weighted_respects_masses() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let weights = [1.0, 3.0];
        let mut hits = 0usize;
        let n = 100_000;
        for _ in 0..n {
            if pick_weighted(&mut rng, &weights) == 1 {
                hits += 1;
            }
        }
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.75).abs() < 0.01, "freq {freq}");
    }
}
