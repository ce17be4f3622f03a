//! Exact samplers for the discrete laws used by the simulators.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

/// Below this many summands a negative binomial is drawn as a sum of
/// geometrics; above it through the gamma-Poisson mixture. Both are exact.
pub const NB_DIRECT_CUTOFF: u64 = 16;

/// Uniform on `(0, 1]`.
#[inline]
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// Failures before the first success, `P(V = k) = w (1 - w)^k`, by inverse CDF.
#[inline]
pub fn geometric<R: Rng + ?Sized>(w: f64, rng: &mut R) -> u64 {
    if w >= 1.0 {
        return 0;
    }
    (open_unit(rng).ln() / (1.0 - w).ln()).floor() as u64
}

/// Failures before the `r`-th success: a sum of `r` independent geometrics.
/// Returns `None` when the draw does not fit in `u64`.
pub fn negative_binomial<R: Rng + ?Sized>(r: u64, w: f64, rng: &mut R) -> Option<u64> {
    if r == 0 || w >= 1.0 {
        return Some(0);
    }
    if r <= NB_DIRECT_CUTOFF {
        let ln_fail = (1.0 - w).ln();
        let mut total = 0u64;
        for _ in 0..r {
            total += (open_unit(rng).ln() / ln_fail).floor() as u64;
        }
        return Some(total);
    }
    let mean_rate = Gamma::new(r as f64, (1.0 - w) / w).ok()?.sample(rng);
    if mean_rate <= 0.0 {
        return Some(0);
    }
    let draw = Poisson::new(mean_rate).ok()?.sample(rng);
    if draw >= u64::MAX as f64 {
        None
    } else {
        Some(draw as u64)
    }
}

/// Row-wise cumulative distribution for sampling a finite Markov chain.
#[derive(Debug, Clone)]
pub struct ChainSampler {
    cumulative: Vec<Vec<f64>>,
    initial: Vec<f64>,
}

impl ChainSampler {
    pub fn new(h: &DMatrix<f64>, initial: &DVector<f64>) -> Self {
        let cumulative = h.row_iter().map(|row| cumulate(row.iter().copied())).collect();
        Self { cumulative, initial: cumulate(initial.iter().copied()) }
    }

    pub fn len(&self) -> usize {
        self.initial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial.is_empty()
    }

    #[inline]
    pub fn start<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        pick(&self.initial, rng.random())
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, from: usize, rng: &mut R) -> usize {
        pick(&self.cumulative[from], rng.random())
    }
}

fn cumulate(p: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = p
        .map(|v| {
            acc += v;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

#[inline]
fn pick(cumulative: &[f64], u: f64) -> usize {
    let mut i = 0;
    // Zero-probability states have equal consecutive entries and are skipped.
    while u >= cumulative[i] {
        i += 1;
    }
    i
}

/// Index drawn from a probability vector.
pub fn categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&v| v > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replica_rng;
    use crate::stats::mean_and_se;

    #[test]
    fn geometric_mean_matches() {
        let mut rng = replica_rng(1, 0);
        let w = 1.0 / 3.0;
        let xs: Vec<f64> = (0..1_000_000).map(|_| geometric(w, &mut rng) as f64).collect();
        let (m, se) = mean_and_se(&xs);
        assert!((m - 2.0).abs() < 4.0 * se, "mean {m} se {se}");
    }

    #[test]
    fn negative_binomial_moments_both_paths() {
        let mut rng = replica_rng(2, 0);
        let w = 0.4;
        for r in [3u64, 200] {
            let xs: Vec<f64> =
                (0..200_000).map(|_| negative_binomial(r, w, &mut rng).unwrap() as f64).collect();
            let (m, se) = mean_and_se(&xs);
            let mean = r as f64 * (1.0 - w) / w;
            assert!((m - mean).abs() < 4.0 * se, "r={r}: mean {m} vs {mean}");
            let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
            let expected_var = r as f64 * (1.0 - w) / (w * w);
            assert!((var / expected_var - 1.0).abs() < 0.03, "r={r}: var {var} vs {expected_var}");
        }
    }

    #[test]
    fn degenerate_cases() {
        let mut rng = replica_rng(3, 0);
        assert_eq!(negative_binomial(0, 0.3, &mut rng), Some(0));
        assert_eq!(geometric(1.0, &mut rng), 0);
        assert_eq!(negative_binomial(10_000, 1.0, &mut rng), Some(0));
    }

    #[test]
    fn chain_sampler_skips_zero_entries() {
        let h = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let s = ChainSampler::new(&h, &DVector::from_vec(vec![1.0, 0.0]));
        let mut rng = replica_rng(4, 0);
        let mut x = s.start(&mut rng);
        assert_eq!(x, 0);
        for i in 1..100 {
            x = s.step(x, &mut rng);
            assert_eq!(x, i % 2);
        }
    }
}
