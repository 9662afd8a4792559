//! Seeded Monte Carlo estimation over fading realizations.
//!
//! Samples are partitioned into fixed-size chunks; chunk `i` always consumes
//! the substream `(seed, i)` and chunk partials are merged in chunk order.
//! The estimate for a given (seed, n) is therefore bit-identical for any
//! worker count, which is what lets a fixed-seed run serve as a regression
//! artifact.

use rayon::prelude::*;

use crate::channel::{sample_fading, FadingDraw};
use crate::stream::CounterRng;

/// Samples per substream chunk. Partitioning depends only on this constant
/// and `n`, never on the executing thread pool.
pub const CHUNK: u64 = 1 << 14;

/// Standard-error multiplier used by every analytic-vs-MC oracle comparison.
pub const ORACLE_SE_MULTIPLIER: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Analytic,
    Quadrature,
    MonteCarlo,
}

/// A value with its uncertainty half-width and origin. Non-Monte-Carlo
/// provenances always carry half_width 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputEstimate {
    pub value: f64,
    pub half_width: f64,
    pub n: u64,
    pub provenance: Provenance,
}

impl ThroughputEstimate {
    pub fn analytic(value: f64) -> Self {
        ThroughputEstimate { value, half_width: 0.0, n: 0, provenance: Provenance::Analytic }
    }

    pub fn quadrature(value: f64) -> Self {
        ThroughputEstimate { value, half_width: 0.0, n: 0, provenance: Provenance::Quadrature }
    }

    pub fn monte_carlo(value: f64, half_width: f64, n: u64) -> Self {
        ThroughputEstimate { value, half_width, n, provenance: Provenance::MonteCarlo }
    }

    /// |self - other| within the sum of the two half-widths.
    pub fn agrees_with(&self, other: f64) -> bool {
        (self.value - other).abs() <= self.half_width
    }
}

/// Sample mean of `payoff` over `n` i.i.d. fading draws.
///
/// `half_width` is `se_multiplier` standard errors. Identical (seed, n)
/// inputs give bit-identical output regardless of parallelism.
pub fn estimate<F>(payoff: F, n: u64, seed: u64, se_multiplier: f64) -> ThroughputEstimate
where
    F: Fn(&FadingDraw) -> f64 + Sync,
{
    assert!(n >= 2, "estimate needs n >= 2");
    let n_chunks = n.div_ceil(CHUNK);
    let partials: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(n);
            let mut rng = CounterRng::substream(seed, chunk);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in lo..hi {
                let d = sample_fading(&mut rng);
                let v = payoff(&d);
                sum += v;
                sumsq += v * v;
            }
            (sum, sumsq)
        })
        .collect();
    // Merge in chunk order so the reduction tree is fixed.
    let (sum, sumsq) = partials
        .iter()
        .fold((0.0, 0.0), |(s, s2), &(ps, ps2)| (s + ps, s2 + ps2));
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    let half_width = se_multiplier * (var / nf).sqrt();
    ThroughputEstimate::monte_carlo(mean, half_width, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_payoff() {
        let est = estimate(|_| 1.0, 10_000, 3, ORACLE_SE_MULTIPLIER);
        assert_eq!(est.value, 1.0);
        assert_eq!(est.half_width, 0.0);
        assert_eq!(est.n, 10_000);
        assert_eq!(est.provenance, Provenance::MonteCarlo);
    }

    #[test]
    fn exponential_tail() {
        let est = estimate(
            |d| if d.nu_s > 1.0 { 1.0 } else { 0.0 },
            1_000_000,
            11,
            ORACLE_SE_MULTIPLIER,
        );
        let expect = (-1.0f64).exp();
        assert!(est.agrees_with(expect), "{} vs {}", est.value, expect);
        assert!((est.value - expect).abs() < 0.01);
    }

    #[test]
    fn bit_identical_across_worker_counts() {
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| estimate(|d| d.nu_s * d.nu_r + d.phi.cos(), 100_001, 99, 4.0))
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.half_width.to_bits(), b.half_width.to_bits());
    }

    #[test]
    fn se_shrinks_like_sqrt_n() {
        let a = estimate(|d| d.nu_s, 100_000, 5, 1.0);
        let b = estimate(|d| d.nu_s, 400_000, 5, 1.0);
        let ratio = a.half_width / b.half_width;
        assert!((1.8..2.2).contains(&ratio), "ratio = {ratio}");
    }
}
