//! Paired bootstrap over predicates.
//!
//! Each iteration gets its own seed, drawn up front from one ChaCha8 stream.
//! An iteration's resample depends only on that seed, so iterations can be
//! evaluated in any order or in parallel and still give the same result.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::evaluation::{Counts, MatchReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Unlabeled,
    Exact,
    #[default]
    Semantic,
}

impl Metric {
    pub fn counts(&self, r: &MatchReport) -> Counts {
        match self {
            Metric::Unlabeled => r.unlabeled,
            Metric::Exact => r.exact,
            Metric::Semantic => r.semantic,
        }
    }
}

impl core::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "unlabeled" => Ok(Metric::Unlabeled),
            "exact" => Ok(Metric::Exact),
            "semantic" => Ok(Metric::Semantic),
            other => Err(alloc::format!("unknown metric {other:?} (expected unlabeled, exact or semantic)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub metric: Metric,
    pub iterations: usize,
    pub seed: u64,
    pub predicates: usize,
    pub f1_a: f64,
    pub f1_b: f64,
    pub observed_delta: f64,
    pub p_value_one_sided: f64,
    pub p_value_two_sided: f64,
    pub ci95: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BootstrapError {
    #[error("no predicates to resample")]
    Empty,
    #[error("iterations must be positive")]
    Iterations,
    #[error("duplicate predicate {0} in system {1}")]
    Duplicate(String, char),
    #[error("predicate sets differ: {only_a} only in A, {only_b} only in B (first: {example})")]
    Mismatch { only_a: usize, only_b: usize, example: String },
}

pub struct PairedBootstrap {
    metric: Metric,
    seed: u64,
    pairs: Vec<(Counts, Counts)>,
    seeds: Vec<u64>,
}

fn index(reports: &[MatchReport], system: char) -> Result<BTreeMap<&str, &MatchReport>, BootstrapError> {
    let mut m = BTreeMap::new();
    for r in reports {
        if m.insert(r.predicate_id.as_str(), r).is_some() {
            return Err(BootstrapError::Duplicate(r.predicate_id.clone(), system));
        }
    }
    Ok(m)
}

impl PairedBootstrap {
    /// Pairs reports by predicate id, in the order of `a`.
    pub fn new(
        a: &[MatchReport],
        b: &[MatchReport],
        metric: Metric,
        iterations: usize,
        seed: u64,
    ) -> Result<Self, BootstrapError> {
        if iterations == 0 {
            return Err(BootstrapError::Iterations);
        }
        let ia = index(a, 'A')?;
        let ib = index(b, 'B')?;
        let only_a: Vec<&str> = ia.keys().filter(|k| !ib.contains_key(*k)).copied().collect();
        let only_b: Vec<&str> = ib.keys().filter(|k| !ia.contains_key(*k)).copied().collect();
        if !only_a.is_empty() || !only_b.is_empty() {
            let example = only_a.first().or(only_b.first()).copied().unwrap_or_default().into();
            return Err(BootstrapError::Mismatch { only_a: only_a.len(), only_b: only_b.len(), example });
        }
        if a.is_empty() {
            return Err(BootstrapError::Empty);
        }
        let pairs = a.iter().map(|r| (metric.counts(r), metric.counts(ib[r.predicate_id.as_str()]))).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seeds = (0..iterations).map(|_| rng.next_u64()).collect();
        Ok(PairedBootstrap { metric, seed, pairs, seeds })
    }

    pub fn iterations(&self) -> usize {
        self.seeds.len()
    }

    fn delta_of(&self, picks: impl Iterator<Item = usize>) -> f64 {
        let (mut ca, mut cb) = (Counts::default(), Counts::default());
        for i in picks {
            ca += self.pairs[i].0;
            cb += self.pairs[i].1;
        }
        ca.f1() - cb.f1()
    }

    pub fn observed_delta(&self) -> f64 {
        self.delta_of(0..self.pairs.len())
    }

    /// F1(A) - F1(B) on resample `iteration`.
    pub fn delta(&self, iteration: usize) -> f64 {
        let n = self.pairs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seeds[iteration]);
        self.delta_of((0..n).map(|_| rng.random_range(0..n)))
    }

    /// Summarizes per-iteration deltas (indexed by iteration).
    pub fn finish(&self, deltas: &[f64]) -> BootstrapResult {
        let observed = self.observed_delta();
        let iters = deltas.len();
        let frac = |count: usize| count as f64 / iters as f64;
        let one_sided = if observed >= 0.0 {
            frac(deltas.iter().filter(|&&d| d <= 0.0).count())
        } else {
            frac(deltas.iter().filter(|&&d| d >= 0.0).count())
        };
        // resampled deltas centred on the observed one approximate the null
        let two_sided = frac(deltas.iter().filter(|&&d| libm::fabs(d - observed) >= libm::fabs(observed)).count());
        let mut sorted = deltas.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (f1_a, f1_b) = {
            let (mut ca, mut cb) = (Counts::default(), Counts::default());
            for (a, b) in &self.pairs {
                ca += *a;
                cb += *b;
            }
            (ca.f1(), cb.f1())
        };
        BootstrapResult {
            metric: self.metric,
            iterations: iters,
            seed: self.seed,
            predicates: self.pairs.len(),
            f1_a,
            f1_b,
            observed_delta: observed,
            p_value_one_sided: one_sided,
            p_value_two_sided: two_sided,
            ci95: (percentile(&sorted, 0.025), percentile(&sorted, 0.975)),
        }
    }

    pub fn run(&self) -> BootstrapResult {
        let deltas: Vec<f64> = (0..self.iterations()).map(|i| self.delta(i)).collect();
        self.finish(&deltas)
    }
}

/// Linear interpolation between closest ranks of a sorted slice.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = libm::ceil(pos) as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn paired_bootstrap(
    a: &[MatchReport],
    b: &[MatchReport],
    metric: Metric,
    iterations: usize,
    seed: u64,
) -> Result<BootstrapResult, BootstrapError> {
    Ok(PairedBootstrap::new(a, b, metric, iterations, seed)?.run())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::vec;

    fn report(id: &str, c: Counts) -> MatchReport {
        MatchReport {
            predicate_id: id.into(),
            n_pred: c.tp + c.fp,
            n_gold: c.tp + c.fn_,
            matched_pairs: vec![],
            unlabeled: c,
            exact: c,
            semantic: c,
        }
    }

    fn system(f: impl Fn(usize) -> Counts, n: usize) -> Vec<MatchReport> {
        (0..n).map(|i| report(&format!("p{i}"), f(i))).collect()
    }

    #[test]
    fn identical_systems() {
        let a = system(|i| Counts { tp: i % 3, fp: i % 2, fn_: 1 }, 40);
        let r = paired_bootstrap(&a, &a, Metric::Semantic, 500, 1).unwrap();
        assert_eq!(r.observed_delta, 0.0);
        assert_eq!(r.p_value_one_sided, 1.0);
        assert_eq!(r.ci95, (0.0, 0.0));
    }

    #[test]
    fn dominance() {
        let a = system(|_| Counts { tp: 2, fp: 0, fn_: 0 }, 100);
        let b = system(|_| Counts { tp: 1, fp: 1, fn_: 1 }, 100);
        let r = paired_bootstrap(&a, &b, Metric::Unlabeled, 2000, 9).unwrap();
        assert!(r.observed_delta > 0.0);
        assert_eq!(r.p_value_one_sided, 0.0);
        let r = paired_bootstrap(&b, &a, Metric::Unlabeled, 2000, 9).unwrap();
        assert!(r.observed_delta < 0.0);
        assert_eq!(r.p_value_one_sided, 0.0);
    }

    #[test]
    fn order_free_and_seeded() {
        let a = system(|i| Counts { tp: i % 4, fp: i % 3, fn_: i % 2 }, 30);
        let b = system(|i| Counts { tp: (i + 1) % 4, fp: i % 2, fn_: 1 }, 30);
        let boot = PairedBootstrap::new(&a, &b, Metric::Exact, 300, 42).unwrap();
        let forward: Vec<f64> = (0..300).map(|i| boot.delta(i)).collect();
        let mut backward: Vec<f64> = (0..300).rev().map(|i| boot.delta(i)).collect();
        backward.reverse();
        assert_eq!(forward, backward);
        let mut shuffled_b = b.clone();
        shuffled_b.reverse();
        assert_eq!(boot.run(), paired_bootstrap(&a, &shuffled_b, Metric::Exact, 300, 42).unwrap());
        assert_ne!(boot.run(), paired_bootstrap(&a, &b, Metric::Exact, 300, 43).unwrap());
    }

    #[test]
    fn mismatch_and_empty() {
        let a = system(|_| Counts::default(), 3);
        let b = system(|_| Counts::default(), 4);
        assert!(matches!(paired_bootstrap(&a, &b, Metric::Semantic, 10, 0), Err(BootstrapError::Mismatch { only_b: 1, .. })));
        assert_eq!(paired_bootstrap(&[], &[], Metric::Semantic, 10, 0), Err(BootstrapError::Empty));
        assert_eq!(paired_bootstrap(&a, &a, Metric::Semantic, 0, 0), Err(BootstrapError::Iterations));
    }

    #[test]
    fn percentiles() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.5), 2.0);
        assert_eq!(percentile(&v, 0.125), 0.5);
        assert_eq!(percentile(&v, 1.0), 4.0);
    }
}
