use itertools::Itertools;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{finite, Error, Result};

/// Enumerate every split when there are at most this many.
pub const EXACT_ENUMERATION_LIMIT: u64 = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationMethod {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermutationOptions {
    /// Monte Carlo draws when enumeration is too large.
    pub permutations: u64,
    pub seed: u64,
    /// Splits above this count switch to Monte Carlo.
    pub exact_limit: u64,
}

impl Default for PermutationOptions {
    fn default() -> Self {
        PermutationOptions {
            permutations: 10_000,
            seed: 0,
            exact_limit: EXACT_ENUMERATION_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub method: PermutationMethod,
    /// Observed difference in means, first sample minus second.
    pub observed: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// Splits enumerated or random permutations drawn.
    pub permutations: u64,
}

/// `C(n, r)`, saturating once it exceeds `cap`.
fn binomial_capped(n: u64, r: u64, cap: u64) -> u64 {
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > cap as u128 {
            return cap.saturating_add(1);
        }
    }
    acc as u64
}

/// Two-sided permutation test of equal means, using default options.
pub fn permutation_test(x: &[f64], y: &[f64], permutations: u64, seed: u64) -> Result<PermutationResult> {
    permutation_test_with(
        x,
        y,
        PermutationOptions {
            permutations,
            seed,
            ..PermutationOptions::default()
        },
    )
}

/// Two-sided permutation test on the difference of means.
///
/// Splits of the pooled values into groups of the original sizes are
/// enumerated when there are at most `exact_limit`; otherwise random
/// relabellings are drawn and `p = (hits + 1)/(B + 1)`.
pub fn permutation_test_with(x: &[f64], y: &[f64], opts: PermutationOptions) -> Result<PermutationResult> {
    if x.is_empty() {
        return Err(Error::validation("data1", "no values"));
    }
    if y.is_empty() {
        return Err(Error::validation("data2", "no values"));
    }
    for (i, v) in x.iter().enumerate() {
        finite(&format!("data1[{i}]"), *v)?;
    }
    for (i, v) in y.iter().enumerate() {
        finite(&format!("data2[{i}]"), *v)?;
    }
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let (n1, n2) = (x.len(), y.len());
    let total: f64 = pooled.iter().sum();
    let diff = |sum1: f64| sum1 / n1 as f64 - (total - sum1) / n2 as f64;
    let observed = diff(x.iter().sum());
    let scale = pooled.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let threshold = observed.abs() - 1e-9 * scale;

    let splits = binomial_capped(pooled.len() as u64, n1 as u64, opts.exact_limit);
    if splits <= opts.exact_limit {
        let hits = (0..pooled.len())
            .combinations(n1)
            .filter(|idx| diff(idx.iter().map(|&i| pooled[i]).sum()).abs() >= threshold)
            .count() as u64;
        return Ok(PermutationResult {
            method: PermutationMethod::Exact,
            observed,
            p_value: hits as f64 / splits as f64,
            permutations: splits,
        });
    }
    if opts.permutations == 0 {
        return Err(Error::validation("permutations", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut hits = 0u64;
    for _ in 0..opts.permutations {
        let sum1: f64 = sample(&mut rng, pooled.len(), n1).iter().map(|i| pooled[i]).sum();
        if diff(sum1).abs() >= threshold {
            hits += 1;
        }
    }
    Ok(PermutationResult {
        method: PermutationMethod::MonteCarlo,
        observed,
        p_value: (hits + 1) as f64 / (opts.permutations + 1) as f64,
        permutations: opts.permutations,
    })
}
