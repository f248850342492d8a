//! Exact finite-length lower bound on the probability that a random
//! structure pair has an unrecoverable conformational ratio, plus a
//! Monte Carlo validation oracle.
//!
//! A pair fails when its crossover point lies outside (0.25, 0.75) or
//! its crossover window is no wider than 0.3. For any fixed data weight
//! `c`, each mechanism has an exact probability under the independent
//! per-position pairing model; the published bound is the best
//! `min(case1, case2)` over the finitely many cutoffs where either case
//! changes value.

use rayon::prelude::*;
use thiserror::Error;

use crate::numeric::logbinom::{binomial_upper_tail, LnFactorials};
use crate::numeric::streams::substream_rng;
use crate::numeric::CompensatedSum;
use crate::structures::RandomStructureModel;

#[derive(Debug, Error, PartialEq)]
pub enum PnError {
    #[error("structure length must be at least 1")]
    InvalidLength,
    #[error("pairing probability must satisfy 0 < q < 1, got {q}")]
    PairingProbabilityOutOfRange { q: f64 },
    #[error("thermal energy must be positive and finite, got {rt}")]
    InvalidRt { rt: f64 },
}

/// A random-pair failure query: structure length, per-position pairing
/// probability, and thermal energy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PnQuery {
    n: usize,
    q: f64,
    rt: f64,
}

impl PnQuery {
    /// Query at the default thermal energy [`crate::RT_KCAL`].
    pub fn new(n: usize, q: f64) -> Result<Self, PnError> {
        Self::with_rt(n, q, crate::RT_KCAL)
    }

    pub fn with_rt(n: usize, q: f64, rt: f64) -> Result<Self, PnError> {
        if n == 0 {
            return Err(PnError::InvalidLength);
        }
        if !(q > 0.0 && q < 1.0) {
            return Err(PnError::PairingProbabilityOutOfRange { q });
        }
        if !(rt.is_finite() && rt > 0.0) {
            return Err(PnError::InvalidRt { rt });
        }
        Ok(Self { n, q, rt })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn rt(&self) -> f64 {
        self.rt
    }
}

/// Failure bound at the optimal cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PnResult {
    pub n: usize,
    /// Cutoff weight where `min(case1, case2)` is largest.
    pub best_cutoff: f64,
    /// Probability the crossover point leaves (0.25, 0.75) at the cutoff.
    pub case1: f64,
    /// Probability the crossover window is at most 0.3 wide at the cutoff.
    pub case2: f64,
    /// `min(case1, case2)`: valid for every fixed data weight.
    pub lower_bound: f64,
}

/// Probability that the crossover point of a random pair lies outside
/// (0.25, 0.75) at data weight `c`.
///
/// Exact double binomial sum: over the number of agreeing positions `i`
/// (the identical-pair term `i = n` is excluded — it has no crossover
/// point) and the number `j` of A-only pairings among the `n - i`
/// differing positions, with `j ≤ (1/2 - c/4)(n - i)` and the symmetric
/// event doubled (disjoint for `c > 0`).
///
/// Panics if `c` is not positive and finite, `n` is 0, or `q` is outside
/// (0, 1).
pub fn case1_prob(n: usize, q: f64, c: f64) -> f64 {
    assert!(c.is_finite() && c > 0.0, "data weight must be positive, got {c}");
    assert!(n >= 1, "length must be at least 1");
    assert!(q > 0.0 && q < 1.0, "pairing probability must be inside (0,1), got {q}");

    let table = LnFactorials::up_to(n);
    let ln_agree = (q * q + (1.0 - q) * (1.0 - q)).ln();
    let ln_qq = (q * (1.0 - q)).ln();
    let slack = 0.5 - 0.25 * c;

    let mut sum = CompensatedSum::new();
    for i in 0..n {
        let d = n - i;
        let j_max = (slack * d as f64).floor();
        if j_max < 0.0 {
            continue;
        }
        let j_max = (j_max as usize).min(d);
        let base = table.ln_choose(n, i) + i as f64 * ln_agree + d as f64 * ln_qq;
        for j in 0..=j_max {
            sum.add((base + table.ln_choose(d, j)).exp());
        }
    }
    (2.0 * sum.value()).clamp(0.0, 1.0)
}

/// Smallest integer count of differing positions that forces the
/// crossover window to be at most 0.3 wide at weight `c`.
fn case2_threshold(c: f64, rt: f64) -> i64 {
    let t = rt * 9f64.ln() / (0.3 * c);
    // tolerate rounding when t is meant to be an exact integer
    (t - 1e-9).ceil() as i64
}

/// Probability that a random pair differs in enough positions that its
/// crossover window is at most 0.3 wide at data weight `c`: an exact
/// binomial tail at threshold `rt·ln9 / (0.3c)`.
///
/// Panics on the same precondition violations as [`case1_prob`], or if
/// `rt` is not positive and finite.
pub fn case2_prob(n: usize, q: f64, c: f64, rt: f64) -> f64 {
    assert!(c.is_finite() && c > 0.0, "data weight must be positive, got {c}");
    assert!(rt.is_finite() && rt > 0.0, "thermal energy must be positive, got {rt}");
    assert!(n >= 1, "length must be at least 1");
    assert!(q > 0.0 && q < 1.0, "pairing probability must be inside (0,1), got {q}");
    binomial_upper_tail(n, 2.0 * q * (1.0 - q), case2_threshold(c, rt))
}

/// Best provable failure bound over all data weights.
///
/// Candidates are the weights where the case-2 tail steps,
/// `c_k = rt·ln9/(0.3k)` for `k = 1..n`, plus the `c = 2` boundary where
/// case 1 vanishes. Between consecutive steps case 2 is constant and
/// case 1 is nonincreasing, so the left edge of each step interval
/// dominates it and the candidate maximum equals the continuous optimum.
/// Ties keep the earliest candidate (largest cutoff).
pub fn pn_lower_bound(query: &PnQuery) -> PnResult {
    let (n, q, rt) = (query.n, query.q, query.rt);
    let dis = 2.0 * q * (1.0 - q);
    let ln9 = 9f64.ln();

    let mut candidates: Vec<(f64, i64)> =
        (1..=n as i64).map(|k| (rt * ln9 / (0.3 * k as f64), k)).collect();
    candidates.push((2.0, case2_threshold(2.0, rt)));

    let mut best: Option<PnResult> = None;
    for (c, m) in candidates {
        let case1 = case1_prob(n, q, c);
        let case2 = binomial_upper_tail(n, dis, m);
        let lower_bound = case1.min(case2);
        if best.as_ref().is_none_or(|b| lower_bound > b.lower_bound) {
            best = Some(PnResult { n, best_cutoff: c, case1, case2, lower_bound });
        }
    }
    best.expect("candidate list is nonempty for n >= 1")
}

/// Observed failure frequency over random mask pairs at a fixed data
/// weight `c`: a pair fails when it differs somewhere and its crossover
/// point leaves (0.25, 0.75) or its window bound is at most 0.3.
///
/// Trials are split into fixed blocks with per-block generator
/// substreams, so the result depends only on `(seed, trials)` — not on
/// worker count.
///
/// Panics if `c` is not positive and finite or `trials` is 0.
pub fn monte_carlo_failure(query: &PnQuery, c: f64, trials: u64, seed: u64) -> f64 {
    assert!(c.is_finite() && c > 0.0, "data weight must be positive, got {c}");
    assert!(trials >= 1, "at least one trial required");

    let (n, q, rt) = (query.n, query.q, query.rt);
    let model = RandomStructureModel::new(q, 0).expect("query validated q");
    let width_threshold = rt * 9f64.ln() / (0.3 * c);

    const BLOCK: u64 = 4096;
    let blocks = trials.div_ceil(BLOCK);
    let failures: u64 = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut rng = substream_rng(seed, block);
            let lo = block * BLOCK;
            let hi = (lo + BLOCK).min(trials);
            let mut count = 0u64;
            for _ in lo..hi {
                let a = model.random_mask_with(n, &mut rng).expect("n >= 1");
                let b = model.random_mask_with(n, &mut rng).expect("n >= 1");
                let mut a_only = 0u64;
                let mut b_only = 0u64;
                for (pa, pb) in a.iter().zip(b.iter()) {
                    a_only += u64::from(pa && !pb);
                    b_only += u64::from(pb && !pa);
                }
                let d = a_only + b_only;
                if d == 0 {
                    continue;
                }
                let p_star = 0.5 + 1.0 / (2.0 * c) - a_only as f64 / (c * d as f64);
                // window bound <= 0.3 exactly when d >= rt·ln9/(0.3c)
                if p_star <= 0.25 || p_star >= 0.75 || d as f64 >= width_threshold {
                    count += 1;
                }
            }
            count
        })
        .sum();
    failures as f64 / trials as f64
}
