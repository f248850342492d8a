//! Estimating the conformational ratio from reactivities at differing
//! positions: the mixture density `g(x,p)`, its ratio derivative, Fisher
//! information, Cramér-Rao planning bounds, and a maximum-likelihood
//! estimator with a simulation harness.
//!
//! At a position where one structure is unpaired and the other paired,
//! the mixed signal is `p·X_un + (1-p)·X_pair` with independent
//! components, so its density is a weighted convolution of the two
//! reactivity laws. Everything here is built on adaptive quadrature of
//! that convolution.

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::nj_model::ShapeProfile;
use crate::numeric::quad::{integrate_segmented, QuadOptions};
use crate::numeric::streams::substream_rng;
use crate::numeric::CompensatedSum;
use crate::shape_sim::ReactivityDistribution;
use crate::structures::PairingMask;

/// Relative tolerance of the inner (density) quadrature.
pub const INNER_QUAD_REL_TOL: f64 = 1e-8;
/// Relative tolerance of the outer (information) quadrature.
pub const OUTER_QUAD_REL_TOL: f64 = 1e-6;
/// Mixture tail mass beyond the truncated information integral.
pub const TRUNCATED_TAIL_MASS: f64 = 1e-8;

/// Coarse likelihood grid step before golden-section refinement.
const MLE_GRID_STEP_COUNT: usize = 100;
/// Final golden-section bracket width.
const MLE_REFINE_WIDTH: f64 = 1e-4;
/// Density floor guarding `(∂g/∂p)²/g` against division blow-up.
const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Error, PartialEq)]
pub enum InferenceError {
    #[error("mask lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("no informative positions: the masks pair the same positions")]
    NoInformativePositions,
    #[error("the two position classes overlap at index {index}")]
    OverlappingPositions { index: usize },
    #[error("position index {index} is out of range for data of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("ratio {p} lies outside the valid range")]
    RatioOutOfRange { p: f64 },
    #[error("quadrature did not reach the requested tolerance (achieved {achieved:e})")]
    QuadratureNotConverged { achieved: f64 },
    #[error("target standard deviation must be positive and finite, got {target_sd}")]
    InvalidTarget { target_sd: f64 },
}

/// Indices where two masks differ, split by direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DifferingPositions {
    k_positions: Vec<usize>,
    l_positions: Vec<usize>,
}

impl DifferingPositions {
    /// Positions where `a` is unpaired and `b` paired (`k`), and where
    /// `a` is paired and `b` unpaired (`l`).
    pub fn from_masks(a: &PairingMask, b: &PairingMask) -> Result<Self, InferenceError> {
        if a.len() != b.len() {
            return Err(InferenceError::LengthMismatch { left: a.len(), right: b.len() });
        }
        let mut k_positions = Vec::new();
        let mut l_positions = Vec::new();
        for i in 0..a.len() {
            match (a.is_paired(i), b.is_paired(i)) {
                (false, true) => k_positions.push(i),
                (true, false) => l_positions.push(i),
                _ => {}
            }
        }
        Ok(Self { k_positions, l_positions })
    }

    /// Explicit index sets; the two classes must not overlap.
    pub fn new(
        k_positions: Vec<usize>,
        l_positions: Vec<usize>,
    ) -> Result<Self, InferenceError> {
        for &i in &k_positions {
            if l_positions.contains(&i) {
                return Err(InferenceError::OverlappingPositions { index: i });
            }
        }
        Ok(Self { k_positions, l_positions })
    }

    pub fn k_positions(&self) -> &[usize] {
        &self.k_positions
    }

    pub fn l_positions(&self) -> &[usize] {
        &self.l_positions
    }

    pub fn k(&self) -> usize {
        self.k_positions.len()
    }

    pub fn l(&self) -> usize {
        self.l_positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k_positions.is_empty() && self.l_positions.is_empty()
    }
}

/// Maximum-likelihood estimate with its Cramér-Rao context.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateResult {
    pub p_hat: f64,
    pub log_likelihood: f64,
    /// Cramér-Rao variance bound `1/(k·I(p) + l·I(1-p))` evaluated at
    /// the estimate (clamped into [0.01, 0.99], where the information
    /// integral is defined).
    pub cr_variance_bound: f64,
    pub k: usize,
    pub l: usize,
}

/// Fisher information sampled over a ratio grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FisherResult {
    /// `(p, I(p))` pairs in input order.
    pub grid: Vec<(f64, f64)>,
    /// Relative tolerance of the outer quadrature that produced them.
    pub quadrature_tolerance: f64,
}

/// Per-ratio error summary of a simulated estimation experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MleErrorRow {
    pub p: f64,
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
}

/// The signal model at a differing position: an unpaired law weighted by
/// `p` against a paired law weighted by `1-p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReactivityMixture {
    unpaired: ReactivityDistribution,
    paired: ReactivityDistribution,
}

impl Default for ReactivityMixture {
    fn default() -> Self {
        Self {
            unpaired: ReactivityDistribution::unpaired_default(),
            paired: ReactivityDistribution::paired_default(),
        }
    }
}

impl ReactivityMixture {
    pub fn new(unpaired: ReactivityDistribution, paired: ReactivityDistribution) -> Self {
        Self { unpaired, paired }
    }

    pub fn unpaired(&self) -> &ReactivityDistribution {
        &self.unpaired
    }

    pub fn paired(&self) -> &ReactivityDistribution {
        &self.paired
    }

    /// Lower edge of the mixture support at ratio `p`.
    pub fn support_min(&self, p: f64) -> f64 {
        p * self.unpaired.support_min() + (1.0 - p) * self.paired.support_min()
    }

    /// Integration range for `y` in the convolution at `(x, p)`, plus
    /// interior breakpoints at the images of the component peaks.
    fn convolution_breakpoints(&self, x: f64, p: f64) -> Option<Vec<f64>> {
        let y_lo = p * self.unpaired.support_min();
        let y_hi = x - (1.0 - p) * self.paired.support_min();
        if !(y_hi > y_lo) {
            return None;
        }
        let mut pts = vec![y_lo];
        let mut hints = [
            // bulk of the unpaired factor
            y_lo + p * self.unpaired.quantile(1.0 - 1e-12).unwrap_or(y_hi),
            // peak of the paired factor
            x - (1.0 - p) * peak_hint(&self.paired),
        ];
        hints.sort_by(f64::total_cmp);
        for h in hints {
            if h > *pts.last().expect("nonempty") && h < y_hi {
                pts.push(h);
            }
        }
        pts.push(y_hi);
        Some(pts)
    }

    /// Mixture density `g(x, p)` for `p ∈ [0, 1]`.
    ///
    /// Interior ratios integrate
    /// `f_un(y/p)·f_pair((x-y)/(1-p)) / (p(1-p))` over the overlap of
    /// the two supports; the endpoints use the pure component density
    /// directly. Panics if `x` is not finite or `p` is outside `[0,1]`.
    pub fn density(&self, x: f64, p: f64) -> f64 {
        assert!(x.is_finite(), "density evaluated at non-finite x = {x}");
        assert!(
            (0.0..=1.0).contains(&p),
            "mixture ratio must lie in [0,1], got {p}"
        );
        if p == 0.0 {
            return self.paired.density(x);
        }
        if p == 1.0 {
            return self.unpaired.density(x);
        }
        let Some(pts) = self.convolution_breakpoints(x, p) else {
            return 0.0;
        };
        let pre = 1.0 / (p * (1.0 - p));
        let opt = QuadOptions::new(INNER_QUAD_REL_TOL, 0.0, 2000);
        let r = integrate_segmented(
            |y| self.unpaired.density(y / p) * self.paired.density((x - y) / (1.0 - p)),
            &pts,
            &opt,
        );
        (pre * r.value).max(0.0)
    }

    /// Derivative of the mixture density with respect to the ratio,
    /// `∂g/∂p`, for `0 < p < 1`.
    ///
    /// Differentiates under the integral sign: the prefactor term, the
    /// two chain-rule terms from the scaled component arguments, and the
    /// two boundary terms from the `p`-dependent integration limits
    /// (both vanish for the default laws). Panics if `x` is not finite
    /// or `p` is not strictly inside `(0,1)`.
    pub fn density_dp(&self, x: f64, p: f64) -> f64 {
        assert!(x.is_finite(), "density derivative evaluated at non-finite x = {x}");
        assert!(
            p > 0.0 && p < 1.0,
            "ratio derivative requires 0 < p < 1, got {p}"
        );
        let Some(pts) = self.convolution_breakpoints(x, p) else {
            return 0.0;
        };
        let q = 1.0 - p;
        let pre = 1.0 / (p * q);
        let opt = QuadOptions::new(INNER_QUAD_REL_TOL, 0.0, 2000);
        let r = integrate_segmented(
            |y| {
                let zu = y / p;
                let zp = (x - y) / q;
                let fu = self.unpaired.density(zu);
                let fp = self.paired.density(zp);
                // prefactor derivative + both argument chain rules
                (2.0 * p - 1.0) * pre * pre * fu * fp
                    - pre * self.unpaired.density_derivative(zu) * (y / (p * p)) * fp
                    + pre * fu * self.paired.density_derivative(zp) * ((x - y) / (q * q))
            },
            &pts,
            &opt,
        );
        let su = self.unpaired.support_min();
        let sp = self.paired.support_min();
        let y_lo = *pts.first().expect("nonempty");
        let y_hi = *pts.last().expect("nonempty");
        let at_hi = pre * self.unpaired.density(y_hi / p) * self.paired.density(sp) * sp;
        let at_lo = pre * self.unpaired.density(su) * self.paired.density((x - y_lo) / q) * su;
        r.value + at_hi - at_lo
    }

    /// Upper truncation point leaving at most [`TRUNCATED_TAIL_MASS`] of
    /// mixture mass beyond it, by a union bound over the two components.
    fn truncation_point(&self, p: f64) -> f64 {
        let u = 1.0 - TRUNCATED_TAIL_MASS / 2.0;
        p * self.unpaired.quantile(u).expect("u inside (0,1)")
            + (1.0 - p) * self.paired.quantile(u).expect("u inside (0,1)")
    }

    /// Fisher information `I(p) = ∫ (∂g/∂p)²/g dx` over the truncated
    /// support, for `0 < p < 1`.
    pub fn fisher_information(&self, p: f64) -> Result<f64, InferenceError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(InferenceError::RatioOutOfRange { p });
        }
        let x_lo = self.support_min(p);
        let x_hi = self.truncation_point(p);
        let mut pts = vec![x_lo];
        for cut in [0.25, 1.0, 4.0, 20.0, 200.0, 5000.0] {
            if cut > x_lo && cut < x_hi {
                pts.push(cut);
            }
        }
        pts.push(x_hi);
        let opt = QuadOptions::new(OUTER_QUAD_REL_TOL, 0.0, 4000);
        let r = integrate_segmented(
            |x| {
                let g = self.density(x, p);
                if g <= DENSITY_FLOOR {
                    return 0.0;
                }
                let dg = self.density_dp(x, p);
                dg * dg / g
            },
            &pts,
            &opt,
        );
        if !r.converged {
            return Err(InferenceError::QuadratureNotConverged {
                achieved: r.error_estimate / r.value.abs().max(f64::MIN_POSITIVE),
            });
        }
        Ok(r.value)
    }

    /// Fisher information over a ratio grid.
    pub fn fisher_grid(&self, ps: &[f64]) -> Result<FisherResult, InferenceError> {
        let mut grid = Vec::with_capacity(ps.len());
        for &p in ps {
            grid.push((p, self.fisher_information(p)?));
        }
        Ok(FisherResult { grid, quadrature_tolerance: OUTER_QUAD_REL_TOL })
    }

    /// Cramér-Rao variance bound `1/(k·I(p) + l·I(1-p))` for an
    /// unbiased ratio estimator using `k` positions of one direction and
    /// `l` of the other.
    pub fn cramer_rao_bound(&self, k: usize, l: usize, p: f64) -> Result<f64, InferenceError> {
        if k + l == 0 {
            return Err(InferenceError::NoInformativePositions);
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(InferenceError::RatioOutOfRange { p });
        }
        let ip = if k > 0 { self.fisher_information(p)? } else { 0.0 };
        let il = if l > 0 {
            if 1.0 - p == p {
                ip
            } else {
                self.fisher_information(1.0 - p)?
            }
        } else {
            0.0
        };
        Ok(1.0 / (k as f64 * ip + l as f64 * il))
    }

    /// Smallest number of differing positions `n` with
    /// `1/sqrt(n·I(p)) ≤ target_sd`.
    pub fn min_differences(&self, target_sd: f64, p: f64) -> Result<usize, InferenceError> {
        if !(target_sd.is_finite() && target_sd > 0.0) {
            return Err(InferenceError::InvalidTarget { target_sd });
        }
        let info = self.fisher_information(p)?;
        let v = 1.0 / (target_sd * target_sd * info);
        let mut n = ((v - 1e-9).ceil()).max(1.0) as usize;
        while 1.0 / ((n as f64) * info).sqrt() > target_sd {
            n += 1;
        }
        Ok(n)
    }

    /// One mixed reactivity draw `p·X_un + (1-p)·X_pair`. Both
    /// components are drawn even at the endpoints, so the stream
    /// position is independent of `p`.
    pub fn sample<R: Rng + ?Sized>(&self, p: f64, rng: &mut R) -> f64 {
        assert!(
            (0.0..=1.0).contains(&p),
            "mixture ratio must lie in [0,1], got {p}"
        );
        let u = self.unpaired.sample(rng);
        let v = self.paired.sample(rng);
        p * u + (1.0 - p) * v
    }

    /// Joint log-likelihood of the differing-position values at ratio
    /// `p`: `k`-direction values see `g(·, p)`, `l`-direction values see
    /// `g(·, 1-p)`.
    fn log_likelihood(&self, xs_k: &[f64], xs_l: &[f64], p: f64) -> f64 {
        let mut ll = CompensatedSum::new();
        for &x in xs_k {
            ll.add(self.density(x, p).ln());
        }
        for &x in xs_l {
            ll.add(self.density(x, 1.0 - p).ln());
        }
        ll.value()
    }

    /// Coarse grid search followed by golden-section refinement.
    fn maximize_likelihood(&self, xs_k: &[f64], xs_l: &[f64]) -> (f64, f64) {
        let mut best_i = 0;
        let mut best_ll = f64::NEG_INFINITY;
        for i in 0..=MLE_GRID_STEP_COUNT {
            let p = i as f64 / MLE_GRID_STEP_COUNT as f64;
            let ll = self.log_likelihood(xs_k, xs_l, p);
            if ll > best_ll {
                best_ll = ll;
                best_i = i;
            }
        }
        let step = 1.0 / MLE_GRID_STEP_COUNT as f64;
        let best_p = best_i as f64 * step;
        let mut a = (best_p - step).max(0.0);
        let mut b = (best_p + step).min(1.0);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        while b - a > MLE_REFINE_WIDTH {
            let c = b - phi * (b - a);
            let d = a + phi * (b - a);
            if self.log_likelihood(xs_k, xs_l, c) >= self.log_likelihood(xs_k, xs_l, d) {
                b = d;
            } else {
                a = c;
            }
        }
        let p_hat = 0.5 * (a + b);
        (p_hat, self.log_likelihood(xs_k, xs_l, p_hat))
    }

    /// Maximum-likelihood ratio estimate from the values of `data` at
    /// the differing positions.
    pub fn mle_estimate(
        &self,
        data: &ShapeProfile,
        positions: &DifferingPositions,
    ) -> Result<EstimateResult, InferenceError> {
        if positions.is_empty() {
            return Err(InferenceError::NoInformativePositions);
        }
        let fetch = |idx: &[usize]| -> Result<Vec<f64>, InferenceError> {
            idx.iter()
                .map(|&i| {
                    data.values()
                        .get(i)
                        .copied()
                        .ok_or(InferenceError::IndexOutOfRange { index: i, len: data.len() })
                })
                .collect()
        };
        let xs_k = fetch(positions.k_positions())?;
        let xs_l = fetch(positions.l_positions())?;
        let (p_hat, log_likelihood) = self.maximize_likelihood(&xs_k, &xs_l);
        let cr_variance_bound =
            self.cramer_rao_bound(positions.k(), positions.l(), p_hat.clamp(0.01, 0.99))?;
        Ok(EstimateResult {
            p_hat,
            log_likelihood,
            cr_variance_bound,
            k: positions.k(),
            l: positions.l(),
        })
    }

    /// Simulate one reactivity profile for `mask` from this mixture's
    /// component laws.
    fn simulate_mask_profile<R: Rng + ?Sized>(&self, mask: &PairingMask, rng: &mut R) -> Vec<f64> {
        mask.iter()
            .map(|paired| {
                if paired {
                    self.paired.sample(rng)
                } else {
                    self.unpaired.sample(rng)
                }
            })
            .collect()
    }

    /// Repeated simulate-mix-estimate rounds over a ratio grid.
    ///
    /// For each grid ratio and trial: draw profiles for both masks, mix
    /// them, estimate the ratio from the differing positions, and record
    /// `|p̂ - p|`. Each `(ratio, trial)` cell runs on its own generator
    /// substream indexed by `cell = ratio_index·trials + trial`, so
    /// results do not depend on worker count.
    pub fn mle_experiment(
        &self,
        a: &PairingMask,
        b: &PairingMask,
        p_grid: &[f64],
        trials: u64,
        seed: u64,
    ) -> Result<Vec<MleErrorRow>, InferenceError> {
        assert!(trials >= 1, "at least one trial required");
        let positions = DifferingPositions::from_masks(a, b)?;
        if positions.is_empty() {
            return Err(InferenceError::NoInformativePositions);
        }
        for &p in p_grid {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                return Err(InferenceError::RatioOutOfRange { p });
            }
        }

        let trials_us = usize::try_from(trials).expect("trial count fits a usize");
        let cells = p_grid.len() * trials_us;
        let errors: Vec<f64> = (0..cells)
            .into_par_iter()
            .map(|cell| {
                let p = p_grid[cell / trials_us];
                let mut rng = substream_rng(seed, cell as u64);
                let s = self.simulate_mask_profile(a, &mut rng);
                let t = self.simulate_mask_profile(b, &mut rng);
                let mixed = |i: usize| p * s[i] + (1.0 - p) * t[i];
                let xs_k: Vec<f64> = positions.k_positions().iter().map(|&i| mixed(i)).collect();
                let xs_l: Vec<f64> = positions.l_positions().iter().map(|&i| mixed(i)).collect();
                let (p_hat, _) = self.maximize_likelihood(&xs_k, &xs_l);
                (p_hat - p).abs()
            })
            .collect();

        let rows = p_grid
            .iter()
            .enumerate()
            .map(|(pi, &p)| {
                let slice = &errors[pi * trials_us..(pi + 1) * trials_us];
                let mut mean = CompensatedSum::new();
                let mut max = 0.0f64;
                for &e in slice {
                    mean.add(e);
                    max = max.max(e);
                }
                MleErrorRow {
                    p,
                    mean_abs_error: mean.value() / trials as f64,
                    max_abs_error: max,
                }
            })
            .collect();
        Ok(rows)
    }
}

fn peak_hint(dist: &ReactivityDistribution) -> f64 {
    match dist {
        ReactivityDistribution::UnpairedExponential { .. } => 0.0,
        ReactivityDistribution::CenterPairedGev { location, .. } => *location,
    }
}
