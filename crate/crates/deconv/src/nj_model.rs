//! Data-directed Nussinov-Jacobson pseudoenergy model: structure energies
//! given an auxiliary profile, two-structure and brute-force Boltzmann
//! ensembles, crossover analytics, and total-variation sweeps.
//!
//! The energy of a mask `A` given profile `M` is `-#bp(A) + Σ c·|x_i -
//! M_i|`, where `x_i` is 0 at paired and 1 at unpaired positions. All
//! ensemble quantities are computed through energy differences with a
//! min-energy shift, so magnitudes never overflow `exp`.

use thiserror::Error;

use crate::numeric::CompensatedSum;
use crate::structures::{pair_stats, PairingMask};

/// Default limit on mask length for exact enumeration (2^20 masks).
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum NjError {
    #[error("profile must have at least one value")]
    EmptyProfile,
    #[error("profile value at position {position} is not finite: {value}")]
    NonFiniteValue { position: usize, value: f64 },
    #[error("model parameters must satisfy c >= 0 and rt > 0 (finite), got c = {c}, rt = {rt}")]
    InvalidParams { c: f64, rt: f64 },
    #[error("operand lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("crossover point is undefined: the masks pair the same positions")]
    UndefinedCrossover,
    #[error("crossover analysis requires a positive data weight c")]
    ZeroDataWeight,
    #[error("mask length {n} exceeds the enumeration cap {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error("ratio grid value {p} lies outside [0,1]")]
    GridValueOutOfRange { p: f64 },
}

/// Pseudoenergy model parameters.
///
/// `c` weighs the data-disagreement term and may be zero (pure
/// pair-counting model); crossover analytics additionally require
/// `c > 0`. `rt` is the thermal energy in kcal/mol.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NjParams {
    c: f64,
    rt: f64,
}

impl NjParams {
    /// Model with data weight `c` at the default thermal energy
    /// [`crate::RT_KCAL`].
    pub fn new(c: f64) -> Result<Self, NjError> {
        Self::with_rt(c, crate::RT_KCAL)
    }

    pub fn with_rt(c: f64, rt: f64) -> Result<Self, NjError> {
        if !(c.is_finite() && c >= 0.0 && rt.is_finite() && rt > 0.0) {
            return Err(NjError::InvalidParams { c, rt });
        }
        Ok(Self { c, rt })
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn rt(&self) -> f64 {
        self.rt
    }
}

/// Per-position auxiliary data (reactivity profile). Values are finite
/// reals; noiseless and mixture profiles lie in [0,1], but measured or
/// externally supplied data need not.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeProfile {
    values: Vec<f64>,
}

impl ShapeProfile {
    pub fn new(values: Vec<f64>) -> Result<Self, NjError> {
        if values.is_empty() {
            return Err(NjError::EmptyProfile);
        }
        for (position, &value) in values.iter().enumerate() {
            if !value.is_finite() {
                return Err(NjError::NonFiniteValue { position, value });
            }
        }
        Ok(Self { values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false: construction rejects empty profiles.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Pseudoenergy of mask `a` given profile `m`.
pub fn nj_energy(a: &PairingMask, m: &ShapeProfile, params: &NjParams) -> Result<f64, NjError> {
    if a.len() != m.len() {
        return Err(NjError::LengthMismatch { left: a.len(), right: m.len() });
    }
    let mut sum = CompensatedSum::new();
    for (paired, &mi) in a.iter().zip(m.values()) {
        if paired {
            sum.add(params.c * mi.abs() - 1.0);
        } else {
            sum.add(params.c * (1.0 - mi).abs());
        }
    }
    Ok(sum.value())
}

/// Boltzmann probabilities of `a` and `b` in the ensemble restricted to
/// exactly those two structures. The pair sums to 1 exactly.
pub fn two_structure_probs(
    a: &PairingMask,
    b: &PairingMask,
    m: &ShapeProfile,
    params: &NjParams,
) -> Result<(f64, f64), NjError> {
    if a.len() != b.len() {
        return Err(NjError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let ea = nj_energy(a, m, params)?;
    let eb = nj_energy(b, m, params)?;
    let pa = 1.0 / (1.0 + ((ea - eb) / params.rt).exp());
    Ok((pa, 1.0 - pa))
}

/// The ratio at which the two structures become equiprobable, with a
/// flag for whether it lies inside the physical range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossoverPoint {
    pub p_star: f64,
    pub within_unit_interval: bool,
}

/// Crossover point plus the window of ratios where neither structure
/// dominates by more than 9:1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossoverResult {
    pub p_star: f64,
    pub within_unit_interval: bool,
    /// Exact window length before clipping: `rt·ln9 / (c·#bp(AΔB))`.
    pub window_bound: f64,
    /// `[p* - w/2, p* + w/2] ∩ [0,1]`, or `None` when that intersection
    /// is empty.
    pub window: Option<(f64, f64)>,
}

fn crossover_inputs(
    a: &PairingMask,
    b: &PairingMask,
    params: &NjParams,
) -> Result<(f64, f64), NjError> {
    let stats = pair_stats(a, b).map_err(|_| NjError::LengthMismatch {
        left: a.len(),
        right: b.len(),
    })?;
    if stats.bp_symdiff == 0 {
        return Err(NjError::UndefinedCrossover);
    }
    if params.c == 0.0 {
        return Err(NjError::ZeroDataWeight);
    }
    Ok((stats.bp_a_minus_b as f64, stats.bp_symdiff as f64))
}

/// Ratio `p*` at which the masks have equal pseudoenergy on the
/// noiseless mixture `M(p) = p·S_A + (1-p)·S_B`:
/// `p* = 1/2 + 1/(2c) - #bp(A−B)/(c·#bp(AΔB))`.
///
/// The value is returned unclamped; it can lie outside `[0,1]` when one
/// structure dominates across the whole physical range.
pub fn crossover_point(
    a: &PairingMask,
    b: &PairingMask,
    params: &NjParams,
) -> Result<CrossoverPoint, NjError> {
    let (a_only, symdiff) = crossover_inputs(a, b, params)?;
    let p_star = 0.5 + 1.0 / (2.0 * params.c) - a_only / (params.c * symdiff);
    Ok(CrossoverPoint { p_star, within_unit_interval: (0.0..=1.0).contains(&p_star) })
}

/// Crossover point together with the exact window of mixture ratios
/// where `1/9 ≤ P(A)/P(B) ≤ 9` in the two-structure ensemble.
///
/// The energy difference is linear in `p` with slope `-2c·#bp(AΔB)`, so
/// the window is exactly the interval of length `rt·ln9/(c·#bp(AΔB))`
/// centered at `p*`, clipped to `[0,1]`.
pub fn crossover_window(
    a: &PairingMask,
    b: &PairingMask,
    params: &NjParams,
) -> Result<CrossoverResult, NjError> {
    let point = crossover_point(a, b, params)?;
    let (_, symdiff) = crossover_inputs(a, b, params)?;
    let window_bound = params.rt * 9f64.ln() / (params.c * symdiff);
    let lo = (point.p_star - window_bound / 2.0).max(0.0);
    let hi = (point.p_star + window_bound / 2.0).min(1.0);
    let window = if lo <= hi { Some((lo, hi)) } else { None };
    Ok(CrossoverResult {
        p_star: point.p_star,
        within_unit_interval: point.within_unit_interval,
        window_bound,
        window,
    })
}

/// Boltzmann distribution over all `2^n` masks of length `n`. Mask
/// indices encode bit `i` set ⇔ position `i` paired.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskEnsemble {
    n: usize,
    energies: Vec<f64>,
    probs: Vec<f64>,
}

impl MaskEnsemble {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of masks, `2^n`.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Energies indexed by mask code.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Probabilities indexed by mask code; they sum to 1 within 1e-10.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Decode a mask index into its mask.
    pub fn mask(&self, index: usize) -> PairingMask {
        mask_from_index(index, self.n)
    }
}

/// Decode `index` (bit `i` set ⇔ position `i` paired) into a mask of
/// length `n`.
pub fn mask_from_index(index: usize, n: usize) -> PairingMask {
    assert!(n >= 1 && n < usize::BITS as usize && index < 1 << n);
    PairingMask::new((0..n).map(|i| index >> i & 1 == 1).collect())
        .expect("n >= 1 positions")
}

/// Energies and probabilities over all masks for the given profile
/// values; iteration order is the fixed index order, so results are
/// bit-reproducible.
fn enumerate_ensemble(values: &[f64], params: &NjParams) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let size = 1usize << n;
    // per-position contributions: paired x=0, unpaired x=1
    let paired: Vec<f64> = values.iter().map(|&m| params.c * m.abs() - 1.0).collect();
    let unpaired: Vec<f64> = values.iter().map(|&m| params.c * (1.0 - m).abs()).collect();

    let mut energies = Vec::with_capacity(size);
    let mut e_min = f64::INFINITY;
    for idx in 0..size {
        let mut e = 0.0;
        for i in 0..n {
            e += if idx >> i & 1 == 1 { paired[i] } else { unpaired[i] };
        }
        e_min = e_min.min(e);
        energies.push(e);
    }

    let mut weights = Vec::with_capacity(size);
    let mut z = CompensatedSum::new();
    for &e in &energies {
        let w = (-(e - e_min) / params.rt).exp();
        z.add(w);
        weights.push(w);
    }
    let z = z.value();
    for w in &mut weights {
        *w /= z;
    }
    (energies, weights)
}

/// Exact Boltzmann ensemble over all masks of length `m.len()`.
///
/// Refuses lengths above `cap` ([`DEFAULT_ENUMERATION_CAP`] unless the
/// caller raises it); the enumeration allocates two `f64` vectors of
/// length `2^n`.
pub fn full_ensemble(
    m: &ShapeProfile,
    params: &NjParams,
    cap: usize,
) -> Result<MaskEnsemble, NjError> {
    let n = m.len();
    if n > cap || n >= usize::BITS as usize - 1 {
        return Err(NjError::CapExceeded { n, cap });
    }
    let (energies, probs) = enumerate_ensemble(m.values(), params);
    Ok(MaskEnsemble { n, energies, probs })
}

/// One ratio sample of a total-variation sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TvdPoint {
    pub p: f64,
    /// Ensemble probability of being closer to mask A, ties counted half.
    pub p_hat: f64,
    /// `|p - p_hat|`.
    pub tvd: f64,
}

/// Classification of every mask index against reference bit sets, by
/// F-measure with ties explicit. Integer cross-multiplication keeps the
/// comparison exact.
fn classify_index(idx: usize, a_bits: usize, bp_a: u64, b_bits: usize, bp_b: u64) -> u8 {
    let ps = idx.count_ones() as u64;
    let ta = (idx & a_bits).count_ones() as u64;
    let tb = (idx & b_bits).count_ones() as u64;
    let da = ps + bp_a;
    let db = ps + bp_b;
    // F_a = 2ta/da vs F_b = 2tb/db, with empty-vs-empty agreement = 1
    let (fa_num, fa_den) = if da == 0 { (1, 1) } else { (2 * ta, da) };
    let (fb_num, fb_den) = if db == 0 { (1, 1) } else { (2 * tb, db) };
    let lhs = fa_num * fb_den;
    let rhs = fb_num * fa_den;
    match lhs.cmp(&rhs) {
        std::cmp::Ordering::Greater => 0, // closer to A
        std::cmp::Ordering::Less => 1,    // closer to B
        std::cmp::Ordering::Equal => 2,   // tie
    }
}

/// For each ratio `p` in `p_grid`: build the noiseless mixture
/// `M(p) = p·S_A + (1-p)·S_B`, compute the full Boltzmann ensemble, and
/// report `p̂ = P(closer to A) + P(tie)/2` along with `|p - p̂|`.
///
/// Mask classification does not depend on `p`, so it is computed once
/// per call.
pub fn tvd_sweep(
    a: &PairingMask,
    b: &PairingMask,
    params: &NjParams,
    p_grid: &[f64],
    cap: usize,
) -> Result<Vec<TvdPoint>, NjError> {
    if a.len() != b.len() {
        return Err(NjError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let n = a.len();
    if n > cap || n >= usize::BITS as usize - 1 {
        return Err(NjError::CapExceeded { n, cap });
    }
    for &p in p_grid {
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(NjError::GridValueOutOfRange { p });
        }
    }

    let mut a_bits = 0usize;
    let mut b_bits = 0usize;
    for i in 0..n {
        a_bits |= (a.is_paired(i) as usize) << i;
        b_bits |= (b.is_paired(i) as usize) << i;
    }
    let bp_a = a_bits.count_ones() as u64;
    let bp_b = b_bits.count_ones() as u64;
    let classes: Vec<u8> = (0..1usize << n)
        .map(|idx| classify_index(idx, a_bits, bp_a, b_bits, bp_b))
        .collect();

    let s: Vec<f64> = a.iter().map(|paired| if paired { 0.0 } else { 1.0 }).collect();
    let t: Vec<f64> = b.iter().map(|paired| if paired { 0.0 } else { 1.0 }).collect();

    let mut out = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let values: Vec<f64> = s
            .iter()
            .zip(&t)
            .map(|(&si, &ti)| p * si + (1.0 - p) * ti)
            .collect();
        let (_, probs) = enumerate_ensemble(&values, params);
        let mut to_a = CompensatedSum::new();
        let mut tie = CompensatedSum::new();
        for (idx, &prob) in probs.iter().enumerate() {
            match classes[idx] {
                0 => to_a.add(prob),
                2 => tie.add(prob),
                _ => {}
            }
        }
        let p_hat = to_a.value() + 0.5 * tie.value();
        out.push(TvdPoint { p, p_hat, tvd: (p - p_hat).abs() });
    }
    Ok(out)
}
