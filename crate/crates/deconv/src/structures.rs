//! Binary pairing masks, random structure generation, pair statistics,
//! and F-measure classification.
//!
//! A secondary structure is reduced to a per-nucleotide mask: paired or
//! unpaired, written `x` and `.` in text form. Pairing partners are
//! deliberately not represented; every quantity downstream depends only
//! on the mask.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::nj_model::ShapeProfile;

#[derive(Debug, Error, PartialEq)]
pub enum StructureError {
    #[error("pairing mask must have at least one position")]
    EmptyMask,
    #[error("mask lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid mask character {found:?} at position {position} (expected 'x' or '.')")]
    InvalidMaskChar { position: usize, found: char },
    #[error("pairing probability must satisfy 0 < q < 1, got {q}")]
    PairingProbabilityOutOfRange { q: f64 },
}

/// Per-position paired/unpaired mask of a structure. Immutable after
/// construction; always has at least one position.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PairingMask {
    paired: Vec<bool>,
}

impl PairingMask {
    pub fn new(paired: Vec<bool>) -> Result<Self, StructureError> {
        if paired.is_empty() {
            return Err(StructureError::EmptyMask);
        }
        Ok(Self { paired })
    }

    pub fn len(&self) -> usize {
        self.paired.len()
    }

    /// Always false: construction rejects empty masks.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_paired(&self, position: usize) -> bool {
        self.paired[position]
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.paired.iter().copied()
    }

    /// Number of paired positions.
    pub fn bp_count(&self) -> usize {
        self.paired.iter().filter(|&&b| b).count()
    }

    /// Noiseless data for this mask: 0.0 at paired positions, 1.0 at
    /// unpaired ones.
    pub fn noiseless_profile(&self) -> ShapeProfile {
        let values = self
            .paired
            .iter()
            .map(|&b| if b { 0.0 } else { 1.0 })
            .collect();
        ShapeProfile::new(values).expect("mask is nonempty and values are finite")
    }
}

impl FromStr for PairingMask {
    type Err = StructureError;

    fn from_str(s: &str) -> Result<Self, StructureError> {
        let mut paired = Vec::with_capacity(s.len());
        for (position, ch) in s.chars().enumerate() {
            match ch {
                'x' => paired.push(true),
                '.' => paired.push(false),
                found => return Err(StructureError::InvalidMaskChar { position, found }),
            }
        }
        Self::new(paired)
    }
}

impl fmt::Display for PairingMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.paired {
            f.write_str(if b { "x" } else { "." })?;
        }
        Ok(())
    }
}

/// Base-pair set statistics of a mask pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PairStats {
    pub n: usize,
    pub bp_a: usize,
    pub bp_b: usize,
    /// Positions paired in `a` but not in `b`.
    pub bp_a_minus_b: usize,
    /// Positions paired in `b` but not in `a`.
    pub bp_b_minus_a: usize,
    /// Positions paired in exactly one mask.
    pub bp_symdiff: usize,
    /// Positions with equal state in both masks.
    pub agree: usize,
}

/// Count the pair-set statistics of two equal-length masks.
pub fn pair_stats(a: &PairingMask, b: &PairingMask) -> Result<PairStats, StructureError> {
    if a.len() != b.len() {
        return Err(StructureError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let mut stats = PairStats {
        n: a.len(),
        bp_a: 0,
        bp_b: 0,
        bp_a_minus_b: 0,
        bp_b_minus_a: 0,
        bp_symdiff: 0,
        agree: 0,
    };
    for (pa, pb) in a.iter().zip(b.iter()) {
        stats.bp_a += usize::from(pa);
        stats.bp_b += usize::from(pb);
        match (pa, pb) {
            (true, false) => stats.bp_a_minus_b += 1,
            (false, true) => stats.bp_b_minus_a += 1,
            _ => stats.agree += 1,
        }
    }
    stats.bp_symdiff = stats.bp_a_minus_b + stats.bp_b_minus_a;
    Ok(stats)
}

/// Structures drawn position-by-position: each nucleotide is paired with
/// probability `q`, independently of all others.
#[derive(Clone, Copy, Debug)]
pub struct RandomStructureModel {
    q: f64,
    seed: u64,
}

impl RandomStructureModel {
    pub fn new(q: f64, seed: u64) -> Result<Self, StructureError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(StructureError::PairingProbabilityOutOfRange { q });
        }
        Ok(Self { q, seed })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draw the mask of length `n` determined by this model's seed.
    /// Repeated calls return the same mask.
    pub fn random_mask(&self, n: usize) -> Result<PairingMask, StructureError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        self.random_mask_with(n, &mut rng)
    }

    /// Draw a mask from a caller-supplied generator; used by Monte Carlo
    /// drivers that manage their own substreams.
    pub fn random_mask_with<R: Rng>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> Result<PairingMask, StructureError> {
        if n == 0 {
            return Err(StructureError::EmptyMask);
        }
        let paired = (0..n).map(|_| rng.random::<f64>() < self.q).collect();
        PairingMask::new(paired)
    }
}

/// Which of two reference masks a structure is closer to, by F-measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureClass {
    CloserToA,
    CloserToB,
    Tie,
}

/// F-measure of `s` against reference `a`, treating paired as the
/// positive class: `2 TP / (2 TP + FP + FN)`. Two all-unpaired masks
/// agree perfectly and score 1.
pub fn f_measure(s: &PairingMask, a: &PairingMask) -> Result<f64, StructureError> {
    if s.len() != a.len() {
        return Err(StructureError::LengthMismatch { left: s.len(), right: a.len() });
    }
    let mut tp = 0usize;
    for (ps, pa) in s.iter().zip(a.iter()) {
        tp += usize::from(ps && pa);
    }
    // 2TP + FP + FN telescopes to |paired(s)| + |paired(a)|
    let denom = s.bp_count() + a.bp_count();
    if denom == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / denom as f64)
}

/// Classify `s` by comparing its F-measure against `a` and `b`; exact
/// equality is a tie.
pub fn classify(
    s: &PairingMask,
    a: &PairingMask,
    b: &PairingMask,
) -> Result<StructureClass, StructureError> {
    let fa = f_measure(s, a)?;
    let fb = f_measure(s, b)?;
    Ok(if fa > fb {
        StructureClass::CloserToA
    } else if fb > fa {
        StructureClass::CloserToB
    } else {
        StructureClass::Tie
    })
}
