#![forbid(unsafe_code)]

//! Quantifies when the mixing ratio of a two-state RNA structure ensemble
//! can or cannot be recovered from per-nucleotide reactivity data.
//!
//! An RNA molecule that folds into two conformations `A` and `B` with
//! weights `p` and `1 - p` produces probing data that is a blend of the
//! signals of the two states. This crate models structures as binary
//! pairing masks, scores them with a Nussinov-Jacobson pseudoenergy that
//! rewards agreement with the data, and provides:
//!
//! - exact crossover points and crossover windows for a structure pair
//!   under blended noiseless data ([`nj_model`]),
//! - exact finite-length lower bounds on the probability that a random
//!   structure pair has an unrecoverable mixing ratio ([`pn_bound`]),
//! - simulation of reactivity profiles from empirical paired/unpaired
//!   distributions ([`shape_sim`]),
//! - Fisher information, Cramér-Rao variance bounds, and maximum
//!   likelihood recovery of `p` from blended noisy profiles
//!   ([`inference`]).
//!
//! Everything downstream of a fixed seed is deterministic, including
//! under data-parallel execution; see the module docs for the stream
//! derivation scheme.

pub mod inference;
pub mod nj_model;
pub mod numeric;
pub mod pn_bound;
pub mod shape_sim;
pub mod structures;

/// Gas constant in kcal/(mol K).
pub const GAS_CONSTANT_KCAL: f64 = 0.001987;

/// Physiological temperature in kelvin.
pub const BODY_TEMPERATURE_K: f64 = 310.0;

/// Thermal energy `RT` at [`BODY_TEMPERATURE_K`], in kcal/mol.
pub const RT_KCAL: f64 = GAS_CONSTANT_KCAL * BODY_TEMPERATURE_K;
