//! Numerical toolkit for asymptotic quantum coherence manipulation.
//!
//! The crate computes, on explicit density matrices, the quantities that
//! govern coherence distillation and dilution under strictly incoherent
//! (SIO) and physically incoherent (PIO) operations:
//!
//! - the distillation structure: comparison matrix, modulus-1 edge graph,
//!   clique partition, trimmed state and the quintessential coherence `Q`;
//! - the SIO monotone family `mu_k`, its smoothed variants over restricted
//!   conditioning sets, and the composed converse bound;
//! - the uniform coherence of formation (PIO coherence cost) with exact
//!   qubit formula and certified bound sandwiches;
//! - structured SIO/PIO channels in (permutation, diagonal) Kraus form;
//! - protocol accounting: clique-instrument distillation rates and
//!   cosbit dilution plans;
//! - classical conditional entropies, restricted smoothing sets and the
//!   typical-set machinery behind the converse.
//!
//! All logarithms are base 2; rates are in coherence bits (cosbits).
//! Operations are pure functions of immutable inputs and safe to share
//! across threads. Randomised routines are deterministic functions of a
//! 64-bit seed and thread-count invariant.

pub mod channels;
pub mod classical;
pub mod config;
pub mod eigen;
pub mod ensembles;
pub mod error;
pub mod formation;
pub mod measure;
pub mod monotones;
pub mod par;
pub mod protocols;
pub mod state;
pub mod structure;
pub mod verify;

pub use config::StructureConfig;
pub use error::{CoherenceError, Result};
pub use state::{DensityMatrix, PureState};
