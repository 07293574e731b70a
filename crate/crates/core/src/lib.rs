//! Truncation-free hybrid inference for Dirichlet-process mixture models and HDP-LDA.
//!
//! The engines combine zero-order collapsed variational (CVB0) updates with a
//! Gibbs-style draw that decides, per update, whether to keep the truncated
//! variational vector over the `K` instantiated components or to instantiate a
//! new component. The crate also ships the baselines used for comparison
//! (collapsed Gibbs sampling, fixed-truncation CVB0, stochastic SCVB0), corpus
//! tooling for the UCI bag-of-words format, and a held-out perplexity harness.
//!
//! Layout:
//!
//! - [`corpus`]: documents, UCI bag-of-words I/O, train/test and 70/30 splits.
//! - [`dcm`]: Dirichlet-multinomial component statistics and predictives.
//! - [`hybrid`]: the hybrid update primitive shared by every truncation-free engine.
//! - [`dpmm`]: single-membership engines (HCVB0, CGS, TCVB0) and a synthetic generator.
//! - [`hdplda`]: mixed-membership stochastic engines (HCSVB0, SCVB0, PCSVB0).
//! - [`eval`]: held-out fold-in perplexity and the metrics CSV.
//! - [`snapshot`]: the versioned text model dump.
//! - [`cli`]: run configuration and the command drivers behind the `hybrid-dp` binary.

#![forbid(unsafe_code)]

pub mod cli;
pub mod corpus;
pub mod dcm;
pub mod dpmm;
pub mod error;
pub mod eval;
pub mod hdplda;
pub mod hybrid;
pub mod numeric;
pub mod properties;
pub mod snapshot;

pub use error::{Error, Result};

/// Deterministic generator used by every engine. ChaCha8 keeps streams stable
/// across platforms and `rand` releases.
pub type EngineRng = rand_chacha::ChaCha8Rng;

/// Builds the engine generator from an integer seed.
pub fn seeded_rng(seed: u64) -> EngineRng {
    use rand::SeedableRng;
    EngineRng::seed_from_u64(seed)
}
