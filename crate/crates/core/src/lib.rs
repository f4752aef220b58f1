//! Dynamic node embeddings for mobile contact networks.
//!
//! The crate covers the whole path from a mobility trace to per-node
//! analytics:
//!
//! 1. [`grm`] synthesizes group-meeting mobility traces.
//! 2. [`contact`] slices a trace into daily contact graphs and computes
//!    classical centralities.
//! 3. [`walks`] samples node2vec-style biased random walks per window.
//! 4. [`embed`] turns walks into PPMI matrices and fits a temporally aligned
//!    low-rank embedding sequence.
//! 5. [`metrics`] derives mobility (cosine distance) and importance (vector
//!    norm) statistics and correlates them with the topology.
//!
//! [`pipeline`] wires the stages together with on-disk CSV intermediates.

pub mod error;
pub mod contact;
pub mod embed;
pub mod grm;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod walks;

pub use error::{Diagnostic, Error, Result};
