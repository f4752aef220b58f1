//! PPMI association matrices and the temporally aligned factorization.

mod fit;
mod ppmi;

pub use fit::{embedding_from_csv, embedding_to_csv, fit, objective, EmbeddingSequence, FitOptions};
pub use ppmi::{cooccurrence_counts, ppmi, top_eigenvalue, PpmiMatrix, PPMI_HEADER};
