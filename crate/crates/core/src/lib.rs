//! Dynamic mode decomposition of sentence-embedding sequences.
//!
//! Each paragraph is an `N x P` matrix of per-sentence embeddings, read as
//! the trajectory of a discrete linear system over the sentence index. The
//! crate fits that system with exact DMD and aggregates singular-value
//! spectra, eigenvalue clouds and mode-dynamics curves over an annotated
//! corpus of reference and generated paragraphs.

pub mod analysis;
pub mod cli;
pub mod corpus;
pub mod dmd;
pub mod export;
pub mod linalg;

pub use corpus::{aggregate_label, AnnotatedSample, Annotation};
pub use dmd::{
    build_snapshots, classify_eigenvalue, fit, mode_dynamics, DmdResult, EmbeddingMatrix,
    RankPolicy, SnapshotPair,
};
pub use linalg::{eig, optimal_rank, pinv, svd, RealMatrix};
