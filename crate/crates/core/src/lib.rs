//! Hybrid symbolic/semantic risk prediction for patched C functions.
//!
//! The pipeline runs in two phases. Learning: every patched function is matched
//! against a small set of heuristic vulnerability rules (a 5-bit vector), embedded
//! into a 768-d semantic vector, the two are concatenated into a 773-d fused vector,
//! a variational autoencoder learns a latent space over the fused vectors and
//! k-means groups the latent points into clusters labeled by heuristic prevalence.
//! Testing: unseen functions are embedded, projected into the same latent space with
//! zero-filled heuristic slots, and labeled from their nearest cluster (or from
//! their own rule matches when those fire).
//!
//! This crate is `no_std` + `alloc`; file formats, the CLI, and the remote embedding
//! client live in the `hydra` companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cluster;
pub mod corpus;
pub mod embed;
pub mod heuristics;
pub mod latent;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use cluster::{ClusterModel, Label, RiskLabel};
pub use corpus::{Corpus, FunctionRecord, SourceKind};
pub use embed::{Embedding, EmbeddingProvider, HashedEmbedder, TokenStream, EMBEDDING_DIM};
pub use heuristics::{HeuristicVector, MatchEvidence, RuleSet};
pub use latent::{FusedVector, LatentPoint, VaeConfig, VaeModel, FUSED_DIM};
pub use metrics::ClusteringEvaluation;
pub use pipeline::{RiskReport, Variant};
