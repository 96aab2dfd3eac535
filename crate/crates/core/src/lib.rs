//! Tests whether a set of representation vectors forms a manifold that is
//! homeomorphic and locally isometric to a metric-space model of a feature.
//!
//! The pipeline is: load an [`EmbeddingSet`] bound to a [`MetricSpace`],
//! normalize rows, optionally project onto uncentered principal components,
//! build a K-nearest-neighbour graph, then run the three diagnostics in
//! [`hypothesis`]. [`synthetic`] provides embeddings with analytically known
//! geometry for checking the whole chain.

pub mod embeddings;
pub mod error;
pub mod fetch;
pub mod graph;
pub mod hypothesis;
pub mod metric_space;
pub mod report;
pub mod stats;
pub mod svg;
pub mod synthetic;

pub use embeddings::{cosine_similarity, normalize_rows, uncentered_pca, EmbeddingSet};
pub use error::{GeodexError, Result};
pub use graph::{build_knn, minimal_connected_k, NeighborGraph};
pub use hypothesis::{DiagnosticConfig, DiagnosticReport};
pub use metric_space::{MetricSpace, PathSample, Point, SpaceManifest, Transform};
pub use stats::PairedSample;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// The crate's single source of randomness.
pub fn seeded_rng(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}
