//! Decoupled cross-correlation objective over paired-modality embeddings.
//!
//! Four embedding batches come in: two augmented views of the H&E branch (`h1`, `h2`)
//! and two of the polarization branch (`p1`, `p2`). Every batch is standardized per
//! column, and cross-correlation matrices are formed between them. The leading `k_common`
//! dimensions are pulled together across modalities, the trailing `k_unique` dimensions are
//! decorrelated across modalities, and a Barlow-Twins-style term over all dimensions keeps
//! each modality's two views consistent.

mod batch;
mod correlation;
mod io;
mod loss;
mod metrics;

pub use batch::{batch_normalize, EmbeddingBatch, Modality, NormalizedBatch, View, BN_EPS};
pub use correlation::{cross_correlation, CorrelationMatrix};
pub use io::{read_embeddings, sidecar_path, write_embeddings, EmbeddingSidecar};
pub use loss::{
    loss_common, loss_intra, loss_total, loss_unique, CrossPairing, EmbeddingGrads, LossOptions,
    LossReport, LossTerm, LossWeights, PartitionConfig, DEFAULT_LAMBDA,
};
pub use metrics::{decoupling_metrics, DecouplingMetrics, COLLAPSE_STD};
