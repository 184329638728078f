//! Graph-learning engine for studying how node features are fused with
//! structural encodings.
//!
//! The crate builds small graph neural networks in which per-node feature
//! embeddings and structural embeddings (random-walk return probabilities or
//! Laplacian eigenvector coordinates) are combined either by concatenation or
//! by a tensor (Kronecker) product, and in which the message-passing layers
//! can run with full dense projections, Kronecker-factorized sparse
//! projections with entanglement level `K`, or no message passing at all.
//!
//! Everything is `f64`, deterministic given seeds, and desk-scale: dense
//! matrices, a tape-based reverse-mode autodiff engine, a cyclic Jacobi
//! eigensolver, and full-batch Adam training with plateau learning-rate
//! halving. A 1-WL color-refinement oracle is included so expressiveness
//! claims can be cross-checked against the models.
//!
//! Batch work (per-graph gradients, dataset encoding) runs through
//! [`parallel::ExecMode`]: data-parallel via rayon when the `parallel`
//! feature is enabled (default), sequential otherwise. Results are
//! bit-identical in both modes.

pub mod dataset;
pub mod encoder;
pub mod encoding;
pub mod generate;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod mpnn;
pub mod parallel;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod wl;

pub use graph::{AdjacencyView, Graph};
pub use model::{ModelConfig, ModelParams};
pub use tensor::{Tape, Var};
