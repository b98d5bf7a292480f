//! Link prediction for knowledge graphs.
//!
//! The crate is organised around an immutable [`KnowledgeGraph`] of
//! subject/predicate/object triples and a family of scorers built on top of it:
//!
//! - [`latent`]: latent feature models (RESCAL, E-MLP, ER-MLP, NTN, structured
//!   embeddings, TransE) with analytic gradients and RESCAL-ALS fitting.
//! - [`graphfeat`]: observable graph features, i.e. uni-relational similarity
//!   indices and the path ranking algorithm (PRA).
//! - [`fusion`]: combinations of the two families (additive relational effects,
//!   the additive neighbourhood model, stacking) and Platt calibration.
//! - [`sampling`]: negative example generation under the closed world,
//!   local closed world and perturbation regimes.
//! - [`train`]: losses, SGD training, entity ranking, metrics and model selection.

pub mod error;
pub mod fusion;
pub mod graph;
pub mod graphfeat;
pub mod io;
pub mod latent;
pub mod linalg;
pub mod sampling;
pub mod seed;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
pub use graph::{
    holdout_split, infer_type_constraints, ingest_triples, Direction, EntityId, KnowledgeGraph,
    RelationId, Split, SplitRatios, Triple, TypeConstraints, Vocab,
};
pub use latent::{LatentModel, ModelConfig, ModelKind, Nonlinearity};
pub use linalg::Matrix;
pub use train::{LossKind, TrainConfig, TripleScorer};

/// Format version stamped into every file this crate writes.
pub const FORMAT_VERSION: u32 = 1;
