//! Concept inference over image riddles.
//!
//! Given four images, each described by detected class labels with classifier
//! confidences, the engine infers the single concept that best links the set.
//! It retrieves candidate concepts from a word/phrase knowledge base, grounds
//! weighted implication rules over seeds and candidates, and runs constrained
//! convex MAP inference over soft truth values in `[0, 1]`.
//!
//! Module map:
//!
//! - [`kgraph`]: knowledge store — vocabulary, two embedding spaces,
//!   relational assertions, eigenvector centrality, concreteness ratings.
//! - [`vissim`]: relation-profile visual similarity and target retrieval.
//! - [`hlmrf`]: hinge-loss MRF problems and the constrained MAP solvers.
//! - [`rules`]: grounding of the per-image and joint inference models.
//! - [`pipeline`]: end-to-end riddle solving, bias-correction variants,
//!   stage cuts, riddle ingestion.
//! - [`eval`]: automatic scoring against groundtruth and centroid baselines.
//! - [`registry`]: name-keyed registry of the interchangeable strategies
//!   (bias correction, stage cut, solver backend).

pub mod error;
pub mod eval;
pub mod hlmrf;
pub mod kgraph;
pub mod pipeline;
pub mod registry;
pub mod rules;
pub mod vissim;

pub use error::{Error, Result};
