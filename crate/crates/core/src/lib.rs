//! Online learning for linear structured predictors with per-unit confidence
//! estimates.
//!
//! Sequence labeling and dependency parsing share one interface,
//! [`Structured`]: decoding, K-best decoding and constrained decoding over a
//! factored feature representation. On top of it sit online learners
//! ([`learn`]), confidence estimators ([`confidence`]), their evaluation
//! ([`eval`]) and applications ([`apps`]).

pub mod apps;
pub mod chain;
pub mod confidence;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod instance;
pub mod learn;
pub mod model;
pub mod report;
pub mod sparse;
pub mod store;
pub mod tree;

pub use error::{Error, Result};
pub use instance::{ChainInstance, Structured, Transitions, TreeInstance};
pub use model::LinearModel;
pub use sparse::SparseVector;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/decoding.md")]
    mod decoding {}
    #[doc = include_str!("../../../book/src/learning.md")]
    mod learning {}
    #[doc = include_str!("../../../book/src/confidence.md")]
    mod confidence {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/applications.md")]
    mod applications {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
