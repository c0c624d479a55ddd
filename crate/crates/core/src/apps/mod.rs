//! Uses of per-word confidence: precision/recall tradeoffs for entity
//! tagging, active learning and parameter tuning.

pub mod active;
pub mod entities;
pub mod tradeoff;
pub mod tune;
