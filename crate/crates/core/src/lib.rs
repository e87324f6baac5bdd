//! Collaborative filtering with matrix-factorization embeddings, ranking and
//! representation-geometry losses, and tools to study how embeddings
//! collapse (lose stable rank) during training.

pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod losses;
pub mod model;
pub mod theory;
pub mod trainer;

pub use error::{Error, Result};
