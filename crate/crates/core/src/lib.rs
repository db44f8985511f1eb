//! Superpoint mask branch for 3D referring expression segmentation.
//!
//! A point cloud is oversegmented into superpoints on one lane while a
//! (toy) encoder produces visual tokens and object queries on the other.
//! Superpoint embeddings are max-pooled from nearby tokens, dotted with query
//! embeddings to give a superpoint-by-query mask, and mapped back to points
//! through the superpoint labels.

pub mod error;
pub mod geometry;
pub mod grounding;
pub mod losses;
pub mod metrics;
pub mod oversegment;
pub mod pipeline;
pub mod scene;

pub use error::{Error, Result};
