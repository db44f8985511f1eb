//! Point-cloud types, spatial search, normals and farthest-point sampling.
//!
//! Every search here is exact and breaks distance ties by the lower index,
//! so results are reproducible bit-for-bit.

mod ball_query;
mod cloud;
mod fps;
mod kdtree;
mod knn;
mod normals;

pub use ball_query::{ball_query, BallQueryResult, VoxelGrid};
pub(crate) use ball_query::check_ball_params;
pub use cloud::{dist2, Aabb, Point3, PointCloud};
pub use fps::{fps_from, fps_sample};
pub use kdtree::KdTree;
pub use knn::{build_knn_graph, NeighborGraph};
pub use normals::{estimate_normals, orient, NormalField};
