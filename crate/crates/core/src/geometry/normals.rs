use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use super::cloud::{PointCloud, Point3};
use super::knn::NeighborGraph;
use crate::error::{Error, Result};

/// Components smaller than this are treated as zero by the sign rule.
const SIGN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalField {
    pub normals: Vec<Point3>,
    /// Points whose neighborhood collapsed to a single location; their normal is `+z`.
    pub degenerate: Vec<usize>,
}

/// Orients `n` so that z > 0, falling back to y then x when a component is zero.
pub fn orient(n: Point3) -> Point3 {
    let flip = if n[2].abs() > SIGN_EPS {
        n[2] < 0.0
    } else if n[1].abs() > SIGN_EPS {
        n[1] < 0.0
    } else {
        n[0] < 0.0
    };
    if flip {
        [-n[0], -n[1], -n[2]]
    } else {
        n
    }
}

/// Smallest-eigenvalue direction of each point's neighborhood covariance
/// (the point together with its graph neighbors).
pub fn estimate_normals(cloud: &PointCloud, graph: &NeighborGraph) -> Result<NormalField> {
    if graph.num_points() != cloud.len() {
        return Err(Error::DimensionMismatch {
            context: "neighbor graph",
            expected: cloud.len(),
            actual: graph.num_points(),
        });
    }
    let pos = cloud.positions();
    let mut normals = Vec::with_capacity(cloud.len());
    let mut degenerate = Vec::new();
    for (i, adj) in graph.iter() {
        let members = std::iter::once(i).chain(adj.iter().map(|e| e.0));
        let count = (adj.len() + 1) as f64;
        let mut mean = Vector3::zeros();
        for j in members.clone() {
            mean += Vector3::from(pos[j]);
        }
        mean /= count;
        let mut cov = Matrix3::zeros();
        for j in members {
            let d = Vector3::from(pos[j]) - mean;
            cov += d * d.transpose();
        }
        cov /= count;
        if cov.iter().all(|&v| v == 0.0) {
            degenerate.push(i);
            normals.push([0.0, 0.0, 1.0]);
            continue;
        }
        let eig = SymmetricEigen::new(cov);
        let smallest = (0..3)
            .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .unwrap_or(0);
        let v = eig.eigenvectors.column(smallest).normalize();
        normals.push(orient([v[0], v[1], v[2]]));
    }
    Ok(NormalField {
        normals,
        degenerate,
    })
}
