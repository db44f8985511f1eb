use super::cloud::PointCloud;
use super::kdtree::KdTree;
use crate::error::{invalid, Error, Result};

/// Per-point adjacency lists of `(neighbor, squared distance)`, nearest first.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborGraph {
    k_nn: usize,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl NeighborGraph {
    pub fn k_nn(&self) -> usize {
        self.k_nn
    }

    pub fn num_points(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[(usize, f64)])> {
        self.adjacency.iter().enumerate().map(|(i, a)| (i, a.as_slice()))
    }

    /// Undirected edge list `(i, j)` with `i < j`, each pair once, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .iter()
            .flat_map(|(i, adj)| adj.iter().map(move |&(j, _)| (i.min(j), i.max(j))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

/// Exact k-NN graph; ties in distance go to the lower index.
pub fn build_knn_graph(cloud: &PointCloud, k_nn: usize) -> Result<NeighborGraph> {
    if cloud.is_empty() {
        return Err(Error::EmptyInput);
    }
    if k_nn == 0 {
        return Err(invalid("k_nn", "must be at least 1"));
    }
    let positions = cloud.positions();
    let tree = KdTree::build(positions);
    let k = k_nn.min(positions.len() - 1);
    let adjacency = positions
        .iter()
        .enumerate()
        .map(|(i, p)| tree.nearest(p, k, Some(i)))
        .collect();
    Ok(NeighborGraph { k_nn, adjacency })
}
