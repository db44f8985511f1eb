//! Superpoint generation by graph-based oversegmentation.
//!
//! Points are nodes of the k-NN graph; an edge costs the normal dissimilarity
//! `1 - n_i·n_j`, optionally plus a weighted color distance. Edges are merged
//! greedily in ascending weight using the Felzenszwalb–Huttenlocher predicate
//! `w <= min(Int(A) + k/|A|, Int(B) + k/|B|)`, then undersized segments are
//! absorbed along their cheapest edge. The resulting label array is the
//! point-to-superpoint mapping used to upsample superpoint masks.

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist2, estimate_normals, NeighborGraph, Point3, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OversegmentParams {
    pub k_nn: usize,
    /// The FH scale constant `k`; larger values give larger segments.
    pub merge_threshold: f64,
    pub min_segment_size: usize,
    pub use_color: bool,
    pub color_weight: f64,
}

impl Default for OversegmentParams {
    fn default() -> Self {
        Self {
            k_nn: 8,
            merge_threshold: 0.05,
            min_segment_size: 20,
            use_color: false,
            color_weight: 1.0,
        }
    }
}

impl OversegmentParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_nn == 0 {
            return Err(invalid("k_nn", "must be at least 1"));
        }
        if !(self.merge_threshold > 0.0 && self.merge_threshold.is_finite()) {
            return Err(invalid("merge_threshold", "must be positive"));
        }
        if self.min_segment_size == 0 {
            return Err(invalid("min_segment_size", "must be at least 1"));
        }
        if !(self.color_weight >= 0.0 && self.color_weight.is_finite()) {
            return Err(invalid("color_weight", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Point-to-superpoint labels with per-segment sizes and centroids.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpointPartition {
    labels: Vec<usize>,
    segment_sizes: Vec<usize>,
    centroids: Vec<Point3>,
}

impl SuperpointPartition {
    /// Builds a partition from arbitrary labels; labels are renumbered by
    /// first occurrence.
    pub fn from_labels(labels: &[usize], positions: &[Point3]) -> Result<Self> {
        if labels.len() != positions.len() {
            return Err(Error::DimensionMismatch {
                context: "partition labels",
                expected: positions.len(),
                actual: labels.len(),
            });
        }
        if labels.is_empty() {
            return Err(Error::EmptyInput);
        }
        let labels = compactify_labels(labels);
        let m = labels.iter().max().map_or(0, |&l| l + 1);
        let mut segment_sizes = vec![0usize; m];
        let mut sums = vec![[0.0f64; 3]; m];
        for (&l, p) in labels.iter().zip(positions) {
            segment_sizes[l] += 1;
            for a in 0..3 {
                sums[l][a] += p[a];
            }
        }
        let centroids = sums
            .iter()
            .zip(&segment_sizes)
            .map(|(s, &c)| {
                let c = c as f64;
                [s[0] / c, s[1] / c, s[2] / c]
            })
            .collect();
        Ok(Self {
            labels,
            segment_sizes,
            centroids,
        })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn segment_sizes(&self) -> &[usize] {
        &self.segment_sizes
    }

    pub fn centroids(&self) -> &[Point3] {
        &self.centroids
    }

    pub fn num_points(&self) -> usize {
        self.labels.len()
    }

    pub fn num_segments(&self) -> usize {
        self.segment_sizes.len()
    }

    /// Renumbers labels by first occurrence. Idempotent.
    pub fn compactify(&self) -> Self {
        let labels = compactify_labels(&self.labels);
        let m = self.num_segments();
        let mut remap = vec![usize::MAX; m];
        for (&old, &new) in self.labels.iter().zip(&labels) {
            remap[old] = new;
        }
        let mut segment_sizes = vec![0; m];
        let mut centroids = vec![[0.0; 3]; m];
        for (old, &new) in remap.iter().enumerate() {
            segment_sizes[new] = self.segment_sizes[old];
            centroids[new] = self.centroids[old];
        }
        Self {
            labels,
            segment_sizes,
            centroids,
        }
    }
}

/// Maps labels to `0..m` in order of first occurrence, preserving membership.
pub fn compactify_labels(labels: &[usize]) -> Vec<usize> {
    let mut seen = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = seen.len();
            *seen.entry(l).or_insert(next)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEdge {
    pub weight: f64,
    pub a: usize,
    pub b: usize,
}

/// Undirected edges of the k-NN graph with their dissimilarity weights, sorted
/// by `(weight, a, b)`.
pub fn edge_weights(
    cloud: &PointCloud,
    normals: &[Point3],
    graph: &NeighborGraph,
    params: &OversegmentParams,
) -> Vec<WeightedEdge> {
    let colors = cloud.colors();
    let mut edges: Vec<WeightedEdge> = graph
        .undirected_edges()
        .into_iter()
        .map(|(a, b)| {
            let (na, nb) = (normals[a], normals[b]);
            let dissimilarity = 1.0 - (na[0] * nb[0] + na[1] * nb[1] + na[2] * nb[2]);
            // rounding can push parallel normals slightly below zero
            let mut weight = if dissimilarity > 0.0 { dissimilarity } else { 0.0 };
            if params.use_color {
                weight += params.color_weight * dist2(&colors[a], &colors[b]).sqrt();
            }
            WeightedEdge { weight, a, b }
        })
        .collect();
    sort_edges(&mut edges);
    edges
}

pub fn sort_edges(edges: &mut [WeightedEdge]) {
    edges.sort_by(|x, y| {
        x.weight
            .total_cmp(&y.weight)
            .then(x.a.cmp(&y.a))
            .then(x.b.cmp(&y.b))
    });
}

struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
    internal: Vec<f64>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
            internal: vec![0.0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Joins two roots; `weight` becomes the new internal difference when larger.
    fn union(&mut self, ra: usize, rb: usize, weight: f64) {
        let (big, small) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        self.internal[big] = self.internal[big].max(self.internal[small]).max(weight);
    }
}

/// FH segmentation of `num_nodes` nodes over pre-sorted `edges`, followed by
/// absorption of segments smaller than `min_size`. Returns compact labels.
pub fn segment_graph(
    num_nodes: usize,
    edges: &[WeightedEdge],
    threshold: f64,
    min_size: usize,
) -> Vec<usize> {
    let mut sets = DisjointSets::new(num_nodes);
    for e in edges {
        let ra = sets.find(e.a);
        let rb = sets.find(e.b);
        if ra == rb {
            continue;
        }
        let tol_a = sets.internal[ra] + threshold / sets.size[ra] as f64;
        let tol_b = sets.internal[rb] + threshold / sets.size[rb] as f64;
        if e.weight <= tol_a.min(tol_b) {
            sets.union(ra, rb, e.weight);
        }
    }
    if min_size > 1 {
        for e in edges {
            let ra = sets.find(e.a);
            let rb = sets.find(e.b);
            if ra != rb && (sets.size[ra] < min_size || sets.size[rb] < min_size) {
                sets.union(ra, rb, e.weight);
            }
        }
    }
    let roots: Vec<usize> = (0..num_nodes).map(|i| sets.find(i)).collect();
    compactify_labels(&roots)
}

/// Oversegments `cloud` into superpoints. Normals are estimated from `graph`
/// when the cloud carries none.
pub fn oversegment(
    cloud: &PointCloud,
    params: &OversegmentParams,
    graph: &NeighborGraph,
) -> Result<SuperpointPartition> {
    params.validate()?;
    if graph.num_points() != cloud.len() {
        return Err(Error::DimensionMismatch {
            context: "neighbor graph",
            expected: cloud.len(),
            actual: graph.num_points(),
        });
    }
    let estimated;
    let normals = match cloud.normals() {
        Some(n) => n,
        None => {
            estimated = estimate_normals(cloud, graph)?.normals;
            &estimated
        }
    };
    let edges = edge_weights(cloud, normals, graph, params);
    let labels = segment_graph(
        cloud.len(),
        &edges,
        params.merge_threshold,
        params.min_segment_size,
    );
    SuperpointPartition::from_labels(&labels, cloud.positions())
}
