//! Exact k-nearest-neighbor search over a static point set.
//!
//! Results are ordered by `(squared distance, index)`, so equal distances
//! always resolve to the lower index.

use super::cloud::{dist2, Point3};

const LEAF_SIZE: usize = 12;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [Point3],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// Bounded candidate list kept sorted by `(d2, index)`.
struct Candidates {
    capacity: usize,
    items: Vec<(f64, usize)>,
}

impl Candidates {
    fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: Vec::with_capacity(capacity + 1),
        }
    }

    fn is_full(&self) -> bool {
        self.items.len() == self.capacity
    }

    fn worst(&self) -> f64 {
        self.items.last().map_or(f64::INFINITY, |c| c.0)
    }

    fn offer(&mut self, d2: f64, index: usize) {
        if self.is_full() {
            let (wd, wi) = self.items[self.capacity - 1];
            if (d2, index) >= (wd, wi) {
                return;
            }
        }
        let pos = self
            .items
            .partition_point(|&(d, i)| (d, i) < (d2, index));
        self.items.insert(pos, (d2, index));
        self.items.truncate(self.capacity);
    }
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [Point3]) -> Self {
        let mut tree = Self {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len());
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = self.widest_axis(start, end);
        let mid = start + (end - start) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points[a][axis]
                .total_cmp(&points[b][axis])
                .then(a.cmp(&b))
        });
        let value = points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    fn widest_axis(&self, start: usize, end: usize) -> usize {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])).then(b.cmp(&a)))
            .unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The `k` nearest points to `query` as `(index, squared distance)`,
    /// skipping `exclude` when given.
    pub fn nearest(&self, query: &Point3, k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        if k == 0 || self.nodes.is_empty() {
            return Vec::new();
        }
        let mut cand = Candidates::new(k);
        self.search(0, query, exclude, &mut cand);
        cand.items.into_iter().map(|(d, i)| (i, d)).collect()
    }

    fn search(&self, node: usize, query: &Point3, exclude: Option<usize>, cand: &mut Candidates) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) != exclude {
                        cand.offer(dist2(query, &self.points[i]), i);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = query[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.search(near, query, exclude, cand);
                // Equality still descends: an equal-distance far point may win on index.
                if !cand.is_full() || diff * diff <= cand.worst() {
                    self.search(far, query, exclude, cand);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(points: &[Point3], q: &Point3, k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != exclude)
            .map(|(i, p)| (dist2(q, p), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.truncate(k);
        all.into_iter().map(|(d, i)| (i, d)).collect()
    }

    #[test]
    fn matches_brute_force_with_duplicates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pts: Vec<Point3> = (0..400)
            .map(|_| {
                [
                    rng.random_range(0..5) as f64 * 0.25,
                    rng.random_range(0..5) as f64 * 0.25,
                    rng.random_range(0..3) as f64 * 0.25,
                ]
            })
            .collect();
        pts.push(pts[0]);
        let tree = KdTree::build(&pts);
        for (i, q) in pts.iter().enumerate() {
            for k in [1, 4, 9] {
                assert_eq!(tree.nearest(q, k, Some(i)), brute(&pts, q, k, Some(i)));
            }
        }
    }

    #[test]
    fn k_larger_than_population() {
        let pts = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]];
        let tree = KdTree::build(&pts);
        assert_eq!(tree.nearest(&[0.2, 0.0, 0.0], 5, None).len(), 2);
    }
}
