//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spg_core::geometry::{dist2, Point3, PointCloud};
use spg_core::oversegment::WeightedEdge;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Point3> {
    (0..n)
        .map(|_| {
            [
                rng.random_range(0.0..extent),
                rng.random_range(0.0..extent),
                rng.random_range(0.0..extent),
            ]
        })
        .collect()
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> PointCloud {
    let pos = random_points(rng, n, extent);
    let col = (0..n).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    PointCloud::new(pos, col).unwrap()
}

/// O(m·n) ball query with the same fill rules as the library.
pub fn exhaustive_ball_query(
    centers: &[Point3],
    refs: &[Point3],
    radius: f64,
    samples: usize,
) -> (Vec<usize>, Vec<bool>) {
    let r2 = radius * radius;
    let mut idx = Vec::new();
    let mut fallback = Vec::new();
    for c in centers {
        let mut all: Vec<(f64, usize)> = refs.iter().enumerate().map(|(i, r)| (dist2(c, r), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let inside: Vec<usize> = all.iter().filter(|(d, _)| *d <= r2).map(|x| x.1).collect();
        if inside.is_empty() {
            idx.extend(std::iter::repeat_n(all[0].1, samples));
            fallback.push(true);
        } else {
            for s in 0..samples {
                idx.push(*inside.get(s).unwrap_or(&inside[0]));
            }
            fallback.push(false);
        }
    }
    (idx, fallback)
}

/// O(N²) k-NN lists excluding self, ties to lower index.
pub fn exhaustive_knn(points: &[Point3], k: usize) -> Vec<Vec<usize>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut all: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(j, q)| (dist2(p, q), j))
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            all.into_iter().take(k).map(|x| x.1).collect()
        })
        .collect()
}

/// Relabeling-based FH segmentation: no union-find, component sizes counted
/// directly, internal difference tracked per label. Asserts the merge
/// predicate on every accepted merge.
pub fn brute_force_fh(num_nodes: usize, edges: &[WeightedEdge], k: f64, min_size: usize) -> Vec<usize> {
    let mut label: Vec<usize> = (0..num_nodes).collect();
    let mut internal = vec![0.0f64; num_nodes];
    let size_of = |label: &[usize], l: usize| label.iter().filter(|&&x| x == l).count();
    let relabel = |label: &mut Vec<usize>, from: usize, to: usize| {
        for x in label.iter_mut() {
            if *x == from {
                *x = to;
            }
        }
    };
    for e in edges {
        let (la, lb) = (label[e.a], label[e.b]);
        if la == lb {
            continue;
        }
        let mint_a = internal[la] + k / size_of(&label, la) as f64;
        let mint_b = internal[lb] + k / size_of(&label, lb) as f64;
        if e.weight <= mint_a.min(mint_b) {
            // spanning edges arrive in ascending order, so the new
            // internal difference is this edge's weight
            assert!(e.weight >= internal[la] && e.weight >= internal[lb]);
            relabel(&mut label, lb, la);
            internal[la] = e.weight;
        }
    }
    if min_size > 1 {
        for e in edges {
            let (la, lb) = (label[e.a], label[e.b]);
            if la != lb && (size_of(&label, la) < min_size || size_of(&label, lb) < min_size) {
                relabel(&mut label, lb, la);
            }
        }
    }
    first_occurrence(&label)
}

pub fn first_occurrence(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::BTreeMap::new();
    labels
        .iter()
        .map(|&l| {
            let n = map.len();
            *map.entry(l).or_insert(n)
        })
        .collect()
}

/// Connected component label per node of an undirected edge list.
pub fn connected_components(num_nodes: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); num_nodes];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut comp = vec![usize::MAX; num_nodes];
    let mut next = 0;
    for s in 0..num_nodes {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = next;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Random sorted edge set over `n` nodes with quantized weights so ties occur.
pub fn random_weighted_graph(rng: &mut ChaCha8Rng, n: usize, degree: usize) -> Vec<WeightedEdge> {
    let mut edges = Vec::new();
    for a in 0..n {
        for _ in 0..degree {
            let b = rng.random_range(0..n);
            if a != b {
                let w = rng.random_range(0..20) as f64 * 0.01;
                edges.push(WeightedEdge {
                    weight: w,
                    a: a.min(b),
                    b: a.max(b),
                });
            }
        }
    }
    edges.sort_by_key(|e| (e.a, e.b));
    edges.dedup_by(|x, y| (x.a, x.b) == (y.a, y.b));
    spg_core::oversegment::sort_edges(&mut edges);
    edges
}

/// Plane patch of `n` points on z = 0 spanning `[x0, x0 + 1] × [0, 1]`.
pub fn plane_patch(rng: &mut ChaCha8Rng, n: usize, x0: f64) -> Vec<Point3> {
    (0..n)
        .map(|_| [x0 + rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), 0.0])
        .collect()
}

/// Random box, center in [-1, 1)³, sizes in [0.2, 2).
pub fn random_box(rng: &mut ChaCha8Rng) -> [f64; 6] {
    [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(0.2..2.0),
        rng.random_range(0.2..2.0),
        rng.random_range(0.2..2.0),
    ]
}

/// True when no interval endpoint of `a` lies within `gap` of any endpoint of `b`.
pub fn boxes_away_from_kinks(a: &[f64; 6], b: &[f64; 6], gap: f64) -> bool {
    (0..3).all(|ax| {
        let ea = [a[ax] - 0.5 * a[ax + 3], a[ax] + 0.5 * a[ax + 3]];
        let eb = [b[ax] - 0.5 * b[ax + 3], b[ax] + 0.5 * b[ax + 3]];
        ea.iter().all(|x| eb.iter().all(|y| (x - y).abs() > gap))
    })
}
