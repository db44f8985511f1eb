mod common;

use common::*;
use rand::Rng;
use spg_core::geometry::{build_knn_graph, estimate_normals, PointCloud};
use spg_core::oversegment::{edge_weights, oversegment, segment_graph, OversegmentParams};
use spg_core::scene::synthetic_room;

#[test]
fn union_find_matches_relabeling_reference_on_random_graphs() {
    let mut r = rng(10);
    for _ in 0..40 {
        let n = r.random_range(2..=500);
        let edges = random_weighted_graph(&mut r, n, 3);
        let k = r.random_range(0.01..0.5);
        let min_size = r.random_range(1..=6);
        assert_eq!(
            segment_graph(n, &edges, k, min_size),
            brute_force_fh(n, &edges, k, min_size)
        );
    }
}

#[test]
fn union_find_matches_reference_on_point_cloud_graphs() {
    let mut r = rng(11);
    for _ in 0..10 {
        let n = r.random_range(50..=500);
        let cloud = random_cloud(&mut r, n, 1.0);
        let params = OversegmentParams {
            use_color: r.random(),
            merge_threshold: r.random_range(0.01..1.0),
            min_segment_size: r.random_range(1..=10),
            ..Default::default()
        };
        let g = build_knn_graph(&cloud, params.k_nn).unwrap();
        let normals = estimate_normals(&cloud, &g).unwrap().normals;
        let edges = edge_weights(&cloud, &normals, &g, &params);
        let reference = brute_force_fh(n, &edges, params.merge_threshold, params.min_segment_size);
        let got = oversegment(&cloud, &params, &g).unwrap();
        assert_eq!(got.labels(), reference.as_slice());
    }
}

#[test]
fn disjoint_patches_never_merge() {
    let mut r = rng(12);
    let mut pts = plane_patch(&mut r, 300, 0.0);
    pts.extend(plane_patch(&mut r, 300, 2.0));
    let cloud = PointCloud::from_positions(pts).unwrap();
    let g = build_knn_graph(&cloud, 8).unwrap();
    let comps = connected_components(cloud.len(), &g.undirected_edges());
    assert!(comps[..300].iter().all(|&c| comps[300..].iter().all(|&d| c != d)));

    // even a huge threshold cannot bridge the gap
    for threshold in [0.05, 100.0] {
        let params = OversegmentParams {
            merge_threshold: threshold,
            ..Default::default()
        };
        let p = oversegment(&cloud, &params, &g).unwrap();
        assert!(p.num_segments() >= 2);
        let left: std::collections::HashSet<_> = p.labels()[..300].iter().collect();
        assert!(p.labels()[300..].iter().all(|l| !left.contains(l)));
        // every segment stays inside one graph component
        for seg in 0..p.num_segments() {
            let members: Vec<usize> = (0..cloud.len()).filter(|&i| p.labels()[i] == seg).collect();
            assert!(members.iter().all(|&i| comps[i] == comps[members[0]]));
        }
    }
}

#[test]
fn partition_invariants_on_room() {
    let scene = synthetic_room(4000, 4, 3).unwrap();
    let g = build_knn_graph(&scene.cloud, 8).unwrap();
    let p = oversegment(&scene.cloud, &OversegmentParams::default(), &g).unwrap();
    let m = p.num_segments();
    assert!(m > 1 && m < scene.cloud.len());
    assert!(p.labels().iter().all(|&l| l < m));
    assert_eq!(p.segment_sizes().iter().sum::<usize>(), scene.cloud.len());
    assert!(p.segment_sizes().iter().all(|&s| s >= 1));
    for seg in 0..m {
        let members: Vec<_> = (0..scene.cloud.len()).filter(|&i| p.labels()[i] == seg).collect();
        for a in 0..3 {
            let mean = members.iter().map(|&i| scene.cloud.positions()[i][a]).sum::<f64>() / members.len() as f64;
            assert!((mean - p.centroids()[seg][a]).abs() < 1e-6);
        }
    }
    // first-occurrence numbering
    let mut next = 0;
    for &l in p.labels() {
        assert!(l <= next);
        if l == next {
            next += 1;
        }
    }
    // deterministic
    let again = oversegment(&scene.cloud, &OversegmentParams::default(), &g).unwrap();
    assert_eq!(p, again);
}

#[test]
fn segment_count_weakly_decreases_with_threshold() {
    let mut r = rng(13);
    for trial in 0..10 {
        let scene = synthetic_room(1500, 3, trial).unwrap();
        let cloud = if trial % 2 == 0 { scene.cloud } else { random_cloud(&mut r, 800, 1.0) };
        let g = build_knn_graph(&cloud, 8).unwrap();
        let mut last = usize::MAX;
        for threshold in [0.01, 0.05, 0.2, 1.0, 5.0] {
            let params = OversegmentParams {
                merge_threshold: threshold,
                min_segment_size: 1,
                ..Default::default()
            };
            let m = oversegment(&cloud, &params, &g).unwrap().num_segments();
            assert!(m <= last, "trial {trial}: m={m} after {last}");
            last = m;
        }
    }
}
