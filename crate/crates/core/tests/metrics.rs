mod common;

use common::*;
use rand::Rng;
use spg_core::geometry::Aabb;
use spg_core::metrics::{box_iou_3d, evaluate, mask_iou, Category, EvalAccumulator, EvalSample};

fn random_sample(r: &mut rand_chacha::ChaCha8Rng) -> EvalSample {
    let n = r.random_range(0..40);
    let gt_box = Aabb::from_array(random_box(r)).unwrap();
    let jitter: [f64; 6] = std::array::from_fn(|i| if i < 3 { r.random_range(-0.5..0.5) } else { r.random_range(0.7..1.4) });
    let g = gt_box.to_array();
    let pred_box = Aabb::from_array([
        g[0] + jitter[0],
        g[1] + jitter[1],
        g[2] + jitter[2],
        g[3] * jitter[3],
        g[4] * jitter[4],
        g[5] * jitter[5],
    ])
    .unwrap();
    EvalSample {
        pred_mask: (0..n).map(|_| r.random()).collect(),
        gt_mask: (0..n).map(|_| r.random()).collect(),
        pred_box,
        gt_box,
        category: if r.random_bool(0.2) { Category::Unique } else { Category::Multiple },
    }
}

#[test]
fn monotone_accuracy_and_stratum_identity() {
    let mut r = rng(40);
    let thresholds = [0.1, 0.25, 0.4, 0.5, 0.75, 0.9];
    for _ in 0..1000 {
        let count = r.random_range(1..30);
        let samples: Vec<EvalSample> = (0..count).map(|_| random_sample(&mut r)).collect();
        let rep = evaluate(&samples, &thresholds).unwrap();
        for s in [Some(&rep.overall), rep.unique.as_ref(), rep.multiple.as_ref()].into_iter().flatten() {
            assert!(s.accuracy.windows(2).all(|w| w[1].1 <= w[0].1));
            assert!(s.acc_at(0.5).unwrap() <= s.acc_at(0.25).unwrap());
        }
        let strata: Vec<_> = Category::ALL.iter().filter_map(|&c| rep.stratum(c)).collect();
        let n = rep.overall.count as f64;
        assert_eq!(strata.iter().map(|s| s.count).sum::<usize>(), rep.overall.count);
        for (i, &(_, overall)) in rep.overall.accuracy.iter().enumerate() {
            let weighted: f64 = strata.iter().map(|s| s.accuracy[i].1 * s.count as f64).sum::<f64>() / n;
            assert!((weighted - overall).abs() < 1e-12);
        }
        let weighted_miou: f64 = strata.iter().map(|s| s.miou * s.count as f64).sum::<f64>() / n;
        assert!((weighted_miou - rep.overall.miou).abs() < 1e-12);
    }
}

#[test]
fn ious_are_symmetric() {
    let mut r = rng(41);
    for _ in 0..500 {
        let s = random_sample(&mut r);
        assert_eq!(mask_iou(&s.pred_mask, &s.gt_mask).unwrap(), mask_iou(&s.gt_mask, &s.pred_mask).unwrap());
        assert_eq!(box_iou_3d(&s.pred_box, &s.gt_box), box_iou_3d(&s.gt_box, &s.pred_box));
        let iou = box_iou_3d(&s.pred_box, &s.gt_box);
        assert!((0.0..=1.0).contains(&iou));
    }
}

#[test]
fn sharded_evaluation_merges_to_whole() {
    let mut r = rng(42);
    let samples: Vec<EvalSample> = (0..200).map(|_| random_sample(&mut r)).collect();
    let whole = evaluate(&samples, &[0.25, 0.5]).unwrap();
    let mut shards = samples.chunks(37).map(|chunk| {
        let mut acc = EvalAccumulator::new(&[0.25, 0.5]).unwrap();
        for s in chunk {
            acc.push(s).unwrap();
        }
        acc
    });
    let first = shards.next().unwrap();
    let merged = shards.try_fold(first, |a, b| a.merge(b)).unwrap().finish().unwrap();
    assert_eq!(merged, whole);
}

#[test]
fn perfect_predictions() {
    let mut r = rng(43);
    let samples: Vec<EvalSample> = (0..25)
        .map(|_| {
            let mut s = random_sample(&mut r);
            s.pred_box = s.gt_box;
            s.pred_mask = s.gt_mask.clone();
            s
        })
        .collect();
    let rep = evaluate(&samples, &[0.25, 0.5]).unwrap();
    assert_eq!(rep.overall.accuracy, vec![(0.25, 1.0), (0.5, 1.0)]);
    assert_eq!(rep.overall.miou, 1.0);
}
