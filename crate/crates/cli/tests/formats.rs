use std::path::PathBuf;

use spg_cli::formats::{
    parse_ground_truth, parse_prediction, parse_scene, rle_encode, write_ground_truth, write_prediction,
    write_scene_ascii, write_scene_binary, FormatError, GroundTruthRecord, Location, Prediction,
};
use spg_core::geometry::PointCloud;
use spg_core::metrics::Category;
use spg_core::scene::synthetic_room;

fn fixture(name: &str) -> Vec<u8> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/malformed").join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn check(err: FormatError, kind: &str, location: Location) {
    assert_eq!((err.kind, err.location), (kind, location), "{err}");
    assert!(err.to_string().contains(&location.to_string()));
}

#[test]
fn malformed_scenes_are_rejected_with_offsets() {
    let cases = [
        ("scene_truncated.txt", "truncated scene", Location::Line(4)),
        ("scene_nan.txt", "invalid coordinate", Location::Line(3)),
        ("scene_inf.txt", "invalid coordinate", Location::Line(2)),
        ("scene_word.txt", "invalid coordinate", Location::Line(3)),
        ("scene_short_record.txt", "malformed record", Location::Line(2)),
        ("scene_header.txt", "invalid header", Location::Line(1)),
        ("scene_trailing.txt", "trailing data", Location::Line(3)),
        ("scene_color.txt", "invalid color", Location::Line(2)),
        ("scene_bin_truncated.bin", "truncated scene", Location::Byte(32)),
        ("scene_bin_nan.bin", "invalid coordinate", Location::Byte(12)),
        ("scene_bin_header.bin", "truncated scene", Location::Byte(6)),
        ("scene_bin_trailing.bin", "trailing data", Location::Byte(32)),
    ];
    for (name, kind, loc) in cases {
        check(parse_scene(&fixture(name)).unwrap_err(), kind, loc);
    }
}

#[test]
fn malformed_predictions_are_rejected_with_offsets() {
    let cases = [
        ("pred_box_arity.txt", "malformed prediction", Location::Line(1)),
        ("pred_missing_score.txt", "malformed prediction", Location::Line(2)),
        ("pred_odd_runs.txt", "malformed mask", Location::Line(3)),
        ("pred_run_value.txt", "malformed mask", Location::Line(3)),
        ("pred_zero_run.txt", "malformed mask", Location::Line(3)),
        ("pred_score.txt", "invalid score", Location::Line(2)),
        ("pred_truncated.txt", "truncated prediction", Location::Line(3)),
        ("pred_trailing.txt", "trailing data", Location::Line(4)),
    ];
    for (name, kind, loc) in cases {
        let text = String::from_utf8(fixture(name)).unwrap();
        check(parse_prediction(&text).unwrap_err(), kind, loc);
    }
}

#[test]
fn malformed_ground_truth_is_rejected_with_offsets() {
    let cases = [
        ("gt_rle_sum.txt", "mask length mismatch", Location::Line(2)),
        ("gt_category.txt", "invalid category", Location::Line(1)),
        ("gt_duplicate.txt", "duplicate id", Location::Line(2)),
        ("gt_short.txt", "malformed record", Location::Line(1)),
        ("gt_nan.txt", "invalid coordinate", Location::Line(1)),
        ("gt_count.txt", "invalid count", Location::Line(1)),
        ("gt_id.txt", "invalid id", Location::Line(1)),
    ];
    for (name, kind, loc) in cases {
        let text = String::from_utf8(fixture(name)).unwrap();
        check(parse_ground_truth(&text).unwrap_err(), kind, loc);
    }
}

#[test]
fn scenes_round_trip() {
    let scene = synthetic_room(500, 3, 4).unwrap().cloud;
    let back = parse_scene(write_scene_ascii(&scene).as_bytes()).unwrap();
    assert_eq!(back, scene);

    // binary narrows to f32, so start from f32-representable values
    let narrow = |v: f64| f64::from(v as f32);
    let pos = scene.positions().iter().map(|p| p.map(narrow)).collect();
    let col = scene.colors().iter().map(|c| c.map(narrow)).collect();
    let scene = PointCloud::new(pos, col).unwrap();
    let bytes = write_scene_binary(&scene);
    assert_eq!(bytes.len(), 8 + 24 * 500);
    assert_eq!(parse_scene(&bytes).unwrap(), scene);
}

#[test]
fn predictions_round_trip_bit_exactly() {
    let odd = [0.1 + 0.2, -1e-300, 1.0 / 3.0, 12345.678901234567, f64::MIN_POSITIVE, 7e22];
    for (i, &v) in odd.iter().enumerate() {
        let p = Prediction {
            bbox: [v, -v, v * 3.0, 0.5, 1.0 / 7.0, 2.0],
            score: v,
            mask: (0..37 + i).map(|j| (j * 7 + i) % 5 < 2).collect(),
        };
        let back = parse_prediction(&write_prediction(&p)).unwrap();
        assert_eq!(back.bbox.map(f64::to_bits), p.bbox.map(f64::to_bits));
        assert_eq!(back.score.to_bits(), p.score.to_bits());
        assert_eq!(back.mask, p.mask);
    }
}

#[test]
fn ground_truth_round_trips() {
    let records: Vec<GroundTruthRecord> = (0..5)
        .map(|i| GroundTruthRecord {
            id: format!("scene{i}_obj-{i}.a"),
            category: if i % 2 == 0 { Category::Unique } else { Category::Multiple },
            bbox: [i as f64 * 0.1, 0.3, -0.7, 1.1, 0.9, 0.25],
            mask: (0..(i * 13)).map(|j| j % 3 == 0).collect(),
        })
        .collect();
    assert_eq!(parse_ground_truth(&write_ground_truth(&records)).unwrap(), records);
}

#[test]
fn rle_runs_cover_the_mask() {
    let mask: Vec<bool> = (0..1000).map(|i| (i / 7) % 3 == 0).collect();
    let runs = rle_encode(&mask);
    assert_eq!(runs.iter().map(|r| r.1).sum::<usize>(), mask.len());
    assert!(runs.windows(2).all(|w| w[0].0 != w[1].0));
}
