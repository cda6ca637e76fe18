use proptest::prelude::*;

use stripmask_core::adapter::{
    read_ground_truth_json, read_mask_json, read_series_csv, read_series_csv_labeled, write_ground_truth_json,
    write_mask_json, write_series_csv, LoadedMask,
};
use stripmask_core::synth::make_instance;
use stripmask_core::{DatasetKind, Error, Instance, Mask, Series, Strip, StripMask};

#[test]
fn synthetic_instance_survives_disk() {
    let dir = tempfile::tempdir().unwrap();
    let inst: Instance = make_instance(DatasetKind::Mixture, 8).unwrap();
    let xs = dir.path().join("x.csv");
    let gs = dir.path().join("gt.json");
    write_series_csv(&inst.x, &xs).unwrap();
    write_ground_truth_json(&inst.gt, &gs).unwrap();
    let x: Series = read_series_csv(&xs).unwrap();
    assert_eq!(x, inst.x);
    assert_eq!(read_ground_truth_json(&gs, 50, 50).unwrap(), inst.gt);
    let (_, labels) = read_series_csv_labeled::<f64>(&xs).unwrap();
    assert_eq!(labels.first().map(String::as_str), Some("f1"));
    assert_eq!(labels.len(), 50);
}

#[test]
fn strip_mask_file_keeps_strips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let m = StripMask::new(vec![Strip::new(0, 1, 2), Strip::new(2, 0, 3)], 3, 4).unwrap();
    write_mask_json::<f64>(&m, &path).unwrap();
    match read_mask_json::<f64>(&path).unwrap() {
        LoadedMask::Strip(back) => assert_eq!(back, m),
        other => panic!("expected strips, got {other:?}"),
    }
}

#[test]
fn missing_and_malformed_files() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        read_series_csv::<f64>(&dir.path().join("none.csv")),
        Err(Error::Io { .. })
    ));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "feature,t1,t2\nf1,1,2\nf2,3\n").unwrap();
    match read_series_csv::<f64>(&bad) {
        Err(Error::Format { message, .. }) => assert!(message.contains("line 3"), "{message}"),
        other => panic!("expected a format error, got {other:?}"),
    }
    let gt = dir.path().join("gt.json");
    std::fs::write(&gt, r#"{"salient":[[4,1]]}"#).unwrap();
    assert!(read_ground_truth_json(&gt, 3, 3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dense_mask_file_round_trip(vals in prop::collection::vec(0.0f64..=1.0, 1..40), cols in 1usize..8) {
        let t = cols.min(vals.len());
        let d = vals.len() / t;
        let m = Mask::new(d, t, vals[..d * t].to_vec()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        write_mask_json(&m, &path).unwrap();
        prop_assert_eq!(read_mask_json::<f64>(&path).unwrap().to_dense(), m);
    }

    #[test]
    fn series_file_round_trip(vals in prop::collection::vec(-1e12f64..1e12, 1..30)) {
        let x = Series::new(1, vals.len(), vals).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_series_csv(&x, &path).unwrap();
        let back: Series = read_series_csv(&path).unwrap();
        prop_assert!(back.values().iter().zip(x.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
