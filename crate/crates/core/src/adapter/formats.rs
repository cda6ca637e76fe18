//! On-disk formats. All indices in files are 1-based.
//!
//! * Series CSV: header `feature,t1,...,tT`, then one row per feature holding
//!   a label followed by `T` numbers.
//! * Mask JSON: `{"type":"strip"|"dense","d":D,"t":T,"strips":[...],"dense":[[...]]}`;
//!   `strips` is present for strip masks only.
//! * Ground truth JSON: `{"salient":[[d,t],...]}`.
//!
//! Numbers are written as shortest round-trip decimals.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::MaskRef;
use crate::metrics::GroundTruth;
use crate::scalar::Scalar;
use crate::series::{DenseMask, TimeSeries};
use crate::strip::{Strip, StripMask};

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::format(path, "not a file path"))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

pub fn read_series_csv<S: Scalar>(path: &Path) -> Result<TimeSeries<S>> {
    read_series_csv_labeled(path).map(|(x, _)| x)
}

/// Like [`read_series_csv`], also returning the feature labels.
pub fn read_series_csv_labeled<S: Scalar>(path: &Path) -> Result<(TimeSeries<S>, Vec<String>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series_csv_labeled(&text).map_err(|msg| Error::format(path, msg))
}

/// Parses series CSV text; errors name the offending line.
pub fn parse_series_csv<S: Scalar>(text: &str) -> std::result::Result<TimeSeries<S>, String> {
    parse_series_csv_labeled(text).map(|(x, _)| x)
}

pub fn parse_series_csv_labeled<S: Scalar>(
    text: &str,
) -> std::result::Result<(TimeSeries<S>, Vec<String>), String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| e.to_string())?,
        None => return Err("empty file".into()),
    };
    let t_steps = header.len().saturating_sub(1);
    if t_steps == 0 {
        return Err("header must list at least one time step".into());
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| e.to_string())?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != t_steps + 1 {
            return Err(format!(
                "line {line}: expected {} cells, found {} (ragged row)",
                t_steps + 1,
                rec.len()
            ));
        }
        for (k, cell) in rec.iter().skip(1).enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| format!("line {line}, column {}: {cell:?} is not a number", k + 2))?;
            if !v.is_finite() {
                return Err(format!("line {line}, column {}: value is not finite", k + 2));
            }
            values.push(S::from_f64_lossy(v));
        }
        labels.push(rec[0].to_string());
    }
    if labels.is_empty() {
        return Err("no feature rows".into());
    }
    let x = TimeSeries::new(labels.len(), t_steps, values).map_err(|e| e.to_string())?;
    Ok((x, labels))
}

/// Series as CSV text; feature labels default to `f1..fD`.
pub fn series_to_csv<S: Scalar>(x: &TimeSeries<S>, labels: Option<&[String]>) -> String {
    let mut out = String::from("feature");
    for t in 1..=x.t_steps() {
        out.push_str(&format!(",t{t}"));
    }
    out.push('\n');
    for (d, row) in x.rows().enumerate() {
        match labels.and_then(|l| l.get(d)) {
            Some(l) => out.push_str(l),
            None => out.push_str(&format!("f{}", d + 1)),
        }
        for v in row {
            out.push_str(&format!(",{:?}", v.as_f64()));
        }
        out.push('\n');
    }
    out
}

pub fn write_series_csv<S: Scalar>(x: &TimeSeries<S>, path: &Path) -> Result<()> {
    write_atomic(path, series_to_csv(x, None).as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MaskType {
    Strip,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StripRecord {
    feature: usize,
    start: usize,
    length: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MaskRecord {
    #[serde(rename = "type")]
    kind: MaskType,
    d: usize,
    t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strips: Option<Vec<StripRecord>>,
    /// Optional on input for strip masks, always written.
    #[serde(default)]
    dense: Option<Vec<Vec<f64>>>,
}

/// A mask read back from JSON.
#[derive(Debug, Clone, PartialEq)]
pub enum LoadedMask<S> {
    Strip(StripMask),
    Dense(DenseMask<S>),
}

impl<S: Scalar> LoadedMask<S> {
    pub fn to_dense(&self) -> DenseMask<S> {
        match self {
            LoadedMask::Strip(m) => m.to_dense(),
            LoadedMask::Dense(m) => m.clone(),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        match self {
            LoadedMask::Strip(m) => m.shape(),
            LoadedMask::Dense(m) => m.shape(),
        }
    }

    pub fn as_ref(&self) -> MaskRef<'_, S> {
        match self {
            LoadedMask::Strip(m) => MaskRef::Strip(m),
            LoadedMask::Dense(m) => MaskRef::Dense(m),
        }
    }
}

pub fn mask_to_json<S: Scalar>(mask: MaskRef<'_, S>) -> String {
    let record = match mask {
        MaskRef::Strip(m) => MaskRecord {
            kind: MaskType::Strip,
            d: m.d_features(),
            t: m.t_steps(),
            strips: Some(
                m.strips()
                    .iter()
                    .map(|s| StripRecord {
                        feature: s.feature + 1,
                        start: s.start + 1,
                        length: s.length,
                    })
                    .collect(),
            ),
            dense: Some(
                m.dense()
                    .chunks(m.t_steps())
                    .map(|r| r.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect())
                    .collect(),
            ),
        },
        MaskRef::Dense(m) => MaskRecord {
            kind: MaskType::Dense,
            d: m.d_features(),
            t: m.t_steps(),
            strips: None,
            dense: Some(m.rows().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()),
        },
    };
    let mut s = serde_json::to_string(&record).expect("mask records always serialize");
    s.push('\n');
    s
}

pub fn write_mask_json<'m, S: Scalar>(mask: impl Into<MaskRef<'m, S>>, path: &Path) -> Result<()> {
    write_atomic(path, mask_to_json(mask.into()).as_bytes())
}

pub fn parse_mask_json<S: Scalar>(text: &str) -> std::result::Result<LoadedMask<S>, String> {
    let rec: MaskRecord = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let dense = match &rec.dense {
        Some(rows) => {
            if rows.len() != rec.d || rows.iter().any(|r| r.len() != rec.t) {
                return Err(format!("dense matrix does not match d={} t={}", rec.d, rec.t));
            }
            let values = rows.iter().flatten().map(|&v| S::from_f64_lossy(v)).collect();
            Some(DenseMask::new(rec.d, rec.t, values).map_err(|e| e.to_string())?)
        }
        None => None,
    };
    match rec.kind {
        MaskType::Dense => {
            if rec.strips.is_some() {
                return Err("dense masks carry no strips".into());
            }
            Ok(LoadedMask::Dense(dense.ok_or("dense mask without dense matrix")?))
        }
        MaskType::Strip => {
            let strips = rec
                .strips
                .ok_or("strip mask without strips")?
                .into_iter()
                .map(|s| {
                    if s.feature == 0 || s.start == 0 {
                        Err(format!("strip indices are 1-based, got {s:?}"))
                    } else {
                        Ok(Strip::new(s.feature - 1, s.start - 1, s.length))
                    }
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            let mask = StripMask::new(strips, rec.d, rec.t).map_err(|e| e.to_string())?;
            if dense.is_some_and(|d| mask.to_dense::<S>() != d) {
                return Err("dense matrix disagrees with the strips".into());
            }
            Ok(LoadedMask::Strip(mask))
        }
    }
}

pub fn read_mask_json<S: Scalar>(path: &Path) -> Result<LoadedMask<S>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mask_json(&text).map_err(|msg| Error::format(path, msg))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroundTruthRecord {
    salient: Vec<[usize; 2]>,
}

pub fn ground_truth_to_json(gt: &GroundTruth) -> String {
    let rec = GroundTruthRecord {
        salient: gt.points().map(|(d, t)| [d + 1, t + 1]).collect(),
    };
    let mut s = serde_json::to_string(&rec).expect("ground truth always serializes");
    s.push('\n');
    s
}

pub fn write_ground_truth_json(gt: &GroundTruth, path: &Path) -> Result<()> {
    write_atomic(path, ground_truth_to_json(gt).as_bytes())
}

/// Parses ground truth for an input of the given shape.
pub fn parse_ground_truth_json(
    text: &str,
    d_features: usize,
    t_steps: usize,
) -> std::result::Result<GroundTruth, String> {
    let rec: GroundTruthRecord = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let points = rec
        .salient
        .into_iter()
        .map(|[d, t]| {
            if d == 0 || t == 0 {
                Err(format!("salient indices are 1-based, got [{d}, {t}]"))
            } else {
                Ok((d - 1, t - 1))
            }
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    GroundTruth::new(d_features, t_steps, points).map_err(|e| e.to_string())
}

pub fn read_ground_truth_json(path: &Path, d_features: usize, t_steps: usize) -> Result<GroundTruth> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_ground_truth_json(&text, d_features, t_steps).map_err(|msg| Error::format(path, msg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_two_by_three() {
        let x: TimeSeries<f64> = parse_series_csv("feature,t1,t2,t3\nhr,1,2,3\nbp,4.5,-1e-3,0\n").unwrap();
        assert_eq!(x.shape(), (2, 3));
        assert_eq!(x.row(1), &[4.5, -0.001, 0.0]);
    }

    #[test]
    fn ragged_row_names_line() {
        let err = parse_series_csv::<f64>("feature,t1,t2,t3\na,1,2,3\nb,1,2\n").unwrap_err();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("ragged"));
    }

    #[test]
    fn non_numeric_and_empty_rejected() {
        let err = parse_series_csv::<f64>("feature,t1\na,abc\n").unwrap_err();
        assert!(err.contains("not a number"), "{err}");
        assert_eq!(parse_series_csv::<f64>("").unwrap_err(), "empty file");
        assert!(parse_series_csv::<f64>("feature,t1\n").is_err());
        assert!(parse_series_csv::<f64>("feature,t1\na,NaN\n").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = read_series_csv::<f64>(Path::new("/nonexistent/series.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn strip_mask_json_has_both_views() {
        let m = StripMask::new(vec![Strip::new(0, 1, 2)], 2, 3).unwrap();
        let json = mask_to_json::<f64>(MaskRef::Strip(&m));
        assert_eq!(
            json.trim(),
            r#"{"type":"strip","d":2,"t":3,"strips":[{"feature":1,"start":2,"length":2}],"dense":[[0.0,1.0,1.0],[0.0,0.0,0.0]]}"#
        );
        assert_eq!(parse_mask_json::<f64>(&json).unwrap(), LoadedMask::Strip(m));
    }

    #[test]
    fn dense_mask_json_has_no_strips() {
        let m = DenseMask::<f64>::from_rows(&[vec![0.25, 1.0]]).unwrap();
        let json = mask_to_json(MaskRef::Dense(&m));
        assert_eq!(json.trim(), r#"{"type":"dense","d":1,"t":2,"dense":[[0.25,1.0]]}"#);
        assert_eq!(parse_mask_json::<f64>(&json).unwrap(), LoadedMask::Dense(m));
    }

    #[test]
    fn inconsistent_strip_json_rejected() {
        let json = r#"{"type":"strip","d":1,"t":3,"strips":[{"feature":1,"start":1,"length":1}],"dense":[[1,1,0]]}"#;
        assert!(parse_mask_json::<f64>(json).is_err());
        let zero_based = r#"{"type":"strip","d":1,"t":3,"strips":[{"feature":0,"start":1,"length":1}],"dense":[[1,0,0]]}"#;
        assert!(parse_mask_json::<f64>(zero_based).is_err());
        let unknown = r#"{"type":"dense","d":1,"t":1,"dense":[[1]],"extra":1}"#;
        assert!(parse_mask_json::<f64>(unknown).is_err());
        let no_matrix = r#"{"type":"dense","d":1,"t":1}"#;
        assert!(parse_mask_json::<f64>(no_matrix).is_err());
    }

    #[test]
    fn strip_json_without_dense_is_accepted() {
        let json = r#"{"type":"strip","d":1,"t":3,"strips":[{"feature":1,"start":2,"length":2}]}"#;
        let m = parse_mask_json::<f64>(json).unwrap();
        assert_eq!(m.to_dense().values(), &[0.0, 1.0, 1.0]);
    }

    #[test]
    fn ground_truth_json() {
        let gt = GroundTruth::new(3, 4, [(0, 0), (2, 3)]).unwrap();
        let json = ground_truth_to_json(&gt);
        assert_eq!(json.trim(), r#"{"salient":[[1,1],[3,4]]}"#);
        assert_eq!(parse_ground_truth_json(&json, 3, 4).unwrap(), gt);
        assert!(parse_ground_truth_json(&json, 2, 4).is_err());
        assert!(parse_ground_truth_json(r#"{"salient":[[0,1]]}"#, 3, 4).is_err());
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = TimeSeries::<f64>::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-2.5e-300, 7.0]]).unwrap();
        let p = dir.path().join("x.csv");
        write_series_csv(&x, &p).unwrap();
        assert_eq!(read_series_csv::<f64>(&p).unwrap(), x);
        let m = StripMask::new(vec![Strip::new(1, 0, 2)], 2, 2).unwrap();
        let mp = dir.path().join("m.json");
        write_mask_json::<f64>(&m, &mp).unwrap();
        assert_eq!(read_mask_json::<f64>(&mp).unwrap(), LoadedMask::Strip(m));
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(vals in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 6)) {
            let x = TimeSeries::new(2, 3, vals).unwrap();
            let back: TimeSeries<f64> = parse_series_csv(&series_to_csv(&x, None)).unwrap();
            for (a, b) in x.values().iter().zip(back.values()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }

        #[test]
        fn dense_json_round_trip(vals in prop::collection::vec(0.0f64..=1.0, 6)) {
            let m = DenseMask::new(3, 2, vals).unwrap();
            let back = parse_mask_json::<f64>(&mask_to_json(MaskRef::Dense(&m))).unwrap();
            prop_assert_eq!(back, LoadedMask::Dense(m));
        }
    }
}
