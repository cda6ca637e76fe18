//! `render`: SVG heatmap of a mask, one cell per (feature, time step).

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;

use stripmask_core::adapter::{read_ground_truth_json, read_mask_json, read_series_csv_labeled, write_atomic};
use stripmask_core::{GroundTruth, Mask, Series};

use crate::error::CliResult;

#[derive(Debug, Clone, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub mask: PathBuf,
    /// Series CSV supplying feature labels.
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Ground truth to outline.
    #[arg(long = "ground-truth")]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

const CELL: usize = 12;
const LEFT: usize = 64;
const TOP: usize = 8;
const BOTTOM: usize = 28;

const RED: [f64; 3] = [215.0, 48.0, 39.0];
const GREEN: [f64; 3] = [26.0, 152.0, 80.0];

/// Hex color on the red (0) to green (1) ramp.
pub fn ramp(v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let c: Vec<u8> = (0..3)
        .map(|i| (RED[i] + (GREEN[i] - RED[i]) * v).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Renders `mask` as SVG text. `labels` default to `f1..fD`.
pub fn heatmap_svg(mask: &Mask, labels: Option<&[String]>, gt: Option<&GroundTruth>) -> String {
    let (d, t) = mask.shape();
    let width = LEFT + t * CELL + 8;
    let height = TOP + d * CELL + BOTTOM;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="monospace" font-size="9">"#
    );
    let _ = writeln!(s, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(s, r#"<g id="cells">"#);
    for f in 0..d {
        for k in 0..t {
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"/>"#,
                LEFT + k * CELL,
                TOP + f * CELL,
                ramp(mask.get(f, k))
            );
        }
    }
    let _ = writeln!(s, "</g>");
    if let Some(gt) = gt {
        let _ = writeln!(s, r#"<g id="ground-truth" fill="none" stroke="black" stroke-width="1">"#);
        for (f, k) in gt.points() {
            let _ = writeln!(
                s,
                r#"<rect x="{}.5" y="{}.5" width="{}" height="{}"/>"#,
                LEFT + k * CELL,
                TOP + f * CELL,
                CELL - 1,
                CELL - 1
            );
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, r#"<g id="features" text-anchor="end">"#);
    for f in 0..d {
        let label = labels
            .and_then(|l| l.get(f))
            .map(|l| escape(l))
            .unwrap_or_else(|| format!("f{}", f + 1));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{label}</text>"#,
            LEFT - 4,
            TOP + f * CELL + CELL - 3
        );
    }
    let _ = writeln!(s, "</g>");
    let tick = (t / 10).max(1);
    let _ = writeln!(s, r#"<g id="time" text-anchor="middle">"#);
    for k in (0..t).filter(|k| k % tick == 0 || *k == t - 1) {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}">{}</text>"#,
            LEFT + k * CELL + CELL / 2,
            TOP + d * CELL + 12,
            k + 1
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    s
}

pub fn run_render(args: &RenderArgs) -> CliResult<()> {
    let mask: Mask = read_mask_json::<f64>(&args.mask)?.to_dense();
    let labels = match &args.series {
        Some(path) => {
            let (x, labels): (Series, Vec<String>) = read_series_csv_labeled(path)?;
            if x.shape() != mask.shape() {
                return Err(stripmask_core::Error::ShapeMismatch {
                    expected: x.shape(),
                    actual: mask.shape(),
                }
                .into());
            }
            Some(labels)
        }
        None => None,
    };
    let (d, t) = mask.shape();
    let gt = args
        .ground_truth
        .as_ref()
        .map(|p| read_ground_truth_json(p, d, t))
        .transpose()?;
    let svg = heatmap_svg(&mask, labels.as_deref(), gt.as_ref());
    write_atomic(&args.out, svg.as_bytes())?;
    Ok(())
}
