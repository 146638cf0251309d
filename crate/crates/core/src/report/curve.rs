use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::evalkit::MetricReport;

use super::tables::model_label;
use super::ReportError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub model: String,
    /// Bucket covers `[bucket_lo, bucket_hi)` normalized bytes.
    pub bucket_lo: usize,
    pub bucket_hi: usize,
    pub n: usize,
    pub mean_completeness: f64,
}

fn bucket(size: usize) -> (usize, usize) {
    let lo = if size <= 1 { 1 } else { 1usize << size.ilog2() };
    (lo, lo * 2)
}

/// Mean completeness per power-of-two file-size bucket and model. Buckets
/// without data are left out.
pub fn completeness_curve(reports: &[MetricReport]) -> Vec<CurvePoint> {
    let mut acc: BTreeMap<(String, usize), (f64, usize)> = BTreeMap::new();
    for r in reports {
        let Some(c) = r.completeness else { continue };
        let e = acc.entry((r.model.clone(), bucket(r.original_size).0)).or_default();
        e.0 += c;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|((model, lo), (sum, n))| CurvePoint {
            model,
            bucket_lo: lo,
            bucket_hi: lo * 2,
            n,
            mean_completeness: sum / n as f64,
        })
        .collect()
}

pub fn curve_csv(points: &[CurvePoint]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model", "bucket_lo", "bucket_hi", "n", "mean_completeness"])?;
    for p in points {
        w.write_record([
            p.model.clone(),
            p.bucket_lo.to_string(),
            p.bucket_hi.to_string(),
            p.n.to_string(),
            format!("{:.6}", p.mean_completeness),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Line plot of the curve with log2 size on x and completeness on y.
pub fn curve_svg(points: &[CurvePoint]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let xs: Vec<f64> = points.iter().map(|p| (p.bucket_lo as f64).log2()).collect();
    let (x0, x1) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (x0, x1) = if x0.is_finite() { (x0, x1.max(x0 + 1.0)) } else { (0.0, 1.0) };
    let y1 = points.iter().map(|p| p.mean_completeness).fold(1.0, f64::max);
    let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - y / y1 * (h - 2.0 * pad);

    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    s.push_str(&format!(
        "<line x1=\"{pad}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{0}\" stroke=\"black\"/>\n",
        h - pad,
        w - pad
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">file size (log2 normalized bytes)</text>\n",
        w / 2.0,
        h - 10.0
    ));
    s.push_str(&format!(
        "<text x=\"15\" y=\"{}\" transform=\"rotate(-90 15 {})\" text-anchor=\"middle\">completeness</text>\n",
        h / 2.0,
        h / 2.0
    ));
    let mut by_model: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for (p, x) in points.iter().zip(&xs) {
        by_model.entry(&p.model).or_default().push((sx(*x), sy(p.mean_completeness)));
    }
    for (i, (model, pts)) in by_model.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.1},{y:.1}")).collect();
        s.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>\n",
            w - pad - 120.0,
            pad + 15.0 * i as f64,
            model_label(model)
        ));
    }
    s.push_str("</svg>\n");
    s
}
