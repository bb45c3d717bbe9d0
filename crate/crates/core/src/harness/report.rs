//! ROC CSV files and a minimal SVG plot.

use std::fmt::Write as _;
use std::path::Path;

use super::metrics::RocPoint;
use crate::error::{Error, Result};
use crate::prep::io::write_atomic;

pub const ROC_HEADER: &str = "threshold,fpr,tpr";

pub fn encode_roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from(ROC_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.threshold, p.fpr, p.tpr);
    }
    out
}

pub fn write_roc_csv(path: &Path, points: &[RocPoint]) -> Result<()> {
    write_atomic(path, encode_roc_csv(points).as_bytes())
}

pub fn parse_roc_csv(text: &str, path: &Path) -> Result<Vec<RocPoint>> {
    let fail = |detail: String| Error::Format { path: path.to_path_buf(), detail };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(ROC_HEADER) {
        return Err(fail(format!("expected header `{ROC_HEADER}`")));
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| fail(format!("line {}: {e}", i + 2)))?;
        if vals.len() != 3 {
            return Err(fail(format!("line {}: expected 3 fields, got {}", i + 2, vals.len())));
        }
        points.push(RocPoint { threshold: vals[0], fpr: vals[1], tpr: vals[2] });
    }
    if points.is_empty() {
        return Err(fail("no ROC points".into()));
    }
    Ok(points)
}

pub fn read_roc_csv(path: &Path) -> Result<Vec<RocPoint>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_roc_csv(&text, path)
}

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// One polyline per curve plus the dashed chance diagonal, on a 400×400 plot.
pub fn render_roc_svg(curves: &[(String, Vec<RocPoint>)]) -> String {
    let (size, margin) = (400.0, 50.0);
    let total = size + 2.0 * margin;
    let x = |fpr: f64| margin + fpr * size;
    let y = |tpr: f64| margin + (1.0 - tpr) * size;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{margin}" y="{margin}" width="{size}" height="{size}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r##"<line class="chance" x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888888" stroke-dasharray="6,4"/>"##,
        x(0.0),
        y(0.0),
        x(1.0),
        y(1.0)
    );
    for (i, (label, pts)) in curves.iter().enumerate() {
        let coords: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", x(p.fpr), y(p.tpr))).collect();
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<polyline class="roc" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = margin + 20.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            x(0.55),
            escape(label)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">False positive rate</text>"#,
        margin + size / 2.0,
        total - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 15 {})">True positive rate</text>"#,
        margin + size / 2.0,
        margin + size / 2.0
    );
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
