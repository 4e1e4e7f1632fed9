//! Deterministic SVG scatter plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::Embedding;

/// Longest side of the drawing, in SVG user units.
pub const CANVAS: f64 = 1000.0;
pub const MARGIN: f64 = 0.05;

const CATEGORICAL: [&str; 10] =
    ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"];
const UNLABELLED: &str = "#3b5b92";
/// Anchors of a viridis-like ramp.
const RAMP: [[f64; 3]; 5] = [[68.0, 1.0, 84.0], [59.0, 82.0, 139.0], [33.0, 145.0, 140.0], [94.0, 201.0, 98.0], [253.0, 231.0, 37.0]];

fn hex(rgb: [f64; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", rgb[0].round() as u8, rgb[1].round() as u8, rgb[2].round() as u8)
}

fn ramp(t: f64) -> String {
    let x = t.clamp(0.0, 1.0) * (RAMP.len() - 1) as f64;
    let i = (x.floor() as usize).min(RAMP.len() - 2);
    let f = x - i as f64;
    hex(std::array::from_fn(|c| RAMP[i][c] + f * (RAMP[i + 1][c] - RAMP[i][c])))
}

/// Colour for category `k` of `count`: the 10-colour palette, then evenly
/// spaced hues.
fn categorical(k: usize, count: usize) -> String {
    if count <= CATEGORICAL.len() {
        return CATEGORICAL[k].to_string();
    }
    let h = k as f64 / count as f64 * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as usize {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    // Darken a little so light hues stay visible on white.
    hex([r * 200.0 + 20.0, g * 200.0 + 20.0, b * 200.0 + 20.0])
}

/// One colour per point. Labels that all parse as numbers get the scalar
/// ramp, anything else the categorical palette in sorted label order.
fn colours(labels: Option<&[String]>, n: usize) -> Vec<String> {
    let Some(labels) = labels else {
        return vec![UNLABELLED.to_string(); n];
    };
    let numeric: Option<Vec<f64>> = labels.iter().map(|l| l.trim().parse::<f64>().ok().filter(|v| v.is_finite())).collect();
    if let Some(v) = numeric {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let distinct: std::collections::BTreeSet<u64> = v.iter().map(|x| x.to_bits()).collect();
        if distinct.len() > CATEGORICAL.len() {
            let span = if hi > lo { hi - lo } else { 1.0 };
            return v.iter().map(|x| ramp((x - lo) / span)).collect();
        }
    }
    let cats: BTreeMap<&str, usize> = {
        let mut m: BTreeMap<&str, usize> = labels.iter().map(|l| (l.as_str(), 0)).collect();
        for (k, v) in m.values_mut().enumerate() {
            *v = k;
        }
        m
    };
    labels.iter().map(|l| categorical(cats[l.as_str()], cats.len())).collect()
}

/// Radius and coordinate decimals shrink with `n` to bound the file size.
fn marker_style(n: usize) -> (f64, usize) {
    let r = (40.0 / (n as f64).sqrt()).clamp(0.5, 6.0);
    let decimals = if n > 20_000 { 0 } else if n > 2_000 { 1 } else { 2 };
    (r, decimals)
}

pub fn render_svg(embedding: &Embedding, labels: Option<&[String]>) -> Result<String> {
    let n = embedding.n();
    if let Some(l) = labels {
        if l.len() != n {
            return Err(Error::RowCountMismatch { left: n, right: l.len() });
        }
    }
    if let Some(p) = embedding.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { row: p / 2, col: p % 2 });
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let [x, y] = embedding.point(i);
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let xr = if x1 > x0 { x1 - x0 } else { 1.0 };
    let yr = if y1 > y0 { y1 - y0 } else { 1.0 };
    let (xr_m, yr_m) = (xr * (1.0 + 2.0 * MARGIN), yr * (1.0 + 2.0 * MARGIN));
    let scale = CANVAS / xr_m.max(yr_m);
    let (w, h) = (xr_m * scale, yr_m * scale);
    let (r, dec) = marker_style(n);
    let fills = colours(labels, n);

    let mut s = String::with_capacity(120 + n * 48);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w:.2} {h:.2}" width="{w:.0}" height="{h:.0}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for i in 0..n {
        let [x, y] = embedding.point(i);
        let cx = (x - x0 + MARGIN * xr) * scale;
        let cy = h - (y - y0 + MARGIN * yr) * scale;
        let _ = writeln!(s, r#"<circle cx="{cx:.dec$}" cy="{cy:.dec$}" r="{r:.2}" fill="{}"/>"#, fills[i]);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn plot_svg(embedding: &Embedding, labels: Option<&[String]>, path: &Path) -> Result<()> {
    let svg = render_svg(embedding, labels)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
