use std::fmt::Write as _;

use ndarray::{Array2, Axis};

use crate::data::{EpochSet, WINDOW_MS};
use crate::error::{Error, Result};
use crate::nn::{Network, Shape};

/// Mean absolute input gradient over `epochs`, shaped like one epoch.
pub fn saliency_map(net: &Network, epochs: &EpochSet) -> Result<Array2<f64>> {
    if epochs.is_empty() {
        return Err(Error::Empty("saliency epochs"));
    }
    let (rows, cols) = match net.input_shape() {
        Shape::Seq { features, steps } => (features, steps),
        Shape::Flat(n) => (1, n),
    };
    let x = epochs.features();
    let mut total = ndarray::Array1::<f64>::zeros(x.ncols());
    for start in (0..x.nrows()).step_by(128) {
        let end = (start + 128).min(x.nrows());
        let g = net.input_gradients(x.slice(ndarray::s![start..end, ..]))?;
        total += &g.mapv(f64::abs).sum_axis(Axis(0));
    }
    total /= x.nrows() as f64;
    total
        .into_shape_with_order((rows, cols))
        .map_err(|e| Error::InvalidData(e.to_string()))
}

/// Onset-relative time of each sample column, in ms.
pub fn column_times_ms(n_samples: usize, sampling_rate: f64) -> Vec<f64> {
    (0..n_samples)
        .map(|j| WINDOW_MS.0 as f64 + j as f64 * 1000.0 / sampling_rate)
        .collect()
}

/// Share of the total map mass in columns with `lo ≤ t ≤ hi`.
pub fn mass_fraction(map: &Array2<f64>, times_ms: &[f64], lo: f64, hi: f64) -> f64 {
    let total = map.sum();
    if total <= 0.0 {
        return 0.0;
    }
    let inside: f64 = map
        .axis_iter(Axis(1))
        .zip(times_ms)
        .filter(|(_, &t)| t >= lo && t <= hi)
        .map(|(c, _)| c.sum())
        .sum();
    inside / total
}

/// Share of columns with `lo ≤ t ≤ hi`: the mass fraction of a flat map.
pub fn uniform_share(times_ms: &[f64], lo: f64, hi: f64) -> f64 {
    times_ms.iter().filter(|&&t| t >= lo && t <= hi).count() as f64 / times_ms.len() as f64
}

/// CSV with a header row of column times, one row per channel.
pub fn saliency_csv(map: &Array2<f64>, times_ms: &[f64]) -> String {
    let mut out = String::new();
    let header: Vec<String> = times_ms.iter().map(|t| format!("{t}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in map.outer_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Heatmap with a linear white-to-red color map: 0 is white, the map maximum
/// is `#b2182b`.
pub fn saliency_svg(map: &Array2<f64>, times_ms: &[f64], title: &str) -> String {
    let (rows, cols) = map.dim();
    let (cell_w, cell_h, left, top) = (20usize, 8usize, 60usize, 30usize);
    let width = left + cols * cell_w + 20;
    let height = top + rows * cell_h + 40;
    let max = map.iter().cloned().fold(0.0f64, f64::max);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="{left}" y="16" font-size="12">{title}</text>"#);
    for ((r, c), &v) in map.indexed_iter() {
        let f = if max > 0.0 { v / max } else { 0.0 };
        let lerp = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
        let _ = writeln!(
            s,
            r##"<rect x="{}" y="{}" width="{cell_w}" height="{cell_h}" fill="#{:02x}{:02x}{:02x}"/>"##,
            left + c * cell_w,
            top + r * cell_h,
            lerp(255.0, 178.0),
            lerp(255.0, 24.0),
            lerp(255.0, 43.0)
        );
    }
    for (c, t) in times_ms.iter().enumerate().step_by(5) {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{t}</text>"#,
            left + c * cell_w + cell_w / 2,
            top + rows * cell_h + 14
        );
    }
    for r in (0..rows).step_by(5) {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">ch {r}</text>"#,
            left - 4,
            top + r * cell_h + cell_h
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">time (ms)</text>"#,
        left + cols * cell_w / 2,
        height - 6
    );
    s.push_str("</svg>\n");
    s
}
