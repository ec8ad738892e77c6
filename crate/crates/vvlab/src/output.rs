//! CSV and SVG artifact writers. All numeric formatting uses the shortest
//! round-trip representation, so identical inputs produce byte-identical
//! files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::estimators::{ModulusCurve, RateFit};
use crate::solver::PathResult;

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::write(path, text)?)
}

/// Curve rows: (kind, delta, value, std_err, n_paths). The label overrides
/// the curve's kind name (used to distinguish the chi^2-weighted variant).
pub fn curves_csv(curves: &[(&str, &ModulusCurve)]) -> String {
    let mut s = String::from("kind,delta,value,std_err,n_paths\n");
    for (label, c) in curves {
        for i in 0..c.deltas.len() {
            let _ = writeln!(
                s,
                "{label},{},{},{},{}",
                c.deltas[i], c.values[i], c.std_errs[i], c.n_paths
            );
        }
    }
    s
}

/// Fit rows: (kind, window_lo, window_hi, slope, slope_stderr, r_squared).
pub fn fits_csv(fits: &[(&str, f64, f64, RateFit)]) -> String {
    let mut s = String::from("kind,window_lo,window_hi,slope,slope_stderr,r_squared\n");
    for (label, lo, hi, f) in fits {
        let _ = writeln!(
            s,
            "{label},{lo},{hi},{},{},{}",
            f.slope, f.slope_stderr, f.r_squared
        );
    }
    s
}

/// Path dump rows: (k, j, u).
pub fn path_csv(path: &PathResult) -> String {
    let mut s = String::from("k,j,u\n");
    for k in 0..=path.n_steps() {
        let row = path.u.row(k);
        for (j, v) in row.iter().enumerate() {
            let _ = writeln!(s, "{k},{j},{v}");
        }
    }
    s
}

/// Ensemble summary rows: (path_id, functional, value).
pub fn summary_csv(rows: &[(usize, &str, f64)]) -> String {
    let mut s = String::from("path_id,functional,value\n");
    for (id, name, v) in rows {
        let _ = writeln!(s, "{id},{name},{v}");
    }
    s
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> Result<()> {
    write_text(&dir.join(name), text)
}

/// Minimal log-log SVG chart: one polyline per curve plus a dashed guide
/// line with the theoretical reference slope.
pub fn loglog_svg(curves: &[(&str, &ModulusCurve)], ref_slope: Option<f64>) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const M: f64 = 50.0;
    let pts: Vec<(f64, f64)> = curves
        .iter()
        .flat_map(|(_, c)| c.deltas.iter().zip(&c.values))
        .filter(|(_, &v)| v > 0.0)
        .map(|(&d, &v)| (d.ln(), v.ln()))
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    );
    if pts.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad = |lo: &mut f64, hi: &mut f64| {
        let d = (*hi - *lo).max(1e-9) * 0.05;
        *lo -= d;
        *hi += d;
    };
    pad(&mut x0, &mut x1);
    pad(&mut y0, &mut y1);
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let _ = writeln!(
        svg,
        "<rect x=\"{M}\" y=\"{M}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        W - 2.0 * M,
        H - 2.0 * M
    );
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2"];
    for (i, (label, c)) in curves.iter().enumerate() {
        let color = colors[i % colors.len()];
        let path: Vec<String> = c
            .deltas
            .iter()
            .zip(&c.values)
            .filter(|(_, &v)| v > 0.0)
            .map(|(&d, &v)| format!("{:.2},{:.2}", sx(d.ln()), sy(v.ln())))
            .collect();
        if path.len() >= 2 {
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>",
                path.join(" ")
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"{color}\">{label}</text>",
            M + 6.0,
            M + 14.0 + 13.0 * i as f64
        );
    }
    if let Some(slope) = ref_slope {
        // guide line through the data centroid
        let cx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
        let cy = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"gray\" \
             stroke-dasharray=\"5,4\"/>",
            sx(x0),
            sy(cy + slope * (x0 - cx)),
            sx(x1),
            sy(cy + slope * (x1 - cx)),
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" fill=\"gray\">slope {slope}</text>",
            W - M - 80.0,
            M + 14.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}
