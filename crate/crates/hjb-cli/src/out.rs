//! Output helpers: atomic file writes, CSV rows with a fixed 17-significant
//! digit float format, and a minimal SVG polyline renderer for bifurcation
//! diagrams.

use anyhow::{Context, Result};
use std::fs;
use std::path::{Path, PathBuf};

/// Write atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let tmp: PathBuf = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|s| s.to_str()).unwrap_or("out")
    ));
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// 17 significant digits, locale-independent.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct Csv {
    lines: Vec<String>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Csv {
        Csv {
            lines: vec![header.join(",")],
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.lines.push(fields.join(","));
    }

    pub fn finish(self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

/// Render (lambda, signed norm) polylines with eigenvalue markers.
pub fn diagram_svg(
    polylines: &[Vec<(f64, f64)>],
    eigenvalues: &[f64],
    title: &str,
) -> String {
    let (w, h) = (860.0, 420.0);
    let margin = 50.0;
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for line in polylines {
        for &(x, y) in line {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    for &e in eigenvalues {
        xmin = xmin.min(e);
        xmax = xmax.max(e);
    }
    if !xmin.is_finite() || xmax - xmin < 1e-12 {
        xmin = 0.0;
        xmax = 1.0;
    }
    if !ymin.is_finite() || ymax - ymin < 1e-12 {
        ymin = -1.0;
        ymax = 1.0;
    }
    let pad_x = 0.05 * (xmax - xmin);
    let pad_y = 0.08 * (ymax - ymin);
    let (xmin, xmax) = (xmin - pad_x, xmax + pad_x);
    let (ymin, ymax) = (ymin - pad_y, ymax + pad_y);
    let sx = |x: f64| margin + (x - xmin) / (xmax - xmin) * (w - 2.0 * margin);
    let sy = |y: f64| h - margin - (y - ymin) / (ymax - ymin) * (h - 2.0 * margin);

    let mut out = String::new();
    out.push_str(&format!(
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"##
    ));
    out.push_str(&format!(
        r##"<rect width="{w}" height="{h}" fill="white"/><text x="{}" y="24" font-size="15" font-family="monospace">{title}</text>"##,
        margin
    ));
    // axes
    if ymin < 0.0 && ymax > 0.0 {
        out.push_str(&format!(
            r##"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#888" stroke-width="1"/>"##,
            sx(xmin),
            sy(0.0),
            sx(xmax),
            sy(0.0)
        ));
    }
    for &e in eigenvalues {
        out.push_str(&format!(
            r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#c33" stroke-dasharray="4 3" stroke-width="1"/><text x="{0}" y="{3}" font-size="11" fill="#c33" font-family="monospace" text-anchor="middle">{e:.4}</text>"##,
            sx(e),
            sy(ymin),
            sy(ymax),
            h - margin + 16.0
        ));
    }
    let colors = ["#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b"];
    for (i, line) in polylines.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let pts: Vec<String> = line
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        out.push_str(&format!(
            r##"<polyline fill="none" stroke="{}" stroke-width="1.6" points="{}"/>"##,
            colors[i % colors.len()],
            pts.join(" ")
        ));
    }
    out.push_str("</svg>\n");
    out
}
