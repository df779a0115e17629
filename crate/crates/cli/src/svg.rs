//! Static SVG panels: line plots for 1D densities and correlation series,
//! a grey-scale heatmap for 2D densities.

use std::fmt::Write;

const W: f64 = 480.0;
const H: f64 = 300.0;
const PAD: f64 = 40.0;

fn frame(out: &mut String, x0: f64, title: &str) {
    let _ = write!(
        out,
        r#"<g transform="translate({x0},0)"><rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/><text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD,
        W / 2.0
    );
}

/// Polyline through `(x, y)` pairs, scaled to the panel.
fn line(out: &mut String, pts: &[(f64, f64)]) {
    if pts.is_empty() {
        return;
    }
    let (xmin, xmax) = bounds(pts.iter().map(|p| p.0));
    let (ymin, ymax) = bounds(pts.iter().map(|p| p.1));
    let sx = (W - 2.0 * PAD) / (xmax - xmin);
    let sy = (H - 2.0 * PAD) / (ymax - ymin);
    out.push_str(r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points=""#);
    for &(x, y) in pts {
        let _ = write!(out, "{:.2},{:.2} ", PAD + (x - xmin) * sx, H - PAD - (y - ymin) * sy);
    }
    out.push_str(r#""/>"#);
    let _ = write!(
        out,
        r#"<text x="{PAD}" y="{}" font-family="sans-serif" font-size="10">{ymin:.3e}</text><text x="{PAD}" y="{}" font-family="sans-serif" font-size="10">{ymax:.3e}</text>"#,
        H - PAD + 12.0,
        PAD - 4.0
    );
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn heatmap(out: &mut String, values: &[f64], n: usize) {
    let (lo, hi) = bounds(values.iter().copied());
    let cell = (W - 2.0 * PAD).min(H - 2.0 * PAD) / n as f64;
    for (i, v) in values.iter().enumerate() {
        let (ix, iy) = (i / n, i % n);
        let shade = (255.0 * (1.0 - (v - lo) / (hi - lo))).round() as u8;
        let _ = write!(
            out,
            r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="rgb({shade},{shade},{shade})"/>"#,
            PAD + ix as f64 * cell,
            H - PAD - (iy + 1) as f64 * cell,
            cell,
            cell
        );
    }
}

pub enum Panel<'a> {
    Density { dim: usize, n: usize, values: &'a [f64] },
    Series { title: &'a str, points: Vec<(f64, f64)> },
}

/// Lays the panels out side by side.
pub fn render(panels: &[Panel]) -> String {
    let total = W * panels.len().max(1) as f64;
    let mut out = format!(r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{H}" viewBox="0 0 {total} {H}">"#);
    for (k, p) in panels.iter().enumerate() {
        let x0 = k as f64 * W;
        match p {
            Panel::Density { dim: 1, values, .. } => {
                frame(&mut out, x0, "invariant density");
                let n = values.len() as f64;
                let pts: Vec<_> = values.iter().enumerate().map(|(i, &v)| ((i as f64 + 0.5) / n, v)).collect();
                line(&mut out, &pts);
            }
            Panel::Density { n, values, .. } => {
                frame(&mut out, x0, "invariant density");
                // beyond two dimensions: the slice through the first cell of
                // the leading axes
                let plane = n * n;
                heatmap(&mut out, &values[..plane.min(values.len())], *n);
            }
            Panel::Series { title, points } => {
                frame(&mut out, x0, title);
                line(&mut out, points);
            }
        }
        out.push_str("</g>");
    }
    out.push_str("</svg>\n");
    out
}
