//! Minimal static SVG line charts.

use std::fmt::Write;

pub struct Series<'a> {
    pub label: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const W: f64 = 720.0;
const H: f64 = 440.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo <= f64::EPSILON * lo.abs().max(1e-300) {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Renders the series into a self-contained SVG document. At most `max_points`
/// evenly strided samples are drawn per series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], max_points: usize) -> String {
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.x.iter().copied()));
    let (y0, y1) = bounds(series.iter().flat_map(|s| s.y.iter().copied()));
    let pw = W - LEFT - RIGHT;
    let ph = H - TOP - BOTTOM;
    let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(title));
    let _ = writeln!(svg, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let (px, py) = (sx(xv), sy(yv));
        let _ = writeln!(svg, r##"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="#ccc"/>"##, TOP, TOP + ph);
        let _ = writeln!(svg, r##"<line x1="{}" y1="{py:.2}" x2="{}" y2="{py:.2}" stroke="#ccc"/>"##, LEFT, LEFT + pw);
        let _ = writeln!(svg, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{xv:.4e}</text>"#, TOP + ph + 18.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.2}" text-anchor="end">{yv:.4e}</text>"#, LEFT - 6.0, py + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 15.0, escape(x_label));
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let n = s.x.len().min(s.y.len());
        let stride = n.div_ceil(max_points.max(2)).max(1);
        let mut pts = String::new();
        let mut k = 0;
        while k < n {
            if s.x[k].is_finite() && s.y[k].is_finite() {
                let _ = write!(pts, "{:.2},{:.2} ", sx(s.x[k]), sy(s.y[k]));
            }
            k = if k + stride >= n && k != n - 1 { n - 1 } else { k + stride };
        }
        let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.trim_end());
        let ly = TOP + 14.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 12.0;
        let _ = writeln!(svg, r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#, lx + 20.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}">{}</text>"#, lx + 26.0, ly + 4.0, escape(s.label));
    }
    svg.push_str("</svg>\n");
    svg
}
