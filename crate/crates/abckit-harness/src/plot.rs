//! SVG rendering of the rejection-ratio comparison: one polyline per sample
//! size, tolerance on the x axis, empirical ellipse-to-ball rejection ratio
//! on the y axis, with a reference line at 1.

use std::fmt::Write as _;
use std::path::Path;

use crate::tables::{read_figure2, HarnessError, RatioPoint};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn scale(v: f64, lo: f64, hi: f64, out_lo: f64, out_hi: f64) -> f64 {
    out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo)
}

/// Render the ratio points to an SVG document.
pub fn render_svg(points: &[RatioPoint]) -> Result<String, HarnessError> {
    if points.is_empty() {
        return Err(HarnessError::Csv("no ratio points to plot".into()));
    }
    let (mut x_lo, mut x_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (y_lo, mut y_hi) = (0.0_f64, 1.05_f64);
    for p in points {
        x_lo = x_lo.min(p.tol);
        x_hi = x_hi.max(p.tol);
        y_hi = y_hi.max(p.r_ratio * 1.05);
    }
    if x_lo == x_hi {
        x_lo -= 0.5;
        x_hi += 0.5;
    }
    let px = |v| scale(v, x_lo, x_hi, MARGIN, WIDTH - MARGIN);
    let py = |v| scale(v, y_lo, y_hi, HEIGHT - MARGIN, MARGIN);

    let mut sizes: Vec<u64> = points.iter().map(|p| p.n).collect();
    sizes.sort_unstable();
    sizes.dedup();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // axes
    let _ = writeln!(
        svg,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
    );
    // reference at ratio 1
    let _ = writeln!(
        svg,
        r#"<line x1="{m}" y1="{y}" x2="{r}" y2="{y}" stroke="gray" stroke-dasharray="4 4"/>"#,
        m = MARGIN,
        r = WIDTH - MARGIN,
        y = py(1.0),
    );
    let _ = writeln!(
        svg,
        r#"<text x="{x}" y="{y}" font-size="12" text-anchor="middle">tolerance</text>"#,
        x = WIDTH / 2.0,
        y = HEIGHT - 16.0,
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{y}" font-size="12" transform="rotate(-90 16 {y})" text-anchor="middle">ellipse/ball rejection ratio</text>"#,
        y = HEIGHT / 2.0,
    );
    let mut ticks: Vec<f64> = points.iter().map(|p| p.tol).collect();
    ticks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ticks.dedup();
    for p in ticks {
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="10" text-anchor="middle">{p}</text>"#,
            x = px(p),
            y = HEIGHT - MARGIN + 16.0,
        );
    }
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let v = y_lo + frac * (y_hi - y_lo);
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="10" text-anchor="end">{v:.2}</text>"#,
            x = MARGIN - 6.0,
            y = py(v) + 3.0,
        );
    }

    for (i, n) in sizes.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut series: Vec<&RatioPoint> = points.iter().filter(|p| p.n == *n).collect();
        series.sort_by(|a, b| a.tol.partial_cmp(&b.tol).unwrap());
        let path: Vec<String> =
            series.iter().map(|p| format!("{:.2},{:.2}", px(p.tol), py(p.r_ratio))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" "),
        );
        for p in &series {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(p.tol),
                py(p.r_ratio),
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" font-size="11" fill="{color}">n = {n}</text>"#,
            x = WIDTH - MARGIN + 4.0,
            y = MARGIN + 14.0 * i as f64,
        );
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Read `figure2.csv` and write `figure2.svg` next to it.
pub fn plot_figure(csv_path: &Path, svg_path: &Path) -> Result<(), HarnessError> {
    let points = read_figure2(csv_path)?;
    let svg = render_svg(&points)?;
    std::fs::write(svg_path, svg).map_err(|e| HarnessError::Io {
        context: format!("writing {}", svg_path.display()),
        source: e,
    })
}
