//! Minimal SVG plots for eyeballing results.

use std::fmt::Write;

const SIZE: f64 = 480.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || hi - lo < 1e-12 {
        (lo.min(0.0) - 1.0, hi.max(0.0) + 1.0)
    } else {
        (lo, hi)
    }
}

fn scale(v: f64, (lo, hi): (f64, f64)) -> f64 {
    MARGIN + (v - lo) / (hi - lo) * (SIZE - 2.0 * MARGIN)
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{MARGIN}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{title}</text>\n"
    )
}

/// Scatter plot, one colour per label.
pub fn scatter(points: &[[f64; 2]], labels: &[usize], title: &str) -> String {
    let xb = bounds(points.iter().map(|p| p[0]));
    let yb = bounds(points.iter().map(|p| p[1]));
    let mut s = header(title);
    for (p, &l) in points.iter().zip(labels) {
        let _ = writeln!(
            s,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{}\" fill-opacity=\"0.6\"/>",
            scale(p[0], xb),
            SIZE - scale(p[1], yb),
            PALETTE[l % PALETTE.len()]
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Polyline of `ys` against their index.
pub fn line(ys: &[f64], title: &str) -> String {
    let xb = (0.0, (ys.len().max(2) - 1) as f64);
    let yb = bounds(ys.iter().copied());
    let mut s = header(title);
    let pts: Vec<String> = ys
        .iter()
        .enumerate()
        .map(|(i, &y)| format!("{:.2},{:.2}", scale(i as f64, xb), SIZE - scale(y, yb)))
        .collect();
    let _ = writeln!(
        s,
        "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
        PALETTE[0],
        pts.join(" ")
    );
    s.push_str("</svg>\n");
    s
}
