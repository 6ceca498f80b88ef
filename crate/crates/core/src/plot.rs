//! Minimal SVG emission for epoch-curve and histogram reports.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;

const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

pub struct LineSeries {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

fn svg_header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" \
         text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders labeled line series with auto-scaled axes.
pub fn line_chart(title: &str, series: &[LineSeries]) -> String {
    let mut svg = svg_header(title);
    let points: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied()).collect();
    if points.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in &points {
        x_min = x_min.min(*x);
        x_max = x_max.max(*x);
        y_min = y_min.min(*y);
        y_max = y_max.max(*y);
    }
    if x_min == x_max {
        x_max += 1.0;
    }
    if y_min == y_max {
        y_max += 1.0;
    }
    let to_px = |x: f64, y: f64| -> (f64, f64) {
        (
            MARGIN + (x - x_min) / (x_max - x_min) * (WIDTH - 2.0 * MARGIN),
            HEIGHT - MARGIN - (y - y_min) / (y_max - y_min) * (HEIGHT - 2.0 * MARGIN),
        )
    };

    // Axes.
    let _ = write!(
        svg,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#333\"/>\n\
         <line x1=\"{m}\" y1=\"{t}\" x2=\"{m}\" y2=\"{b}\" stroke=\"#333\"/>\n\
         <text x=\"{m}\" y=\"{lb}\" font-family=\"sans-serif\" font-size=\"11\">{x_min:.2}</text>\n\
         <text x=\"{r}\" y=\"{lb}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{x_max:.2}</text>\n\
         <text x=\"6\" y=\"{b}\" font-family=\"sans-serif\" font-size=\"11\">{y_min:.2}</text>\n\
         <text x=\"6\" y=\"{tt}\" font-family=\"sans-serif\" font-size=\"11\">{y_max:.2}</text>\n",
        m = MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        lb = HEIGHT - MARGIN + 16.0,
        tt = MARGIN + 4.0,
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|(x, y)| {
                let (px, py) = to_px(*x, *y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\" points=\"{}\"/>",
            path.join(" ")
        );
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" fill=\"{color}\">{}</text>",
            WIDTH - MARGIN + 4.0 - 120.0,
            MARGIN + 16.0 * i as f64 + 12.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders an integer-binned histogram as vertical bars.
pub fn histogram(title: &str, bins: &[(i64, u64)]) -> String {
    let mut svg = svg_header(title);
    if bins.is_empty() {
        svg.push_str("</svg>\n");
        return svg;
    }
    let lo = bins.iter().map(|(k, _)| *k).min().unwrap();
    let hi = bins.iter().map(|(k, _)| *k).max().unwrap();
    let max_count = bins.iter().map(|(_, c)| *c).max().unwrap().max(1);
    let span = (hi - lo + 1) as f64;
    let bar_w = (WIDTH - 2.0 * MARGIN) / span;
    let _ = writeln!(
        svg,
        "<line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"#333\"/>",
        m = MARGIN,
        r = WIDTH - MARGIN,
        b = HEIGHT - MARGIN,
    );
    for (k, count) in bins {
        let x = MARGIN + (*k - lo) as f64 * bar_w;
        let h = *count as f64 / max_count as f64 * (HEIGHT - 2.0 * MARGIN);
        let y = HEIGHT - MARGIN - h;
        let _ = writeln!(
            svg,
            "<rect x=\"{:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" \
             fill=\"#1f77b4\" stroke=\"white\"/>\n\
             <text x=\"{:.2}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" \
             text-anchor=\"middle\">{k}</text>",
            x + 0.05 * bar_w,
            0.9 * bar_w,
            x + 0.5 * bar_w,
            HEIGHT - MARGIN + 16.0,
        );
    }
    svg.push_str("</svg>\n");
    svg
}
