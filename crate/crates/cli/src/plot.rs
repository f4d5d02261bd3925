//! Minimal static SVG charts.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLOURS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>
"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn bounds(series: &[Series<'_>]) -> Option<(f64, f64, f64, f64)> {
    let pts = series.iter().flat_map(|s| s.points.iter().copied()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let mut it = pts.peekable();
    let (x0, y0) = *it.peek()?;
    let (mut x_min, mut x_max, mut y_min, mut y_max) = (x0, x0, y0, y0);
    for (x, y) in it {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if x_max == x_min {
        x_max = x_min + 1.0;
    }
    if y_max == y_min {
        y_max = y_min + 1.0;
    }
    Some((x_min, x_max, y_min.min(0.0), y_max))
}

/// Line chart with a legend. Non-finite points are skipped.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series<'_>]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let _ = writeln!(
        out,
        r##"<rect x="{LEFT}" y="{TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + plot_w / 2.0, HEIGHT - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        TOP + plot_h / 2.0,
        TOP + plot_h / 2.0,
        escape(y_label)
    );
    if let Some((x0, x1, y0, y1)) = bounds(series) {
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * plot_w;
        let sy = |y: f64| TOP + plot_h - (y - y0) / (y1 - y0) * plot_h;
        for k in 0..=4 {
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{fy:.3}</text>"##,
                LEFT + plot_w,
                LEFT - 6.0,
                sy(fy) + 4.0,
                y = sy(fy)
            );
            let _ = writeln!(
                out,
                r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
                sx(fx),
                TOP + plot_h + 18.0,
                if (x1 - x0) >= 4.0 { format!("{fx:.0}") } else { format!("{fx:.2}") }
            );
        }
        for (k, s) in series.iter().enumerate() {
            let colour = COLOURS[k % COLOURS.len()];
            let path: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            if !path.is_empty() {
                let _ = writeln!(
                    out,
                    r#"<polyline fill="none" stroke="{colour}" stroke-width="2" points="{}"/>"#,
                    path.join(" ")
                );
            }
            let ly = TOP + 10.0 + 20.0 * k as f64;
            let lx = WIDTH - RIGHT + 12.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx}" x2="{}" y1="{ly}" y2="{ly}" stroke="{colour}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(s.name)
            );
        }
    } else {
        let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, LEFT + plot_w / 2.0, TOP + plot_h / 2.0);
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal-label bar chart of values in [0, 1]; `None` bars are marked
/// as not applicable.
pub fn bar_chart(title: &str, bars: &[(&str, Option<f64>)]) -> String {
    let mut out = String::new();
    header(&mut out, title);
    let plot_w = WIDTH - LEFT - 30.0;
    let plot_h = HEIGHT - TOP - 90.0;
    let slot = plot_w / bars.len().max(1) as f64;
    for k in 0..=4 {
        let v = k as f64 / 4.0;
        let y = TOP + plot_h - v * plot_h;
        let _ = writeln!(
            out,
            r##"<line x1="{LEFT}" x2="{}" y1="{y:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            LEFT + plot_w,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for (k, (label, value)) in bars.iter().enumerate() {
        let x = LEFT + slot * k as f64;
        let cx = x + slot / 2.0;
        match value {
            Some(v) => {
                let h = v.clamp(0.0, 1.0) * plot_h;
                let _ = writeln!(
                    out,
                    r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{h:.1}" fill="#1f77b4"/><text x="{cx:.1}" y="{:.1}" text-anchor="middle">{v:.3}</text>"##,
                    x + slot * 0.15,
                    TOP + plot_h - h,
                    slot * 0.7,
                    TOP + plot_h - h - 4.0
                );
            }
            None => {
                let _ = writeln!(out, r#"<text x="{cx:.1}" y="{:.1}" text-anchor="middle">n/a</text>"#, TOP + plot_h - 4.0);
            }
        }
        let ly = TOP + plot_h + 14.0;
        let _ = writeln!(
            out,
            r#"<text x="{cx:.1}" y="{ly:.1}" text-anchor="end" transform="rotate(-35 {cx:.1} {ly:.1})">{}</text>"#,
            escape(label)
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charts_are_well_formed() {
        let svg = line_chart(
            "loss",
            "epoch",
            "loss",
            &[Series { name: "train", points: vec![(1.0, 2.0), (2.0, 1.0)] }, Series { name: "val", points: vec![] }],
        );
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        let empty = line_chart("t", "x", "y", &[]);
        assert!(empty.contains("no data"));
        let bars = bar_chart("iou", &[("A<B", Some(0.5)), ("C", None)]);
        assert!(bars.contains("A&lt;B") && bars.contains("n/a"));
    }
}
