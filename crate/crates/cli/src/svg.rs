//! Minimal self-contained SVG line charts.

use std::fmt::Write;

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

pub struct Panel<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<Series<'a>>,
}

const WIDTH: f64 = 640.0;
const PANEL_HEIGHT: f64 = 300.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const MARGIN_BOTTOM: f64 = 45.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 * lo.abs().max(1.0) {
        let pad = 0.5 * lo.abs().max(1.0);
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Round tick step covering `span` in about five intervals.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = tick_step(hi - lo);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn draw_panel(out: &mut String, panel: &Panel, top: f64) {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = PANEL_HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let (x0, x1) = bounds(panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = bounds(panel.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let px = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| top + MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h;

    let w = |out: &mut String, s: String| out.push_str(&s);
    w(out, format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        top + MARGIN_TOP - 10.0,
        escape(panel.title)
    ));
    w(out, format!(
        "<rect x=\"{MARGIN_LEFT:.1}\" y=\"{:.1}\" width=\"{plot_w:.1}\" height=\"{plot_h:.1}\" fill=\"none\" stroke=\"#000\"/>\n",
        top + MARGIN_TOP
    ));
    for t in ticks(x0, x1) {
        let x = px(t);
        let yb = top + MARGIN_TOP + plot_h;
        w(out, format!("<line x1=\"{x:.1}\" y1=\"{yb:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"#000\"/>\n", yb + 5.0));
        w(out, format!(
            "<text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{}</text>\n",
            yb + 18.0,
            label(t)
        ));
    }
    for t in ticks(y0, y1) {
        let y = py(t);
        w(out, format!(
            "<line x1=\"{:.1}\" y1=\"{y:.1}\" x2=\"{MARGIN_LEFT:.1}\" y2=\"{y:.1}\" stroke=\"#000\"/>\n",
            MARGIN_LEFT - 5.0
        ));
        w(out, format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">{}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0,
            label(t)
        ));
    }
    w(out, format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"12\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        top + PANEL_HEIGHT - 8.0,
        escape(panel.x_label)
    ));
    let cy = top + MARGIN_TOP + plot_h / 2.0;
    w(out, format!(
        "<text x=\"16\" y=\"{cy:.1}\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 {cy:.1})\">{}</text>\n",
        escape(panel.y_label)
    ));

    for (i, s) in panel.series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts = String::new();
        for &(x, y) in &s.points {
            write!(pts, "{:.2},{:.2} ", px(x), py(y)).expect("writing to a String");
        }
        w(out, format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            pts.trim_end()
        ));
        for &(x, y) in &s.points {
            w(out, format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{color}\"/>\n", px(x), py(y)));
        }
        let ly = top + MARGIN_TOP + 16.0 + 16.0 * i as f64;
        w(out, format!(
            "<text x=\"{:.1}\" y=\"{ly:.1}\" text-anchor=\"end\" font-size=\"11\" fill=\"{color}\">{}</text>\n",
            WIDTH - MARGIN_RIGHT - 8.0,
            escape(s.label)
        ));
    }
}

/// Stacks the panels vertically into one document.
pub fn render(panels: &[Panel]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {WIDTH:.0} {height:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n"
    );
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, PANEL_HEIGHT * i as f64);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 0.5), vec![0.0, 0.1, 0.2, 0.30000000000000004, 0.4, 0.5]);
        assert_eq!(tick_step(87.0), 20.0);
    }

    #[test]
    fn document_has_one_polyline_per_series() {
        let panel = Panel {
            title: "t",
            x_label: "x",
            y_label: "y<1>",
            series: vec![
                Series {
                    label: "a",
                    points: vec![(0.0, 1.0), (1.0, 2.0)],
                },
                Series {
                    label: "b",
                    points: vec![(0.0, 1.0), (1.0, 1.0)],
                },
            ],
        };
        let svg = render(&[panel]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("y&lt;1&gt;"));
    }

    #[test]
    fn flat_series_get_a_padded_range() {
        assert_eq!(bounds([3.0, 3.0].into_iter()), (1.5, 4.5));
        assert_eq!(bounds(std::iter::empty()), (0.0, 1.0));
    }
}
