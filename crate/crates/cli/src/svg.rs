//! Minimal self-contained SVG line plots.

use std::fmt::Write;

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 300.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Points,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn line(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, style: Style::Line }
    }

    pub fn points(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, style: Style::Points }
    }
}

#[derive(Debug, Clone)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl Panel {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Panel { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: vec![] }
    }

    pub fn with(mut self, s: Series) -> Self {
        self.series.push(s);
        self
    }
}

fn bounds(p: &Panel) -> (f64, f64, f64, f64) {
    let pts = p.series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |a: f64, b: f64| {
        let span = b - a;
        if span > 0.0 {
            (a - 0.05 * span, b + 0.05 * span)
        } else {
            (a - 0.5, b + 0.5)
        }
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    (x0, x1, y0, y1)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Panels laid out left to right.
pub fn render(panels: &[Panel]) -> String {
    let width = PANEL_W * panels.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{PANEL_H}" viewBox="0 0 {width} {PANEL_H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="{width}" height="{PANEL_H}" fill="white"/>"#);
    for (k, p) in panels.iter().enumerate() {
        let ox = k as f64 * PANEL_W;
        let (x0, x1, y0, y1) = bounds(p);
        let (pw, ph) = (PANEL_W - 1.6 * MARGIN, PANEL_H - 2.0 * MARGIN);
        let sx = |x: f64| ox + MARGIN + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| MARGIN + (1.0 - (y - y0) / (y1 - y0)) * ph;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{MARGIN}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#,
            ox + MARGIN
        );
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="13">{}</text>"#, ox + MARGIN + pw / 2.0, MARGIN - 18.0, escape(&p.title));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, ox + MARGIN + pw / 2.0, PANEL_H - 12.0, escape(&p.x_label));
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" transform="rotate(-90 {:.2} {:.2})">{}</text>"#,
            ox + 14.0,
            MARGIN + ph / 2.0,
            ox + 14.0,
            MARGIN + ph / 2.0,
            escape(&p.y_label)
        );
        for (v, anchor, x, y) in [
            (x0, "start", sx(x0), MARGIN + ph + 14.0),
            (x1, "end", sx(x1), MARGIN + ph + 14.0),
        ] {
            let _ = writeln!(out, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{v:.3}</text>"#);
        }
        for (v, y) in [(y0, sy(y0)), (y1, sy(y1) + 8.0)] {
            let _ = writeln!(out, r#"<text x="{:.2}" y="{y:.2}" text-anchor="end">{v:.3}</text>"#, ox + MARGIN - 3.0);
        }
        for (j, s) in p.series.iter().enumerate() {
            let color = COLORS[j % COLORS.len()];
            let finite: Vec<_> = s.points.iter().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
            match s.style {
                Style::Line => {
                    let pts: Vec<String> = finite.iter().map(|&&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
                    let _ = writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, pts.join(" "));
                }
                Style::Points => {
                    for &&(x, y) in &finite {
                        let _ = writeln!(out, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, sx(x), sy(y));
                    }
                }
            }
            if !s.label.is_empty() && j < 10 {
                let _ = writeln!(
                    out,
                    r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
                    ox + MARGIN + 6.0,
                    MARGIN + 14.0 + 13.0 * j as f64,
                    escape(&s.label)
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
