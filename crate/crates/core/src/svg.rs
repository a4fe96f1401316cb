//! Minimal standalone SVG charts. Output depends only on the inputs.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Line,
    Dots,
    Dashed,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mark: Mark,
    pub color: &'static str,
}

impl Series {
    pub fn new(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>, mark: Mark, color: &'static str) -> Self {
        Series {
            label: label.into(),
            x,
            y,
            mark,
            color,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn fit(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Frame {
        let span = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = it
                .filter(|v| v.is_finite())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi > lo {
                let pad = 0.04 * (hi - lo);
                (lo - pad, hi + pad)
            } else {
                (lo - 0.5, lo + 0.5)
            }
        };
        let (x0, x1) = span(&mut xs.clone());
        let (y0, y1) = span(&mut ys.clone());
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{H}" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>
"#,
        W / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    let _ = writeln!(out, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t);
    for k in 0..=4 {
        let xv = f.x0 + (f.x1 - f.x0) * f64::from(k) / 4.0;
        let yv = f.y0 + (f.y1 - f.y0) * f64::from(k) / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.px(xv),
            b + 16.0,
            tick(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            l - 6.0,
            f.py(yv) + 4.0,
            tick(yv)
        );
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 12.0, escape(xlabel));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (t + b) / 2.0,
        (t + b) / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(0.01..1e5).contains(&a) {
        format!("{v:.2e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Line and scatter series on shared axes, with a legend.
pub fn plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let f = Frame::fit(
        series.iter().flat_map(|s| s.x.iter().copied()),
        series.iter().flat_map(|s| s.y.iter().copied()),
    );
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, xlabel, ylabel);
    for (k, s) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = s
            .x
            .iter()
            .zip(&s.y)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| (f.px(*x), f.py(*y)))
            .collect();
        match s.mark {
            Mark::Dots => {
                for (x, y) in &pts {
                    let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2" fill="{}" fill-opacity="0.6"/>"#, s.color);
                }
            }
            Mark::Line | Mark::Dashed => {
                let d: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
                let dash = if s.mark == Mark::Dashed { r#" stroke-dasharray="5,4""# } else { "" };
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1.8"{dash}/>"#,
                    d.join(" "),
                    s.color
                );
            }
        }
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            LEFT + 10.0,
            ly - 9.0,
            s.color,
            LEFT + 26.0,
            ly,
            escape(&s.label)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Histogram bars from bin edges and counts, with an optional density
/// overlay scaled to counts.
pub fn histogram(title: &str, xlabel: &str, edges: &[f64], counts: &[usize], overlay: Option<(&[f64], &[f64])>) -> String {
    let n: usize = counts.iter().sum();
    let width = if edges.len() > 1 { edges[1] - edges[0] } else { 1.0 };
    let scaled: Option<Vec<f64>> = overlay.map(|(_, d)| d.iter().map(|v| v * n as f64 * width).collect());
    let ymax = counts
        .iter()
        .map(|&c| c as f64)
        .chain(scaled.iter().flatten().copied())
        .fold(1.0, f64::max);
    let f = Frame {
        x0: edges.first().copied().unwrap_or(0.0),
        x1: edges.last().copied().unwrap_or(1.0).max(edges.first().copied().unwrap_or(0.0) + 1e-12),
        y0: 0.0,
        y1: ymax * 1.05,
    };
    let mut out = String::new();
    header(&mut out, title);
    axes(&mut out, &f, xlabel, "count");
    for (i, &c) in counts.iter().enumerate() {
        let x = f.px(edges[i]);
        let w = f.px(edges[i + 1]) - x;
        let y = f.py(c as f64);
        let _ = writeln!(
            out,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{:.2}" fill="#8fb3d9" stroke="white"/>"##,
            f.py(0.0) - y
        );
    }
    if let (Some((grid, _)), Some(s)) = (overlay, scaled) {
        let d: Vec<String> = grid
            .iter()
            .zip(&s)
            .filter(|(g, _)| **g >= f.x0 && **g <= f.x1)
            .map(|(g, v)| format!("{:.2},{:.2}", f.px(*g), f.py(*v)))
            .collect();
        let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#c0392b" stroke-width="1.8"/>"##, d.join(" "));
    }
    out.push_str("</svg>\n");
    out
}

/// Horizontal bars, largest first.
pub fn bars(title: &str, labels: &[String], values: &[f64]) -> String {
    let h = TOP + 20.0 + 18.0 * labels.len() as f64 + 20.0;
    let vmax = values.iter().copied().fold(0.0, f64::max).max(1e-12);
    let left = 220.0;
    let mut out = String::new();
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{h}" viewBox="0 0 {W} {h}" font-family="sans-serif" font-size="12">
<rect width="{W}" height="{h}" fill="white"/>
<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>
"#,
        W / 2.0,
        escape(title)
    );
    for (i, (l, v)) in labels.iter().zip(values).enumerate() {
        let y = TOP + 18.0 * i as f64;
        let w = (W - left - 70.0) * v.max(0.0) / vmax;
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text><rect x="{left}" y="{y:.2}" width="{w:.2}" height="13" fill="#4a7ab5"/><text x="{:.2}" y="{:.2}">{:.2}</text>"##,
            left - 6.0,
            y + 11.0,
            escape(l),
            left + w + 4.0,
            y + 11.0,
            v
        );
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_well_formed() {
        let s = vec![Series::new("a<b", vec![0.0, 1.0, 2.0], vec![1.0, 3.0, 2.0], Mark::Line, "black")];
        let a = plot("t", "x", "y", &s);
        assert_eq!(a, plot("t", "x", "y", &s));
        assert!(a.starts_with("<svg") && a.trim_end().ends_with("</svg>"));
        assert!(a.contains("a&lt;b"));
        let h = histogram("h", "x", &[0.0, 1.0, 2.0], &[3, 4], None);
        assert_eq!(h.matches("<rect").count(), 4);
        let b = bars("b", &["p".into(), "q".into()], &[2.0, 1.0]);
        assert!(b.contains(">p<"));
    }
}
