//! Minimal static SVG charts.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series<'a> {
    pub name: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

#[derive(Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of<'a>(values: impl Iterator<Item = &'a f64>) -> Self {
        let (lo, hi) = values
            .filter(|v| v.is_finite())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        if !lo.is_finite() {
            return Range { lo: 0.0, hi: 1.0 };
        }
        let pad = if hi > lo { 0.05 * (hi - lo) } else { 1.0 };
        Range {
            lo: lo - pad,
            hi: hi + pad,
        }
    }

    fn map(&self, v: f64, a: f64, b: f64) -> f64 {
        a + (v - self.lo) / (self.hi - self.lo) * (b - a)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Labels<'a> {
    title: &'a str,
    x: &'a str,
    y: &'a str,
}

/// Draws one `W`×`H` panel of polylines into `out`, offset by `x0`.
fn panel(out: &mut String, x0: f64, labels: Labels, series: &[Series]) {
    let (y0, w, h) = (0.0, W, H);
    let Labels {
        title,
        x: xlabel,
        y: ylabel,
    } = labels;
    let xr = Range::of(series.iter().flat_map(|s| s.x));
    let yr = Range::of(series.iter().flat_map(|s| s.y));
    let (left, right) = (x0 + MARGIN, x0 + w - 16.0);
    let (top, bottom) = (y0 + 32.0, y0 + h - 40.0);
    let _ = writeln!(
        out,
        r##"<rect x="{left:.1}" y="{top:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444"/>"##,
        right - left,
        bottom - top
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14">{}</text>"#,
        (left + right) / 2.0,
        y0 + 20.0,
        escape(title)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11">{}</text>"#,
        (left + right) / 2.0,
        y0 + h - 8.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="11" transform="rotate(-90 {:.1} {:.1})">{}</text>"#,
        x0 + 14.0,
        (top + bottom) / 2.0,
        x0 + 14.0,
        (top + bottom) / 2.0,
        escape(ylabel)
    );
    for (v, anchor, x, y) in [
        (xr.lo, "start", left, bottom + 14.0),
        (xr.hi, "end", right, bottom + 14.0),
    ] {
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{y:.1}" text-anchor="{anchor}" font-size="10">{v:.1}</text>"#);
    }
    for (v, y) in [(yr.lo, bottom), (yr.hi, top + 10.0)] {
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{y:.1}" text-anchor="end" font-size="10">{v:.1}</text>"#,
            left - 4.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        // break the line at non-finite samples
        let mut runs: Vec<Vec<String>> = vec![Vec::new()];
        for (&x, &y) in s.x.iter().zip(s.y) {
            if x.is_finite() && y.is_finite() {
                runs.last_mut().unwrap().push(format!(
                    "{:.2},{:.2}",
                    xr.map(x, left, right),
                    yr.map(y, bottom, top)
                ));
            } else if !runs.last().unwrap().is_empty() {
                runs.push(Vec::new());
            }
        }
        for run in runs.iter().filter(|r| !r.is_empty()) {
            let _ = writeln!(
                out,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                run.join(" ")
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" fill="{color}">{}</text>"#,
            right - 90.0,
            top + 14.0 + 13.0 * i as f64,
            escape(s.name)
        );
    }
}

fn document(width: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{H:.0}\" viewBox=\"0 0 {width:.0} {H:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let mut body = String::new();
    panel(
        &mut body,
        0.0,
        Labels {
            title,
            x: xlabel,
            y: ylabel,
        },
        series,
    );
    document(W, &body)
}

/// Two side-by-side projections of a 3D trajectory onto its principal
/// axes: PC1–PC2 (the plane) and PC1–PC3 (the spread off it).
pub fn plane_projection(title: &str, scores: &[[f64; 3]]) -> String {
    let pc: [Vec<f64>; 3] = std::array::from_fn(|i| scores.iter().map(|s| s[i]).collect());
    let mut body = String::new();
    panel(
        &mut body,
        0.0,
        Labels {
            title: &format!("{title}: in-plane"),
            x: "PC1",
            y: "PC2",
        },
        &[Series {
            name: "trajectory",
            x: &pc[0],
            y: &pc[1],
        }],
    );
    panel(
        &mut body,
        W,
        Labels {
            title: &format!("{title}: out-of-plane"),
            x: "PC1",
            y: "PC3",
        },
        &[Series {
            name: "trajectory",
            x: &pc[0],
            y: &pc[2],
        }],
    );
    document(2.0 * W, &body)
}
