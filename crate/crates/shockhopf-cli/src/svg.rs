//! Minimal SVG rendering of line plots and heatmaps.

use std::fmt::Write;

use crate::results::{Heatmap, LinePlot};

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 52.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{}", (v * 1000.0).round() / 1000.0)
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-300 {
            (lo, hi) = (lo - 0.5, hi + 0.5);
        }
        let pad = 0.04 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad, log }
    }

    /// Fraction of the axis, or `None` outside the drawable range.
    fn frac(&self, v: f64) -> Option<f64> {
        if !v.is_finite() || (self.log && v <= 0.0) {
            return None;
        }
        let v = if self.log { v.log10() } else { v };
        Some((v - self.lo) / (self.hi - self.lo))
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        (0..5)
            .map(|k| {
                let f = (k as f64 + 0.5) / 5.0;
                let v = self.lo + f * (self.hi - self.lo);
                (f, label(if self.log { 10f64.powf(v) } else { v }))
            })
            .collect()
    }
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, xa: &Axis, ya: &Axis) {
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#);
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    for (f, t) in xa.ticks() {
        let x = LEFT + f * pw;
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}" stroke="black"/>"#, TOP + ph, TOP + ph + 4.0);
        let _ = writeln!(out, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, TOP + ph + 16.0, escape(&t));
    }
    for (f, t) in ya.ticks() {
        let y = TOP + (1.0 - f) * ph;
        let _ = writeln!(out, r#"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/>"#, LEFT - 4.0);
        let _ = writeln!(out, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 6.0, y + 4.0, escape(&t));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(y_label)
    );
}

pub fn line_plot(p: &LinePlot) -> String {
    let xa = Axis::fit(p.series.iter().flat_map(|s| s.points.iter().map(|q| q[0])), p.log_x);
    let ya = Axis::fit(p.series.iter().flat_map(|s| s.points.iter().map(|q| q[1])), p.log_y);
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let mut out = String::new();
    frame(&mut out, &p.title, &p.x_label, &p.y_label, &xa, &ya);
    for (k, s) in p.series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .filter_map(|q| Some((LEFT + xa.frac(q[0])? * pw, TOP + (1.0 - ya.frac(q[1])?) * ph)))
            .collect();
        if s.markers {
            for (x, y) in &pts {
                let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="2.5" fill="{color}"/>"#);
            }
        } else if !pts.is_empty() {
            let path: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
            let _ = writeln!(out, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, path.join(" "));
        }
        let ly = TOP + 14.0 + 14.0 * k as f64;
        let _ = writeln!(out, r#"<rect x="{}" y="{}" width="10" height="3" fill="{color}"/>"#, W - RIGHT - 150.0, ly - 4.0);
        let _ = writeln!(out, r#"<text x="{}" y="{ly}">{}</text>"#, W - RIGHT - 136.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

/// Diverging blue-white-red scale on `[-1, 1]`.
fn color(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

pub fn heatmap(h: &Heatmap) -> String {
    let xa = Axis { lo: h.x.first().copied().unwrap_or(0.0), hi: h.x.last().copied().unwrap_or(1.0), log: false };
    let ya = Axis { lo: h.y.first().copied().unwrap_or(0.0), hi: h.y.last().copied().unwrap_or(1.0), log: false };
    let (pw, ph) = (W - LEFT - RIGHT, H - TOP - BOTTOM);
    let mut out = String::new();
    let scale = h.values.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    let title = format!("{} (max |u| = {})", h.title, label(scale));
    frame(&mut out, &title, &h.x_label, &h.y_label, &xa, &ya);
    let (nx, ny) = (h.x.len(), h.y.len());
    if nx > 0 && ny > 0 {
        let (cw, ch) = (pw / nx as f64, ph / ny as f64);
        for j in 0..ny {
            for i in 0..nx {
                let v = h.values[j * nx + i];
                let c = if scale > 0.0 && v.is_finite() { color(v / scale) } else { "#ffffff".into() };
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{c}"/>"#,
                    LEFT + i as f64 * cw,
                    TOP + ph - (j + 1) as f64 * ch,
                    cw + 0.05,
                    ch + 0.05
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}
