//! Static SVG charts: target-space scatter with front overlays, and envelope bands.

use std::fmt::Write as _;

use super::{Envelope, ParetoFront};

const W: f64 = 640.0;
const H: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Connect the points, sorted by x, with a polyline.
    pub connect: bool,
    pub muted: bool,
}

#[derive(Clone, Debug)]
pub struct Band {
    pub name: String,
    pub x: Vec<f64>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick positions at 1, 2 or 5 times a power of ten.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * span && out.len() < 20 {
        out.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_owned()
    } else {
        s.to_owned()
    }
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(xs: impl Iterator<Item = f64> + Clone, ys: impl Iterator<Item = f64> + Clone) -> Self {
        let range = |it: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) =
                it.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo <= 0.0 {
                (lo - 0.5 * lo.abs().max(1.0), hi + 0.5 * hi.abs().max(1.0))
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        Self { x: range(&mut xs.clone()), y: range(&mut ys.clone()) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (H - TOP - BOTTOM)
    }

    fn axes(&self, out: &mut String, title: &str, xl: &str, yl: &str) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
        let _ = writeln!(
            out,
            r##"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="#444"/>"##,
            x1 - x0,
            y0 - y1
        );
        for t in ticks(self.x.0, self.x.1) {
            let p = self.px(t);
            let _ = writeln!(
                out,
                r##"<line x1="{p:.2}" y1="{y0}" x2="{p:.2}" y2="{:.2}" stroke="#444"/><text x="{p:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"##,
                y0 + 5.0,
                y0 + 18.0,
                fmt_tick(t)
            );
        }
        for t in ticks(self.y.0, self.y.1) {
            let p = self.py(t);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{p:.2}" x2="{x0}" y2="{p:.2}" stroke="#444"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="11">{}</text>"##,
                x0 - 5.0,
                x0 - 8.0,
                p + 4.0,
                fmt_tick(t)
            );
        }
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"##,
            (x0 + x1) / 2.0,
            esc(title)
        );
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"##,
            (x0 + x1) / 2.0,
            H - 15.0,
            esc(xl)
        );
        let _ = writeln!(
            out,
            r##"<text x="18" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 18 {:.2})">{}</text>"##,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            esc(yl)
        );
    }
}

fn open() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    )
}

fn legend(out: &mut String, i: usize, name: &str, color: &str) {
    let y = TOP + 10.0 + 18.0 * i as f64;
    let x = W - RIGHT + 12.0;
    let _ = writeln!(
        out,
        r##"<rect x="{x}" y="{:.2}" width="12" height="12" fill="{color}"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"##,
        y - 10.0,
        x + 18.0,
        y,
        esc(name)
    );
}

pub fn scatter_svg(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let frame = Frame::new(
        series.iter().flat_map(|s| s.points.iter().map(|p| p.0)),
        series.iter().flat_map(|s| s.points.iter().map(|p| p.1)),
    );
    let mut out = open();
    frame.axes(&mut out, title, x_label, y_label);
    let mut colour = 0;
    for (i, s) in series.iter().enumerate() {
        let color = if s.muted {
            "#b0b0b0"
        } else {
            colour += 1;
            PALETTE[(colour - 1) % PALETTE.len()]
        };
        if s.connect && s.points.len() > 1 {
            let mut pts = s.points.clone();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let path: Vec<String> =
                pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", frame.px(x), frame.py(y))).collect();
            let _ = writeln!(
                out,
                r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5" stroke-dasharray="5,3"/>"##,
                path.join(" ")
            );
        }
        let r = if s.muted { 2.0 } else { 3.5 };
        for &(x, y) in &s.points {
            if x.is_finite() && y.is_finite() {
                let _ = writeln!(
                    out,
                    r##"<circle cx="{:.2}" cy="{:.2}" r="{r}" fill="{color}"/>"##,
                    frame.px(x),
                    frame.py(y)
                );
            }
        }
        legend(&mut out, i, &s.name, color);
    }
    out.push_str("</svg>\n");
    out
}

pub fn band_svg(title: &str, x_label: &str, y_label: &str, bands: &[Band]) -> String {
    let frame = Frame::new(
        bands.iter().flat_map(|b| b.x.iter().copied()),
        bands.iter().flat_map(|b| b.lower.iter().chain(&b.upper).filter_map(|v| *v)),
    );
    let mut out = open();
    frame.axes(&mut out, title, x_label, y_label);
    for (i, b) in bands.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let present: Vec<(f64, f64, f64)> =
            b.x.iter().zip(b.lower.iter().zip(&b.upper)).filter_map(|(&x, (l, u))| Some((x, (*l)?, (*u)?))).collect();
        let mut pts: Vec<String> =
            present.iter().map(|&(x, _, u)| format!("{:.2},{:.2}", frame.px(x), frame.py(u))).collect();
        pts.extend(present.iter().rev().map(|&(x, l, _)| format!("{:.2},{:.2}", frame.px(x), frame.py(l))));
        if !pts.is_empty() {
            let _ = writeln!(
                out,
                r##"<polygon points="{}" fill="{color}" fill-opacity="0.35" stroke="{color}"/>"##,
                pts.join(" ")
            );
        }
        legend(&mut out, i, &b.name, color);
    }
    out.push_str("</svg>\n");
    out
}

/// Target-space scatter of `background` points with every front overlaid.
/// Uses the first two targets of each front.
pub fn fronts_svg(title: &str, background: &[(f64, f64)], fronts: &[(String, &ParetoFront)]) -> String {
    let mut series =
        vec![Series { name: "evaluated".into(), points: background.to_vec(), connect: false, muted: true }];
    let (xl, yl) = fronts
        .first()
        .map(|(_, f)| (f.targets[0].clone(), f.targets.get(1).cloned().unwrap_or_default()))
        .unwrap_or_default();
    for (name, f) in fronts {
        series.push(Series {
            name: name.clone(),
            points: f.members.iter().map(|m| (m.targets.0[0], m.targets.0.get(1).copied().unwrap_or(0.0))).collect(),
            connect: true,
            muted: false,
        });
    }
    scatter_svg(title, &xl, &yl, &series)
}

pub fn envelope_svg(title: &str, env: &Envelope) -> String {
    let bands: Vec<Band> = env
        .groups
        .iter()
        .enumerate()
        .map(|(g, name)| Band {
            name: if name.is_empty() { "all".into() } else { name.clone() },
            x: env.grid.clone(),
            lower: env.lower[g].clone(),
            upper: env.upper[g].clone(),
        })
        .collect();
    band_svg(title, &env.sweep, &env.target, &bands)
}
