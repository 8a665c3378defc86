//! Minimal static SVG charts: scatter, line and box plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
        }
    }
}

#[derive(Clone, Copy)]
struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            let pad = lo.abs().max(1.0) * 0.05;
            return Axis { lo: lo - pad, hi: hi + pad };
        }
        let pad = (hi - lo) * 0.05;
        Axis { lo: lo - pad, hi: hi + pad }
    }

    fn ticks(&self) -> Vec<f64> {
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-9 * step {
            out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
            t += step;
        }
        out
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

struct Canvas {
    svg: String,
    x: Axis,
    y: Axis,
}

impl Canvas {
    fn new(title: &str, xlabel: &str, ylabel: &str, x: Axis, y: Axis) -> Canvas {
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
            W / 2.0,
            esc(title)
        );
        let mut c = Canvas { svg, x, y };
        c.frame(xlabel, ylabel);
        c
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.lo) / (self.x.hi - self.x.lo) * (W - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y.lo) / (self.y.hi - self.y.lo) * (H - TOP - BOTTOM)
    }

    fn frame(&mut self, xlabel: &str, ylabel: &str) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(
            self.svg,
            r#"<rect x="{x0}" y="{y0}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            x1 - x0,
            y1 - y0
        );
        for t in self.y.ticks() {
            let y = self.py(t);
            let _ = writeln!(
                self.svg,
                r##"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
                x0 - 6.0,
                y + 4.0,
                label(t)
            );
        }
        self.x_ticks();
        let _ = writeln!(
            self.svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            (x0 + x1) / 2.0,
            H - 12.0,
            esc(xlabel)
        );
        let _ = writeln!(
            self.svg,
            r#"<text x="16" y="{:.1}" text-anchor="middle" transform="rotate(-90 16 {:.1})">{}</text>"#,
            (y0 + y1) / 2.0,
            (y0 + y1) / 2.0,
            esc(ylabel)
        );
    }

    fn x_ticks(&mut self) {
        for t in self.x.ticks() {
            let x = self.px(t);
            let _ = writeln!(
                self.svg,
                r#"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                H - BOTTOM + 18.0,
                label(t)
            );
        }
    }

    fn legend(&mut self, names: &[&str]) {
        if names.len() < 2 {
            return;
        }
        for (i, n) in names.iter().enumerate() {
            let y = TOP + 14.0 + 16.0 * i as f64;
            let x = W - RIGHT - 150.0;
            let _ = writeln!(
                self.svg,
                r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{y:.1}">{}</text>"#,
                y - 9.0,
                PALETTE[i % PALETTE.len()],
                x + 15.0,
                esc(n)
            );
        }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>\n");
        self.svg
    }
}

fn axes(series: &[Series]) -> (Axis, Axis) {
    let pts = || series.iter().flat_map(|s| s.points.iter());
    (Axis::fit(pts().map(|p| p.0)), Axis::fit(pts().map(|p| p.1)))
}

pub fn scatter(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (x, y) = axes(series);
    let mut c = Canvas::new(title, xlabel, ylabel, x, y);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        for &(a, b) in s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
            let _ = writeln!(
                c.svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.7"/>"#,
                c.px(a),
                c.py(b)
            );
        }
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    c.legend(&names);
    c.finish()
}

pub fn line(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (x, y) = axes(series);
    let mut c = Canvas::new(title, xlabel, ylabel, x, y);
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(a, b)| format!("{:.2},{:.2}", c.px(a), c.py(b)))
            .collect();
        let _ = writeln!(
            c.svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    c.legend(&names);
    c.finish()
}

/// One box per `(x, [min, q1, median, q3, max])`.
pub fn boxes(title: &str, xlabel: &str, ylabel: &str, groups: &[(f64, [f64; 5])]) -> String {
    let x = Axis::fit(groups.iter().map(|g| g.0));
    let y = Axis::fit(groups.iter().flat_map(|g| g.1));
    let mut c = Canvas::new(title, xlabel, ylabel, x, y);
    let half = if groups.len() > 1 {
        0.3 * (W - LEFT - RIGHT) / groups.len() as f64
    } else {
        20.0
    };
    for &(gx, q) in groups {
        let cx = c.px(gx);
        let (lo, q1, med, q3, hi) = (c.py(q[0]), c.py(q[1]), c.py(q[2]), c.py(q[3]), c.py(q[4]));
        let _ = writeln!(
            c.svg,
            r##"<line x1="{cx:.2}" y1="{lo:.2}" x2="{cx:.2}" y2="{hi:.2}" stroke="#444"/><rect x="{:.2}" y="{q3:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#444"/><line x1="{:.2}" y1="{med:.2}" x2="{:.2}" y2="{med:.2}" stroke="#d62728" stroke-width="2"/>"##,
            cx - half,
            2.0 * half,
            (q1 - q3).max(0.5),
            cx - half,
            cx + half
        );
    }
    c.finish()
}
