//! Static two-panel figure: the nonlinearity on the left, the period map with
//! realizable-period lines and annotated crossings on the right.

use std::fmt::Write;

use kyorbit::periodmap::{realizable, PeriodMapTable};
use kyorbit::{Feedback, Nonlinearity, OrbitSummary};

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 360.0;

struct Panel {
    left: f64,
    right: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Panel {
    fn px(&self, x: f64) -> f64 {
        self.left + (x - self.x.0) / (self.x.1 - self.x.0) * (self.right - self.left)
    }

    fn py(&self, y: f64) -> f64 {
        BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (BOTTOM - TOP)
    }

    fn frame(&self, svg: &mut String, xlabel: &str, ylabel: &str) {
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{TOP:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            self.left,
            self.right - self.left,
            BOTTOM - TOP
        );
        for k in 0..=4 {
            let xv = self.x.0 + (self.x.1 - self.x.0) * k as f64 / 4.0;
            let yv = self.y.0 + (self.y.1 - self.y.0) * k as f64 / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
                self.px(xv),
                BOTTOM + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{}</text>"#,
                self.left - 6.0,
                self.py(yv) + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{xlabel}</text>"#,
            0.5 * (self.left + self.right),
            BOTTOM + 36.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">{ylabel}</text>"#,
            0.5 * (self.left + self.right),
            TOP - 12.0
        );
    }

    fn polyline(&self, svg: &mut String, points: &[(f64, f64)], style: &str) {
        let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        let _ = writeln!(svg, r#"<polyline fill="none" {style} points="{}"/>"#, coords.join(" "));
    }
}

fn tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let pad = if hi > lo { 0.08 * (hi - lo) } else { 0.5 * lo.abs().max(1.0) };
    (lo - pad, hi + pad)
}

/// Renders the figure. `orbits` supplies the crossing markers.
pub fn render(nl: &Nonlinearity, table: &PeriodMapTable, orbits: &[OrbitSummary], n_max: u32) -> String {
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);

    // nonlinearity panel: f(0, eta)
    let a_max = table.a_max();
    let curve: Vec<(f64, f64)> = (0..=200)
        .map(|i| -a_max + 2.0 * a_max * i as f64 / 200.0)
        .filter_map(|eta| nl.value(0.0, eta).ok().map(|v| (eta, v)))
        .collect();
    let (fmin, fmax) = curve.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    let left = Panel { left: 70.0, right: 420.0, x: (-a_max, a_max), y: padded(fmin, fmax) };
    left.frame(&mut svg, "eta", &format!("f(0, eta) = {}", escape(&nl.describe())));
    left.polyline(&mut svg, &[(-a_max, 0.0), (a_max, 0.0)], r##"stroke="#bbbbbb""##);
    left.polyline(&mut svg, &curve, r##"stroke="#1f4e9c" stroke-width="2""##);

    // period map panel
    let targets = realizable(table.feedback, n_max);
    let tmax = table.periods.iter().copied().fold(0.0, f64::max).max(targets[0].value);
    let right = Panel { left: 540.0, right: 920.0, x: (0.0, a_max), y: (0.0, 1.08 * tmax) };
    right.frame(&mut svg, "a", &format!("T_f(a), {}", table.classification));
    let (label, marker) = match table.feedback {
        Feedback::Positive => ("J+", Marker::Square),
        Feedback::Negative => ("J-", Marker::Triangle),
    };
    for rp in &targets {
        right.polyline(&mut svg, &[(0.0, rp.value), (a_max, rp.value)], r##"stroke="#999999" stroke-dasharray="5,4""##);
        let _ = writeln!(
            svg,
            r##"<text x="{:.2}" y="{:.2}" font-size="10" fill="#666666">{label} n={}</text>"##,
            right.right + 4.0,
            right.py(rp.value) + 3.0,
            rp.n
        );
    }
    let map: Vec<(f64, f64)> = table.amplitudes.iter().copied().zip(table.periods.iter().copied()).collect();
    right.polyline(&mut svg, &map, r##"stroke="#b22222" stroke-width="2""##);
    for o in orbits {
        let (x, y) = (right.px(o.amplitude), right.py(o.period));
        marker.draw(&mut svg, x, y);
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="8" fill="white" stroke="black"/><text x="{:.2}" y="{:.2}" font-size="10" text-anchor="middle">{}</text>"#,
            x + 14.0,
            y - 14.0,
            x + 14.0,
            y - 10.5,
            o.morse_index
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Clone, Copy)]
enum Marker {
    Triangle,
    Square,
}

impl Marker {
    fn draw(self, svg: &mut String, x: f64, y: f64) {
        let _ = match self {
            Marker::Triangle => writeln!(
                svg,
                r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="none" stroke="black"/>"#,
                x,
                y - 6.0,
                x - 5.5,
                y + 4.0,
                x + 5.5,
                y + 4.0
            ),
            Marker::Square => writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="none" stroke="black"/>"#,
                x - 5.0,
                y - 5.0
            ),
        };
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
