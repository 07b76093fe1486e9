//! Minimal static SVG output: time-series line plots and link sketches.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

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

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>
"#,
        W / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Line plot of several series sharing the axes.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{xv:.3}</text>"#,
            sx(xv),
            H - PAD + 16.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{yv:.3}</text>"#,
            PAD - 4.0,
            sy(yv) + 4.0
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 12.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(ylabel)
    );
    for (k, s) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = PAD + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            W - PAD - 120.0,
            W - PAD - 100.0,
            W - PAD - 95.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Overlay of pendulum poses; each frame is `[base, elbow, tip]`, drawn
/// with increasing opacity.
pub fn sketch(title: &str, frames: &[[(f64, f64); 3]]) -> String {
    let reach = frames
        .iter()
        .flat_map(|f| f.iter().map(|p| p.0.abs().max(p.1.abs())))
        .fold(0.1, f64::max)
        * 1.1;
    let side = H - 2.0 * PAD;
    let cx = W / 2.0;
    let cy = H / 2.0;
    let s = |p: (f64, f64)| (cx + p.0 / reach * side / 2.0, cy - p.1 / reach * side / 2.0);
    let mut out = String::new();
    header(&mut out, title);
    let n = frames.len().max(1) as f64;
    for (i, f) in frames.iter().enumerate() {
        let alpha = 0.2 + 0.8 * (i as f64 + 1.0) / n;
        let pts: Vec<String> = f
            .iter()
            .map(|&p| {
                let (x, y) = s(p);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="#1f77b4" stroke-opacity="{alpha:.2}" stroke-width="2" points="{}"/>"##,
            pts.join(" ")
        );
        let (tx, ty) = s(f[2]);
        let _ = writeln!(
            out,
            r##"<circle cx="{tx:.2}" cy="{ty:.2}" r="3" fill="#d62728" fill-opacity="{alpha:.2}"/>"##
        );
    }
    let (bx, by) = s((0.0, 0.0));
    let _ = writeln!(out, r#"<circle cx="{bx:.2}" cy="{by:.2}" r="4" fill="black"/>"#);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_are_well_formed() {
        let s = line_plot(
            "t < 1",
            "t [s]",
            "E [J]",
            &[
                Series::new("a", vec![(0.0, 0.0), (1.0, 2.0)]),
                Series::new("flat", vec![(0.0, 1.0), (1.0, 1.0)]),
            ],
        );
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 2);
        assert!(s.contains("t &lt; 1"));
        let k = sketch("x", &[[(0.0, 0.0), (0.3, -0.1), (0.5, 0.2)]]);
        assert_eq!(k.matches("<polyline").count(), 1);
    }
}
