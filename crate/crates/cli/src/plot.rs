//! Static SVG plots. Output is a pure function of the input numbers so
//! repeated runs produce identical bytes.

use std::fmt::Write;

use heatlab_core::estimates::FitResult;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN: f64 = 64.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

impl Scale {
    fn map(self, v: f64) -> f64 {
        match self {
            Scale::Linear => v,
            Scale::Log => v.log10(),
        }
    }
}

pub struct Axes<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x_scale: Scale,
    pub y_scale: Scale,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
    xs: Scale,
    ys: Scale,
}

impl Frame {
    fn fit(points: &[(f64, f64)], xs: Scale, ys: Scale) -> Frame {
        let range = |vals: Vec<f64>| {
            let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() || !hi.is_finite() {
                (0.0, 1.0)
            } else if hi - lo < 1e-12 {
                (lo - 0.5, hi + 0.5)
            } else {
                let pad = 0.05 * (hi - lo);
                (lo - pad, hi + pad)
            }
        };
        Frame {
            x: range(points.iter().map(|p| xs.map(p.0)).collect()),
            y: range(points.iter().map(|p| ys.map(p.1)).collect()),
            xs,
            ys,
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (self.xs.map(x) - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - (self.ys.map(y) - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64, scale: Scale) -> String {
    match scale {
        Scale::Log => format!("1e{v:.1}"),
        Scale::Linear => format!("{v:.3}"),
    }
}

/// Markers for `points` (non-positive values are dropped on log axes) and,
/// when given, the fitted power law across the plotted range with a
/// `slope = x.xxx` label.
pub fn plot(axes: &Axes, points: &[(f64, f64)], fit: Option<&FitResult>) -> String {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .copied()
        .filter(|&(x, y)| {
            x.is_finite()
                && y.is_finite()
                && (axes.x_scale == Scale::Linear || x > 0.0)
                && (axes.y_scale == Scale::Linear || y > 0.0)
        })
        .collect();
    let frame = Frame::fit(&usable, axes.x_scale, axes.y_scale);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(
        s,
        r#"<rect x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y1 - y0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="16">{}</text>"#,
        WIDTH / 2.0,
        MARGIN / 2.0,
        escape(axes.title)
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="12">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0,
        escape(axes.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {:.2})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(axes.y_label)
    );
    for (v, anchor_x) in [(frame.x.0, x0), (frame.x.1, x1)] {
        let _ = writeln!(
            s,
            r#"<text x="{anchor_x:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
            y1 + 14.0,
            tick_label(v, frame.xs)
        );
    }
    for (v, anchor_y) in [(frame.y.0, y1), (frame.y.1, y0)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{anchor_y:.2}" text-anchor="end" font-size="10">{}</text>"#,
            x0 - 4.0,
            tick_label(v, frame.ys)
        );
    }
    for &(x, y) in &usable {
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="steelblue"/>"#,
            frame.px(x),
            frame.py(y)
        );
    }
    if let Some(fit) = fit {
        if usable.len() >= 2 {
            let lo = usable.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
            let hi = usable.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
            let (a, b) = (fit.window.0.max(lo), fit.window.1.min(hi));
            let (a, b) = if a < b { (a, b) } else { (lo, hi) };
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="firebrick" stroke-width="1.5"/>"#,
                frame.px(a),
                frame.py(fit.predict(a)),
                frame.px(b),
                frame.py(fit.predict(b))
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="12" fill="firebrick">slope = {:.3}</text>"#,
                x1 - 8.0,
                y0 + 18.0,
                fit.slope
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use heatlab_core::estimates::fit_power_law;

    fn axes() -> Axes<'static> {
        Axes {
            title: "L2 <decay>",
            x_label: "t",
            y_label: "norm",
            x_scale: Scale::Log,
            y_scale: Scale::Log,
        }
    }

    #[test]
    fn single_point_has_marker_and_no_line() {
        let svg = plot(&axes(), &[(1.0, 2.0)], None);
        assert_eq!(svg.matches("<circle").count(), 1);
        assert!(!svg.contains("<line"));
        assert!(svg.contains("&lt;decay&gt;"));
    }

    #[test]
    fn slope_label_has_three_decimals() {
        let pts: Vec<(f64, f64)> = (1..20).map(|i| (i as f64, (i as f64).powf(-0.1234))).collect();
        let fit = fit_power_law(&pts, (1.0, 20.0)).unwrap();
        let svg = plot(&axes(), &pts, Some(&fit));
        assert!(svg.contains("slope = -0.123"), "{svg}");
        assert_eq!(svg, plot(&axes(), &pts, Some(&fit)));
    }

    #[test]
    fn log_axes_drop_nonpositive_values() {
        let svg = plot(&axes(), &[(1.0, 0.0), (2.0, 1.0), (-1.0, 1.0)], None);
        assert_eq!(svg.matches("<circle").count(), 1);
    }
}
