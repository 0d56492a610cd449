//! SVG 1.1 rendering of convergence histories and projected trajectories.

use std::fmt::Write;

const COLORS: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22",
];

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

/// A named polyline in data coordinates.
#[derive(Debug, Clone)]
pub struct Series<P> {
    pub label: String,
    pub points: Vec<P>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
}

fn legend<P>(out: &mut String, series: &[Series<P>]) {
    let x = WIDTH - RIGHT + 16.0;
    for (k, s) in series.iter().enumerate() {
        let y = TOP + 10.0 + 20.0 * k as f64;
        let color = COLORS[k % COLORS.len()];
        let _ = writeln!(
            out,
            "<line x1=\"{x:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\">{}</text>",
            x + 24.0,
            x + 30.0,
            y + 4.0,
            escape(&s.label)
        );
    }
}

fn polyline(out: &mut String, points: &[(f64, f64)], color: &str) {
    if points.is_empty() {
        return;
    }
    out.push_str("<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"");
    out.push_str(color);
    out.push_str("\" points=\"");
    for (k, (x, y)) in points.iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{x:.2},{y:.2}");
    }
    out.push_str("\"/>\n");
}

/// Decade tick positions covering `[lo, hi]` in log10 units, at most
/// about ten of them.
fn decades(lo: i32, hi: i32) -> Vec<i32> {
    let step = ((hi - lo) / 10 + 1).max(1);
    (lo..=hi).filter(|d| (d - lo) % step == 0).collect()
}

/// Integer multiples of 1, 2 or 5 times a power of ten in `[0, max]`, at
/// most seven of them.
fn linear_ticks(max: f64) -> Vec<f64> {
    let raw = max / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].into_iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag).max(1.0);
    (0..).map(|k| f64::from(k) * step).take_while(|v| *v <= max * (1.0 + 1e-12)).collect()
}

/// Log-scale y against linear x. Nonpositive and non-finite values are not
/// drawn.
pub fn log_y_plot(title: &str, x_label: &str, y_label: &str, series: &[Series<(f64, f64)>]) -> String {
    let positive = || series.iter().flat_map(|s| &s.points).filter(|(_, y)| *y > 0.0 && y.is_finite());
    let (mut lo, mut hi) = positive().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (_, y)| {
        let l = y.log10();
        (a.min(l), b.max(l))
    });
    if !lo.is_finite() {
        (lo, hi) = (-1.0, 0.0);
    }
    let (lo, mut hi) = (lo.floor() as i32, hi.ceil() as i32);
    if hi <= lo {
        hi = lo + 1;
    }
    let x_max = series.iter().flat_map(|s| &s.points).map(|p| p.0).fold(1.0f64, f64::max);
    let (w, h) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM);
    let sx = |x: f64| LEFT + w * x / x_max;
    let sy = |l: f64| TOP + h * (hi as f64 - l) / f64::from(hi - lo);

    let mut out = String::new();
    header(&mut out, title);
    let _ = writeln!(
        out,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"black\"/>"
    );
    for d in decades(lo, hi) {
        let y = sy(f64::from(d));
        let _ = writeln!(
            out,
            "<line x1=\"{LEFT}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">1e{d}</text>",
            LEFT + w,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for v in linear_ticks(x_max) {
        let x = sx(v);
        let _ = writeln!(
            out,
            "<line x1=\"{x:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\
             <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>",
            TOP + h,
            TOP + h + 5.0,
            TOP + h + 19.0,
            v.round()
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
         <text transform=\"translate(18 {:.1}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
        LEFT + w / 2.0,
        HEIGHT - 12.0,
        escape(x_label),
        TOP + h / 2.0,
        escape(y_label)
    );
    for (k, s) in series.iter().enumerate() {
        let pts: Vec<_> = s
            .points
            .iter()
            .filter(|(_, y)| *y > 0.0 && y.is_finite())
            .map(|&(x, y)| (sx(x), sy(y.log10())))
            .collect();
        polyline(&mut out, &pts, COLORS[k % COLORS.len()]);
    }
    legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}

/// Isometric view of `log10` coordinates shifted so that `floor` maps to
/// the origin; zeros and values below `floor` sit on the floor.
pub fn trajectory_plot(title: &str, axes: [&str; 3], floor: f64, series: &[Series<[f64; 3]>]) -> String {
    let lift = |v: f64| (v.max(floor).log10() - floor.log10()).max(0.0);
    let (c, s) = (30f64.to_radians().cos(), 30f64.to_radians().sin());
    let project = |p: [f64; 3]| -> (f64, f64) { ((p[0] - p[1]) * c, p[2] - (p[0] + p[1]) * s) };
    let lifted: Vec<Vec<[f64; 3]>> =
        series.iter().map(|ser| ser.points.iter().map(|p| [lift(p[0]), lift(p[1]), lift(p[2])]).collect()).collect();
    let reach = lifted.iter().flatten().flat_map(|p| p.iter().copied()).fold(1.0f64, f64::max);
    let ends = [[reach, 0.0, 0.0], [0.0, reach, 0.0], [0.0, 0.0, reach]];
    let mut bounds = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for p in lifted.iter().flatten().chain(&ends).chain(std::iter::once(&[0.0; 3])) {
        let (u, v) = project(*p);
        bounds = [bounds[0].min(u), bounds[1].max(u), bounds[2].min(v), bounds[3].max(v)];
    }
    let (w, h) = (WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM - 24.0);
    let scale = (w / (bounds[1] - bounds[0])).min(h / (bounds[3] - bounds[2]));
    let to_screen = |p: [f64; 3]| {
        let (u, v) = project(p);
        (LEFT + (u - bounds[0]) * scale, TOP + 24.0 + (bounds[3] - v) * scale)
    };

    let mut out = String::new();
    header(&mut out, title);
    let origin = to_screen([0.0; 3]);
    for (end, name) in ends.iter().zip(axes) {
        let (x, y) = to_screen(*end);
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{x:.1}\" y2=\"{y:.1}\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\
             <text x=\"{x:.1}\" y=\"{:.1}\" text-anchor=\"middle\" fill=\"#444444\">{}</text>",
            origin.0,
            origin.1,
            y - 6.0,
            escape(name)
        );
    }
    let _ = writeln!(
        out,
        "<text x=\"{LEFT}\" y=\"{:.1}\" fill=\"#444444\">log10 scale, origin at {floor:.1e}; axis length {reach:.1} decades</text>",
        HEIGHT - 12.0
    );
    for (k, pts) in lifted.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let screen: Vec<_> = pts.iter().map(|p| to_screen(*p)).collect();
        polyline(&mut out, &screen, color);
        if let Some((x, y)) = screen.first() {
            let _ = writeln!(out, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3\" fill=\"{color}\"/>");
        }
    }
    legend(&mut out, series);
    out.push_str("</svg>\n");
    out
}

/// Decades shown below the largest coordinate of a trajectory plot.
pub const TRAJECTORY_DECADES: f64 = 12.0;

/// Floor for [`trajectory_plot`]: a decade below the smallest positive
/// coordinate, but no more than [`TRAJECTORY_DECADES`] below the largest.
pub fn trajectory_floor(series: &[Series<[f64; 3]>]) -> f64 {
    let values = || {
        series.iter().flat_map(|s| &s.points).flat_map(|p| p.iter().copied()).filter(|v| *v > 0.0 && v.is_finite())
    };
    let min = values().fold(f64::INFINITY, f64::min);
    let max = values().fold(0.0f64, f64::max);
    if min.is_finite() {
        let low = min.log10().floor() - 1.0;
        let high = max.log10().ceil() - TRAJECTORY_DECADES;
        10f64.powf(low.max(high))
    } else {
        1e-20
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decade_ticks_are_thinned() {
        assert_eq!(decades(-3, 0), vec![-3, -2, -1, 0]);
        assert!(decades(-30, 0).len() <= 11);
    }

    #[test]
    fn log_plot_skips_nonpositive_values() {
        let s = Series { label: "a<b".into(), points: vec![(0.0, 1.0), (1.0, 1e-3), (2.0, 0.0)] };
        let svg = log_y_plot("t", "n", "err", &[s]);
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("a&lt;b"));
        let poly = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(poly.matches(',').count(), 2);
        assert!(svg.contains(">1e-3<") && svg.contains(">1e0<"));
    }

    #[test]
    fn linear_ticks_are_round() {
        assert_eq!(linear_ticks(5399.0), vec![0.0, 1000.0, 2000.0, 3000.0, 4000.0, 5000.0]);
        assert_eq!(linear_ticks(1.0), vec![0.0, 1.0]);
        assert_eq!(linear_ticks(40.0).len(), 5);
    }

    #[test]
    fn trajectory_floor_spans_a_bounded_window() {
        let wide = Series { label: "w".into(), points: vec![[1e2, 0.0, 1e-30]] };
        assert!((trajectory_floor(&[wide]) / 1e-10 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trajectory_floor_and_projection() {
        let s = Series { label: "p".into(), points: vec![[1.0, 0.5, 0.25], [1e-4, 0.0, 1e-6]] };
        assert!((trajectory_floor(std::slice::from_ref(&s)) / 1e-7 - 1.0).abs() < 1e-12);
        let svg = trajectory_plot("t", ["x", "y", "z"], 1e-7, &[s]);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
