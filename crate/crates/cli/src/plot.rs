//! Minimal line plots: a standalone SVG renderer and an equivalent gnuplot
//! script reading the same CSV.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_B: f64 = 52.0;

const PALETTE: [&str; 8] = [
    "#000000", "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf",
];

/// Where gnuplot finds a series: 1-based columns of a CSV, optionally
/// restricted to rows where another column equals a value.
#[derive(Debug, Clone)]
pub struct Source {
    pub file: String,
    pub x: usize,
    pub y: usize,
    pub filter: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub markers: bool,
    pub source: Source,
}

#[derive(Debug, Clone, Copy)]
pub enum Guide {
    Horizontal(f64),
    Vertical(f64),
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    pub guides: Vec<Guide>,
}

/// Round tick spacing giving roughly `target` intervals over `span`.
fn tick_step(span: f64, target: f64) -> f64 {
    let raw = span / target;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let nice = if r < 1.5 {
        1.0
    } else if r < 3.5 {
        2.0
    } else if r < 7.5 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = (hi - lo) * 0.04;
    (lo - pad, hi + pad)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Self {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
            guides: Vec::new(),
        }
    }

    pub fn svg(&self) -> String {
        let xs = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
        let ys = self.series.iter().flat_map(|s| s.points.iter().map(|p| p.1));
        let gx = self.guides.iter().filter_map(|g| match g {
            Guide::Vertical(x) => Some(*x),
            _ => None,
        });
        let gy = self.guides.iter().filter_map(|g| match g {
            Guide::Horizontal(y) => Some(*y),
            _ => None,
        });
        let (x0, x1) = padded_range(xs.chain(gx));
        let (y0, y1) = padded_range(ys.chain(gy));
        let pw = WIDTH - MARGIN_L - MARGIN_R;
        let ph = HEIGHT - MARGIN_T - MARGIN_B;
        let px = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
        let py = |y: f64| MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            MARGIN_L + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
        );

        let xstep = tick_step(x1 - x0, 6.0);
        let mut t = (x0 / xstep).ceil() * xstep;
        while t <= x1 + 1e-9 * xstep {
            let x = px(t);
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="black"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                MARGIN_T + ph,
                MARGIN_T + ph - 5.0,
                MARGIN_T + ph + 16.0,
                tick_label(t, xstep)
            );
            t += xstep;
        }
        let ystep = tick_step(y1 - y0, 6.0);
        let mut t = (y0 / ystep).ceil() * ystep;
        while t <= y1 + 1e-9 * ystep {
            let y = py(t);
            let _ = writeln!(
                s,
                r#"<line x1="{MARGIN_L}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                MARGIN_L + 5.0,
                MARGIN_L - 6.0,
                y + 4.0,
                tick_label(t, ystep)
            );
            t += ystep;
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            MARGIN_L + pw / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{}</text>"#,
            MARGIN_T + ph / 2.0,
            escape(&self.y_label)
        );

        for g in &self.guides {
            let (a, b, c, d) = match *g {
                Guide::Horizontal(y) => (MARGIN_L, py(y), MARGIN_L + pw, py(y)),
                Guide::Vertical(x) => (px(x), MARGIN_T, px(x), MARGIN_T + ph),
            };
            let _ = writeln!(
                s,
                r##"<line x1="{a:.1}" y1="{b:.1}" x2="{c:.1}" y2="{d:.1}" stroke="#555555" stroke-dasharray="6 4"/>"##
            );
        }

        for (i, ser) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let pts: Vec<String> = ser
                .points
                .iter()
                .filter(|p| p.0.is_finite() && p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                pts.join(" ")
            );
            if ser.markers {
                for p in &pts {
                    let (x, y) = p.split_once(',').expect("formatted pair");
                    let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="2.5" fill="{color}"/>"#);
                }
            }
            let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
            let lx = MARGIN_L + pw + 12.0;
            let _ = writeln!(
                s,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 20.0,
                lx + 26.0,
                ly + 4.0,
                escape(&ser.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }

    /// gnuplot script writing `output` (an SVG path) from the CSV sources.
    pub fn gnuplot(&self, output: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "set datafile separator ','");
        let _ = writeln!(s, "set terminal svg size {WIDTH},{HEIGHT} background rgb 'white'");
        let _ = writeln!(s, "set output '{output}'");
        let _ = writeln!(s, "set title \"{}\"", self.title.replace('"', "'"));
        let _ = writeln!(s, "set xlabel \"{}\"", self.x_label.replace('"', "'"));
        let _ = writeln!(s, "set ylabel \"{}\"", self.y_label.replace('"', "'"));
        let _ = writeln!(s, "set key outside right");
        for g in &self.guides {
            match g {
                Guide::Horizontal(y) => {
                    let _ = writeln!(s, "set arrow from graph 0, first {y} to graph 1, first {y} nohead dt 2");
                }
                Guide::Vertical(x) => {
                    let _ = writeln!(s, "set arrow from first {x}, graph 0 to first {x}, graph 1 nohead dt 2");
                }
            }
        }
        let clauses: Vec<String> = self
            .series
            .iter()
            .map(|ser| {
                let src = &ser.source;
                let y = if src.filter.is_empty() {
                    format!("{}", src.y)
                } else {
                    let cond: Vec<String> = src
                        .filter
                        .iter()
                        .map(|(c, v)| format!("abs(${c}-({v:e}))<1e-9"))
                        .collect();
                    format!("({} ? ${} : 1/0)", cond.join(" && "), src.y)
                };
                format!(
                    "'{}' skip 1 using {}:{} with {} title \"{}\"",
                    src.file,
                    src.x,
                    y,
                    if ser.markers { "linespoints" } else { "lines" },
                    ser.label.replace('"', "'")
                )
            })
            .collect();
        let _ = writeln!(s, "plot {}", clauses.join(", \\\n     "));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Plot {
        let mut p = Plot::new("t <a>", "x", "y");
        p.series.push(Series {
            label: "one".into(),
            points: vec![(0.0, 0.0), (1.0, 2.0), (2.0, f64::NAN)],
            markers: true,
            source: Source {
                file: "d.csv".into(),
                x: 1,
                y: 3,
                filter: vec![(2, 0.5)],
            },
        });
        p.guides.push(Guide::Horizontal(0.5));
        p
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(tick_step(1.0, 5.0), 0.2);
        assert_eq!(tick_step(37.0, 6.0), 5.0);
        assert_eq!(tick_label(-0.0, 0.5), "0.0");
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = sample().svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("t &lt;a&gt;"));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<circle").count(), 2);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn gnuplot_filters_rows() {
        let gp = sample().gnuplot("out.svg");
        assert!(gp.contains("set output 'out.svg'"));
        assert!(gp.contains("abs($2-(5e-1))<1e-9 ? $3 : 1/0"));
        assert!(gp.contains("first 0.5"));
    }

    #[test]
    fn deterministic() {
        assert_eq!(sample().svg(), sample().svg());
    }
}
