//! SVG line charts and their CSV tables, rendered from an analysis report.

use std::fmt::Write;

use spinmarket_core::analysis::{AnalysisReport, CurveReport};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2",
];

struct Series {
    label: String,
    points: Vec<(f64, f64)>,
    /// Square markers, e.g. spline minima.
    markers: Vec<(f64, f64)>,
    /// Dashed straight line between two points.
    guide: Option<[(f64, f64); 2]>,
}

struct Chart {
    title: String,
    x_label: String,
    y_label: String,
    log: bool,
    series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
    px0: f64,
    px1: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool, px0: f64, px1: f64) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite() && (!log || *v > 0.0)) {
            let v = if log { v.log10() } else { v };
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        let span = hi - lo;
        let pad = if span > 0.0 { 0.05 * span } else { 0.5_f64.max(0.05 * lo.abs()) };
        Self { lo: lo - pad, hi: hi + pad, log, px0, px1 }
    }

    fn map(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        self.px0 + (v - self.lo) / (self.hi - self.lo) * (self.px1 - self.px0)
    }

    fn ticks(&self) -> Vec<f64> {
        if self.log {
            let (a, b) = (self.lo.floor() as i32, self.hi.ceil() as i32);
            for mantissas in [&[1.0][..], &[1.0, 2.0, 5.0], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]] {
                let t: Vec<f64> = (a..=b)
                    .flat_map(|k| mantissas.iter().map(move |m| m * 10f64.powi(k)))
                    .filter(|v| (self.lo..=self.hi).contains(&v.log10()))
                    .collect();
                if t.len() >= 3 {
                    return t;
                }
            }
            return vec![10f64.powf(self.lo), 10f64.powf(self.hi)];
        }
        let raw = (self.hi - self.lo) / 8.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0]
            .iter()
            .map(|m| m * mag)
            .find(|s| *s >= raw)
            .unwrap_or(10.0 * mag);
        let mut t = Vec::new();
        let mut v = (self.lo / step).ceil() * step;
        while v <= self.hi + 1e-9 * step {
            t.push(if v.abs() < 1e-12 * step { 0.0 } else { v });
            v += step;
        }
        t
    }
}

fn num(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg(chart: &Chart) -> String {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let all = || {
        chart.series.iter().flat_map(|s| {
            s.points.iter().chain(&s.markers).copied().chain(s.guide.into_iter().flatten())
        })
    };
    let xa = Axis::fit(all().map(|p| p.0), chart.log, x0, x1);
    let ya = Axis::fit(all().map(|p| p.1), chart.log, y0, y1);

    let mut o = String::new();
    let _ = writeln!(
        o,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(o, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        o,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (x0 + x1) / 2.0,
        esc(&chart.title)
    );
    let _ = writeln!(o, r#"<g class="axes" stroke="black" fill="none">"#);
    let _ = writeln!(o, r#"<rect x="{x0}" y="{y1}" width="{:.1}" height="{:.1}"/>"#, x1 - x0, y0 - y1);
    let _ = writeln!(o, "</g>");
    let _ = writeln!(o, r#"<g class="ticks">"#);
    for t in xa.ticks() {
        let x = xa.map(t);
        let _ = writeln!(o, r##"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{:.1}" stroke="black"/>"##, y0 + 5.0);
        let _ = writeln!(o, r#"<text x="{x:.2}" y="{:.1}" text-anchor="middle">{}</text>"#, y0 + 19.0, num(t));
    }
    for t in ya.ticks() {
        let y = ya.map(t);
        let _ = writeln!(o, r##"<line x1="{:.1}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"##, x0 - 5.0);
        let _ = writeln!(o, r#"<text x="{:.1}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, y + 4.0, num(t));
    }
    let _ = writeln!(o, "</g>");
    let _ = writeln!(
        o,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 15.0,
        esc(&chart.x_label)
    );
    let _ = writeln!(
        o,
        r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(&chart.y_label)
    );
    if chart.series.iter().all(|s| s.points.is_empty()) {
        let _ = writeln!(
            o,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" fill="gray">no data</text>"#,
            (x0 + x1) / 2.0,
            (y0 + y1) / 2.0
        );
    }

    for (i, s) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let visible: Vec<(f64, f64)> = s
            .points
            .iter()
            .copied()
            .filter(|p| p.0.is_finite() && p.1.is_finite() && (!chart.log || (p.0 > 0.0 && p.1 > 0.0)))
            .collect();
        if !visible.is_empty() {
            let pts: Vec<String> = visible
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", xa.map(x), ya.map(y)))
                .collect();
            let _ = writeln!(
                o,
                r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="1.6" points="{}"/>"#,
                esc(&s.label),
                pts.join(" ")
            );
            for &(x, y) in &visible {
                let _ = writeln!(o, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, xa.map(x), ya.map(y));
            }
        }
        if let Some([a, b]) = s.guide {
            let _ = writeln!(
                o,
                r#"<line class="fit" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-dasharray="5,4"/>"#,
                xa.map(a.0),
                ya.map(a.1),
                xa.map(b.0),
                ya.map(b.1)
            );
        }
        for &(x, y) in &s.markers {
            let _ = writeln!(
                o,
                r#"<rect class="minimum" data-x="{x}" data-y="{y}" x="{:.2}" y="{:.2}" width="8" height="8" fill="none" stroke="{color}" stroke-width="1.6"/>"#,
                xa.map(x) - 4.0,
                ya.map(y) - 4.0
            );
        }
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            o,
            r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{color}" stroke-width="2"/>"#,
            lx + 22.0
        );
        let _ = writeln!(o, r#"<text x="{:.1}" y="{:.1}">{}</text>"#, lx + 28.0, ly + 4.0, esc(&s.label));
    }
    o.push_str("</svg>\n");
    o
}

fn curve_label(c: &CurveReport) -> String {
    format!("side {}, β = {}", c.side, num(c.beta))
}

/// Curves at the highest-noise reference temperature, or all curves if it is absent.
fn reference_curves(rep: &AnalysisReport) -> Vec<&CurveReport> {
    let at_half: Vec<_> = rep.curves.iter().filter(|c| (c.beta - 0.5).abs() < 1e-9).collect();
    if at_half.is_empty() {
        rep.curves.iter().collect()
    } else {
        at_half
    }
}

fn curve_chart<F>(curves: &[&CurveReport], title: &str, y_label: &str, value: F, csv_name: &str) -> (Chart, String)
where
    F: Fn(&spinmarket_core::analysis::PointReport) -> f64,
{
    let mut csv = format!("side,beta,alpha,{csv_name}\n");
    let series = curves
        .iter()
        .map(|c| {
            let points: Vec<(f64, f64)> = c.points.iter().map(|p| (p.alpha, value(p))).collect();
            for (a, v) in &points {
                let _ = writeln!(csv, "{},{},{a},{v}", c.side, c.beta);
            }
            Series { label: curve_label(c), points, markers: vec![], guide: None }
        })
        .collect();
    let chart = Chart {
        title: title.into(),
        x_label: "coupling α".into(),
        y_label: y_label.into(),
        log: false,
        series,
    };
    (chart, csv)
}

fn fig3(rep: &AnalysisReport) -> (Chart, String) {
    let curves: Vec<_> = rep.curves.iter().collect();
    let (mut chart, mut csv) = curve_chart(&curves, "Mean renewal period", "T_renew", |p| p.t_renew, "t_renew");
    csv = csv.replacen("t_renew\n", "t_renew,kind\n", 1);
    let mut rows: Vec<String> = csv.lines().map(|l| l.to_string()).collect();
    for r in rows.iter_mut().skip(1) {
        r.push_str(",point");
    }
    for (s, c) in chart.series.iter_mut().zip(&rep.curves) {
        if let Some(m) = c.t_renew_min.as_ref().filter(|m| m.interior) {
            s.markers.push((m.location, m.value));
            rows.push(format!("{},{},{},{},spline_minimum", c.side, c.beta, m.location, m.value));
        }
    }
    (chart, rows.join("\n") + "\n")
}

fn fig5(rep: &AnalysisReport) -> (Chart, String) {
    let mut csv = String::from("side,beta,t_renew_min,exponent,prefactor,r_squared\n");
    let series = rep
        .scaling
        .iter()
        .map(|s| {
            let guide = s.fit.as_ref().and_then(|f| {
                let lo = s.minima.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
                let hi = s.minima.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
                (lo < hi).then(|| [(lo, f.eval(lo)), (hi, f.eval(hi))])
            });
            for (b, t) in &s.minima {
                let (e, p, r) = match &s.fit {
                    Some(f) => (f.exponent.to_string(), f.prefactor().to_string(), f.r_squared.to_string()),
                    None => Default::default(),
                };
                let _ = writeln!(csv, "{},{b},{t},{e},{p},{r}", s.side);
            }
            let label = match &s.fit {
                Some(f) => format!("side {}, slope {}", s.side, num(f.exponent)),
                None => format!("side {}", s.side),
            };
            Series { label, points: s.minima.clone(), markers: vec![], guide }
        })
        .collect();
    let chart = Chart {
        title: "Renewal period at the critical coupling".into(),
        x_label: "inverse temperature β (log)".into(),
        y_label: "T_renew(α*) (log)".into(),
        log: true,
        series,
    };
    (chart, csv)
}

/// Files to write, in a fixed order: four SVG figures and their CSV tables.
pub fn render(rep: &AnalysisReport) -> Vec<(String, String)> {
    let reference = reference_curves(rep);
    let (c1, t1) = curve_chart(&reference, "Fraction of time in the ordered phase", "π_ord", |p| p.pi_ord, "pi_ord");
    let (c2, t2) = curve_chart(&reference, "Exit rate from the ordered phase", "λ_ord", |p| p.lambda_ord, "lambda_ord");
    let (c3, t3) = fig3(rep);
    let (c5, t5) = fig5(rep);
    let mut out = Vec::new();
    for (name, chart, table) in [("fig1", c1, t1), ("fig2", c2, t2), ("fig3", c3, t3), ("fig5", c5, t5)] {
        out.push((format!("{name}.svg"), svg(&chart)));
        out.push((format!("{name}.csv"), table));
    }
    out
}
