//! Plain SVG rendering of error curves and of the checkerboard transport.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::estimators::RoundingFit;
use crate::io::write_text;
use crate::measures::DiscreteMeasure;

use super::output::SummaryRow;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// What to draw from a summary.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSpec {
    /// Metrics to plot; each (estimator, d, metric) gets its own curve.
    pub metrics: Vec<String>,
    pub title: String,
}

impl PlotSpec {
    pub fn new(metric: &str) -> Self {
        PlotSpec {
            metrics: vec![metric.to_string()],
            title: format!("{metric} vs n"),
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct LogAxis {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl LogAxis {
    fn new(min: f64, max: f64, a: f64, b: f64) -> Self {
        let (mut lo, mut hi) = (min.log10(), max.log10());
        if hi - lo < 1e-9 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.04 * (hi - lo);
        LogAxis {
            lo: lo - pad,
            hi: hi + pad,
            a,
            b,
        }
    }

    fn map(&self, v: f64) -> f64 {
        self.a + (v.log10() - self.lo) / (self.hi - self.lo) * (self.b - self.a)
    }

    /// Tick values at 1, 2 and 5 times powers of ten inside the range; only
    /// powers of ten when the range spans several decades.
    fn ticks(&self) -> Vec<f64> {
        let mults: &[f64] = if self.hi - self.lo > 2.5 { &[1.0] } else { &[1.0, 2.0, 5.0] };
        let mut out = Vec::new();
        for e in (self.lo.floor() as i32)..=(self.hi.ceil() as i32) {
            for m in mults {
                let v = m * 10f64.powi(e);
                let l = v.log10();
                if l >= self.lo && l <= self.hi {
                    out.push(v);
                }
            }
        }
        out
    }
}

fn tick_label(v: f64) -> String {
    if (1e-3..1e4).contains(&v) {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.0e}")
    }
}

/// Log-log error curves: one polyline per (estimator, d, metric) through
/// the group means, with the bootstrap band between the first and last
/// quantile shaded.
pub fn render_svg_plot(summary: &[SummaryRow], spec: &PlotSpec) -> Result<String> {
    if spec.metrics.is_empty() {
        return Err(Error::InvalidParameter("no metric selected for plotting".into()));
    }
    let mut curves: BTreeMap<(String, usize, String), Vec<&SummaryRow>> = BTreeMap::new();
    for r in summary {
        if spec.metrics.contains(&r.metric) && r.mean > 0.0 && r.n > 0 {
            curves
                .entry((r.estimator.clone(), r.d, r.metric.clone()))
                .or_default()
                .push(r);
        }
    }
    if curves.is_empty() {
        return Err(Error::Empty("plottable summary rows"));
    }
    let positive = |v: f64| v > 0.0 && v.is_finite();
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    for pts in curves.values() {
        for r in pts {
            xmin = xmin.min(r.n as f64);
            xmax = xmax.max(r.n as f64);
            for v in std::iter::once(r.mean).chain(r.quantiles.iter().copied()).filter(|&v| positive(v)) {
                ymin = ymin.min(v);
                ymax = ymax.max(v);
            }
        }
    }
    let x_axis = LogAxis::new(xmin, xmax, LEFT, WIDTH - RIGHT);
    let y_axis = LogAxis::new(ymin, ymax, HEIGHT - BOTTOM, TOP);
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        (x0 + x1) / 2.0,
        escape(&spec.title)
    );
    let _ = writeln!(s, r#"<g id="axes" stroke="black" fill="none">"#);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{:.1}" height="{:.1}"/>"#, x1 - x0, y1 - y0);
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r##"<g id="ticks" stroke="#bbb" stroke-width="0.5">"##);
    for v in x_axis.ticks() {
        let x = x_axis.map(v);
        let _ = writeln!(s, r#"<line x1="{x:.1}" y1="{y0}" x2="{x:.1}" y2="{y1}"/>"#);
    }
    for v in y_axis.ticks() {
        let y = y_axis.map(v);
        let _ = writeln!(s, r#"<line x1="{x0}" y1="{y:.1}" x2="{x1}" y2="{y:.1}"/>"#);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g id="tick-labels">"#);
    for v in x_axis.ticks() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            x_axis.map(v),
            y1 + 16.0,
            tick_label(v)
        );
    }
    for v in y_axis.ticks() {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y_axis.map(v) + 4.0,
            tick_label(v)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">n (log scale)</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{} (log scale)</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(&spec.metrics.join(", "))
    );
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g id="curves">"#);
    for (idx, ((est, d, metric), mut pts)) in curves.into_iter().enumerate() {
        pts.sort_by_key(|r| r.n);
        let color = PALETTE[idx % PALETTE.len()];
        let band: Vec<&&SummaryRow> = pts
            .iter()
            .filter(|r| r.quantiles.len() >= 2 && positive(r.quantiles[0]) && positive(*r.quantiles.last().unwrap()))
            .collect();
        if band.len() >= 2 {
            let mut poly = Vec::new();
            for r in &band {
                poly.push(format!("{:.1},{:.1}", x_axis.map(r.n as f64), y_axis.map(*r.quantiles.last().unwrap())));
            }
            for r in band.iter().rev() {
                poly.push(format!("{:.1},{:.1}", x_axis.map(r.n as f64), y_axis.map(r.quantiles[0])));
            }
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{color}" fill-opacity="0.18" stroke="none"/>"#,
                poly.join(" ")
            );
        }
        let line: Vec<String> = pts
            .iter()
            .map(|r| format!("{:.1},{:.1}", x_axis.map(r.n as f64), y_axis.map(r.mean)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        for r in &pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                x_axis.map(r.n as f64),
                y_axis.map(r.mean)
            );
        }
        let ly = TOP + 10.0 + 18.0 * idx as f64;
        let name = if spec.metrics.len() > 1 {
            format!("{est} d={d} {metric}")
        } else {
            format!("{est} d={d}")
        };
        let _ = writeln!(
            s,
            r#"<line x1="{:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            x1 + 12.0,
            x1 + 32.0,
            x1 + 38.0,
            ly + 4.0,
            escape(&name)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg_plot(summary: &[SummaryRow], spec: &PlotSpec, path: &Path) -> Result<()> {
    write_text(path, &render_svg_plot(summary, spec)?)
}

/// The checkerboard picture in four layers: the source points, their
/// rounded images, the plan routing rounded mass to targets, and the
/// target points. All coordinates are assumed to lie in [0,1]².
pub fn render_checkerboard_svg(mu: &DiscreteMeasure, nu: &DiscreteMeasure, fit: &RoundingFit) -> Result<String> {
    if mu.dim() != 2 || nu.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: if mu.dim() != 2 { mu.dim() } else { nu.dim() },
        });
    }
    let size = 520.0;
    let pad = 20.0;
    let map = |x: f64, y: f64| (pad + x * (size - 2.0 * pad), size - pad - y * (size - 2.0 * pad));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(s, r#"<rect width="{size}" height="{size}" fill="white"/>"#);
    let layer = |s: &mut String, id: &str, color: &str, m: &DiscreteMeasure, r: f64| {
        let _ = writeln!(s, r#"<g id="{id}" fill="{color}">"#);
        for p in m.points() {
            let (cx, cy) = map(p[0], p[1]);
            let _ = writeln!(s, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="{r}"/>"#);
        }
        let _ = writeln!(s, "</g>");
    };
    layer(&mut s, "source", "#1f77b4", mu, 1.5);
    layer(&mut s, "rounded-source", "#ff7f0e", &fit.rounded, 3.0);
    let max_mass = fit.plan.entries().iter().map(|e| e.2).fold(0.0, f64::max);
    let _ = writeln!(s, r##"<g id="plan" stroke="#555" stroke-width="0.6">"##);
    for &(i, j, m) in fit.plan.entries() {
        let a = &fit.plan.source().points()[i];
        let b = &fit.plan.target().points()[j];
        let (ax, ay) = map(a[0], a[1]);
        let (bx, by) = map(b[0], b[1]);
        let _ = writeln!(
            s,
            r#"<line x1="{ax:.2}" y1="{ay:.2}" x2="{bx:.2}" y2="{by:.2}" stroke-opacity="{:.3}"/>"#,
            (0.15 + 0.85 * m / max_mass).min(1.0)
        );
    }
    let _ = writeln!(s, "</g>");
    layer(&mut s, "destination", "#d62728", nu, 1.5);
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_checkerboard_svg(mu: &DiscreteMeasure, nu: &DiscreteMeasure, fit: &RoundingFit, path: &Path) -> Result<()> {
    write_text(path, &render_checkerboard_svg(mu, nu, fit)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{fit_rounding, EstimatorConfig, RoundingScheme};
    use crate::experiments::gen_checkerboard;
    use crate::rng::stream;

    fn summary() -> Vec<SummaryRow> {
        let mut rows = Vec::new();
        for (est, scale) in [("nn", 1.0), ("rounding-cubic", 0.5)] {
            for n in [10, 25, 50, 100] {
                let mean = scale * (n as f64).powf(-0.3);
                rows.push(SummaryRow {
                    setting: "a".into(),
                    d: 3,
                    n,
                    estimator: est.into(),
                    metric: "ep".into(),
                    count: 5,
                    mean,
                    quantiles: vec![0.9 * mean, 1.1 * mean],
                });
            }
        }
        rows
    }

    #[test]
    fn plot_is_deterministic_and_has_curves() {
        let a = render_svg_plot(&summary(), &PlotSpec::new("ep")).unwrap();
        let b = render_svg_plot(&summary(), &PlotSpec::new("ep")).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<polyline").count(), 2);
        assert_eq!(a.matches("<polygon").count(), 2);
        assert!(a.contains("rounding-cubic d=3"));
    }

    #[test]
    fn plot_rejects_empty_selection() {
        let spec = PlotSpec {
            metrics: vec![],
            title: String::new(),
        };
        assert!(render_svg_plot(&summary(), &spec).is_err());
        assert!(render_svg_plot(&summary(), &PlotSpec::new("lp_vs_tstar")).is_err());
    }

    #[test]
    fn checkerboard_has_four_layers() {
        let inst = gen_checkerboard(4, 200, &mut stream(1, &[])).unwrap();
        let mut cfg = EstimatorConfig::default();
        cfg.side = Some(0.125);
        let fit = fit_rounding(inst.mu.points(), inst.nu.points(), RoundingScheme::Cubic, &cfg).unwrap();
        let svg = render_checkerboard_svg(&inst.mu, &inst.nu, &fit).unwrap();
        for id in ["source", "rounded-source", "plan", "destination"] {
            assert!(svg.contains(&format!("<g id=\"{id}\"")), "{id}");
        }
        assert_eq!(svg, render_checkerboard_svg(&inst.mu, &inst.nu, &fit).unwrap());
    }
}
