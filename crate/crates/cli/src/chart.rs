//! Hand-emitted SVG line charts.
//!
//! Fixed style so output is byte-stable: 900 px wide panels, 380 px tall,
//! stacked vertically; plot area 570×280 px at (70, 40) inside each panel
//! with the legend to its right; ten-colour palette cycled by series index
//! unless a series names its slot; coordinates rounded to 0.01 px. A series
//! with a single point is drawn as a marker, longer series as polylines
//! (dashed on request).

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Result};

use crate::table::write_text;

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 380.0;
const PLOT_LEFT: f64 = 70.0;
const PLOT_TOP: f64 = 40.0;
const PLOT_WIDTH: f64 = 570.0;
const PLOT_HEIGHT: f64 = 280.0;
const LEGEND_LEFT: f64 = 660.0;
const PALETTE: [&str; 10] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"];

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
    /// Palette slot; defaults to the series position.
    pub color: Option<usize>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { label: label.into(), points, dashed: false, color: None }
    }

    pub fn color(mut self, slot: usize) -> Self {
        self.color = Some(slot);
        self
    }

    pub fn dashed(mut self) -> Self {
        self.dashed = true;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Fixed y range; otherwise taken from the data.
    pub y_range: Option<(f64, f64)>,
}

/// One panel as a standalone SVG document.
pub fn render_chart(panel: &Panel) -> Result<String> {
    render_panels(&[panel])
}

/// Panels stacked top to bottom in one document.
pub fn render_panels(panels: &[&Panel]) -> Result<String> {
    if panels.is_empty() {
        bail!("nothing to plot");
    }
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{height}\" \
         viewBox=\"0 0 {WIDTH} {height}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, panel) in panels.iter().enumerate() {
        render_panel(&mut svg, panel, i, PANEL_HEIGHT * i as f64)?;
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_chart(panels: &[&Panel], path: &Path) -> Result<()> {
    write_text(path, &render_panels(panels)?)
}

struct Axis {
    lo: f64,
    hi: f64,
    ticks: Vec<f64>,
    decimals: usize,
}

impl Axis {
    fn new(lo: f64, hi: f64, fixed: bool) -> Axis {
        let (lo, hi) = if hi - lo > 0.0 { (lo, hi) } else { (lo - 0.5, hi + 0.5) };
        let step = nice_step((hi - lo) / 5.0);
        let (lo, hi) = if fixed { (lo, hi) } else { ((lo / step).floor() * step, (hi / step).ceil() * step) };
        let first = (lo / step - 1e-9).ceil() as i64;
        let last = (hi / step + 1e-9).floor() as i64;
        let ticks =
            (first..=last).map(|k| k as f64 * step).map(|t| if t.abs() < step * 1e-9 { 0.0 } else { t }).collect();
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        Axis { lo, hi, ticks, decimals }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

/// 1, 2 or 5 times a power of ten, at least `raw`.
fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let unit = [1.0, 2.0, 5.0, 10.0].into_iter().find(|m| m * mag >= raw * (1.0 - 1e-12)).unwrap_or(10.0);
    unit * mag
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn render_panel(svg: &mut String, panel: &Panel, index: usize, offset: f64) -> Result<()> {
    if panel.series.is_empty() {
        bail!("panel {:?} has no series", panel.title);
    }
    let mut x_bounds = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y_bounds = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &panel.series {
        if s.points.is_empty() {
            bail!("series {:?} is empty", s.label);
        }
        for &(x, y) in &s.points {
            if !x.is_finite() || !y.is_finite() {
                bail!("series {:?} has a non-finite point ({x}, {y})", s.label);
            }
            x_bounds = (x_bounds.0.min(x), x_bounds.1.max(x));
            y_bounds = (y_bounds.0.min(y), y_bounds.1.max(y));
        }
    }
    let x_axis = Axis::new(x_bounds.0, x_bounds.1, true);
    let y_axis = match panel.y_range {
        Some((lo, hi)) => Axis::new(lo, hi, true),
        None => Axis::new(y_bounds.0, y_bounds.1, false),
    };
    let px = |x: f64| PLOT_LEFT + x_axis.frac(x) * PLOT_WIDTH;
    let py = |y: f64| PLOT_TOP + (1.0 - y_axis.frac(y)) * PLOT_HEIGHT;
    let bottom = PLOT_TOP + PLOT_HEIGHT;

    let _ = writeln!(svg, "<g transform=\"translate(0,{offset})\">");
    let _ = writeln!(
        svg,
        "<defs><clipPath id=\"plot{index}\"><rect x=\"{PLOT_LEFT}\" y=\"{PLOT_TOP}\" width=\"{PLOT_WIDTH}\" \
         height=\"{PLOT_HEIGHT}\"/></clipPath></defs>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"14\" font-weight=\"bold\">{}</text>",
        PLOT_LEFT + PLOT_WIDTH / 2.0,
        escape(&panel.title)
    );

    // grid and ticks
    for &t in &x_axis.ticks {
        let x = px(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.2}\" y1=\"{PLOT_TOP}\" x2=\"{x:.2}\" y2=\"{bottom}\" stroke=\"#e0e0e0\"/>\
             <line x1=\"{x:.2}\" y1=\"{bottom}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\
             <text x=\"{x:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{:.*}</text>",
            bottom + 5.0,
            bottom + 18.0,
            x_axis.decimals,
            t
        );
    }
    for &t in &y_axis.ticks {
        let y = py(t);
        let _ = writeln!(
            svg,
            "<line x1=\"{PLOT_LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#e0e0e0\"/>\
             <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{PLOT_LEFT}\" y2=\"{y:.2}\" stroke=\"black\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{:.*}</text>",
            PLOT_LEFT + PLOT_WIDTH,
            PLOT_LEFT - 5.0,
            PLOT_LEFT - 8.0,
            y + 4.0,
            y_axis.decimals,
            t
        );
    }
    let _ = writeln!(
        svg,
        "<rect x=\"{PLOT_LEFT}\" y=\"{PLOT_TOP}\" width=\"{PLOT_WIDTH}\" height=\"{PLOT_HEIGHT}\" fill=\"none\" \
         stroke=\"black\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        PLOT_LEFT + PLOT_WIDTH / 2.0,
        bottom + 38.0,
        escape(&panel.x_label)
    );
    let _ = writeln!(
        svg,
        "<text transform=\"translate(20,{:.2}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
        PLOT_TOP + PLOT_HEIGHT / 2.0,
        escape(&panel.y_label)
    );

    // data
    let _ = writeln!(svg, "<g clip-path=\"url(#plot{index})\">");
    for (i, s) in panel.series.iter().enumerate() {
        let color = PALETTE[s.color.unwrap_or(i) % PALETTE.len()];
        if let [(x, y)] = s.points[..] {
            let _ = writeln!(svg, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"{color}\"/>", px(x), py(y));
            continue;
        }
        let coords: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>",
            coords.join(" ")
        );
    }
    svg.push_str("</g>\n");

    // legend
    for (i, s) in panel.series.iter().enumerate() {
        let color = PALETTE[s.color.unwrap_or(i) % PALETTE.len()];
        let y = PLOT_TOP + 10.0 + 20.0 * i as f64;
        if s.points.len() == 1 {
            let _ = write!(svg, "<circle cx=\"{:.2}\" cy=\"{y:.2}\" r=\"3.5\" fill=\"{color}\"/>", LEGEND_LEFT + 12.0);
        } else {
            let dash = if s.dashed { " stroke-dasharray=\"6 4\"" } else { "" };
            let _ = write!(
                svg,
                "<line x1=\"{LEGEND_LEFT}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" \
                 stroke-width=\"1.5\"{dash}/>",
                LEGEND_LEFT + 24.0
            );
        }
        let _ = writeln!(svg, "<text x=\"{:.2}\" y=\"{:.2}\">{}</text>", LEGEND_LEFT + 32.0, y + 4.0, escape(&s.label));
    }
    svg.push_str("</g>\n");
    Ok(())
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn panel(series: Vec<Series>) -> Panel {
        Panel { title: "t".into(), x_label: "x".into(), y_label: "y".into(), series, y_range: None }
    }

    #[test]
    fn single_point_is_a_marker() {
        let svg = render_chart(&panel(vec![Series::new("one", vec![(1.0, 2.0)])])).unwrap();
        assert_eq!(svg.matches("<circle").count(), 2); // plot + legend
        assert!(!svg.contains("<polyline"));
    }

    #[test]
    fn lines_ticks_and_legend() {
        let p = panel(vec![
            Series::new("a & b", vec![(0.0, 0.0), (1.0, 1.0), (2.0, 0.5)]),
            Series::new("c", vec![(0.0, 1.0), (2.0, 0.0)]).dashed(),
        ]);
        let svg = render_chart(&p).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert_eq!(svg.matches("stroke-dasharray").count(), 2);
        assert!(svg.contains(">a &amp; b</text>"));
        assert!(svg.contains(">0.5</text>"));
        assert!(svg.starts_with("<?xml"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(render_chart(&panel(vec![])).is_err());
        assert!(render_chart(&panel(vec![Series::new("e", vec![])])).is_err());
        assert!(render_chart(&panel(vec![Series::new("n", vec![(0.0, f64::NAN)])])).is_err());
        assert!(render_panels(&[]).is_err());
    }

    #[test]
    fn stacked_panels_grow_the_canvas() {
        let p = panel(vec![Series::new("a", vec![(0.0, 0.0), (1.0, 1.0)])]);
        let svg = render_panels(&[&p, &p]).unwrap();
        assert!(svg.contains("height=\"760\""));
        assert!(svg.contains("translate(0,380)"));
    }

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(4.0), 5.0);
        assert_eq!(nice_step(0.2), 0.2);
        assert_eq!(nice_step(0.13), 0.2);
        assert_eq!(nice_step(30.0), 50.0);
        assert_eq!(nice_step(0.07), 0.1);
    }

    proptest! {
        #[test]
        fn deterministic(ys in proptest::collection::vec(-10.0f64..10.0, 1..30)) {
            let pts: Vec<(f64, f64)> = ys.iter().enumerate().map(|(i, &y)| (i as f64, y)).collect();
            let p = panel(vec![Series::new("s", pts)]);
            prop_assert_eq!(render_chart(&p).unwrap(), render_chart(&p.clone()).unwrap());
        }

        #[test]
        fn ticks_inside_axis(lo in -100.0f64..100.0, span in 1e-3f64..1e3) {
            let axis = Axis::new(lo, lo + span, false);
            prop_assert!(axis.ticks.len() >= 2);
            for t in &axis.ticks {
                prop_assert!(*t >= axis.lo - 1e-9 * span && *t <= axis.hi + 1e-9 * span);
            }
        }
    }
}
