//! Fidelity and yield curves for three, six and nine emitters started in
//! `|10…0⟩` and monitored for one photon per round.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use trapgen_core::closed_form::yields;
use trapgen_core::{
    canonical_state, run_conditional_blocks, BlockDensity, Canonical, ProtocolConfig, ProtocolTrace, YieldMode,
};

use crate::chart::{render_panels, Panel, Series};
use crate::table::write_text;

pub const DEFAULT_REPS: usize = 20;

pub struct Curve {
    pub label: String,
    pub n: usize,
    pub theta: f64,
    pub trace: ProtocolTrace,
    pub per_step_yields: Vec<f64>,
}

pub struct Figure2 {
    pub curves: Vec<Curve>,
}

/// (n, label, θ). Nine emitters are shown at both `π/√32` and the node `π/√34`.
fn configurations() -> [(usize, &'static str, f64); 4] {
    [
        (3, "n=3, θ=π/√10", PI / 10f64.sqrt()),
        (6, "n=6, θ=π/√22", PI / 22f64.sqrt()),
        (9, "n=9, θ=π/√32", PI / 32f64.sqrt()),
        (9, "n=9, θ=π/√34", PI / 34f64.sqrt()),
    ]
}

pub fn figure2(reps: usize) -> Result<Figure2> {
    let mut curves = Vec::new();
    for (n, label, theta) in configurations() {
        let initial = BlockDensity::from_pure(&canonical_state(Canonical::Computational(1), n)?)?;
        let target = canonical_state(Canonical::W1, n)?;
        let cfg = ProtocolConfig::new(n, theta, reps, 1).labels(format!("|{}⟩", ket(n)), "w1");
        let trace = run_conditional_blocks(&initial, &target, &cfg)?;
        let per_step_yields = yields(&trace.probabilities(), YieldMode::PerStep);
        curves.push(Curve { label: label.to_string(), n, theta, trace, per_step_yields });
    }
    Ok(Figure2 { curves })
}

fn ket(n: usize) -> String {
    std::iter::once('1').chain(std::iter::repeat_n('0', n - 1)).collect()
}

fn points(values: &[f64]) -> Vec<(f64, f64)> {
    values.iter().enumerate().map(|(i, &v)| (i as f64, v)).collect()
}

impl Figure2 {
    pub fn curve(&self, label_prefix: &str) -> Option<&Curve> {
        self.curves.iter().find(|c| c.label.starts_with(label_prefix))
    }

    pub fn fidelity_panel(&self) -> Panel {
        Panel {
            title: "Fidelity to W1".into(),
            x_label: "repetitions N".into(),
            y_label: "F".into(),
            series: self.curves.iter().map(|c| Series::new(&c.label, points(&c.trace.fidelities()))).collect(),
            y_range: Some((0.0, 1.0)),
        }
    }

    pub fn yield_panel(&self) -> Panel {
        let mut series = Vec::new();
        for (i, c) in self.curves.iter().enumerate() {
            series.push(Series::new(format!("{}, product of P", c.label), points(&c.trace.yields())).color(i));
        }
        for (i, c) in self.curves.iter().enumerate() {
            series.push(Series::new(format!("{}, per step", c.label), points(&c.per_step_yields)).color(i).dashed());
        }
        Panel {
            title: "Purification yield".into(),
            x_label: "repetitions N".into(),
            y_label: "Y".into(),
            series,
            y_range: Some((0.0, 1.0)),
        }
    }

    pub fn svg(&self) -> Result<String> {
        render_panels(&[&self.fidelity_panel(), &self.yield_panel()])
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("curve,n,theta,N,P,F,Y_printed,Y_per_step\n");
        for c in &self.curves {
            for (s, y_step) in c.trace.steps.iter().zip(&c.per_step_yields) {
                let _ = writeln!(
                    out,
                    "\"{}\",{},{:.12},{},{:.12},{:.12},{:.12},{:.12}",
                    c.label, c.n, c.theta, s.index, s.probability, s.fidelity, s.yield_value, y_step
                );
            }
        }
        out
    }

    /// Writes `<stem>.svg` and `<stem>.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        let svg = dir.join(format!("{stem}.svg"));
        let csv = dir.join(format!("{stem}.csv"));
        write_text(&svg, &self.svg()?)?;
        write_text(&csv, &self.csv())?;
        Ok((svg, csv))
    }
}
