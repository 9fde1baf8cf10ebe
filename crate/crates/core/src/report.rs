//! Machine-readable run reports and the series CSV.
//!
//! The JSON layout is described by `schema/report.schema.json`. Optional
//! numbers are omitted rather than written as non-finite values.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::group::Element;
use crate::recurrence::{RhoMethod, SimulationResult, Thresholds, Verdict};
use crate::spectral::{DualSpectral, SpectralResult};
use crate::walkspec::{AtomSpec, WalkSpec};

pub const TOOL_NAME: &str = "rwalk";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Column order of the series CSV.
pub const CSV_COLUMNS: [&str; 5] = ["n", "p_n", "log_p_n", "r_pow_n_p_n", "partial_sum"];

#[derive(Debug, Clone, Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: TOOL_NAME,
            version: TOOL_VERSION,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub command: String,
    pub spec: WalkSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tilt: Option<TiltSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recurrence: Option<RecurrenceSection>,
    pub checks: Vec<CheckLine>,
    pub verdicts: Vec<VerdictEntry>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(command: &str, spec: WalkSpec) -> Report {
        Report {
            tool: ToolInfo::default(),
            command: command.to_string(),
            spec,
            spectral: None,
            tilt: None,
            recurrence: None,
            checks: Vec::new(),
            verdicts: Vec::new(),
            timings: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(format!("cannot serialize report: {e}")))
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        let text = self.to_json()?;
        std::fs::write(path, text + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    /// True when every selected check passed.
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSection {
    #[serde(flatten)]
    pub result: SpectralResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<DualSpectral>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<UniquenessSummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessSummary {
    pub starts: usize,
    pub seed: u64,
    pub spread: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TiltSection {
    pub atoms: Vec<AtomSpec>,
    pub eq17_residual: f64,
    pub eq17_max_power: usize,
    pub r_invariance_residual: f64,
    pub dual_invariance_residual: f64,
    pub measure_invariance_residual: f64,
    pub window: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PartialSum {
    pub n: usize,
    pub s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RecurrenceSection {
    pub horizon: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_series: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_method: Option<RhoMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_spectral: Option<f64>,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// `S_n` at up to 64 checkpoints including `n = N/4` and `n = N`.
    pub partial_sums: Vec<PartialSum>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub growth_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    pub thresholds: Thresholds,
    pub max_mass_drift: f64,
    pub mass_leak: f64,
    pub support_radius: i64,
    /// Set when the support radius exceeds 8, where the growth thresholds
    /// have not been calibrated.
    pub heavy_tail_flag: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
}

#[derive(Debug, Clone, Serialize)]
pub struct McSection {
    pub target: Vec<Element>,
    #[serde(flatten)]
    pub result: SimulationResult,
    pub zero_drift_consistent: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_return_oracle: Option<f64>,
}

/// One line of `verify` output.
#[derive(Debug, Clone, Serialize)]
pub struct CheckLine {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub components: Vec<CheckComponent>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckComponent {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckComponent {
    pub fn new(name: &str, residual: f64, tolerance: f64) -> CheckComponent {
        CheckComponent {
            name: name.to_string(),
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

impl CheckLine {
    /// A check that passes iff every component does; the first component
    /// is the headline residual.
    pub fn from_components(name: &str, components: Vec<CheckComponent>) -> CheckLine {
        CheckLine {
            name: name.to_string(),
            residual: components.first().map(|c| c.residual),
            tolerance: components.first().map(|c| c.tolerance),
            pass: components.iter().all(|c| c.pass),
            components,
            detail: None,
            error: None,
        }
    }

    pub fn failed(name: &str, err: &Error) -> CheckLine {
        CheckLine {
            name: name.to_string(),
            residual: None,
            tolerance: None,
            pass: false,
            components: Vec::new(),
            detail: None,
            error: Some(err.to_string()),
        }
    }

    /// `name residual=... tolerance=... PASS`, followed by the components.
    pub fn render(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let mut line = match (self.residual, self.tolerance) {
            (Some(r), Some(t)) => format!("{:<11} residual={r:.3e} tolerance={t:.0e} {status}", self.name),
            _ => format!("{:<11} {status}", self.name),
        };
        let extras: Vec<String> = self
            .components
            .iter()
            .skip(1)
            .map(|c| format!("{}={:.3e}", c.name, c.residual))
            .collect();
        if !extras.is_empty() {
            line.push_str(&format!(" ({})", extras.join(", ")));
        }
        if let Some(d) = &self.detail {
            line.push_str(&format!(" [{d}]"));
        }
        if let Some(e) = &self.error {
            line.push_str(&format!(" error: {e}"));
        }
        line
    }
}

/// A heuristic or numerical verdict with the value and thresholds behind it.
#[derive(Debug, Clone, Serialize)]
pub struct VerdictEntry {
    pub name: String,
    pub outcome: String,
    pub value: f64,
    pub thresholds: BTreeMap<String, f64>,
    /// Which finite proxy produced the verdict.
    pub proxy: String,
    pub heuristic: bool,
}

/// Writes the return series as CSV with columns [`CSV_COLUMNS`].
/// `log_p_n` is `-inf` where `p_n = 0`.
pub fn write_series_csv<W: Write>(out: W, log_values: &[f64], r: f64, partial_sums: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_COLUMNS).map_err(io)?;
    let log_r = r.ln();
    for (n, l) in log_values.iter().enumerate() {
        let weighted = if l.is_finite() { (n as f64 * log_r + l).exp() } else { 0.0 };
        w.write_record([
            n.to_string(),
            format!("{:e}", l.exp()),
            if l.is_finite() { format!("{l}") } else { "-inf".into() },
            format!("{weighted:e}"),
            format!("{:e}", partial_sums[n]),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Up to `max_points` evenly spaced checkpoints of `sums`, always including
/// `N/4` and `N`.
pub fn checkpoints(sums: &[f64], max_points: usize) -> Vec<PartialSum> {
    let horizon = sums.len() - 1;
    let step = (horizon / max_points.max(1)).max(1);
    let mut ns: Vec<usize> = (0..=horizon).step_by(step).collect();
    ns.push(horizon / 4);
    ns.push(horizon);
    ns.sort_unstable();
    ns.dedup();
    ns.into_iter().map(|n| PartialSum { n, s: sums[n] }).collect()
}
