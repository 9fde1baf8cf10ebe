//! The analyze, tilt, verify and simulate stages, shared by the command
//! line and the C interface.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::group::Element;
use crate::recurrence::{self, Thresholds, Verdict};
use crate::report::{
    checkpoints, CheckComponent, CheckLine, McSection, RecurrenceSection, Report, SpectralSection, TiltSection,
    UniquenessSummary, VerdictEntry,
};
use crate::spectral::{self, Exponential, SpectralResult};
use crate::tilt::{self, TiltedWalk};
use crate::walkspec::{Walk, WalkSpec};
use crate::window::Window;

/// Largest power compared by the `eq17` check.
pub const EQ17_MAX_POWER: usize = 10;
pub const INVARIANCE_TOLERANCE: f64 = 1e-10;
pub const EQ17_TOLERANCE: f64 = 1e-10;
pub const TRANSLATION_TOLERANCE: f64 = 1e-12;
pub const DUAL_THETA_TOLERANCE: f64 = 1e-8;
pub const TILT_IDENTITY_TOLERANCE: f64 = 1e-14;
pub const UNIQUENESS_STARTS: usize = 16;
pub const UNIQUENESS_SEED: u64 = 0x5eed;
/// Support radius above which the growth heuristics are flagged.
pub const HEAVY_TAIL_RADIUS: i64 = 8;

pub const DEFAULT_TRAJECTORIES: usize = 10_000;
pub const DEFAULT_MC_HORIZON: usize = 10_000;
pub const DEFAULT_SEED: u64 = 42;

/// Names accepted by `verify --paper-checks`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CheckName {
    /// The exponential is `R`-invariant: `R P phi = phi`.
    Eq1,
    /// Powers of the tilted law: `(R phi v)^n = R^n phi v^n`.
    Eq17,
    /// `psi` is `R`-invariant for the dual walk and `rho(v) = rho(dual v)`.
    Dual,
    /// `psi * counting` is an `R`-invariant measure.
    Measure,
    /// Hitting probabilities are translation invariant.
    Eq12,
    /// A symmetric law has `theta* = 0`, `R = 1` and tilts to itself.
    Corollary2,
}

impl CheckName {
    pub const ALL: [CheckName; 6] = [
        CheckName::Eq1,
        CheckName::Eq17,
        CheckName::Dual,
        CheckName::Measure,
        CheckName::Eq12,
        CheckName::Corollary2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Eq1 => "eq1",
            CheckName::Eq17 => "eq17",
            CheckName::Dual => "dual",
            CheckName::Measure => "measure",
            CheckName::Eq12 => "eq12",
            CheckName::Corollary2 => "corollary2",
        }
    }

    /// Parses `all` or a comma-separated list of names.
    pub fn parse_list(s: &str) -> Result<Vec<CheckName>> {
        if s.trim() == "all" {
            return Ok(CheckName::ALL.to_vec());
        }
        let mut out: Vec<CheckName> = s.split(',').map(|t| t.trim().parse()).collect::<Result<_>>()?;
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl FromStr for CheckName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = CheckName::ALL.iter().map(|c| c.as_str()).collect();
                Error::Usage(format!("unknown check {s:?}; expected all or one of {}", names.join(",")))
            })
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

struct Clock<'a> {
    timings: &'a mut BTreeMap<String, f64>,
}

impl Clock<'_> {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.timings.entry(stage.to_string()).or_insert(0.0) += start.elapsed().as_secs_f64();
        out
    }
}

/// Check window: `options.window_radius` if given, else the default.
pub fn check_window(walk: &Walk) -> Window {
    match walk.spec.options.window_radius {
        Some(r) => Window::for_group(walk.group(), r),
        None => tilt::default_window(&walk.law),
    }
}

fn spectral_section(walk: &Walk, report: &mut Report) -> Result<(Exponential, SpectralResult)> {
    let mut clock = Clock {
        timings: &mut report.timings,
    };
    let (exp, res) = clock.time("spectral", || spectral::find_exponential(&walk.law))?;
    let dual = clock.time("dual_spectral", || spectral::check_dual_spectral_radius(&walk.law)).ok();
    let uniqueness = if walk.group().is_lattice() {
        clock
            .time("uniqueness", || {
                spectral::multi_start(&walk.law, UNIQUENESS_STARTS, 1.0, UNIQUENESS_SEED)
            })
            .ok()
            .map(|u| UniquenessSummary {
                starts: UNIQUENESS_STARTS,
                seed: UNIQUENESS_SEED,
                spread: u.spread,
            })
    } else {
        None
    };
    report.spectral = Some(SpectralSection {
        result: res.clone(),
        dual,
        uniqueness,
    });
    Ok((exp, res))
}

/// Minimizes the moment-generating function and records `theta*`, `rho`,
/// `R`, the dual radius and the multi-start spread.
pub fn analyze(walk: &Walk) -> Result<Report> {
    let mut report = Report::new("analyze", walk.spec.clone());
    spectral_section(walk, &mut report)?;
    Ok(report)
}

/// Tilts the law and returns the tilted spec with a report of the residuals.
pub fn tilt(walk: &Walk) -> Result<(WalkSpec, Report)> {
    let mut report = Report::new("tilt", walk.spec.clone());
    let (exp, res) = spectral_section(walk, &mut report)?;
    let window = check_window(walk);
    let mut clock = Clock {
        timings: &mut report.timings,
    };
    let tw = clock.time("tilt", || tilt::tilt(&walk.law, &exp, res.r))?;
    let eq17 = clock.time("eq17", || tilt::check_eq17(&tw, EQ17_MAX_POWER))?;
    let (ri, di, mi) = clock.time("invariance", || -> Result<_> {
        Ok((
            spectral::verify_r_invariance(&walk.law, &exp, res.r, &window)?,
            tilt::check_dual_invariance(&walk.law, &exp, res.r, &window)?,
            tilt::check_measure_invariance(&walk.law, &exp, res.r, &window)?,
        ))
    })?;
    let spec = WalkSpec::from_law(&tw.tilted, walk.spec.options.clone());
    report.tilt = Some(TiltSection {
        atoms: spec.law.clone(),
        eq17_residual: eq17,
        eq17_max_power: EQ17_MAX_POWER,
        r_invariance_residual: ri,
        dual_invariance_residual: di,
        measure_invariance_residual: mi,
        window: window.to_string(),
    });
    Ok((spec, report))
}

/// Horizon and translation for the `eq12` check.
fn translation_setup(walk: &Walk) -> (usize, Element) {
    let horizon = match walk.group().dim() {
        Some(1) => 50,
        Some(2) => 20,
        Some(_) => 10,
        None => 100,
    };
    let y = walk.law.support().next().cloned().unwrap_or_else(|| walk.group().identity());
    (horizon, y)
}

fn run_check(name: CheckName, walk: &Walk, exp: &Exponential, res: &SpectralResult, window: &Window) -> Result<CheckLine> {
    let v = &walk.law;
    let tw = || -> Result<TiltedWalk> { tilt::tilt(v, exp, res.r) };
    let line = match name {
        CheckName::Eq1 => CheckLine::from_components(
            name.as_str(),
            vec![CheckComponent::new(
                "r_invariance",
                spectral::verify_r_invariance(v, exp, res.r, window)?,
                INVARIANCE_TOLERANCE,
            )],
        ),
        CheckName::Eq17 => CheckLine::from_components(
            name.as_str(),
            vec![CheckComponent::new(
                "atom_residual",
                tilt::check_eq17(&tw()?, EQ17_MAX_POWER)?,
                EQ17_TOLERANCE,
            )],
        ),
        CheckName::Dual => {
            let inv = tilt::check_dual_invariance(v, exp, res.r, window)?;
            let ds = spectral::check_dual_spectral_radius(v)?;
            let theta_gap = ds
                .theta_star
                .iter()
                .zip(&ds.theta_star_dual)
                .map(|(a, b)| (a + b).abs())
                .fold(0.0, f64::max);
            let mut line = CheckLine::from_components(
                name.as_str(),
                vec![
                    CheckComponent::new("dual_invariance", inv, INVARIANCE_TOLERANCE),
                    CheckComponent::new("rho_gap", (ds.rho - ds.rho_dual).abs(), spectral::DUAL_RHO_TOLERANCE),
                    CheckComponent::new("dual_theta_gap", theta_gap, DUAL_THETA_TOLERANCE),
                ],
            );
            line.detail = Some(format!("dual theta* = {}", format_vector(&ds.theta_star_dual)));
            line
        }
        CheckName::Measure => CheckLine::from_components(
            name.as_str(),
            vec![CheckComponent::new(
                "measure_invariance",
                tilt::check_measure_invariance(v, exp, res.r, window)?,
                INVARIANCE_TOLERANCE,
            )],
        ),
        CheckName::Eq12 => {
            let (horizon, y) = translation_setup(walk);
            let e = walk.group().identity();
            let d = recurrence::check_translation_invariance(v, std::slice::from_ref(&e), &y, horizon)?;
            let mut line = CheckLine::from_components(
                name.as_str(),
                vec![CheckComponent::new("max_discrepancy", d, TRANSLATION_TOLERANCE)],
            );
            line.detail = Some(format!("B = {{{e}}}, y = {y}, T = {horizon}"));
            line
        }
        CheckName::Corollary2 => {
            let deg = tilt::check_symmetric_degeneracy(v);
            if !deg.is_symmetric {
                let mut line = CheckLine::from_components(name.as_str(), Vec::new());
                line.detail = Some("law is not symmetric; nothing to check".into());
                return Ok(line);
            }
            let theta_norm = deg.theta_norm.unwrap_or(f64::NAN);
            let r_gap = deg.r_minus_one.map_or(f64::NAN, f64::abs);
            let sym_exp = Exponential::new(vec![0.0; v.group().dim().unwrap_or(0)]);
            let tilt_gap = match tilt::tilt(v, &sym_exp, 1.0) {
                Ok(t) => t.tilted.max_atom_diff(v),
                Err(_) => f64::NAN,
            };
            let guard = |x: f64| if x.is_finite() { x } else { f64::MAX };
            CheckLine::from_components(
                name.as_str(),
                vec![
                    CheckComponent::new("r_minus_one", guard(r_gap), tilt::UNIT_R_TOLERANCE),
                    CheckComponent::new("theta_norm", guard(theta_norm), tilt::TRIVIAL_THETA_TOLERANCE),
                    CheckComponent::new("tilt_atom_diff", guard(tilt_gap), TILT_IDENTITY_TOLERANCE),
                ],
            )
        }
    };
    Ok(line)
}

/// Runs the selected checks. Only a failure of the minimization itself is
/// fatal; an error inside a single check is recorded as a failing line.
pub fn verify(walk: &Walk, checks: &[CheckName]) -> Result<Report> {
    let mut report = Report::new("verify", walk.spec.clone());
    let (exp, res) = spectral_section(walk, &mut report)?;
    let window = check_window(walk);
    for &name in checks {
        let start = Instant::now();
        let line = run_check(name, walk, &exp, &res, &window).unwrap_or_else(|e| CheckLine::failed(name.as_str(), &e));
        report.timings.insert(format!("check_{name}"), start.elapsed().as_secs_f64());
        report.checks.push(line);
    }
    Ok(report)
}

/// Monte Carlo settings after merging command-line flags over spec options.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateParams {
    pub trajectories: usize,
    pub horizon: usize,
    pub seed: u64,
    pub target: Vec<Element>,
    /// Horizon of the exact return series.
    pub series_horizon: usize,
    pub thresholds: Thresholds,
}

impl SimulateParams {
    pub fn resolve(
        walk: &Walk,
        trajectories: Option<usize>,
        horizon: Option<usize>,
        seed: Option<u64>,
        target: Option<Vec<Element>>,
    ) -> SimulateParams {
        let o = &walk.spec.options;
        SimulateParams {
            trajectories: trajectories.or(o.trajectories).unwrap_or(DEFAULT_TRAJECTORIES),
            horizon: horizon.or(o.horizon).unwrap_or(DEFAULT_MC_HORIZON),
            seed: seed.or(o.seed).unwrap_or(DEFAULT_SEED),
            target: target.unwrap_or_else(|| vec![walk.group().identity()]),
            series_horizon: recurrence::default_horizon(walk.group()),
            thresholds: o.thresholds.unwrap_or_default(),
        }
    }
}

/// Parses a target set: elements separated by `;`, lattice coordinates by
/// `,` (`"0"`, `"1,0;0,1"`), finite indices as integers, or `all` for the
/// whole of a finite group.
pub fn parse_target(walk: &Walk, s: &str) -> Result<Vec<Element>> {
    let group = walk.group();
    if s.trim() == "all" {
        return group
            .elements()
            .ok_or_else(|| Error::Usage("--target all needs a finite group".into()));
    }
    s.split(';')
        .map(|tok| {
            let tok = tok.trim();
            let bad = || Error::Usage(format!("cannot read target element {tok:?}"));
            let x = if group.is_lattice() {
                Element::Lattice(
                    tok.split(',')
                        .map(|c| c.trim().parse::<i64>().map_err(|_| bad()))
                        .collect::<Result<_>>()?,
                )
            } else {
                Element::Finite(tok.trim_start_matches('#').parse().map_err(|_| bad())?)
            };
            group.validate(&x).map_err(|e| Error::Usage(format!("target: {e}")))?;
            Ok(x)
        })
        .collect()
}

fn thresholds_map(t: &Thresholds) -> BTreeMap<String, f64> {
    BTreeMap::from([("recurrent".to_string(), t.recurrent), ("transient".to_string(), t.transient)])
}

/// Exact return series with the growth heuristic, then Monte Carlo. Parts
/// whose preconditions fail are skipped with a note.
pub fn simulate(walk: &Walk, params: &SimulateParams) -> Result<(Report, Option<SeriesData>)> {
    let mut report = Report::new("simulate", walk.spec.clone());
    let v = &walk.law;
    let spectral = match spectral_section(walk, &mut report) {
        Ok((_, res)) => Some(res),
        Err(e) => {
            report.notes.push(format!("spectral stage skipped: {e}"));
            None
        }
    };
    let mut clock = Clock {
        timings: &mut report.timings,
    };
    let mc = clock.time("monte_carlo", || {
        recurrence::simulate_harris(v, &params.target, params.trajectories, params.horizon, params.seed)
    })?;
    let series = clock.time("return_series", || recurrence::return_series(v, params.series_horizon))?;
    let est = recurrence::estimate_rho(&series);
    let test = spectral.as_ref().map(|s| {
        clock.time("growth_test", || recurrence::r_recurrence_test(&series, s.r, params.thresholds))
    });

    let mut section = RecurrenceSection {
        horizon: series.horizon,
        period: series.period,
        rho_series: est.as_ref().ok().map(|e| e.rho_hat),
        rho_method: est.as_ref().ok().map(|e| e.method),
        rho_spectral: spectral.as_ref().map(|s| s.rho),
        r: spectral.as_ref().map(|s| s.r),
        partial_sums: Vec::new(),
        growth_ratio: None,
        verdict: None,
        thresholds: params.thresholds,
        max_mass_drift: series.max_mass_drift,
        mass_leak: series.mass_leak,
        support_radius: v.support_radius(),
        heavy_tail_flag: v.support_radius() > HEAVY_TAIL_RADIUS,
        mc: None,
    };
    if let Err(e) = &est {
        report.notes.push(format!("series estimate skipped: {e}"));
    }
    if section.heavy_tail_flag {
        report.notes.push(format!(
            "support radius {} exceeds {HEAVY_TAIL_RADIUS}; growth thresholds are uncalibrated here",
            v.support_radius()
        ));
    }
    let mut data = None;
    match test {
        Some(Ok(t)) => {
            section.partial_sums = checkpoints(&t.partial_sums, 64);
            section.growth_ratio = Some(t.growth_ratio);
            section.verdict = Some(t.verdict);
            report.verdicts.push(VerdictEntry {
                name: "r_recurrence".into(),
                outcome: verdict_label(t.verdict).into(),
                value: t.growth_ratio,
                thresholds: thresholds_map(&t.thresholds),
                proxy: "series_growth_ratio S_N/S_{N/4}".into(),
                heuristic: true,
            });
            data = Some(SeriesData {
                log_values: series.log_values.clone(),
                r: spectral.as_ref().unwrap().r,
                partial_sums: t.partial_sums,
            });
        }
        Some(Err(e)) => report.notes.push(format!("growth test skipped: {e}")),
        None => {}
    }

    let oracle = (params.target == [walk.group().identity()])
        .then(|| recurrence::first_return_oracle(v))
        .flatten();
    if let Some(o) = oracle {
        let band = 4.0 * mc.ci_halfwidth.max(1.0 / params.trajectories as f64);
        report.verdicts.push(VerdictEntry {
            name: "first_return".into(),
            outcome: if (mc.return_fraction - o).abs() <= band {
                "consistent_with_oracle"
            } else {
                "inconsistent_with_oracle"
            }
            .into(),
            value: mc.return_fraction,
            thresholds: BTreeMap::from([("oracle".to_string(), o), ("band".to_string(), band)]),
            proxy: "single_return_fraction".into(),
            heuristic: true,
        });
    }
    if walk.group().is_lattice() {
        report.verdicts.push(VerdictEntry {
            name: "zero_drift".into(),
            outcome: if mc.zero_drift_consistent() {
                "consistent"
            } else {
                "drift_detected"
            }
            .into(),
            value: mc.drift_norm,
            thresholds: BTreeMap::from([("bound".to_string(), mc.drift_bound)]),
            proxy: "empirical_mean_displacement".into(),
            heuristic: true,
        });
    }
    section.mc = Some(McSection {
        target: params.target.clone(),
        zero_drift_consistent: mc.zero_drift_consistent(),
        first_return_oracle: oracle,
        result: mc,
    });
    report.recurrence = Some(section);
    Ok((report, data))
}

/// Series columns for the CSV writer.
#[derive(Debug, Clone)]
pub struct SeriesData {
    pub log_values: Vec<f64>,
    pub r: f64,
    pub partial_sums: Vec<f64>,
}

pub fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::RRecurrentHeuristic => "r_recurrent_heuristic",
        Verdict::TransientHeuristic => "transient_heuristic",
        Verdict::Inconclusive => "inconclusive",
    }
}

pub fn format_vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk(text: &str) -> Walk {
        Walk::parse(text).unwrap()
    }

    const BERNOULLI: &str = "[group]\nkind = \"lattice\"\nd = 1\n\n[[law]]\nelement = [1]\nprob = \"0.25\"\n\n[[law]]\nelement = [-1]\nprob = \"0.75\"\n";

    #[test]
    fn check_names() {
        assert_eq!(CheckName::parse_list("all").unwrap().len(), 6);
        assert_eq!(CheckName::parse_list("eq17, dual,eq17").unwrap(), vec![CheckName::Eq17, CheckName::Dual]);
        assert!(matches!(CheckName::parse_list("eq2"), Err(Error::Usage(_))));
    }

    #[test]
    fn bernoulli_passes_every_check() {
        let report = verify(&walk(BERNOULLI), &CheckName::ALL).unwrap();
        assert_eq!(report.checks.len(), 6);
        for c in &report.checks {
            assert!(c.pass, "{}", c.render());
        }
    }

    #[test]
    fn tilt_emits_symmetric_walk() {
        let (spec, report) = tilt(&walk(BERNOULLI)).unwrap();
        let probs: Vec<&str> = spec.law.iter().map(|a| a.prob.as_str()).collect();
        assert_eq!(probs, ["0.5", "0.5"]);
        assert!(report.tilt.unwrap().eq17_residual <= 1e-10);
    }

    #[test]
    fn targets() {
        let w = walk(BERNOULLI);
        assert_eq!(parse_target(&w, "0;5").unwrap(), vec![Element::Lattice(vec![0]), Element::Lattice(vec![5])]);
        assert!(parse_target(&w, "0,1").is_err());
        assert!(parse_target(&w, "all").is_err());
    }

    #[test]
    fn simulate_reports_every_proxy() {
        let w = walk(BERNOULLI);
        let params = SimulateParams::resolve(&w, Some(200), Some(200), Some(1), None);
        let (report, data) = simulate(&w, &params).unwrap();
        let rec = report.recurrence.unwrap();
        assert_eq!(rec.verdict, Some(Verdict::RRecurrentHeuristic));
        assert!(data.is_some());
        let names: Vec<&str> = report.verdicts.iter().map(|v| v.name.as_str()).collect();
        assert_eq!(names, ["r_recurrence", "first_return", "zero_drift"]);
    }
}
