//! Return probabilities, Green-series growth and hitting probabilities.
//!
//! Recurrence is an infinite-time property, so this module works with
//! finite proxies and labels them as such: the growth of the partial sums
//! `S_N = sum_{n <= N} R^n p(n, e, {e})`, the fraction of simulated
//! trajectories that return to a target set, and the empirical drift of the
//! simulated walk.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Element, GroupSpec};
use crate::law::{Law, UNDERFLOW_CUTOFF};
use crate::window::Window;

/// Largest horizon accepted by [`return_series`] per lattice dimension
/// (index 0 is unused) and for finite groups.
pub const LATTICE_HORIZON_LIMITS: [usize; 4] = [0, 5000, 600, 120];
pub const FINITE_HORIZON_LIMIT: usize = 10_000;

/// Horizon used when none is requested.
pub fn default_horizon(group: &GroupSpec) -> usize {
    match group.dim() {
        Some(1) => 4000,
        Some(d) => LATTICE_HORIZON_LIMITS[d],
        None => FINITE_HORIZON_LIMIT,
    }
}

/// Minimum number of positive terms on the period subsequence for
/// [`estimate_rho`].
pub const MIN_NONZERO_TERMS: usize = 50;

/// Number of trailing ratios averaged by the ratio estimator.
pub const RATIO_WINDOW: usize = 10;

/// Return probabilities `p(n) = v^n(e)` for `n = 0..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    pub horizon: usize,
    /// `gcd{n >= 1 : p(n) > 0}`; `None` if no return happens within the horizon.
    pub period: Option<usize>,
    /// `p(n)`; may underflow to zero where `log_values` is still finite.
    pub values: Vec<f64>,
    /// `ln p(n)`, `-inf` where `p(n) = 0`.
    pub log_values: Vec<f64>,
    /// Largest `|total mass - 1|` over the convolution powers formed.
    pub max_mass_drift: f64,
    /// Mass dropped below the underflow cutoff.
    pub mass_leak: f64,
}

impl ReturnSeries {
    /// `(n, ln p(n))` along `n = 0 mod period` where `p(n) > 0`.
    pub fn periodic_terms(&self) -> Vec<(usize, f64)> {
        let g = self.period.unwrap_or(1);
        (0..=self.horizon)
            .step_by(g)
            .filter(|&n| self.log_values[n].is_finite())
            .map(|n| (n, self.log_values[n]))
            .collect()
    }
}

/// Exact return-probability series. Lattice walks use dense convolution
/// powers up to `horizon / 2` and pair them, since
/// `v^(a+b)(e) = sum_x v^a(x) v^b(x^-1)`; each power is rescaled to unit
/// maximum with the scale kept in log form, so `p(n)` far below the
/// smallest double is still resolved. Finite groups iterate the
/// distribution vector.
pub fn return_series(v: &Law, horizon: usize) -> Result<ReturnSeries> {
    let group = v.group();
    let limit = match group.dim() {
        Some(d) => LATTICE_HORIZON_LIMITS[d],
        None => FINITE_HORIZON_LIMIT,
    };
    if horizon > limit {
        return Err(Error::HorizonTooLarge { horizon, limit });
    }
    let (log_values, max_mass_drift, mass_leak) = match group.dim() {
        Some(d) => lattice_series(v, d, horizon),
        None => finite_series(v, horizon),
    };
    let values = log_values.iter().map(|l| l.exp()).collect();
    let period = (1..=horizon)
        .filter(|&n| log_values[n].is_finite())
        .fold(None, |acc: Option<usize>, n| Some(acc.map_or(n, |g| gcd(g, n))));
    Ok(ReturnSeries {
        horizon,
        period,
        values,
        log_values,
        max_mass_drift,
        mass_leak,
    })
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn pad3(c: &[i64]) -> [i64; 3] {
    let mut out = [0; 3];
    out[..c.len()].copy_from_slice(c);
    out
}

fn lattice_atoms(v: &Law) -> Vec<([i64; 3], f64)> {
    v.atoms()
        .iter()
        .map(|(x, p)| (pad3(x.coords().expect("lattice element")), *p))
        .collect()
}

/// A lattice measure on a box, stored row-major and scaled by `exp(log_scale)`.
#[derive(Debug, Clone)]
struct DenseMeasure {
    lo: [i64; 3],
    len: [usize; 3],
    data: Vec<f64>,
    log_scale: f64,
}

impl DenseMeasure {
    fn delta() -> Self {
        DenseMeasure {
            lo: [0; 3],
            len: [1; 3],
            data: vec![1.0],
            log_scale: 0.0,
        }
    }

    fn index(&self, c: [i64; 3]) -> Option<usize> {
        let mut idx = 0;
        for k in 0..3 {
            let r = c[k] - self.lo[k];
            if r < 0 || r as usize >= self.len[k] {
                return None;
            }
            idx = idx * self.len[k] + r as usize;
        }
        Some(idx)
    }

    /// Convolves with the law and rescales; returns the dropped mass.
    fn step(&self, atoms: &[([i64; 3], f64)], dim: usize) -> (DenseMeasure, f64) {
        let mut min = [0i64; 3];
        let mut max = [0i64; 3];
        for k in 0..dim {
            min[k] = atoms.iter().map(|(a, _)| a[k]).min().unwrap();
            max[k] = atoms.iter().map(|(a, _)| a[k]).max().unwrap();
        }
        let mut lo = [0; 3];
        let mut len = [1; 3];
        for k in 0..3 {
            lo[k] = self.lo[k] + min[k];
            len[k] = self.len[k] + (max[k] - min[k]) as usize;
        }
        let stride = [len[1] * len[2], len[2], 1];
        let offsets: Vec<(usize, f64)> = atoms
            .iter()
            .map(|(a, p)| {
                let o = (0..3).map(|k| (a[k] - min[k]) as usize * stride[k]).sum();
                (o, *p)
            })
            .collect();
        let mut data = vec![0.0; len[0] * len[1] * len[2]];
        let mut src = 0;
        for i in 0..self.len[0] {
            for j in 0..self.len[1] {
                let base = i * stride[0] + j * stride[1];
                for k in 0..self.len[2] {
                    let w = self.data[src];
                    src += 1;
                    if w == 0.0 {
                        continue;
                    }
                    let b = base + k;
                    for &(o, p) in &offsets {
                        data[b + o] += w * p;
                    }
                }
            }
        }
        let peak = data.iter().copied().fold(0.0, f64::max);
        let log_scale = self.log_scale + peak.ln();
        let scale = log_scale.exp();
        let mut leak = 0.0;
        for w in data.iter_mut() {
            *w /= peak;
            if *w != 0.0 && *w < UNDERFLOW_CUTOFF {
                leak += *w * scale;
                *w = 0.0;
            }
        }
        (
            DenseMeasure {
                lo,
                len,
                data,
                log_scale,
            },
            leak,
        )
    }

    fn log_mass(&self) -> f64 {
        self.data.iter().sum::<f64>().ln() + self.log_scale
    }

    /// `ln sum_x self(x) other(-x)`, computed with log-sum-exp so products
    /// below the smallest double are still resolved.
    fn log_pair(&self, other: &DenseMeasure) -> f64 {
        let mut terms = Vec::new();
        let mut idx = 0;
        for i in 0..self.len[0] {
            for j in 0..self.len[1] {
                for k in 0..self.len[2] {
                    let a = self.data[idx];
                    idx += 1;
                    if a == 0.0 {
                        continue;
                    }
                    let c = [
                        -(self.lo[0] + i as i64),
                        -(self.lo[1] + j as i64),
                        -(self.lo[2] + k as i64),
                    ];
                    if let Some(o) = other.index(c) {
                        let b = other.data[o];
                        if b != 0.0 {
                            terms.push(a.ln() + b.ln());
                        }
                    }
                }
            }
        }
        let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if peak == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let sum: f64 = terms.iter().map(|t| (t - peak).exp()).sum();
        peak + sum.ln() + self.log_scale + other.log_scale
    }
}

fn lattice_series(v: &Law, dim: usize, horizon: usize) -> (Vec<f64>, f64, f64) {
    let atoms = lattice_atoms(v);
    let mut log_values = vec![f64::NEG_INFINITY; horizon + 1];
    let mut drift: f64 = 0.0;
    let mut leak = 0.0;
    let mut low = DenseMeasure::delta();
    let (mut high, l) = low.step(&atoms, dim);
    leak += l;
    let mut k = 0;
    while 2 * k <= horizon {
        log_values[2 * k] = low.log_pair(&low);
        if 2 * k < horizon {
            log_values[2 * k + 1] = high.log_pair(&low);
        }
        drift = drift.max((high.log_mass().exp() - 1.0).abs());
        if 2 * k + 2 > horizon {
            break;
        }
        let (next, l) = high.step(&atoms, dim);
        leak += l;
        low = high;
        high = next;
        k += 1;
    }
    log_values[0] = 0.0;
    (log_values, drift, leak)
}

fn finite_series(v: &Law, horizon: usize) -> (Vec<f64>, f64, f64) {
    let group = v.group();
    let table = group.cayley().expect("finite group");
    let order = group.order().unwrap();
    let e = group.identity().index().unwrap();
    let atoms: Vec<(usize, f64)> = v.atoms().iter().map(|(x, p)| (x.index().unwrap(), *p)).collect();
    let mut w = vec![0.0; order];
    w[e] = 1.0;
    let mut log_values = Vec::with_capacity(horizon + 1);
    log_values.push(0.0);
    let mut drift: f64 = 0.0;
    for _ in 0..horizon {
        let mut next = vec![0.0; order];
        for (x, &m) in w.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for &(s, p) in &atoms {
                next[table.product(x, s)] += m * p;
            }
        }
        w = next;
        drift = drift.max((w.iter().sum::<f64>() - 1.0).abs());
        log_values.push(w[e].ln());
    }
    (log_values, drift, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMethod {
    Ratio,
    Root,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoEstimate {
    pub rho_hat: f64,
    pub method: RhoMethod,
    /// Mean of `(p(n+g)/p(n))^(1/g)` over the last available pairs.
    pub ratio: Option<f64>,
    /// `p(n)^(1/n)` at the largest available `n`.
    pub root: f64,
}

/// Estimates the spectral radius from the tail of the series.
pub fn estimate_rho(series: &ReturnSeries) -> Result<RhoEstimate> {
    let g = series.period.ok_or_else(|| {
        Error::InsufficientData("the walk never returns within the horizon".into())
    })?;
    let terms = series.periodic_terms();
    let nonzero = terms.iter().filter(|(n, _)| *n > 0).count();
    if nonzero < MIN_NONZERO_TERMS {
        return Err(Error::InsufficientData(format!(
            "{nonzero} positive terms along the period subsequence, need {MIN_NONZERO_TERMS}"
        )));
    }
    let &(n_last, l_last) = terms.last().unwrap();
    let root = (l_last / n_last as f64).exp();
    let ratios: Vec<f64> = terms
        .windows(2)
        .filter(|w| w[1].0 == w[0].0 + g && w[0].0 > 0)
        .map(|w| ((w[1].1 - w[0].1) / g as f64).exp())
        .collect();
    let ratio = (ratios.len() >= RATIO_WINDOW).then(|| {
        let tail = &ratios[ratios.len() - RATIO_WINDOW..];
        tail.iter().sum::<f64>() / RATIO_WINDOW as f64
    });
    Ok(match ratio {
        Some(r) => RhoEstimate {
            rho_hat: r,
            method: RhoMethod::Ratio,
            ratio,
            root,
        },
        None => RhoEstimate {
            rho_hat: root,
            method: RhoMethod::Root,
            ratio,
            root,
        },
    })
}

/// Growth-ratio thresholds for the divergence heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// `S_N / S_{N/4}` at or above this reads as divergent.
    pub recurrent: f64,
    /// At or below this reads as convergent.
    pub transient: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            recurrent: 1.5,
            transient: 1.05,
        }
    }
}

/// Every verdict is a finite-horizon heuristic, never a proof.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "r_recurrent_heuristic")]
    RRecurrentHeuristic,
    #[serde(rename = "transient_heuristic")]
    TransientHeuristic,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceTest {
    /// `S_n` for `n = 0..=horizon`.
    pub partial_sums: Vec<f64>,
    pub growth_ratio: f64,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
    pub rho_hat: f64,
}

/// Partial sums of `R^n p(n)` and the `S_N / S_{N/4}` divergence heuristic.
pub fn r_recurrence_test(series: &ReturnSeries, r: f64, thresholds: Thresholds) -> Result<RecurrenceTest> {
    let est = estimate_rho(series)?;
    if r > 1.0 / est.rho_hat + 1e-6 {
        return Err(Error::RMismatch {
            r,
            inverse_rho_hat: 1.0 / est.rho_hat,
        });
    }
    let log_r = r.ln();
    let mut partial_sums = Vec::with_capacity(series.horizon + 1);
    let mut acc = 0.0;
    for (n, l) in series.log_values.iter().enumerate() {
        if l.is_finite() {
            acc += (n as f64 * log_r + l).exp();
        }
        partial_sums.push(acc);
    }
    let growth_ratio = partial_sums[series.horizon] / partial_sums[series.horizon / 4];
    let verdict = if growth_ratio >= thresholds.recurrent {
        Verdict::RRecurrentHeuristic
    } else if growth_ratio <= thresholds.transient {
        Verdict::TransientHeuristic
    } else {
        Verdict::Inconclusive
    };
    Ok(RecurrenceTest {
        partial_sums,
        growth_ratio,
        verdict,
        thresholds,
        rho_hat: est.rho_hat,
    })
}

/// Probability that a walk on `Z` with steps in `{-1, 0, +1}` started at 0
/// is back at 0 at some time `n >= 1`: `v(0) + 2 min(v(1), v(-1))`.
pub fn first_return_oracle(v: &Law) -> Option<f64> {
    if v.group().dim() != Some(1) || v.support_radius() > 1 {
        return None;
    }
    let m = |k: i64| v.mass(&Element::Lattice(vec![k]));
    Some(m(0) + 2.0 * m(1).min(m(-1)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub trajectories: usize,
    pub horizon: usize,
    pub seed: u64,
    pub hits: u64,
    /// Fraction of trajectories that visit the target at some `1 <= n <= horizon`.
    pub return_fraction: f64,
    /// `1.96 sqrt(f (1 - f) / trajectories)`.
    pub ci_halfwidth: f64,
    /// Empirical mean of the position at the horizon (lattices only).
    pub mean_displacement: Vec<f64>,
    pub displacement_std: Vec<f64>,
    pub drift_norm: f64,
    /// `3 sqrt(trace Cov / trajectories)`.
    pub drift_bound: f64,
}

impl SimulationResult {
    pub fn zero_drift_consistent(&self) -> bool {
        self.drift_norm <= self.drift_bound
    }
}

#[derive(Default, Clone, Copy)]
struct Tally {
    hits: u64,
    sum: [i128; 3],
    sum_sq: [i128; 3],
}

impl Tally {
    fn merge(mut self, o: Tally) -> Tally {
        self.hits += o.hits;
        for k in 0..3 {
            self.sum[k] += o.sum[k];
            self.sum_sq[k] += o.sum_sq[k];
        }
        self
    }
}

enum Target {
    Points(Vec<[i64; 3]>),
    Set(HashSet<[i64; 3]>),
    Mask(Vec<bool>),
}

/// Walks `trajectories` independent copies of the walk from the identity
/// for `horizon` steps and records how many visit `target` at some time
/// `n >= 1`. Trajectory `k` draws from stream `k` of a ChaCha generator
/// keyed by `seed`, and all tallies are integers, so the result is
/// bit-identical for any number of workers.
pub fn simulate_harris(
    v: &Law,
    target: &[Element],
    trajectories: usize,
    horizon: usize,
    seed: u64,
) -> Result<SimulationResult> {
    if trajectories == 0 {
        return Err(Error::Usage("trajectories must be at least 1".into()));
    }
    if target.is_empty() {
        return Err(Error::Usage("target set must be nonempty".into()));
    }
    let group = v.group();
    for b in target {
        group.validate(b)?;
    }
    let probs: Vec<f64> = v.atoms().values().copied().collect();
    let mut cdf = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in &probs {
        acc += p;
        cdf.push(acc);
    }
    let draw = |rng: &mut ChaCha8Rng| -> usize {
        let u: f64 = rng.gen::<f64>() * acc;
        cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
    };

    let dim = group.dim();
    let tally = match dim {
        Some(_) => {
            let steps: Vec<[i64; 3]> = v.atoms().keys().map(|x| pad3(x.coords().unwrap())).collect();
            let points: Vec<[i64; 3]> = target.iter().map(|b| pad3(b.coords().unwrap())).collect();
            let target = if points.len() <= 16 {
                Target::Points(points)
            } else {
                Target::Set(points.into_iter().collect())
            };
            let hits_target = |p: &[i64; 3]| match &target {
                Target::Points(pts) => pts.contains(p),
                Target::Set(set) => set.contains(p),
                Target::Mask(_) => unreachable!(),
            };
            (0..trajectories)
                .into_par_iter()
                .map(|k| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    let mut pos = [0i64; 3];
                    let mut hit = false;
                    for _ in 0..horizon {
                        let s = &steps[draw(&mut rng)];
                        pos[0] += s[0];
                        pos[1] += s[1];
                        pos[2] += s[2];
                        if !hit && hits_target(&pos) {
                            hit = true;
                        }
                    }
                    let mut t = Tally {
                        hits: hit as u64,
                        ..Default::default()
                    };
                    for c in 0..3 {
                        t.sum[c] = pos[c] as i128;
                        t.sum_sq[c] = pos[c] as i128 * pos[c] as i128;
                    }
                    t
                })
                .reduce(Tally::default, Tally::merge)
        }
        None => {
            let table = group.cayley().unwrap();
            let order = group.order().unwrap();
            let steps: Vec<usize> = v.atoms().keys().map(|x| x.index().unwrap()).collect();
            let mut mask = vec![false; order];
            for b in target {
                mask[b.index().unwrap()] = true;
            }
            let target = Target::Mask(mask);
            let Target::Mask(mask) = &target else { unreachable!() };
            let e = group.identity().index().unwrap();
            (0..trajectories)
                .into_par_iter()
                .map(|k| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(k as u64);
                    let mut pos = e;
                    let mut hit = false;
                    for _ in 0..horizon {
                        pos = table.product(pos, steps[draw(&mut rng)]);
                        if mask[pos] {
                            hit = true;
                        }
                    }
                    Tally {
                        hits: hit as u64,
                        ..Default::default()
                    }
                })
                .reduce(Tally::default, Tally::merge)
        }
    };

    let n = trajectories as f64;
    let f = tally.hits as f64 / n;
    let (mean, std) = match dim {
        Some(d) => (0..d)
            .map(|k| {
                let m = tally.sum[k] as f64 / n;
                let var = (tally.sum_sq[k] as f64 / n - m * m).max(0.0);
                (m, var.sqrt())
            })
            .unzip(),
        None => (Vec::new(), Vec::new()),
    };
    let mean: Vec<f64> = mean;
    let std: Vec<f64> = std;
    let drift_norm = mean.iter().map(|m| m * m).sum::<f64>().sqrt();
    let drift_bound = 3.0 * (std.iter().map(|s| s * s).sum::<f64>() / n).sqrt();
    Ok(SimulationResult {
        trajectories,
        horizon,
        seed,
        hits: tally.hits,
        return_fraction: f,
        ci_halfwidth: 1.96 * (f * (1.0 - f) / n).sqrt(),
        mean_displacement: mean,
        displacement_std: std,
        drift_norm,
        drift_bound,
    })
}

/// Truncated hitting probabilities `h_n(x) = P_x(X_k in B for some k <= n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingTable {
    pub target: Vec<Element>,
    pub horizon: usize,
    pub window: Window,
    /// `values[n][i]` is `h_n` at the `i`-th window element.
    pub values: Vec<Vec<f64>>,
}

impl HittingTable {
    pub fn get(&self, n: usize, x: &Element) -> Result<f64> {
        self.window
            .index_of(x)
            .map(|i| self.values[n][i])
            .ok_or_else(|| self.window.exceeded(x))
    }
}

/// Dynamic programme `h_0 = 1_B`, `h_{n+1}(x) = 1` on `B` and
/// `sum_u v(u) h_n(xu)` elsewhere, with `h_n = 0` outside the window. The
/// absorbing boundary makes every entry a lower bound; it is exact wherever
/// the boundary is out of reach within the remaining steps.
pub fn hitting_dp(v: &Law, target: &[Element], horizon: usize, window: &Window) -> Result<HittingTable> {
    let group = v.group();
    let cells = window.len();
    let mut in_target = vec![false; cells];
    for b in target {
        group.validate(b)?;
        let i = window.index_of(b).ok_or_else(|| window.exceeded(b))?;
        in_target[i] = true;
    }
    let atoms: Vec<(&Element, f64)> = v.atoms().iter().map(|(x, p)| (x, *p)).collect();
    let mut neighbours: Vec<Vec<(Option<usize>, f64)>> = Vec::with_capacity(cells);
    for x in window.iter() {
        let row = atoms
            .iter()
            .map(|(u, p)| Ok((window.index_of(&group.multiply(&x, u)?), *p)))
            .collect::<Result<Vec<_>>>()?;
        neighbours.push(row);
    }
    let mut values = Vec::with_capacity(horizon + 1);
    values.push(in_target.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect::<Vec<f64>>());
    for n in 0..horizon {
        let prev = &values[n];
        let next: Vec<f64> = (0..cells)
            .map(|i| {
                if in_target[i] {
                    1.0
                } else {
                    neighbours[i]
                        .iter()
                        .map(|(j, p)| j.map_or(0.0, |j| p * prev[j]))
                        .sum()
                }
            })
            .collect();
        values.push(next);
    }
    Ok(HittingTable {
        target: target.to_vec(),
        horizon,
        window: window.clone(),
        values,
    })
}

/// Window for a hitting table of `target` over `horizon` steps: the
/// bounding box widened by `horizon * support radius`, or the whole group.
pub fn hitting_window(v: &Law, target: &[Element], horizon: usize) -> Result<Window> {
    match v.group().dim() {
        Some(_) => {
            let margin = horizon as i64 * v.support_radius().max(1);
            Window::bounding(target, margin)
                .ok_or_else(|| Error::Usage("target set must be nonempty lattice points".into()))
        }
        None => Ok(Window::for_group(v.group(), 0)),
    }
}

/// Computes the hitting tables for `B` and for `yB` independently, on
/// windows translated by `y`, and returns `max |h_n^{yB}(yx) - h_n^B(x)|`.
pub fn check_translation_invariance(v: &Law, target: &[Element], y: &Element, horizon: usize) -> Result<f64> {
    let group = v.group();
    group.validate(y)?;
    let window = hitting_window(v, target, horizon)?;
    let shifted_window = window.translate(y);
    let shifted_target = target
        .iter()
        .map(|b| group.multiply(y, b))
        .collect::<Result<Vec<_>>>()?;
    let base = hitting_dp(v, target, horizon, &window)?;
    let shifted = hitting_dp(v, &shifted_target, horizon, &shifted_window)?;
    let mut worst: f64 = 0.0;
    for (i, x) in window.iter().enumerate() {
        let yx = group.multiply(y, &x)?;
        for n in 0..=horizon {
            worst = worst.max((shifted.get(n, &yx)? - base.values[n][i]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn l(c: &[i64]) -> Element {
        Element::Lattice(c.to_vec())
    }

    fn law1(atoms: &[(i64, f64)]) -> Law {
        let g = Arc::new(GroupSpec::lattice(1).unwrap());
        Law::new(g, atoms.iter().map(|&(x, p)| (l(&[x]), p))).unwrap()
    }

    fn nearest_neighbour(d: usize) -> Law {
        let g = Arc::new(GroupSpec::lattice(d).unwrap());
        let atoms: Vec<(Element, f64)> = (0..d)
            .flat_map(|k| {
                [1, -1].into_iter().map(move |s| {
                    let mut e = vec![0; d];
                    e[k] = s;
                    (Element::Lattice(e), 1.0 / (2 * d) as f64)
                })
            })
            .collect();
        Law::new(g, atoms).unwrap()
    }

    /// ln C(2m, m) by summing logs.
    fn ln_central_binomial(m: usize) -> f64 {
        (1..=m).map(|k| ((m + k) as f64 / k as f64).ln()).sum()
    }

    #[test]
    fn bernoulli_series_matches_binomial_formula() {
        let v = law1(&[(1, 0.25), (-1, 0.75)]);
        let s = return_series(&v, 400).unwrap();
        assert_eq!(s.values[0], 1.0);
        assert_eq!(s.values[1], 0.0);
        assert!((s.values[2] - 0.375).abs() < 1e-15);
        assert!((s.values[4] - 0.2109375).abs() < 1e-15);
        assert_eq!(s.period, Some(2));
        for m in 0..=200 {
            let oracle = ln_central_binomial(m) + m as f64 * (0.25f64 * 0.75).ln();
            assert!((s.log_values[2 * m] - oracle).abs() < 1e-10, "m = {m}");
        }
        assert!(s.max_mass_drift <= 1e-10);
    }

    #[test]
    fn series_resolves_probabilities_below_double_range() {
        let v = law1(&[(1, 0.25), (-1, 0.75)]);
        let s = return_series(&v, 5000).unwrap();
        let oracle = ln_central_binomial(2500) + 2500.0 * (0.25f64 * 0.75).ln();
        assert!(oracle < -710.0);
        assert!((s.log_values[5000] - oracle).abs() < 1e-9);
    }

    #[test]
    fn series_horizon_limits() {
        assert!(matches!(
            return_series(&nearest_neighbour(3), 121),
            Err(Error::HorizonTooLarge { limit: 120, .. })
        ));
        assert!(return_series(&nearest_neighbour(2), 601).is_err());
        assert!(return_series(&law1(&[(1, 0.5), (-1, 0.5)]), 5001).is_err());
    }

    #[test]
    fn two_dimensional_series_matches_closed_form() {
        // p(2m) = C(2m, m)^2 / 16^m for the planar simple walk
        let s = return_series(&nearest_neighbour(2), 100).unwrap();
        for m in 0..=50 {
            let oracle = 2.0 * ln_central_binomial(m) - m as f64 * 16f64.ln();
            assert!((s.log_values[2 * m] - oracle).abs() < 1e-10);
        }
    }

    #[test]
    fn finite_group_series() {
        let z3 = Arc::new(GroupSpec::cyclic(3).unwrap());
        let cycle = Law::delta(z3, Element::Finite(1)).unwrap();
        let s = return_series(&cycle, 300).unwrap();
        assert_eq!(s.period, Some(3));
        assert!((0..=300).all(|n| s.values[n] == if n % 3 == 0 { 1.0 } else { 0.0 }));
        let est = estimate_rho(&s).unwrap();
        assert_eq!(est.rho_hat, 1.0);
    }

    #[test]
    fn rho_estimates() {
        let b = return_series(&law1(&[(1, 0.25), (-1, 0.75)]), 4000).unwrap();
        let est = estimate_rho(&b).unwrap();
        assert_eq!(est.method, RhoMethod::Ratio);
        assert!((est.rho_hat - 0.75f64.sqrt()).abs() < 5e-4);

        let s = return_series(&law1(&[(1, 0.5), (-1, 0.5)]), 4000).unwrap();
        assert!((estimate_rho(&s).unwrap().rho_hat - 1.0).abs() < 1e-3);

        let short = return_series(&law1(&[(1, 0.5), (-1, 0.5)]), 60).unwrap();
        assert!(matches!(estimate_rho(&short), Err(Error::InsufficientData(_))));

        let one_sided = Law::delta(Arc::new(GroupSpec::lattice(1).unwrap()), l(&[1])).unwrap();
        let s = return_series(&one_sided, 200).unwrap();
        assert_eq!(s.period, None);
        assert!(estimate_rho(&s).is_err());
    }

    #[test]
    fn estimator_matches_spectral_radius_at_default_horizons() {
        let g2 = Arc::new(GroupSpec::lattice(2).unwrap());
        let drift_2d = Law::new(
            g2.clone(),
            [
                (l(&[1, 0]), 0.3),
                (l(&[-1, 0]), 0.2),
                (l(&[0, 1]), 0.15),
                (l(&[0, -1]), 0.25),
                (l(&[0, 0]), 0.1),
            ],
        )
        .unwrap();
        let corpus = [
            law1(&[(1, 0.25), (-1, 0.75)]),
            law1(&[(0, 0.5), (1, 0.3), (-1, 0.2)]),
            law1(&[(1, 0.25), (-1, 0.25), (2, 0.25), (-2, 0.25)]),
            nearest_neighbour(2),
            drift_2d,
        ];
        for v in corpus {
            let (_, res) = crate::spectral::find_exponential(&v).unwrap();
            let s = return_series(&v, default_horizon(v.group())).unwrap();
            let est = estimate_rho(&s).unwrap();
            assert!((est.rho_hat - res.rho).abs() <= 5e-3, "{} vs {}", est.rho_hat, res.rho);
        }
    }

    #[test]
    fn growth_ratio_verdicts() {
        let b = return_series(&law1(&[(1, 0.25), (-1, 0.75)]), 4000).unwrap();
        let t = r_recurrence_test(&b, 1.0 / 0.75f64.sqrt(), Thresholds::default()).unwrap();
        assert_eq!(t.verdict, Verdict::RRecurrentHeuristic);
        assert!(t.growth_ratio >= 1.8 && t.growth_ratio <= 2.0, "{}", t.growth_ratio);
        assert!(t.partial_sums.windows(2).all(|w| w[0] <= w[1]));

        let planar = return_series(&nearest_neighbour(2), 600).unwrap();
        let t = r_recurrence_test(&planar, 1.0, Thresholds::default()).unwrap();
        assert_eq!(t.verdict, Verdict::Inconclusive);

        let spatial = return_series(&nearest_neighbour(3), 120).unwrap();
        let t = r_recurrence_test(&spatial, 1.0, Thresholds::default()).unwrap();
        assert_eq!(t.verdict, Verdict::TransientHeuristic, "{}", t.growth_ratio);
    }

    #[test]
    fn r_above_inverse_rho_is_rejected() {
        let b = return_series(&law1(&[(1, 0.25), (-1, 0.75)]), 4000).unwrap();
        assert!(matches!(
            r_recurrence_test(&b, 1.2, Thresholds::default()),
            Err(Error::RMismatch { .. })
        ));
    }

    #[test]
    fn hitting_dp_examples() {
        let v = law1(&[(1, 0.5), (-1, 0.5)]);
        let target = [l(&[0])];
        let w = Window::cube(1, 10);
        let h = hitting_dp(&v, &target, 2, &w).unwrap();
        // from 2, only the path (-1, -1) reaches 0 within two steps
        assert_eq!(h.get(2, &l(&[2])).unwrap(), 0.25);
        assert_eq!(h.get(1, &l(&[1])).unwrap(), 0.5);
        for n in 0..=2 {
            assert_eq!(h.get(n, &l(&[0])).unwrap(), 1.0);
        }
        let h0 = hitting_dp(&v, &target, 0, &w).unwrap();
        assert!(w.iter().all(|x| h0.get(0, &x).unwrap() == if x == l(&[0]) { 1.0 } else { 0.0 }));
        assert!(matches!(
            hitting_dp(&v, &[l(&[11])], 2, &w),
            Err(Error::WindowExceeded { .. })
        ));
    }

    #[test]
    fn hitting_tables_are_monotone() {
        let v = law1(&[(2, 0.2), (1, 0.2), (-1, 0.5), (0, 0.1)]);
        let w = Window::cube(1, 60);
        let h = hitting_dp(&v, &[l(&[0]), l(&[3])], 40, &w).unwrap();
        for n in 0..40 {
            for i in 0..w.len() {
                assert!(h.values[n][i] <= h.values[n + 1][i]);
                assert!((0.0..=1.0).contains(&h.values[n + 1][i]));
            }
        }
    }

    #[test]
    fn translation_invariance() {
        let v = law1(&[(1, 0.25), (-1, 0.75)]);
        assert_eq!(check_translation_invariance(&v, &[l(&[0])], &l(&[0]), 50).unwrap(), 0.0);
        assert!(check_translation_invariance(&v, &[l(&[0])], &l(&[5]), 50).unwrap() <= 1e-12);

        let z6 = Arc::new(GroupSpec::cyclic(6).unwrap());
        let w = Law::new(z6, [(Element::Finite(1), 0.5), (Element::Finite(5), 0.5)]).unwrap();
        assert!(check_translation_invariance(&w, &[Element::Finite(0)], &Element::Finite(2), 100).unwrap() <= 1e-12);

        let d4 = Arc::new(GroupSpec::dihedral(4).unwrap());
        let u = Law::new(d4, [(Element::Finite(1), 0.5), (Element::Finite(4), 0.5)]).unwrap();
        let d = check_translation_invariance(&u, &[Element::Finite(0), Element::Finite(5)], &Element::Finite(6), 60).unwrap();
        assert!(d <= 1e-12);
    }

    #[test]
    fn first_return_oracles() {
        assert_eq!(first_return_oracle(&law1(&[(1, 0.25), (-1, 0.75)])), Some(0.5));
        assert_eq!(first_return_oracle(&law1(&[(1, 0.5), (-1, 0.5)])), Some(1.0));
        assert_eq!(first_return_oracle(&law1(&[(2, 0.5), (-1, 0.5)])), None);
    }

    #[test]
    fn simulation_is_reproducible_and_whole_target_always_hits() {
        let v = law1(&[(1, 0.25), (-1, 0.75)]);
        let a = simulate_harris(&v, &[l(&[0])], 500, 500, 7).unwrap();
        let b = crate::parallel::with_workers(1, || simulate_harris(&v, &[l(&[0])], 500, 500, 7).unwrap());
        assert_eq!(a, b);
        let z4 = Arc::new(GroupSpec::cyclic(4).unwrap());
        let w = Law::new(z4.clone(), [(Element::Finite(1), 0.5), (Element::Finite(3), 0.5)]).unwrap();
        let all = z4.elements().unwrap();
        let r = simulate_harris(&w, &all, 100, 10, 1).unwrap();
        assert_eq!(r.return_fraction, 1.0);
        assert!(simulate_harris(&v, &[l(&[0])], 0, 10, 1).is_err());
        assert!(simulate_harris(&v, &[], 10, 10, 1).is_err());
    }

    #[test]
    fn simulated_return_fraction_matches_first_return_oracle() {
        let v = law1(&[(1, 0.25), (-1, 0.75)]);
        let r = simulate_harris(&v, &[l(&[0])], 4000, 2000, 11).unwrap();
        let oracle = first_return_oracle(&v).unwrap();
        assert!((r.return_fraction - oracle).abs() < 4.0 * r.ci_halfwidth.max(0.01));
    }
}
