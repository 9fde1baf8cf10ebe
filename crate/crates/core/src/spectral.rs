//! Exponentials, the moment-generating function of a lattice law and its
//! convex minimization.
//!
//! On `Z^d` every exponential (positive homomorphism into the multiplicative
//! reals) has the form `phi_theta(x) = exp(theta . x)`. Its integral against
//! the law is the moment-generating function
//!
//! ```text
//! L(theta) = sum_x v(x) exp(theta . x)
//! ```
//!
//! which is smooth and strictly convex once the support affinely spans. The
//! minimum value is the spectral radius `rho`, the minimizer `theta*` fixes
//! the unique exponential normalized by `R * L(theta*) = 1`, and
//! `R = 1 / rho` is the convergence parameter. On a finite group every
//! element has finite order, so the only exponential is `phi = 1`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::Element;
use crate::law::Law;
use crate::window::{FunctionTable, Window};

/// Largest admissible `|theta . x|` before evaluation is refused.
pub const EXPONENT_LIMIT: f64 = 700.0;

/// Minimizer stops once the analytic gradient is this small.
pub const GRADIENT_TOLERANCE: f64 = 1e-10;

pub const MAX_ITERATIONS: usize = 10_000;

/// Hessians with a larger condition number switch the minimizer to
/// coordinate-wise bisection.
pub const CONDITION_LIMIT: f64 = 1e12;

/// An exponential `x -> exp(theta . x)`. An empty `theta` is the trivial
/// exponential `phi = 1`, the only one on a finite group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exponential {
    pub theta: Vec<f64>,
}

impl Exponential {
    pub fn new(theta: Vec<f64>) -> Self {
        Exponential { theta }
    }

    pub fn trivial() -> Self {
        Exponential { theta: Vec::new() }
    }

    pub fn is_trivial(&self) -> bool {
        self.theta.iter().all(|t| *t == 0.0)
    }

    /// The reciprocal exponential `psi = 1 / phi`.
    pub fn reciprocal(&self) -> Exponential {
        Exponential {
            theta: self.theta.iter().map(|t| -t).collect(),
        }
    }

    /// `ln phi(x) = theta . x`.
    pub fn exponent(&self, x: &Element) -> Result<f64> {
        match x {
            Element::Finite(_) => Ok(0.0),
            Element::Lattice(c) => {
                if self.theta.is_empty() {
                    return Ok(0.0);
                }
                if c.len() != self.theta.len() {
                    return Err(Error::ElementMismatch {
                        element: x.to_string(),
                        group: format!("exponential on Z^{}", self.theta.len()),
                    });
                }
                let e: f64 = self.theta.iter().zip(c).map(|(t, &k)| t * k as f64).sum();
                if e.abs() > EXPONENT_LIMIT {
                    Err(Error::Overflow { exponent: e })
                } else {
                    Ok(e)
                }
            }
        }
    }

    pub fn phi(&self, x: &Element) -> Result<f64> {
        self.exponent(x).map(f64::exp)
    }

    pub fn psi(&self, x: &Element) -> Result<f64> {
        self.exponent(x).map(|e| (-e).exp())
    }

    pub fn table(&self, window: Window) -> Result<FunctionTable> {
        FunctionTable::try_from_fn(window, |x| self.phi(x))
    }
}

/// Output of the minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralResult {
    pub theta_star: Vec<f64>,
    /// Spectral radius `rho = L(theta*)`.
    pub rho: f64,
    /// Convergence parameter `R = 1 / rho`.
    #[serde(rename = "R")]
    pub r: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub method: MinimizerMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimizerMethod {
    /// Finite group; nothing to minimize.
    Trivial,
    DampedNewton,
    /// Newton hit an ill-conditioned Hessian at least once.
    CoordinateBisection,
}

/// Moment-generating function `L(theta) = sum_x v(x) exp(theta . x)`.
pub fn mgf(v: &Law, theta: &[f64]) -> Result<f64> {
    lattice_points(v)?;
    let exp = Exponential::new(theta.to_vec());
    v.atoms()
        .iter()
        .map(|(x, p)| exp.phi(x).map(|f| p * f))
        .sum()
}

/// Analytic gradient `sum_x x v(x) exp(theta . x)`.
pub fn mgf_gradient(v: &Law, theta: &[f64]) -> Result<Vec<f64>> {
    let eval = Evaluation::at(&lattice_points(v)?, theta)?;
    Ok(eval.gradient)
}

/// Analytic Hessian `sum_x x x^T v(x) exp(theta . x)`, row-major.
pub fn mgf_hessian(v: &Law, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
    let eval = Evaluation::at(&lattice_points(v)?, theta)?;
    let d = theta.len();
    Ok((0..d).map(|i| (0..d).map(|j| eval.hessian[(i, j)]).collect()).collect())
}

/// Finds the exponential normalized by the convergence parameter, starting
/// the minimizer at `theta = 0`.
pub fn find_exponential(v: &Law) -> Result<(Exponential, SpectralResult)> {
    v.check_irreducible().into_result()?;
    match v.group().dim() {
        None => Ok((
            Exponential::trivial(),
            SpectralResult {
                theta_star: Vec::new(),
                rho: 1.0,
                r: 1.0,
                gradient_norm: 0.0,
                iterations: 0,
                method: MinimizerMethod::Trivial,
            },
        )),
        Some(d) => {
            let res = minimize_from(v, &vec![0.0; d])?;
            Ok((Exponential::new(res.theta_star.clone()), res))
        }
    }
}

/// Minimizes `L` from an arbitrary starting point. The caller is
/// responsible for irreducibility; without it `L` may have no minimizer.
pub fn minimize_from(v: &Law, theta0: &[f64]) -> Result<SpectralResult> {
    let points = lattice_points(v)?;
    let d = theta0.len();
    let mut theta = theta0.to_vec();
    let mut method = MinimizerMethod::DampedNewton;
    let mut iterations = 0;

    let mut eval = Evaluation::at(&points, &theta)?;
    while eval.gradient_norm() > GRADIENT_TOLERANCE && iterations < MAX_ITERATIONS {
        iterations += 1;
        let step = newton_direction(&eval, d);
        let accepted = match step {
            Some(dir) => line_search(&points, &theta, &eval, &dir)?,
            None => None,
        };
        match accepted {
            Some((next_theta, next_eval)) => {
                theta = next_theta;
                eval = next_eval;
            }
            None => {
                method = MinimizerMethod::CoordinateBisection;
                coordinate_sweep(&points, &mut theta)?;
                eval = Evaluation::at(&points, &theta)?;
            }
        }
    }

    // Polish: a few more full Newton steps, kept only while they shrink the
    // gradient, take the minimizer to machine precision.
    if eval.gradient_norm() <= GRADIENT_TOLERANCE {
        for _ in 0..3 {
            let Some(dir) = newton_direction(&eval, d) else { break };
            let trial: Vec<f64> = theta.iter().zip(&dir).map(|(a, s)| a + s).collect();
            match Evaluation::at(&points, &trial) {
                Ok(next) if next.gradient_norm() < eval.gradient_norm() => {
                    theta = trial;
                    eval = next;
                }
                _ => break,
            }
        }
    }

    let rho = eval.value;
    Ok(SpectralResult {
        theta_star: theta,
        rho,
        r: 1.0 / rho,
        gradient_norm: eval.gradient_norm(),
        iterations,
        method,
    })
}

/// Solutions of repeated minimizations from random starts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub starts: Vec<Vec<f64>>,
    pub minimizers: Vec<Vec<f64>>,
    /// Largest sup-distance between any minimizer and the first one.
    pub spread: f64,
}

/// Restarts the minimizer from `starts` points drawn uniformly in
/// `[-half_width, half_width]^d`. Start `k` draws from its own stream of
/// the seeded generator, so the result does not depend on scheduling.
pub fn multi_start(v: &Law, starts: usize, half_width: f64, seed: u64) -> Result<UniquenessReport> {
    v.check_irreducible().into_result()?;
    let d = v.group().dim().ok_or_else(|| {
        Error::InvalidLaw("multi-start minimization needs a lattice law".into())
    })?;
    let start_points: Vec<Vec<f64>> = (0..starts)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            (0..d).map(|_| rng.gen_range(-half_width..=half_width)).collect()
        })
        .collect();
    let minimizers = start_points
        .par_iter()
        .map(|t0| minimize_from(v, t0).map(|r| r.theta_star))
        .collect::<Result<Vec<_>>>()?;
    let spread = minimizers
        .iter()
        .map(|m| sup_distance(m, &minimizers[0]))
        .fold(0.0, f64::max);
    Ok(UniquenessReport {
        starts: start_points,
        minimizers,
        spread,
    })
}

/// Spectral radii of a law and of its dual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSpectral {
    pub rho: f64,
    pub rho_dual: f64,
    pub theta_star: Vec<f64>,
    pub theta_star_dual: Vec<f64>,
    pub equal: bool,
}

pub const DUAL_RHO_TOLERANCE: f64 = 1e-10;

/// Computes `rho(v)` and `rho(dual(v))` by independent minimizations.
pub fn check_dual_spectral_radius(v: &Law) -> Result<DualSpectral> {
    let (_, primal) = find_exponential(v)?;
    let (_, dual) = find_exponential(&v.dual())?;
    Ok(DualSpectral {
        equal: (primal.rho - dual.rho).abs() <= DUAL_RHO_TOLERANCE,
        rho: primal.rho,
        rho_dual: dual.rho,
        theta_star: primal.theta_star,
        theta_star_dual: dual.theta_star,
    })
}

/// `max |phi(x) - r (P phi)(x)| / phi(x)` over the window shrunk by the
/// support radius.
pub fn verify_r_invariance(v: &Law, exponential: &Exponential, r: f64, window: &Window) -> Result<f64> {
    let table = exponential.table(window.clone())?;
    let region = check_region(v, window)?;
    let mut worst: f64 = 0.0;
    for x in region.iter() {
        let f = table.get(&x)?;
        let pf = v.apply_p(&table, &x)?;
        worst = worst.max((f - r * pf).abs() / f);
    }
    Ok(worst)
}

/// Interior of `window` on which every one-step evaluation stays inside.
pub(crate) fn check_region(v: &Law, window: &Window) -> Result<Window> {
    let region = window.shrink(v.support_radius());
    if region.is_empty() {
        return Err(Error::WindowExceeded {
            point: format!("support radius {}", v.support_radius()),
            window: window.to_string(),
        });
    }
    Ok(region)
}

fn lattice_points(v: &Law) -> Result<Vec<(Vec<f64>, f64)>> {
    if !v.group().is_lattice() {
        return Err(Error::InvalidLaw(
            "the moment-generating function is defined for lattice laws".into(),
        ));
    }
    Ok(v.atoms()
        .iter()
        .map(|(x, p)| (x.coords().unwrap().iter().map(|&c| c as f64).collect(), *p))
        .collect())
}

struct Evaluation {
    value: f64,
    gradient: Vec<f64>,
    hessian: DMatrix<f64>,
}

impl Evaluation {
    fn at(points: &[(Vec<f64>, f64)], theta: &[f64]) -> Result<Self> {
        let d = theta.len();
        let mut value = 0.0;
        let mut gradient = vec![0.0; d];
        let mut hessian = DMatrix::zeros(d, d);
        for (x, p) in points {
            let e: f64 = theta.iter().zip(x).map(|(t, c)| t * c).sum();
            if e.abs() > EXPONENT_LIMIT {
                return Err(Error::Overflow { exponent: e });
            }
            let w = p * e.exp();
            value += w;
            for i in 0..d {
                gradient[i] += w * x[i];
                for j in 0..d {
                    hessian[(i, j)] += w * x[i] * x[j];
                }
            }
        }
        Ok(Evaluation {
            value,
            gradient,
            hessian,
        })
    }

    fn gradient_norm(&self) -> f64 {
        self.gradient.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

fn newton_direction(eval: &Evaluation, d: usize) -> Option<Vec<f64>> {
    let eig = SymmetricEigen::new(eval.hessian.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(min > 0.0) || max / min > CONDITION_LIMIT {
        return None;
    }
    let g = DVector::from_column_slice(&eval.gradient);
    let chol = eval.hessian.clone().cholesky()?;
    let step = -chol.solve(&g);
    Some((0..d).map(|i| step[i]).collect())
}

/// Backtracking Armijo search along a descent direction. Trial points that
/// overflow count as rejected.
fn line_search(
    points: &[(Vec<f64>, f64)],
    theta: &[f64],
    eval: &Evaluation,
    dir: &[f64],
) -> Result<Option<(Vec<f64>, Evaluation)>> {
    let slope: f64 = eval.gradient.iter().zip(dir).map(|(g, s)| g * s).sum();
    if slope >= 0.0 {
        return Ok(None);
    }
    let slack = 4.0 * f64::EPSILON * eval.value;
    let mut t = 1.0;
    while t > 1e-20 {
        let trial: Vec<f64> = theta.iter().zip(dir).map(|(a, s)| a + t * s).collect();
        match Evaluation::at(points, &trial) {
            Ok(next) => {
                if next.value <= eval.value + 1e-4 * t * slope + slack
                    || next.gradient_norm() < eval.gradient_norm() && next.value <= eval.value + slack
                {
                    return Ok(Some((trial, next)));
                }
            }
            Err(Error::Overflow { .. }) => {}
            Err(e) => return Err(e),
        }
        t *= 0.5;
    }
    Ok(None)
}

/// One sweep of exact coordinate minimization: the partial derivative is
/// increasing along each axis, so each coordinate is found by bisection.
fn coordinate_sweep(points: &[(Vec<f64>, f64)], theta: &mut [f64]) -> Result<()> {
    for i in 0..theta.len() {
        let scale = points.iter().map(|(x, _)| x[i].abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            continue;
        }
        let here = Evaluation::at(points, theta)?.gradient[i];
        if here == 0.0 {
            continue;
        }
        let dir = if here > 0.0 { -1.0 } else { 1.0 };
        // Overflow moving along `dir` comes from atoms whose i-th coordinate
        // has the sign of `dir`, and those dominate the partial derivative.
        let partial = |ti: f64| -> Result<f64> {
            let mut t = theta.to_vec();
            t[i] = ti;
            match Evaluation::at(points, &t) {
                Ok(e) => Ok(e.gradient[i]),
                Err(Error::Overflow { .. }) => Ok(dir * f64::INFINITY),
                Err(e) => Err(e),
            }
        };
        // bracket the root of the increasing partial derivative
        let origin = theta[i];
        let mut step = 0.5 / scale;
        let (mut lo, mut hi) = (origin, origin);
        loop {
            let probe = origin + dir * step;
            let val = partial(probe)?;
            let crossed = val.signum() != here.signum();
            match (crossed, dir > 0.0) {
                (true, true) | (false, false) => hi = probe,
                (true, false) | (false, true) => lo = probe,
            }
            if crossed {
                break;
            }
            if step > 1e6 {
                return Err(Error::DegenerateSupport {
                    witness: format!("partial derivative {i} keeps its sign along the whole axis"),
                });
            }
            step *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let val = partial(mid)?;
            if val == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if val > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        theta[i] = 0.5 * (lo + hi);
    }
    Ok(())
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
