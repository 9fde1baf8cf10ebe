//! The tilted walk `R * phi * v` and pointwise invariance checks.
//!
//! Every check evaluates on a finite window shrunk by the support radius, so
//! no evaluation escapes the tabulated region. Residuals are relative to the
//! reference value because `phi` and `psi` span many orders of magnitude
//! across a window.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::Element;
use crate::law::Law;
use crate::spectral::{self, check_region, Exponential};
use crate::window::{FunctionTable, Window};

/// Tolerance on `R * sum(phi v) = 1` required to build a tilted walk.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct TiltedWalk {
    pub original: Law,
    pub exponential: Exponential,
    pub r: f64,
    pub tilted: Law,
}

/// Builds the law `x -> R phi(x) v(x)`, which is a probability law exactly
/// when `R * sum(phi v) = 1`.
pub fn tilt(v: &Law, exponential: &Exponential, r: f64) -> Result<TiltedWalk> {
    let mut atoms = BTreeMap::new();
    for (x, p) in v.atoms() {
        atoms.insert(x.clone(), r * exponential.phi(x)? * p);
    }
    let total: f64 = atoms.values().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::NotNormalized { total });
    }
    Ok(TiltedWalk {
        original: v.clone(),
        exponential: exponential.clone(),
        r,
        tilted: Law::from_masses(v.group().clone(), atoms, 0.0),
    })
}

/// Shortcut: minimize, then tilt by the resulting exponential and `R`.
pub fn tilt_at_minimum(v: &Law) -> Result<TiltedWalk> {
    let (exp, res) = spectral::find_exponential(v)?;
    tilt(v, &exp, res.r)
}

/// Largest atom discrepancy between the n-th power of the tilted law and
/// `R^n phi v^n`, over `1 <= n <= n_max`.
pub fn check_eq17(tw: &TiltedWalk, n_max: usize) -> Result<f64> {
    let mut tilted_pow = tw.tilted.clone();
    let mut orig_pow = tw.original.clone();
    let mut worst: f64 = 0.0;
    for n in 1..=n_max {
        if n > 1 {
            tilted_pow = tilted_pow.convolve(&tw.tilted)?;
            orig_pow = orig_pow.convolve(&tw.original)?;
        }
        let mut predicted = BTreeMap::new();
        let r_pow = tw.r.powi(n as i32);
        for (x, p) in orig_pow.atoms() {
            predicted.insert(x.clone(), r_pow * tw.exponential.phi(x)? * p);
        }
        let predicted = Law::from_masses(tw.original.group().clone(), predicted, 0.0);
        worst = worst.max(tilted_pow.max_atom_diff(&predicted));
    }
    Ok(worst)
}

/// `max |psi(x) - R (P^ psi)(x)| / psi(x)` with `P^` the dual operator.
pub fn check_dual_invariance(v: &Law, exponential: &Exponential, r: f64, window: &Window) -> Result<f64> {
    let dual = v.dual();
    let psi = exponential.reciprocal().table(window.clone())?;
    let region = check_region(v, window)?;
    let mut worst: f64 = 0.0;
    for x in region.iter() {
        let h = psi.get(&x)?;
        worst = worst.max((h - r * dual.apply_p(&psi, &x)?).abs() / h);
    }
    Ok(worst)
}

/// The density `psi` of the candidate invariant measure, tabulated.
#[derive(Debug, Clone)]
pub struct InvariantMeasureTable {
    pub table: FunctionTable,
}

impl InvariantMeasureTable {
    pub fn new(exponential: &Exponential, window: Window) -> Result<Self> {
        Ok(InvariantMeasureTable {
            table: exponential.reciprocal().table(window)?,
        })
    }

    pub fn density(&self, x: &Element) -> Result<f64> {
        self.table.get(x)
    }
}

/// Checks `nu = R nu P` for `nu = psi * counting` pointwise:
/// `max_y |psi(y) - R sum_x psi(x) v(x^-1 y)| / psi(y)`.
pub fn check_measure_invariance(v: &Law, exponential: &Exponential, r: f64, window: &Window) -> Result<f64> {
    let measure = InvariantMeasureTable::new(exponential, window.clone())?;
    let region = check_region(v, window)?;
    let group = v.group();
    let mut worst: f64 = 0.0;
    for y in region.iter() {
        let target = measure.density(&y)?;
        // x^-1 y = s  <=>  x = y s^-1
        let mut pushed = 0.0;
        for (s, p) in v.atoms() {
            let x = group.multiply(&y, &group.inverse(s)?)?;
            pushed += measure.density(&x)? * p;
        }
        worst = worst.max((target - r * pushed).abs() / target);
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricDegeneracy {
    pub is_symmetric: bool,
    /// `None` when the law is not symmetric.
    pub r_equals_one: Option<bool>,
    pub phi_trivial: Option<bool>,
    pub theta_norm: Option<f64>,
    pub r_minus_one: Option<f64>,
}

pub const SYMMETRY_TOLERANCE: f64 = 1e-14;
pub const TRIVIAL_THETA_TOLERANCE: f64 = 1e-8;
pub const UNIT_R_TOLERANCE: f64 = 1e-10;

/// For a symmetric law the minimizer must be `theta* = 0` and `R = 1`.
pub fn check_symmetric_degeneracy(v: &Law) -> SymmetricDegeneracy {
    if !v.is_symmetric(SYMMETRY_TOLERANCE) {
        return SymmetricDegeneracy {
            is_symmetric: false,
            r_equals_one: None,
            phi_trivial: None,
            theta_norm: None,
            r_minus_one: None,
        };
    }
    // A symmetric support always has the origin in the relative interior of
    // its hull, so the minimizer exists even for walks on a proper subgroup.
    let (theta_norm, r) = match v.group().dim() {
        None => (0.0, 1.0),
        Some(d) => match spectral::minimize_from(v, &vec![0.0; d]) {
            Ok(res) => (res.theta_star.iter().map(|t| t * t).sum::<f64>().sqrt(), res.r),
            Err(_) => (f64::NAN, f64::NAN),
        },
    };
    SymmetricDegeneracy {
        is_symmetric: true,
        r_equals_one: Some((r - 1.0).abs() <= UNIT_R_TOLERANCE),
        phi_trivial: Some(theta_norm <= TRIVIAL_THETA_TOLERANCE),
        theta_norm: Some(theta_norm),
        r_minus_one: Some(r - 1.0),
    }
}

/// Default check window: a cube of radius `32 * support radius` on `Z`,
/// 16 on `Z^2`, 8 on `Z^3`, and the whole group when finite.
pub fn default_window(v: &Law) -> Window {
    let radius = match v.group().dim() {
        Some(1) => 32 * v.support_radius().max(1),
        Some(2) => 16,
        _ => 8,
    };
    Window::for_group(v.group(), radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupSpec;
    use crate::spectral::find_exponential;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn l(c: &[i64]) -> Element {
        Element::Lattice(c.to_vec())
    }

    fn law1(atoms: &[(i64, f64)]) -> Law {
        let g = Arc::new(GroupSpec::lattice(1).unwrap());
        Law::new(g, atoms.iter().map(|&(x, p)| (l(&[x]), p))).unwrap()
    }

    fn bernoulli() -> Law {
        law1(&[(1, 0.25), (-1, 0.75)])
    }

    fn lazy() -> Law {
        law1(&[(0, 0.5), (1, 0.3), (-1, 0.2)])
    }

    #[test]
    fn bernoulli_tilts_to_simple_symmetric_walk() {
        let tw = tilt_at_minimum(&bernoulli()).unwrap();
        // R phi(1) p = p sqrt(q/p) / (2 sqrt(pq)) = 1/2
        let up = tw.tilted.mass(&l(&[1]));
        assert!((up - 0.5).abs() < 1e-14, "{up}");
        assert!((tw.tilted.mass(&l(&[-1])) - 0.5).abs() < 1e-14);
        assert!((tw.tilted.total_mass() - 1.0).abs() < 1e-12);
        for (x, p) in tw.original.atoms() {
            let expect = tw.r * tw.exponential.phi(x).unwrap() * p;
            assert!((tw.tilted.mass(x) - expect).abs() <= 1e-14);
        }
    }

    #[test]
    fn lazy_drift_tilt_by_hand() {
        let tw = tilt_at_minimum(&lazy()).unwrap();
        let rho = 0.5 + 2.0 * 0.06f64.sqrt();
        let theta = 0.5 * (2.0f64 / 3.0).ln();
        assert!((tw.exponential.theta[0] - theta).abs() < 1e-12);
        assert!((tw.tilted.mass(&l(&[0])) - 0.5 / rho).abs() < 1e-14);
        assert!((tw.tilted.mass(&l(&[1])) - 0.06f64.sqrt() / rho).abs() < 1e-14);
        assert!((tw.tilted.mass(&l(&[-1])) - 0.06f64.sqrt() / rho).abs() < 1e-14);
        assert!((tw.tilted.mass(&l(&[0])) - 0.505102).abs() < 1e-6);
        assert!((tw.tilted.mass(&l(&[1])) - 0.247449).abs() < 1e-6);
    }

    #[test]
    fn symmetric_tilt_is_identity() {
        let v = law1(&[(1, 0.5), (-1, 0.5)]);
        let tw = tilt_at_minimum(&v).unwrap();
        assert_eq!(tw.tilted, v);
    }

    #[test]
    fn tilt_rejects_unnormalized_pair() {
        let (exp, _) = find_exponential(&bernoulli()).unwrap();
        assert!(matches!(tilt(&bernoulli(), &exp, 1.0), Err(Error::NotNormalized { .. })));
    }

    #[test]
    fn eq17_examples() {
        let tw = tilt_at_minimum(&bernoulli()).unwrap();
        // n = 2 at the origin: both sides by enumeration
        let lhs = tw.tilted.power(2).mass(&l(&[0]));
        let rhs = tw.r * tw.r * tw.original.power(2).mass(&l(&[0]));
        assert!((lhs - 0.5).abs() < 1e-15);
        assert!((rhs - 0.5).abs() < 1e-14);
        assert_eq!(check_eq17(&tw, 1).unwrap(), 0.0);
        assert!(check_eq17(&tw, 10).unwrap() <= 1e-10);
        let lazy_tw = tilt_at_minimum(&lazy()).unwrap();
        assert!(check_eq17(&lazy_tw, 8).unwrap() <= 1e-12);
    }

    #[test]
    fn dual_invariance_examples() {
        let v = bernoulli();
        let (exp, res) = find_exponential(&v).unwrap();
        let w = default_window(&v);
        assert!(check_dual_invariance(&v, &exp, res.r, &w).unwrap() <= 1e-12);
        let sym = law1(&[(1, 0.5), (-1, 0.5)]);
        assert_eq!(check_dual_invariance(&sym, &Exponential::new(vec![0.0]), 1.0, &w).unwrap(), 0.0);
        // pairing phi (instead of psi) with the dual operator: the ratio
        // P^phi / phi is L(-theta*) = p / sqrt(3) + q sqrt(3) = 2.5 / sqrt(3)
        let wrong = check_dual_invariance(&v, &exp.reciprocal(), res.r, &w).unwrap();
        let by_hand = (1.0 - res.r * (0.25 / 3f64.sqrt() + 0.75 * 3f64.sqrt())).abs();
        assert!((wrong - by_hand).abs() < 1e-12);
        assert!((wrong - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn measure_invariance_examples() {
        let v = bernoulli();
        let (exp, res) = find_exponential(&v).unwrap();
        let w = default_window(&v);
        assert!(check_measure_invariance(&v, &exp, res.r, &w).unwrap() <= 1e-12);
        let sym = law1(&[(1, 0.5), (-1, 0.5)]);
        assert_eq!(check_measure_invariance(&sym, &Exponential::new(vec![0.0]), 1.0, &w).unwrap(), 0.0);

        let z6 = Arc::new(GroupSpec::cyclic(6).unwrap());
        let gen = Law::new(z6, [(Element::Finite(1), 0.5), (Element::Finite(5), 0.5)]).unwrap();
        let (exp, res) = find_exponential(&gen).unwrap();
        let w = default_window(&gen);
        assert!(check_measure_invariance(&gen, &exp, res.r, &w).unwrap() <= 1e-12);
    }

    #[test]
    fn measure_invariance_on_non_abelian_group() {
        // the transition matrix of any walk on a finite group is doubly
        // stochastic, so counting measure is invariant with R = 1
        let d4 = Arc::new(GroupSpec::dihedral(4).unwrap());
        let v = Law::new(d4, [(Element::Finite(1), 0.6), (Element::Finite(4), 0.3), (Element::Finite(6), 0.1)]).unwrap();
        let w = default_window(&v);
        let residual = check_measure_invariance(&v, &Exponential::trivial(), 1.0, &w).unwrap();
        assert!(residual <= 1e-12);
    }

    #[test]
    fn symmetric_degeneracy_examples() {
        let s = check_symmetric_degeneracy(&law1(&[(1, 0.5), (-1, 0.5)]));
        assert_eq!((s.is_symmetric, s.r_equals_one, s.phi_trivial), (true, Some(true), Some(true)));
        let b = check_symmetric_degeneracy(&bernoulli());
        assert!(!b.is_symmetric);
        assert_eq!(b.r_equals_one, None);
        let four = check_symmetric_degeneracy(&law1(&[(2, 0.25), (1, 0.25), (-1, 0.25), (-2, 0.25)]));
        assert_eq!((four.is_symmetric, four.r_equals_one, four.phi_trivial), (true, Some(true), Some(true)));
    }

    #[test]
    fn default_windows() {
        assert_eq!(default_window(&bernoulli()), Window::cube(1, 32));
        assert_eq!(default_window(&law1(&[(3, 0.5), (-2, 0.5)])), Window::cube(1, 96));
    }

    fn drifted_law() -> impl Strategy<Value = Law> {
        prop::collection::vec(0.05f64..1.0, 5).prop_map(|w| {
            let total: f64 = w.iter().sum();
            law1(&[(-2, w[0] / total), (-1, w[1] / total), (0, w[2] / total), (1, w[3] / total), (3, w[4] / total)])
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn tilting_is_idempotent(v in drifted_law()) {
            let tw = tilt_at_minimum(&v).unwrap();
            prop_assert!((tw.tilted.total_mass() - 1.0).abs() <= 1e-12);
            let again = tilt_at_minimum(&tw.tilted).unwrap();
            prop_assert!(again.exponential.theta[0].abs() <= 1e-8);
            prop_assert!((again.r - 1.0).abs() <= 1e-10);
            prop_assert!(again.tilted.max_atom_diff(&tw.tilted) <= 1e-10);
        }

        #[test]
        fn eq17_degrades_linearly(v in drifted_law()) {
            let tw = tilt_at_minimum(&v).unwrap();
            for n in 1..=10 {
                prop_assert!(check_eq17(&tw, n).unwrap() <= n as f64 * 1e-13);
            }
        }

        #[test]
        fn tilt_commutes_with_dual(v in drifted_law()) {
            let (exp, res) = find_exponential(&v).unwrap();
            let lhs = tilt(&v.dual(), &exp.reciprocal(), res.r).unwrap().tilted;
            let rhs = tilt(&v, &exp, res.r).unwrap().tilted.dual();
            prop_assert!(lhs.max_atom_diff(&rhs) <= 1e-14);
        }
    }
}
