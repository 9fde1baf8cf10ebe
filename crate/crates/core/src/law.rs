//! Finite-support probability laws on a discrete group.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{Element, GroupSpec};
use crate::window::FunctionTable;

/// Probabilities must sum to one within this tolerance.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Convolution atoms below this mass are dropped and accounted in
/// [`Law::mass_leak`].
pub const UNDERFLOW_CUTOFF: f64 = 1e-300;

/// A probability law with finite support.
#[derive(Debug, Clone)]
pub struct Law {
    group: Arc<GroupSpec>,
    atoms: BTreeMap<Element, f64>,
    mass_leak: f64,
}

impl PartialEq for Law {
    fn eq(&self, other: &Self) -> bool {
        self.same_group(other) && self.atoms == other.atoms
    }
}

impl Law {
    /// Validates and builds a law. Atoms must be distinct group elements
    /// with strictly positive mass summing to one.
    pub fn new(group: Arc<GroupSpec>, atoms: impl IntoIterator<Item = (Element, f64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (x, p) in atoms {
            group.validate(&x)?;
            if !(p > 0.0 && p <= 1.0) || !p.is_finite() {
                return Err(Error::InvalidLaw(format!(
                    "mass {p} at {x} is not in (0, 1]"
                )));
            }
            if map.insert(x.clone(), p).is_some() {
                return Err(Error::InvalidLaw(format!("element {x} listed twice")));
            }
        }
        if map.is_empty() {
            return Err(Error::InvalidLaw("empty support".into()));
        }
        let total: f64 = map.values().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidLaw(format!(
                "probabilities sum to {total}, not 1 within {MASS_TOLERANCE:e}"
            )));
        }
        Ok(Law {
            group,
            atoms: map,
            mass_leak: 0.0,
        })
    }

    /// Builds a law from nonnegative masses without the normalization
    /// check. Zero atoms are discarded.
    pub(crate) fn from_masses(group: Arc<GroupSpec>, atoms: BTreeMap<Element, f64>, mass_leak: f64) -> Self {
        let atoms = atoms.into_iter().filter(|(_, p)| *p > 0.0).collect();
        Law {
            group,
            atoms,
            mass_leak,
        }
    }

    /// Point mass at `x`.
    pub fn delta(group: Arc<GroupSpec>, x: Element) -> Result<Self> {
        Law::new(group, [(x, 1.0)])
    }

    pub fn group(&self) -> &Arc<GroupSpec> {
        &self.group
    }

    pub fn atoms(&self) -> &BTreeMap<Element, f64> {
        &self.atoms
    }

    pub fn support(&self) -> impl Iterator<Item = &Element> {
        self.atoms.keys()
    }

    pub fn mass(&self, x: &Element) -> f64 {
        self.atoms.get(x).copied().unwrap_or(0.0)
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.values().sum()
    }

    /// Mass dropped to underflow while forming this law by convolution.
    pub fn mass_leak(&self) -> f64 {
        self.mass_leak
    }

    /// Largest sup-norm of a support point; zero on finite groups.
    pub fn support_radius(&self) -> i64 {
        self.atoms
            .keys()
            .filter_map(|x| x.coords())
            .flat_map(|c| c.iter().map(|v| v.abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn same_group(&self, other: &Law) -> bool {
        Arc::ptr_eq(&self.group, &other.group) || *self.group == *other.group
    }

    /// `(self * other)(z) = sum over xy = z of self(x) other(y)`.
    pub fn convolve(&self, other: &Law) -> Result<Law> {
        if !self.same_group(other) {
            return Err(Error::GroupMismatch);
        }
        let mut out: BTreeMap<Element, f64> = BTreeMap::new();
        for (x, p) in &self.atoms {
            for (y, q) in &other.atoms {
                let z = self.group.multiply(x, y)?;
                *out.entry(z).or_insert(0.0) += p * q;
            }
        }
        let mut leak = self.mass_leak + other.mass_leak;
        out.retain(|_, m| {
            if *m < UNDERFLOW_CUTOFF {
                leak += *m;
                false
            } else {
                true
            }
        });
        Ok(Law::from_masses(self.group.clone(), out, leak))
    }

    /// n-fold convolution power; `power(0)` is the point mass at the identity.
    pub fn power(&self, n: usize) -> Law {
        let mut acc = Law::from_masses(
            self.group.clone(),
            BTreeMap::from([(self.group.identity(), 1.0)]),
            0.0,
        );
        for _ in 0..n {
            acc = acc.convolve(self).expect("powers share the group");
        }
        acc
    }

    /// The dual law `A -> v(A^{-1})`.
    pub fn dual(&self) -> Law {
        let atoms = self
            .atoms
            .iter()
            .map(|(x, p)| (self.group.inverse(x).expect("support is valid"), *p))
            .collect();
        Law::from_masses(self.group.clone(), atoms, self.mass_leak)
    }

    /// Whether `dual(v) = v` atom by atom within `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let dual = self.dual();
        dual.atoms.len() == self.atoms.len()
            && dual
                .atoms
                .iter()
                .all(|(x, p)| self.atoms.get(x).is_some_and(|q| (p - q).abs() <= tol))
    }

    /// Largest absolute atom difference between two laws on the same group.
    pub fn max_atom_diff(&self, other: &Law) -> f64 {
        let keys: BTreeSet<&Element> = self.atoms.keys().chain(other.atoms.keys()).collect();
        keys.into_iter()
            .map(|x| (self.mass(x) - other.mass(x)).abs())
            .fold(0.0, f64::max)
    }

    /// Transition operator `Pf(x) = sum_y f(xy) v(y)`.
    pub fn apply_p(&self, f: &FunctionTable, x: &Element) -> Result<f64> {
        let mut acc = 0.0;
        for (y, p) in &self.atoms {
            let xy = self.group.multiply(x, y)?;
            acc += f.get(&xy)? * p;
        }
        Ok(acc)
    }

    /// Decides whether the semigroup generated by the support is the whole
    /// group.
    pub fn check_irreducible(&self) -> Irreducibility {
        match self.group.order() {
            Some(n) => self.finite_irreducibility(n),
            None => self.lattice_irreducibility(),
        }
    }

    fn finite_irreducibility(&self, order: usize) -> Irreducibility {
        let support: Vec<&Element> = self.atoms.keys().collect();
        let mut reached = vec![false; order];
        let mut queue: VecDeque<Element> = VecDeque::new();
        for s in &support {
            let i = s.index().expect("finite element");
            if !reached[i] {
                reached[i] = true;
                queue.push_back((*s).clone());
            }
        }
        while let Some(x) = queue.pop_front() {
            for s in &support {
                let z = self.group.multiply(&x, s).expect("valid elements");
                let i = z.index().expect("finite element");
                if !reached[i] {
                    reached[i] = true;
                    queue.push_back(z);
                }
            }
        }
        let count = reached.iter().filter(|r| **r).count();
        if count == order {
            Irreducibility::ok(format!("semigroup generated by the support is the whole group of order {order}"))
        } else {
            Irreducibility::fail(
                IrreducibilityFailure::ProperSubsemigroup,
                format!("semigroup generated by the support has {count} of {order} elements"),
            )
        }
    }

    fn lattice_irreducibility(&self) -> Irreducibility {
        let dim = self.group.dim().expect("lattice");
        let points: Vec<Vec<i64>> = self
            .atoms
            .keys()
            .map(|x| x.coords().expect("lattice element").to_vec())
            .collect();
        if let Some(normal) = lattice::closed_halfspace_normal(&points, dim) {
            let cone = if normal.iter().all(|&c| c >= 0) && normal.iter().filter(|&&c| c != 0).count() == 1 {
                "nonnegative cone".to_string()
            } else {
                "a closed half-space".to_string()
            };
            return Irreducibility::fail(
                IrreducibilityFailure::HullBoundary,
                format!(
                    "semigroup generated = {cone} {{x : {} . x >= 0}}; origin is not interior to the convex hull of the support",
                    Element::Lattice(normal)
                ),
            );
        }
        let index = lattice::subgroup_index(&points, dim);
        if index != Some(1) {
            let what = match index {
                Some(k) => format!("a subgroup of index {k}"),
                None => "a subgroup of lower rank".to_string(),
            };
            return Irreducibility::fail(
                IrreducibilityFailure::ProperSubgroup,
                format!("support generates {what} of Z^{dim}"),
            );
        }
        Irreducibility::ok(format!(
            "support generates Z^{dim} as a group and the origin is interior to its convex hull"
        ))
    }
}

/// Which condition of the irreducibility test failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IrreducibilityFailure {
    /// The origin is on the boundary of, or outside, the convex hull.
    HullBoundary,
    /// The generated subgroup is a proper subgroup of the lattice.
    ProperSubgroup,
    /// Finite group: breadth-first closure misses elements.
    ProperSubsemigroup,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Irreducibility {
    pub irreducible: bool,
    pub witness: String,
    pub failure: Option<IrreducibilityFailure>,
}

impl Irreducibility {
    fn ok(witness: String) -> Self {
        Irreducibility {
            irreducible: true,
            witness,
            failure: None,
        }
    }

    fn fail(failure: IrreducibilityFailure, witness: String) -> Self {
        Irreducibility {
            irreducible: false,
            witness,
            failure: Some(failure),
        }
    }

    /// Converts a failed test into the matching error.
    pub fn into_result(self) -> Result<()> {
        match self.failure {
            None => Ok(()),
            Some(IrreducibilityFailure::HullBoundary) => Err(Error::DegenerateSupport { witness: self.witness }),
            Some(_) => Err(Error::NotIrreducible { witness: self.witness }),
        }
    }
}

/// Exact integer geometry on small lattices.
mod lattice {
    fn dot(a: &[i64], b: &[i64]) -> i128 {
        a.iter().zip(b).map(|(x, y)| *x as i128 * *y as i128).sum()
    }

    fn rank(points: &[Vec<i64>], dim: usize) -> usize {
        let mut rows: Vec<Vec<i128>> = points.iter().map(|p| p.iter().map(|&x| x as i128).collect()).collect();
        echelon(&mut rows, dim).len()
    }

    /// Integer row reduction (Euclid on each column). Returns the pivot
    /// values of the resulting echelon basis.
    fn echelon(rows: &mut [Vec<i128>], dim: usize) -> Vec<i128> {
        let mut pivots = Vec::new();
        let mut top = 0;
        for col in 0..dim {
            loop {
                let nonzero: Vec<usize> = (top..rows.len()).filter(|&r| rows[r][col] != 0).collect();
                if nonzero.is_empty() {
                    break;
                }
                let best = *nonzero.iter().min_by_key(|&&r| rows[r][col].abs()).unwrap();
                rows.swap(top, best);
                let mut done = true;
                for r in top + 1..rows.len() {
                    if rows[r][col] != 0 {
                        let q = rows[r][col] / rows[top][col];
                        for c in 0..dim {
                            rows[r][c] -= q * rows[top][c];
                        }
                        if rows[r][col] != 0 {
                            done = false;
                        }
                    }
                }
                if done {
                    pivots.push(rows[top][col]);
                    top += 1;
                    break;
                }
            }
            if top == rows.len() {
                break;
            }
        }
        pivots
    }

    /// Index of the subgroup generated by `points` in `Z^dim`, or `None`
    /// when the subgroup has rank below `dim`.
    pub(super) fn subgroup_index(points: &[Vec<i64>], dim: usize) -> Option<u128> {
        let mut rows: Vec<Vec<i128>> = points.iter().map(|p| p.iter().map(|&x| x as i128).collect()).collect();
        let pivots = echelon(&mut rows, dim);
        if pivots.len() < dim {
            return None;
        }
        Some(pivots.iter().map(|p| p.unsigned_abs()).product())
    }

    /// Finds a nonzero `n` with `n . s >= 0` for every point, i.e. a closed
    /// half-space through the origin containing the support. Such an `n`
    /// exists exactly when the origin is not interior to the convex hull.
    pub(super) fn closed_halfspace_normal(points: &[Vec<i64>], dim: usize) -> Option<Vec<i64>> {
        if rank(points, dim) < dim {
            return Some(orthogonal_complement_vector(points, dim));
        }
        // If a supporting half-space exists and the points span, one can be
        // chosen whose boundary contains dim-1 independent points.
        let candidates: Vec<Vec<i64>> = match dim {
            1 => vec![vec![1], vec![-1]],
            2 => points
                .iter()
                .filter(|p| p.iter().any(|&c| c != 0))
                .flat_map(|p| [vec![-p[1], p[0]], vec![p[1], -p[0]]])
                .collect(),
            3 => {
                let mut out = Vec::new();
                for (i, a) in points.iter().enumerate() {
                    for b in &points[i + 1..] {
                        let n = cross(a, b);
                        if n.iter().any(|&c| c != 0) {
                            out.push(n.iter().map(|c| -c).collect());
                            out.push(n);
                        }
                    }
                }
                out
            }
            _ => unreachable!("lattice dimension is at most 3"),
        };
        candidates
            .into_iter()
            .find(|n| points.iter().all(|p| dot(n, p) >= 0))
            .map(|n| primitive(&n))
    }

    fn cross(a: &[i64], b: &[i64]) -> Vec<i64> {
        vec![
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }

    fn primitive(n: &[i64]) -> Vec<i64> {
        let g = n.iter().fold(0, |acc, &x| gcd(acc, x));
        if g == 0 {
            n.to_vec()
        } else {
            n.iter().map(|x| x / g).collect()
        }
    }

    /// Some nonzero integer vector orthogonal to all points (rank < dim).
    fn orthogonal_complement_vector(points: &[Vec<i64>], dim: usize) -> Vec<i64> {
        let nonzero: Vec<&Vec<i64>> = points.iter().filter(|p| p.iter().any(|&c| c != 0)).collect();
        if nonzero.is_empty() {
            let mut e = vec![0; dim];
            e[0] = 1;
            return e;
        }
        match dim {
            1 => unreachable!("a nonzero point spans Z"),
            2 => primitive(&[-nonzero[0][1], nonzero[0][0]]),
            3 => {
                let a = nonzero[0];
                // another independent point, if any
                if let Some(b) = nonzero.iter().find(|b| cross(a, b).iter().any(|&c| c != 0)) {
                    primitive(&cross(a, b))
                } else {
                    let e = if a[0] == 0 && a[1] == 0 { vec![1, 0, 0] } else { vec![0, 0, 1] };
                    primitive(&cross(a, &e))
                }
            }
            _ => unreachable!("lattice dimension is at most 3"),
        }
    }

    #[cfg(test)]
    mod tests {
        use super::*;

        #[test]
        fn subgroup_indices() {
            assert_eq!(subgroup_index(&[vec![2], vec![-2]], 1), Some(2));
            assert_eq!(subgroup_index(&[vec![4], vec![6]], 1), Some(2));
            assert_eq!(subgroup_index(&[vec![2], vec![3]], 1), Some(1));
            assert_eq!(subgroup_index(&[vec![1, 1], vec![1, -1]], 2), Some(2));
            assert_eq!(subgroup_index(&[vec![1, 0], vec![0, 1]], 2), Some(1));
            assert_eq!(subgroup_index(&[vec![1, 1], vec![2, 2]], 2), None);
            assert_eq!(
                subgroup_index(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 3]], 3),
                Some(3)
            );
        }

        #[test]
        fn halfspaces() {
            assert_eq!(closed_halfspace_normal(&[vec![1]], 1), Some(vec![1]));
            assert_eq!(closed_halfspace_normal(&[vec![1], vec![-1]], 1), None);
            assert!(closed_halfspace_normal(&[vec![1, 0], vec![0, 1], vec![-1, -1]], 2).is_none());
            assert!(closed_halfspace_normal(&[vec![1, 0], vec![0, 1], vec![-1, 0]], 2).is_some());
            assert!(closed_halfspace_normal(&[vec![1, 0], vec![-1, 0]], 2).is_some());
            let octa: Vec<Vec<i64>> = (0..3)
                .flat_map(|k| {
                    [1, -1].into_iter().map(move |s| {
                        let mut e = vec![0; 3];
                        e[k] = s;
                        e
                    })
                })
                .collect();
            assert!(closed_halfspace_normal(&octa, 3).is_none());
            assert!(closed_halfspace_normal(&octa[..5], 3).is_some());
        }
    }
}
