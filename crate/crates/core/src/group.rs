//! Discrete groups with counting Haar measure.
//!
//! Two families are supported: the integer lattices `Z^d` for `d <= 3` and
//! finite groups given by a Cayley table. On a discrete group the right and
//! left Haar measures are both counting measure and the modular function is
//! identically one, so neither is stored.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest finite group accepted; table validation checks associativity
/// exhaustively, which is cubic in the order.
pub const MAX_FINITE_ORDER: usize = 512;

/// Largest supported lattice dimension.
pub const MAX_LATTICE_DIM: usize = 3;

/// A point of the group.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Element {
    Lattice(Vec<i64>),
    Finite(usize),
}

impl Element {
    pub fn coords(&self) -> Option<&[i64]> {
        match self {
            Element::Lattice(c) => Some(c),
            Element::Finite(_) => None,
        }
    }

    pub fn index(&self) -> Option<usize> {
        match self {
            Element::Finite(i) => Some(*i),
            Element::Lattice(_) => None,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Finite(i) => write!(f, "#{i}"),
            Element::Lattice(c) => {
                write!(f, "(")?;
                for (k, x) in c.iter().enumerate() {
                    if k > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CayleyTable {
    order: usize,
    table: Vec<usize>,
    identity: usize,
    inverses: Vec<usize>,
}

impl CayleyTable {
    #[inline]
    pub fn product(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b]
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.table.chunks(self.order).map(|r| r.to_vec()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupKind {
    Lattice { dim: usize },
    Finite(CayleyTable),
}

/// A discrete group. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupSpec {
    kind: GroupKind,
}

impl GroupSpec {
    pub fn lattice(dim: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_LATTICE_DIM {
            return Err(Error::InvalidGroup(format!(
                "lattice dimension must be in 1..={MAX_LATTICE_DIM}, got {dim}"
            )));
        }
        Ok(GroupSpec {
            kind: GroupKind::Lattice { dim },
        })
    }

    /// Builds a finite group from a row-major Cayley table, where
    /// `rows[a][b]` is the index of the product `a * b`.
    pub fn finite(rows: Vec<Vec<usize>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidGroup("empty Cayley table".into()));
        }
        if n > MAX_FINITE_ORDER {
            return Err(Error::InvalidGroup(format!(
                "order {n} exceeds the supported maximum {MAX_FINITE_ORDER}"
            )));
        }
        let mut table = Vec::with_capacity(n * n);
        for (a, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidGroup(format!(
                    "row {a} has {} entries, expected {n}",
                    row.len()
                )));
            }
            table.extend_from_slice(row);
        }
        if let Some(&bad) = table.iter().find(|&&x| x >= n) {
            return Err(Error::InvalidGroup(format!("entry {bad} out of range 0..{n}")));
        }
        let at = |a: usize, b: usize| table[a * n + b];

        // Latin square: every row and column is a permutation.
        let mut seen = vec![false; n];
        for a in 0..n {
            seen.iter_mut().for_each(|s| *s = false);
            for b in 0..n {
                let x = at(a, b);
                if seen[x] {
                    return Err(Error::InvalidGroup(format!(
                        "row {a} repeats element {x}; not a Latin square"
                    )));
                }
                seen[x] = true;
            }
        }
        for b in 0..n {
            seen.iter_mut().for_each(|s| *s = false);
            for a in 0..n {
                let x = at(a, b);
                if seen[x] {
                    return Err(Error::InvalidGroup(format!(
                        "column {b} repeats element {x}; not a Latin square"
                    )));
                }
                seen[x] = true;
            }
        }

        let identity = (0..n)
            .find(|&e| (0..n).all(|x| at(e, x) == x && at(x, e) == x))
            .ok_or_else(|| Error::InvalidGroup("no two-sided identity".into()))?;

        let mut inverses = vec![0; n];
        for (a, inv) in inverses.iter_mut().enumerate() {
            let b = (0..n)
                .find(|&b| at(a, b) == identity)
                .expect("Latin row contains the identity");
            if at(b, a) != identity {
                return Err(Error::InvalidGroup(format!(
                    "element {a} has no two-sided inverse"
                )));
            }
            *inv = b;
        }

        for a in 0..n {
            for b in 0..n {
                let ab = at(a, b);
                for c in 0..n {
                    if at(ab, c) != at(a, at(b, c)) {
                        return Err(Error::InvalidGroup(format!(
                            "table is not associative: ({a}*{b})*{c} != {a}*({b}*{c})"
                        )));
                    }
                }
            }
        }

        Ok(GroupSpec {
            kind: GroupKind::Finite(CayleyTable {
                order: n,
                table,
                identity,
                inverses,
            }),
        })
    }

    /// The cyclic group `Z/n` written additively.
    pub fn cyclic(n: usize) -> Result<Self> {
        let rows = (0..n).map(|a| (0..n).map(|b| (a + b) % n).collect()).collect();
        Self::finite(rows)
    }

    /// The dihedral group of order `2n`; index `k < n` is rotation `r^k`
    /// and `n + k` is the reflection `s r^k`.
    pub fn dihedral(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGroup("dihedral group needs n >= 1".into()));
        }
        let decode = |i: usize| (i / n, i % n);
        let encode = |s: usize, k: usize| s * n + k;
        let mul = |a: usize, b: usize| {
            let (s1, k1) = decode(a);
            let (s2, k2) = decode(b);
            // (s^s1 r^k1)(s^s2 r^k2) = s^(s1+s2) r^(k1 * (-1)^s2 + k2)
            let k = if s2 == 0 {
                (k1 + k2) % n
            } else {
                (n - k1 % n + k2) % n
            };
            encode((s1 + s2) % 2, k)
        };
        let rows = (0..2 * n).map(|a| (0..2 * n).map(|b| mul(a, b)).collect()).collect();
        Self::finite(rows)
    }

    pub fn kind(&self) -> &GroupKind {
        &self.kind
    }

    /// Lattice dimension, or `None` for finite groups.
    pub fn dim(&self) -> Option<usize> {
        match &self.kind {
            GroupKind::Lattice { dim } => Some(*dim),
            GroupKind::Finite(_) => None,
        }
    }

    /// Group order, or `None` for lattices.
    pub fn order(&self) -> Option<usize> {
        match &self.kind {
            GroupKind::Finite(t) => Some(t.order),
            GroupKind::Lattice { .. } => None,
        }
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self.kind, GroupKind::Lattice { .. })
    }

    pub fn cayley(&self) -> Option<&CayleyTable> {
        match &self.kind {
            GroupKind::Finite(t) => Some(t),
            GroupKind::Lattice { .. } => None,
        }
    }

    /// Modular function. Discrete groups are unimodular.
    pub fn modular_delta(&self, _x: &Element) -> f64 {
        1.0
    }

    /// Haar (counting) measure of a finite set.
    pub fn haar_measure(&self, set: &[Element]) -> f64 {
        set.len() as f64
    }

    pub fn validate(&self, x: &Element) -> Result<()> {
        match (&self.kind, x) {
            (GroupKind::Lattice { dim }, Element::Lattice(c)) if c.len() == *dim => Ok(()),
            (GroupKind::Finite(t), Element::Finite(i)) => {
                if *i < t.order {
                    Ok(())
                } else {
                    Err(Error::IndexOutOfRange {
                        index: *i,
                        order: t.order,
                    })
                }
            }
            _ => Err(Error::ElementMismatch {
                element: x.to_string(),
                group: self.to_string(),
            }),
        }
    }

    pub fn identity(&self) -> Element {
        match &self.kind {
            GroupKind::Lattice { dim } => Element::Lattice(vec![0; *dim]),
            GroupKind::Finite(t) => Element::Finite(t.identity),
        }
    }

    pub fn multiply(&self, a: &Element, b: &Element) -> Result<Element> {
        self.validate(a)?;
        self.validate(b)?;
        Ok(match (&self.kind, a, b) {
            (GroupKind::Lattice { .. }, Element::Lattice(x), Element::Lattice(y)) => {
                Element::Lattice(x.iter().zip(y).map(|(p, q)| p + q).collect())
            }
            (GroupKind::Finite(t), Element::Finite(i), Element::Finite(j)) => {
                Element::Finite(t.product(*i, *j))
            }
            _ => unreachable!("validated above"),
        })
    }

    pub fn inverse(&self, a: &Element) -> Result<Element> {
        self.validate(a)?;
        Ok(match (&self.kind, a) {
            (GroupKind::Lattice { .. }, Element::Lattice(x)) => {
                Element::Lattice(x.iter().map(|p| -p).collect())
            }
            (GroupKind::Finite(t), Element::Finite(i)) => Element::Finite(t.inverses[*i]),
            _ => unreachable!("validated above"),
        })
    }

    /// All elements of a finite group in index order.
    pub fn elements(&self) -> Option<Vec<Element>> {
        self.order().map(|n| (0..n).map(Element::Finite).collect())
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            GroupKind::Lattice { dim } => write!(f, "Z^{dim}"),
            GroupKind::Finite(t) => write!(f, "finite group of order {}", t.order),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lat(c: &[i64]) -> Element {
        Element::Lattice(c.to_vec())
    }

    #[test]
    fn lattice_multiply_is_addition() {
        let z1 = GroupSpec::lattice(1).unwrap();
        assert_eq!(z1.multiply(&lat(&[3]), &lat(&[-5])).unwrap(), lat(&[-2]));
        let z2 = GroupSpec::lattice(2).unwrap();
        assert_eq!(z2.multiply(&lat(&[1, 0]), &lat(&[0, 1])).unwrap(), lat(&[1, 1]));
    }

    #[test]
    fn cyclic_multiply_and_inverse() {
        let z3 = GroupSpec::cyclic(3).unwrap();
        assert_eq!(
            z3.multiply(&Element::Finite(1), &Element::Finite(2)).unwrap(),
            Element::Finite(0)
        );
        assert_eq!(z3.inverse(&Element::Finite(1)).unwrap(), Element::Finite(2));
        assert_eq!(z3.identity(), Element::Finite(0));
    }

    #[test]
    fn lattice_inverse_and_identity() {
        let z1 = GroupSpec::lattice(1).unwrap();
        assert_eq!(z1.inverse(&lat(&[7])).unwrap(), lat(&[-7]));
        assert_eq!(z1.identity(), lat(&[0]));
        let z2 = GroupSpec::lattice(2).unwrap();
        assert_eq!(z2.inverse(&lat(&[2, -3])).unwrap(), lat(&[-2, 3]));
        assert_eq!(z2.identity(), lat(&[0, 0]));
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let z3 = GroupSpec::cyclic(3).unwrap();
        assert_eq!(
            z3.multiply(&Element::Finite(3), &Element::Finite(0)),
            Err(Error::IndexOutOfRange { index: 3, order: 3 })
        );
        assert!(z3.inverse(&Element::Finite(9)).is_err());
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let z2 = GroupSpec::lattice(2).unwrap();
        assert!(matches!(
            z2.multiply(&lat(&[1]), &lat(&[1, 1])),
            Err(Error::ElementMismatch { .. })
        ));
    }

    #[test]
    fn lattice_dimension_bounds() {
        assert!(GroupSpec::lattice(0).is_err());
        assert!(GroupSpec::lattice(4).is_err());
    }

    #[test]
    fn corrupted_tables_are_rejected() {
        // repeated entry in a row
        assert!(GroupSpec::finite(vec![vec![0, 1, 1], vec![1, 2, 0], vec![2, 0, 1]]).is_err());
        // identity need not be index 0
        assert!(GroupSpec::finite(vec![vec![1, 0], vec![0, 1]]).is_ok());
        assert!(GroupSpec::finite(vec![vec![1, 2, 0], vec![2, 0, 1], vec![0, 1, 2]]).is_ok());
        // Latin square without a two-sided identity
        assert!(GroupSpec::finite(vec![vec![2, 0, 1], vec![1, 2, 0], vec![0, 1, 2]]).is_err());
        // loop of order 5 that is not a group (not associative)
        let loop5 = vec![
            vec![0, 1, 2, 3, 4],
            vec![1, 0, 3, 4, 2],
            vec![2, 4, 0, 1, 3],
            vec![3, 2, 4, 0, 1],
            vec![4, 3, 1, 2, 0],
        ];
        assert!(GroupSpec::finite(loop5).is_err());
        // ragged and out-of-range tables
        assert!(GroupSpec::finite(vec![vec![0, 1], vec![1]]).is_err());
        assert!(GroupSpec::finite(vec![vec![0, 5], vec![5, 0]]).is_err());
        assert!(GroupSpec::finite(vec![]).is_err());
    }

    #[test]
    fn dihedral_is_non_abelian() {
        let d3 = GroupSpec::dihedral(3).unwrap();
        let r = Element::Finite(1);
        let s = Element::Finite(3);
        assert_ne!(d3.multiply(&r, &s).unwrap(), d3.multiply(&s, &r).unwrap());
    }

    fn any_lattice_triple() -> impl Strategy<Value = (usize, Vec<i64>, Vec<i64>, Vec<i64>)> {
        (1usize..=3).prop_flat_map(|d| {
            let v = || prop::collection::vec(-1000i64..1000, d);
            (Just(d), v(), v(), v())
        })
    }

    proptest! {
        #[test]
        fn lattice_associative_with_inverses((d, a, b, c) in any_lattice_triple()) {
            let g = GroupSpec::lattice(d).unwrap();
            let (a, b, c) = (lat(&a), lat(&b), lat(&c));
            let left = g.multiply(&g.multiply(&a, &b).unwrap(), &c).unwrap();
            let right = g.multiply(&a, &g.multiply(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
            let inv = g.inverse(&a).unwrap();
            prop_assert_eq!(g.multiply(&a, &inv).unwrap(), g.identity());
            prop_assert_eq!(g.multiply(&inv, &a).unwrap(), g.identity());
        }

        #[test]
        fn dihedral_associative_with_inverses(n in 1usize..8, a in 0usize..16, b in 0usize..16, c in 0usize..16) {
            let g = GroupSpec::dihedral(n).unwrap();
            let m = 2 * n;
            let (a, b, c) = (Element::Finite(a % m), Element::Finite(b % m), Element::Finite(c % m));
            let left = g.multiply(&g.multiply(&a, &b).unwrap(), &c).unwrap();
            let right = g.multiply(&a, &g.multiply(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
            let inv = g.inverse(&a).unwrap();
            prop_assert_eq!(g.multiply(&a, &inv).unwrap(), g.identity());
            prop_assert_eq!(g.multiply(&inv, &a).unwrap(), g.identity());
        }

        #[test]
        fn corrupting_one_cell_is_detected(n in 2usize..7, row in 0usize..7, col in 0usize..7, shift in 1usize..7) {
            let g = GroupSpec::cyclic(n).unwrap();
            let mut rows = g.cayley().unwrap().rows();
            let (r, c) = (row % n, col % n);
            let s = shift % n;
            prop_assume!(s != 0);
            rows[r][c] = (rows[r][c] + s) % n;
            prop_assert!(GroupSpec::finite(rows).is_err());
        }
    }
}
