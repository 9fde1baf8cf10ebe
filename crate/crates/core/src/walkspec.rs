//! The walk-spec file: a TOML document describing a group, a law on it and
//! run options.
//!
//! ```toml
//! [group]
//! kind = "lattice"        # or "finite", with `order` and a row-major `cayley`
//! d = 1
//!
//! [[law]]
//! element = [1]           # integer vector on Z^d, integer index on a finite group
//! prob = "0.25"           # decimal string
//!
//! [[law]]
//! element = [-1]
//! prob = "0.75"
//!
//! [options]               # every key optional
//! window_radius = 32
//! horizon = 10000
//! trajectories = 10000
//! seed = 42
//! thresholds = { recurrent = 1.5, transient = 1.05 }
//! ```
//!
//! Probabilities are kept as the strings written in the file, so emitting a
//! parsed spec reproduces its atoms exactly.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{Element, GroupSpec};
use crate::law::{Law, MASS_TOLERANCE};
use crate::recurrence::Thresholds;

/// Significant digits used when a computed probability is written out.
pub const EMIT_DIGITS: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GroupSection {
    Lattice { d: usize },
    Finite { order: usize, cayley: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub element: Element,
    pub prob: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_radius: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Thresholds>,
}

impl Options {
    fn is_empty(&self) -> bool {
        *self == Options::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpec {
    pub group: GroupSection,
    pub law: Vec<AtomSpec>,
    #[serde(default, skip_serializing_if = "Options::is_empty")]
    pub options: Options,
}

/// A parsed spec together with the group and law it describes.
#[derive(Debug, Clone)]
pub struct Walk {
    pub spec: WalkSpec,
    pub law: Law,
}

impl Walk {
    pub fn parse(text: &str) -> Result<Walk> {
        let spec: WalkSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let law = spec.build()?;
        Ok(Walk { spec, law })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Walk> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Walk::parse(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn group(&self) -> &Arc<GroupSpec> {
        self.law.group()
    }
}

impl WalkSpec {
    /// Builds a spec for `law`, writing each probability with
    /// [`EMIT_DIGITS`] significant digits.
    pub fn from_law(law: &Law, options: Options) -> WalkSpec {
        let group = law.group();
        let group = match group.dim() {
            Some(d) => GroupSection::Lattice { d },
            None => GroupSection::Finite {
                order: group.order().unwrap(),
                cayley: group.cayley().unwrap().rows(),
            },
        };
        let law = law
            .atoms()
            .iter()
            .map(|(x, p)| AtomSpec {
                element: x.clone(),
                prob: decimal_string(*p, EMIT_DIGITS),
            })
            .collect();
        WalkSpec { group, law, options }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(format!("cannot emit spec: {e}")))
    }

    /// Validates the document and builds its group and law.
    pub fn build(&self) -> Result<Law> {
        let group = match &self.group {
            GroupSection::Lattice { d } => GroupSpec::lattice(*d)
                .map_err(|e| Error::Parse(format!("group.d: {e}")))?,
            GroupSection::Finite { order, cayley } => {
                if cayley.len() != *order {
                    return Err(Error::Parse(format!(
                        "group.cayley: {} rows for a group of order {order}",
                        cayley.len()
                    )));
                }
                GroupSpec::finite(cayley.clone()).map_err(|e| Error::Parse(format!("group.cayley: {e}")))?
            }
        };
        let group = Arc::new(group);
        if self.law.is_empty() {
            return Err(Error::Parse("law: no [[law]] blocks".into()));
        }
        let mut seen: BTreeMap<&Element, usize> = BTreeMap::new();
        let mut atoms = Vec::with_capacity(self.law.len());
        for (i, atom) in self.law.iter().enumerate() {
            group
                .validate(&atom.element)
                .map_err(|e| Error::Parse(format!("law[{i}].element: {e}")))?;
            if let Some(j) = seen.insert(&atom.element, i) {
                return Err(Error::Parse(format!(
                    "law[{i}].element: {} already given in law[{j}]",
                    atom.element
                )));
            }
            let p = parse_decimal(&atom.prob).ok_or_else(|| {
                Error::Parse(format!("law[{i}].prob: {:?} is not a decimal string", atom.prob))
            })?;
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Parse(format!("law[{i}].prob: {} is not in (0, 1]", atom.prob)));
            }
            atoms.push((atom.element.clone(), p));
        }
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Parse(format!(
                "law: probabilities of the {} [[law]] blocks sum to {total}, expected 1",
                atoms.len()
            )));
        }
        Law::new(group, atoms).map_err(|e| Error::Parse(format!("law: {e}")))
    }
}

/// Parses `digits[.digits][e[+-]digits]` (a leading `.` is allowed).
pub fn parse_decimal(s: &str) -> Option<f64> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(k) => (&s[..k], Some(&s[k + 1..])),
        None => (s, None),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let digits = |t: &str| t.bytes().all(|b| b.is_ascii_digit());
    if int.is_empty() && frac.is_empty() || !digits(int) || !digits(frac) || mantissa.ends_with('.') {
        return None;
    }
    if let Some(e) = exponent {
        let e = e.strip_prefix(['+', '-']).unwrap_or(e);
        if e.is_empty() || !digits(e) {
            return None;
        }
    }
    s.parse().ok()
}

/// Positional decimal representation of `x` rounded to `digits`
/// significant digits, trailing zeros removed.
pub fn decimal_string(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits.saturating_sub(1), x);
    let (mantissa, exponent) = sci.split_once('e').unwrap();
    let exponent: i64 = exponent.parse().unwrap();
    let (sign, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mantissa),
    };
    let significand: String = mantissa.chars().filter(|c| *c != '.').collect();
    let n = significand.len() as i64;
    let point = exponent + 1;
    let mut out = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), significand)
    } else if point >= n {
        format!("{}{}", significand, "0".repeat((point - n) as usize))
    } else {
        format!("{}.{}", &significand[..point as usize], &significand[point as usize..])
    };
    if out.contains('.') {
        while out.ends_with('0') {
            out.pop();
        }
        if out.ends_with('.') {
            out.pop();
        }
    }
    format!("{sign}{out}")
}
