//! Finite truncation windows and function tables over them.

use std::fmt;

use crate::error::{Error, Result};
use crate::group::{Element, GroupSpec};

/// A finite region of the group: an axis-aligned box of a lattice, or the
/// whole of a finite group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Window {
    Lattice { lo: Vec<i64>, hi: Vec<i64> },
    Finite { order: usize },
}

impl Window {
    /// The cube `[-radius, radius]^dim` centered at the origin.
    pub fn cube(dim: usize, radius: i64) -> Self {
        Window::Lattice {
            lo: vec![-radius; dim],
            hi: vec![radius; dim],
        }
    }

    /// Cube of the given radius about `center`.
    pub fn cube_at(center: &[i64], radius: i64) -> Self {
        Window::Lattice {
            lo: center.iter().map(|c| c - radius).collect(),
            hi: center.iter().map(|c| c + radius).collect(),
        }
    }

    /// The whole group when it is finite, a centered cube otherwise.
    pub fn for_group(group: &GroupSpec, radius: i64) -> Self {
        match (group.dim(), group.order()) {
            (Some(d), _) => Window::cube(d, radius),
            (None, Some(order)) => Window::Finite { order },
            _ => unreachable!("a group is either a lattice or finite"),
        }
    }

    /// Smallest box containing every given lattice point, widened by `margin`.
    pub fn bounding(points: &[Element], margin: i64) -> Option<Self> {
        let first = points.first()?.coords()?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in points {
            let c = p.coords()?;
            for k in 0..c.len() {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        Some(Window::Lattice {
            lo: lo.into_iter().map(|x| x - margin).collect(),
            hi: hi.into_iter().map(|x| x + margin).collect(),
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Window::Finite { order } => *order,
            Window::Lattice { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| if h < l { 0 } else { (h - l + 1) as usize })
                .product(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, x: &Element) -> bool {
        self.index_of(x).is_some()
    }

    /// Row-major position of `x` inside the window (last coordinate fastest).
    pub fn index_of(&self, x: &Element) -> Option<usize> {
        match (self, x) {
            (Window::Finite { order }, Element::Finite(i)) => (*i < *order).then_some(*i),
            (Window::Lattice { lo, hi }, Element::Lattice(c)) if c.len() == lo.len() => {
                let mut idx = 0usize;
                for k in 0..c.len() {
                    if c[k] < lo[k] || c[k] > hi[k] {
                        return None;
                    }
                    let width = (hi[k] - lo[k] + 1) as usize;
                    idx = idx * width + (c[k] - lo[k]) as usize;
                }
                Some(idx)
            }
            _ => None,
        }
    }

    pub fn element_at(&self, mut idx: usize) -> Element {
        match self {
            Window::Finite { .. } => Element::Finite(idx),
            Window::Lattice { lo, hi } => {
                let mut c = vec![0i64; lo.len()];
                for k in (0..lo.len()).rev() {
                    let width = (hi[k] - lo[k] + 1) as usize;
                    c[k] = lo[k] + (idx % width) as i64;
                    idx /= width;
                }
                Element::Lattice(c)
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Element> + '_ {
        (0..self.len()).map(move |i| self.element_at(i))
    }

    /// The window with `margin` removed from every face. A finite window is
    /// returned unchanged since it has no boundary.
    pub fn shrink(&self, margin: i64) -> Window {
        match self {
            Window::Finite { .. } => self.clone(),
            Window::Lattice { lo, hi } => Window::Lattice {
                lo: lo.iter().map(|x| x + margin).collect(),
                hi: hi.iter().map(|x| x - margin).collect(),
            },
        }
    }

    /// Left translate `y * W`. Finite windows already cover the group.
    pub fn translate(&self, y: &Element) -> Window {
        match (self, y) {
            (Window::Lattice { lo, hi }, Element::Lattice(c)) => Window::Lattice {
                lo: lo.iter().zip(c).map(|(a, b)| a + b).collect(),
                hi: hi.iter().zip(c).map(|(a, b)| a + b).collect(),
            },
            _ => self.clone(),
        }
    }

    pub fn exceeded(&self, x: &Element) -> Error {
        Error::WindowExceeded {
            point: x.to_string(),
            window: self.to_string(),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Window::Finite { order } => write!(f, "whole group (order {order})"),
            Window::Lattice { lo, hi } => {
                let parts: Vec<String> = lo.iter().zip(hi).map(|(l, h)| format!("[{l},{h}]")).collect();
                write!(f, "{}", parts.join("x"))
            }
        }
    }
}

/// Real function tabulated on a window.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTable {
    window: Window,
    values: Vec<f64>,
}

impl FunctionTable {
    pub fn from_fn(window: Window, mut f: impl FnMut(&Element) -> f64) -> Self {
        let values = window.iter().map(|x| f(&x)).collect();
        FunctionTable { window, values }
    }

    pub fn try_from_fn(window: Window, mut f: impl FnMut(&Element) -> Result<f64>) -> Result<Self> {
        let values = window.iter().map(|x| f(&x)).collect::<Result<Vec<_>>>()?;
        Ok(FunctionTable { window, values })
    }

    pub fn constant(window: Window, c: f64) -> Self {
        let values = vec![c; window.len()];
        FunctionTable { window, values }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: &Element) -> Result<f64> {
        self.window
            .index_of(x)
            .map(|i| self.values[i])
            .ok_or_else(|| self.window.exceeded(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let w = Window::Lattice {
            lo: vec![-2, 1, 0],
            hi: vec![1, 3, 4],
        };
        assert_eq!(w.len(), 4 * 3 * 5);
        for i in 0..w.len() {
            assert_eq!(w.index_of(&w.element_at(i)), Some(i));
        }
        assert!(!w.contains(&Element::Lattice(vec![2, 1, 0])));
    }

    #[test]
    fn shrink_and_translate() {
        let w = Window::cube(1, 5);
        assert_eq!(w.shrink(2), Window::cube(1, 3));
        assert_eq!(w.shrink(6).len(), 0);
        let t = w.translate(&Element::Lattice(vec![3]));
        assert!(t.contains(&Element::Lattice(vec![8])));
        assert!(!t.contains(&Element::Lattice(vec![-3])));
    }

    #[test]
    fn table_lookup_outside_window_errors() {
        let f = FunctionTable::constant(Window::cube(2, 1), 1.0);
        assert_eq!(f.get(&Element::Lattice(vec![1, -1])).unwrap(), 1.0);
        assert!(matches!(
            f.get(&Element::Lattice(vec![2, 0])),
            Err(Error::WindowExceeded { .. })
        ));
    }

    #[test]
    fn bounding_box() {
        let pts = vec![Element::Lattice(vec![1, -2]), Element::Lattice(vec![-3, 0])];
        let w = Window::bounding(&pts, 1).unwrap();
        assert_eq!(
            w,
            Window::Lattice {
                lo: vec![-4, -3],
                hi: vec![2, 1]
            }
        );
    }
}
