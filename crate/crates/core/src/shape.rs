//! Domain catalog: axis-aligned shapes with exact membership and distance
//! queries.
//!
//! Every catalog shape satisfies an exterior cone condition, which is why the
//! catalog is closed: arbitrary user geometry cannot be checked for it.

use crate::error::{Error, Result};

/// Axis-aligned bounding box.
#[derive(Clone, Debug, PartialEq)]
pub struct Bbox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Bbox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn inflate(&self, margin: f64) -> Bbox {
        Bbox {
            lo: self.lo.iter().map(|v| v - margin).collect(),
            hi: self.hi.iter().map(|v| v + margin).collect(),
        }
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (lo, hi))| *v >= lo - tol && *v <= hi + tol)
    }

    /// All 2ⁿ corners, in lexicographic order.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|d| {
                        if mask >> (n - 1 - d) & 1 == 1 {
                            self.hi[d]
                        } else {
                            self.lo[d]
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Open domain Ω from the built-in catalog.
///
/// `contains` tests membership in the open set; `distance` is the exact
/// Euclidean distance to the closure (zero inside).
#[derive(Clone, Debug, PartialEq)]
pub enum DomainShape {
    /// Open interval (a, b) in 1D.
    Interval { a: f64, b: f64 },
    /// Open axis-aligned box.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Open Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// L-shape in 2D: the square (a, b)² minus its closed upper-right
    /// quarter, realized as the union of two open rectangles.
    LShape { a: f64, b: f64 },
}

fn box_distance(lo: &[f64], hi: &[f64], x: &[f64]) -> f64 {
    x.iter()
        .zip(lo.iter().zip(hi))
        .map(|(v, (lo, hi))| {
            let d = (lo - v).max(v - hi).max(0.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn box_contains(lo: &[f64], hi: &[f64], x: &[f64]) -> bool {
    x.iter()
        .zip(lo.iter().zip(hi))
        .all(|(v, (lo, hi))| *v > *lo && *v < *hi)
}

impl DomainShape {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Grid(msg.into()));
        match self {
            DomainShape::Interval { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return bad("interval requires a < b");
                }
            }
            DomainShape::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return bad("box requires matching nonempty lo/hi");
                }
                if !lo
                    .iter()
                    .zip(hi)
                    .all(|(a, b)| a.is_finite() && b.is_finite() && a < b)
                {
                    return bad("box requires lo < hi on every axis");
                }
            }
            DomainShape::Ball { center, radius } => {
                if center.is_empty() || !center.iter().all(|c| c.is_finite()) {
                    return bad("ball requires a finite nonempty center");
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return bad("ball requires radius > 0");
                }
            }
            DomainShape::LShape { a, b } => {
                if !(a.is_finite() && b.is_finite() && a < b) {
                    return bad("lshape requires a < b");
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainShape::Interval { .. } => 1,
            DomainShape::Box { lo, .. } => lo.len(),
            DomainShape::Ball { center, .. } => center.len(),
            DomainShape::LShape { .. } => 2,
        }
    }

    /// The two open rectangles whose union is the L-shape.
    fn lshape_parts(a: f64, b: f64) -> [(Vec<f64>, Vec<f64>); 2] {
        let m = 0.5 * (a + b);
        [
            (vec![a, a], vec![b, m]), // wide bottom bar
            (vec![a, a], vec![m, b]), // tall left bar
        ]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            DomainShape::Interval { a, b } => x[0] > *a && x[0] < *b,
            DomainShape::Box { lo, hi } => box_contains(lo, hi, x),
            DomainShape::Ball { center, radius } => crate::geom::dist(center, x) < *radius,
            DomainShape::LShape { a, b } => Self::lshape_parts(*a, *b)
                .iter()
                .any(|(lo, hi)| box_contains(lo, hi, x)),
        }
    }

    /// Euclidean distance from `x` to the closure of Ω (0 when inside).
    pub fn distance(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match self {
            DomainShape::Interval { a, b } => (a - x[0]).max(x[0] - b).max(0.0),
            DomainShape::Box { lo, hi } => box_distance(lo, hi, x),
            DomainShape::Ball { center, radius } => {
                (crate::geom::dist(center, x) - radius).max(0.0)
            }
            DomainShape::LShape { a, b } => {
                // The closure of a union is the union of closures, so the
                // distance is the min over the two rectangles.
                Self::lshape_parts(*a, *b)
                    .iter()
                    .map(|(lo, hi)| box_distance(lo, hi, x))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    pub fn bbox(&self) -> Bbox {
        match self {
            DomainShape::Interval { a, b } => Bbox {
                lo: vec![*a],
                hi: vec![*b],
            },
            DomainShape::Box { lo, hi } => Bbox {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            DomainShape::Ball { center, radius } => Bbox {
                lo: center.iter().map(|c| c - radius).collect(),
                hi: center.iter().map(|c| c + radius).collect(),
            },
            DomainShape::LShape { a, b } => Bbox {
                lo: vec![*a, *a],
                hi: vec![*b, *b],
            },
        }
    }
}
