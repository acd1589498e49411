//! Lattice discretization of Ω together with its exterior collar
//! Γ_ε = { y ∉ Ω : dist(y, Ω) ≤ ε }, where the game stops.

use crate::error::{Error, Result};
use crate::geom::Point;
use crate::params::GameParams;
use crate::shape::DomainShape;

/// Classification of a lattice node (or of an arbitrary point).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Interior,
    BoundaryLayer,
    Outside,
}

impl Region {
    pub fn tag(&self) -> &'static str {
        match self {
            Region::Interior => "interior",
            Region::BoundaryLayer => "boundary_layer",
            Region::Outside => "outside",
        }
    }
}

/// One lattice offset reachable within the closed ε-ball.
#[derive(Clone, Debug)]
struct BallOffset {
    /// Signed change of the flattened index.
    flat_delta: i64,
    /// Per-axis index steps.
    steps: Vec<i32>,
}

/// Axis-aligned lattice covering Ω ∪ Γ_ε with per-node region tags.
///
/// Node order is lexicographic in the coordinate tuple, which coincides with
/// the flattened row-major index. Immutable after construction.
#[derive(Clone, Debug)]
pub struct GridDomain {
    shape: DomainShape,
    pub h: f64,
    pub eps: f64,
    origin: Vec<f64>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    regions: Vec<Region>,
    ball_offsets: Vec<BallOffset>,
    interior: Vec<u32>,
    layer: Vec<u32>,
}

impl GridDomain {
    /// Builds the lattice with spacing `h` over the bounding box of Ω
    /// inflated by ε. Rejects `h > ε/4`: the resolution rule guarantees that
    /// every ε-ball holds several nodes per axis direction.
    pub fn build(shape: DomainShape, params: &GameParams, h: f64) -> Result<Self> {
        shape.validate()?;
        if shape.dim() != params.n {
            return Err(Error::Grid(format!(
                "domain dimension {} does not match n = {}",
                shape.dim(),
                params.n
            )));
        }
        let eps = params.eps;
        if !(h > 0.0) || h > eps / 4.0 * (1.0 + 1e-12) {
            return Err(Error::Grid(format!(
                "lattice spacing h = {h} violates the resolution rule h <= eps/4 = {}",
                eps / 4.0
            )));
        }
        let bbox = shape.bbox().inflate(eps);
        let n = shape.dim();
        let mut dims = Vec::with_capacity(n);
        for d in 0..n {
            let span = bbox.hi[d] - bbox.lo[d];
            // Enough intervals to cover the inflated box end to end.
            let count = ((span / h) - 1e-9).ceil() as usize + 1;
            dims.push(count);
        }
        let total: usize = dims.iter().product();
        if total == 0 || total > 100_000_000 {
            return Err(Error::Grid(format!(
                "lattice would hold {total} nodes; refusing"
            )));
        }
        let mut strides = vec![1usize; n];
        for d in (0..n.saturating_sub(1)).rev() {
            strides[d] = strides[d + 1] * dims[d + 1];
        }

        let mut grid = GridDomain {
            shape,
            h,
            eps,
            origin: bbox.lo,
            dims,
            strides,
            regions: Vec::new(),
            ball_offsets: Vec::new(),
            interior: Vec::new(),
            layer: Vec::new(),
        };

        let mut regions = Vec::with_capacity(total);
        for flat in 0..total {
            let x = grid.node_point(flat as u32);
            let r = grid.classify_point(&x);
            match r {
                Region::Interior => grid.interior.push(flat as u32),
                Region::BoundaryLayer => grid.layer.push(flat as u32),
                Region::Outside => {}
            }
            regions.push(r);
        }
        grid.regions = regions;
        grid.ball_offsets = grid.compute_ball_offsets();
        Ok(grid)
    }

    /// Classifies an arbitrary point of ℝⁿ by the continuum shape predicate.
    /// The collar test carries a relative guard so that nodes at distance
    /// exactly ε survive the rounding of their own coordinates.
    pub fn classify_point(&self, x: &[f64]) -> Region {
        if self.shape.contains(x) {
            Region::Interior
        } else if self.shape.distance(x) <= self.eps * (1.0 + 1e-12) {
            Region::BoundaryLayer
        } else {
            Region::Outside
        }
    }

    fn compute_ball_offsets(&self) -> Vec<BallOffset> {
        let n = self.dims.len();
        let r_enum = (self.eps / self.h * (1.0 + 1e-9)).floor() as i64;
        let limit2 = self.eps * self.eps * (1.0 + 1e-9);
        let mut offsets = Vec::new();
        let mut steps = vec![-r_enum; n];
        'outer: loop {
            let d2: f64 = steps
                .iter()
                .map(|&s| (s as f64 * self.h) * (s as f64 * self.h))
                .sum();
            if d2 <= limit2 {
                let flat_delta: i64 = steps
                    .iter()
                    .zip(&self.strides)
                    .map(|(&s, &st)| s * st as i64)
                    .sum();
                offsets.push(BallOffset {
                    flat_delta,
                    steps: steps.iter().map(|&s| s as i32).collect(),
                });
            }
            // Odometer increment in lexicographic order.
            for d in (0..n).rev() {
                steps[d] += 1;
                if steps[d] <= r_enum {
                    continue 'outer;
                }
                steps[d] = -r_enum;
                if d == 0 {
                    break 'outer;
                }
            }
        }
        // Lexicographic step order equals ascending flat-delta order for any
        // fixed center; sort by delta to make that explicit.
        offsets.sort_by_key(|o| o.flat_delta);
        offsets
    }

    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.regions.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn region(&self, flat: u32) -> Region {
        self.regions[flat as usize]
    }

    /// Interior node ids, ascending.
    pub fn interior_nodes(&self) -> &[u32] {
        &self.interior
    }

    /// Boundary-layer node ids, ascending.
    pub fn layer_nodes(&self) -> &[u32] {
        &self.layer
    }

    pub fn node_multi(&self, flat: u32) -> Vec<usize> {
        let mut rem = flat as usize;
        self.strides
            .iter()
            .map(|&s| {
                let i = rem / s;
                rem %= s;
                i
            })
            .collect()
    }

    pub fn node_point(&self, flat: u32) -> Point {
        self.node_multi(flat)
            .iter()
            .enumerate()
            .map(|(d, &i)| self.origin[d] + i as f64 * self.h)
            .collect()
    }

    /// Nearest lattice node to an arbitrary point (ties resolve upward).
    pub fn nearest_node(&self, x: &[f64]) -> u32 {
        let mut flat = 0usize;
        for d in 0..self.dims.len() {
            let t = (x[d] - self.origin[d]) / self.h;
            let i = (t + 0.5).floor().max(0.0) as usize;
            flat += i.min(self.dims[d] - 1) * self.strides[d];
        }
        flat as u32
    }

    /// Iterates over the closed ε-ball around a node, yielding node ids in
    /// ascending (lexicographic) order. Outside nodes are excluded.
    pub fn ball_iter(&self, center: u32) -> impl Iterator<Item = u32> + '_ {
        let multi = self.node_multi(center);
        let dims = &self.dims;
        self.ball_offsets.iter().filter_map(move |off| {
            for d in 0..dims.len() {
                let i = multi[d] as i64 + off.steps[d] as i64;
                if i < 0 || i >= dims[d] as i64 {
                    return None;
                }
            }
            let target = (center as i64 + off.flat_delta) as u32;
            if self.regions[target as usize] == Region::Outside {
                None
            } else {
                Some(target)
            }
        })
    }

    /// The node set of the closed ε-ball around an Interior node, sorted by
    /// lexicographic node index.
    pub fn ball_nodes(&self, center: u32) -> Result<Vec<u32>> {
        if self.region(center) == Region::Outside {
            return Err(Error::Grid("ball requested around an Outside node".into()));
        }
        Ok(self.ball_iter(center).collect())
    }
}
