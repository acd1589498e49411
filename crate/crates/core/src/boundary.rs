//! Boundary payoff data F, defined in a neighborhood of ∂Ω and cached on the
//! collar nodes where the game stops.

use crate::error::{Error, Result};
use crate::field::ValueField;
use crate::geom::dot;
use crate::grid::GridDomain;

/// Built-in boundary-data catalog.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryKind {
    /// F(x) = c.
    Constant { value: f64 },
    /// F(x) = b + a·x.
    Affine { offset: f64, coeffs: Vec<f64> },
}

/// Payoff function together with an optional declared Lipschitz bound
/// (constant at most one), checked by validation on sampled collar nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    pub kind: BoundaryKind,
    pub lipschitz: bool,
}

impl BoundaryData {
    pub fn new(kind: BoundaryKind) -> Self {
        Self {
            kind,
            lipschitz: false,
        }
    }

    pub fn with_lipschitz_flag(mut self, flag: bool) -> Self {
        self.lipschitz = flag;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            BoundaryKind::Constant { value } => *value,
            BoundaryKind::Affine { offset, coeffs } => offset + dot(coeffs, x),
        }
    }

    /// Exact Lipschitz constant for catalog entries.
    pub fn lipschitz_constant(&self) -> f64 {
        match &self.kind {
            BoundaryKind::Constant { .. } => 0.0,
            BoundaryKind::Affine { coeffs, .. } => crate::geom::norm(coeffs),
        }
    }

    /// Range of F over the collar nodes of a grid.
    pub fn range_on_layer(&self, grid: &GridDomain) -> Result<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &id in grid.layer_nodes() {
            let v = self.eval(&grid.node_point(id));
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::Boundary(
                "boundary data is not finite on the collar nodes".into(),
            ));
        }
        Ok((lo, hi))
    }
}

/// Extends F onto the collar: the returned field equals F on every
/// boundary-layer node and zero on interior nodes.
pub fn extend_boundary(grid: &GridDomain, f: &BoundaryData) -> Result<ValueField> {
    let mut field = ValueField::constant(grid, 0.0);
    for &id in grid.layer_nodes() {
        let v = f.eval(&grid.node_point(id));
        if !v.is_finite() {
            return Err(Error::Boundary(format!(
                "non-finite boundary value at node {:?}",
                grid.node_point(id)
            )));
        }
        field.set(id, v);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::GameParams;
    use crate::shape::DomainShape;

    fn grid_1d() -> GridDomain {
        let gp = GameParams::new(4.0, 1, 0.1).unwrap();
        GridDomain::build(DomainShape::Interval { a: 0.0, b: 1.0 }, &gp, 0.025).unwrap()
    }

    #[test]
    fn zero_data_extends_to_zero() {
        let grid = grid_1d();
        let f = BoundaryData::new(BoundaryKind::Constant { value: 0.0 });
        let field = extend_boundary(&grid, &f).unwrap();
        for &id in grid.layer_nodes() {
            assert_eq!(field.get(id), 0.0);
        }
    }

    #[test]
    fn coordinate_data_takes_node_values() {
        let grid = grid_1d();
        let f = BoundaryData::new(BoundaryKind::Affine {
            offset: 0.0,
            coeffs: vec![1.0],
        });
        let field = extend_boundary(&grid, &f).unwrap();
        let node = grid.nearest_node(&[-0.05]);
        assert!((field.get(node) - (-0.05)).abs() < 1e-12);
    }

    #[test]
    fn affine_data_exact_on_2d_box_collar() {
        let gp = GameParams::new(4.0, 2, 0.1).unwrap();
        let grid = GridDomain::build(
            DomainShape::Box {
                lo: vec![0.0, 0.0],
                hi: vec![1.0, 1.0],
            },
            &gp,
            0.025,
        )
        .unwrap();
        let f = BoundaryData::new(BoundaryKind::Affine {
            offset: 0.25,
            coeffs: vec![0.5, -0.5],
        });
        let field = extend_boundary(&grid, &f).unwrap();
        for &id in grid.layer_nodes().iter().step_by(7) {
            let x = grid.node_point(id);
            assert!((field.get(id) - (0.25 + 0.5 * x[0] - 0.5 * x[1])).abs() < 1e-12);
        }
    }

    #[test]
    fn lipschitz_constant_of_catalog_entries() {
        let f = BoundaryData::new(BoundaryKind::Affine {
            offset: 0.0,
            coeffs: vec![2.0],
        });
        assert!((f.lipschitz_constant() - 2.0).abs() < 1e-15);
        let c = BoundaryData::new(BoundaryKind::Constant { value: 3.0 });
        assert_eq!(c.lipschitz_constant(), 0.0);
    }
}
