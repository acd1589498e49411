//! Discrete real-valued functions on grid nodes, with multilinear
//! interpolation for off-lattice queries.

use crate::error::{Error, Result};
use crate::grid::{GridDomain, Region};
use std::io::Write;

/// Values per lattice node (defined on Interior ∪ BoundaryLayer; entries at
/// Outside nodes are NaN canaries and must never be read).
#[derive(Clone, Debug, PartialEq)]
pub struct ValueField {
    values: Vec<f64>,
}

impl ValueField {
    /// Constant field on the defined nodes.
    pub fn constant(grid: &GridDomain, c: f64) -> Self {
        let values = (0..grid.num_nodes() as u32)
            .map(|i| {
                if grid.region(i) == Region::Outside {
                    f64::NAN
                } else {
                    c
                }
            })
            .collect();
        Self { values }
    }

    /// Field sampled from a closed-form function on the defined nodes.
    pub fn from_fn(grid: &GridDomain, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.num_nodes() as u32)
            .map(|i| {
                if grid.region(i) == Region::Outside {
                    f64::NAN
                } else {
                    f(&grid.node_point(i))
                }
            })
            .collect();
        Self { values }
    }

    pub fn from_values(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, flat: u32) -> f64 {
        self.values[flat as usize]
    }

    pub fn set(&mut self, flat: u32, v: f64) {
        self.values[flat as usize] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Sup-norm distance to another field over the given nodes.
    pub fn sup_distance_on(&self, other: &ValueField, nodes: &[u32]) -> f64 {
        nodes
            .iter()
            .map(|&i| (self.get(i) - other.get(i)).abs())
            .fold(0.0, f64::max)
    }

    /// Min and max over the given nodes.
    pub fn range_on(&self, nodes: &[u32]) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &i in nodes {
            let v = self.get(i);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Writes the field as CSV: one row per defined node, node coordinates
    /// first, then the region tag and the value, in node order.
    pub fn write_csv(&self, grid: &GridDomain, out: &mut impl Write) -> Result<()> {
        let n = grid.dim();
        for d in 0..n {
            write!(out, "x{d},")?;
        }
        writeln!(out, "region,value")?;
        for flat in 0..grid.num_nodes() as u32 {
            let region = grid.region(flat);
            if region == Region::Outside {
                continue;
            }
            let x = grid.node_point(flat);
            for v in &x {
                write!(out, "{},", fmt_f64(*v))?;
            }
            writeln!(out, "{},{}", region.tag(), fmt_f64(self.get(flat)))?;
        }
        Ok(())
    }
}

/// Floating-point text format used in every artifact: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn locate_cell(grid: &GridDomain, x: &[f64]) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = grid.dim();
    debug_assert_eq!(x.len(), n);
    let dims = grid.dims();
    let origin = grid.origin();
    let tol = 1e-9 * grid.h;
    let mut cell = vec![0usize; n];
    let mut frac = vec![0.0f64; n];
    for d in 0..n {
        let t = (x[d] - origin[d]) / grid.h;
        if t < -tol || t > (dims[d] - 1) as f64 + tol {
            return Err(Error::OutsideRegion(x.to_vec()));
        }
        let c = (t.floor().max(0.0) as usize).min(dims[d].saturating_sub(2));
        cell[d] = c;
        frac[d] = (t - c as f64).clamp(0.0, 1.0);
    }
    Ok((cell, frac))
}

/// Multilinear interpolation of a field at an off-lattice point, from the 2ⁿ
/// enclosing lattice nodes. Errors when the point (or one of the needed
/// corners) leaves the covered region.
pub fn value_at(grid: &GridDomain, field: &ValueField, x: &[f64]) -> Result<f64> {
    let n = grid.dim();
    let dims = grid.dims();
    let (cell, frac) = locate_cell(grid, x)?;
    let mut acc = 0.0;
    for mask in 0..1usize << n {
        let mut flat = 0usize;
        let mut w = 1.0;
        for d in 0..n {
            let hi = mask >> d & 1 == 1;
            let idx = cell[d] + hi as usize;
            flat += idx * stride(dims, d);
            w *= if hi { frac[d] } else { 1.0 - frac[d] };
        }
        if grid.region(flat as u32) == Region::Outside {
            return Err(Error::OutsideRegion(x.to_vec()));
        }
        acc += w * field.get(flat as u32);
    }
    Ok(acc)
}

/// The 2ⁿ (node, weight) pairs the interpolation at `x` would use, in a fixed
/// corner order. Errors exactly when `value_at` would.
pub fn interp_stencil(grid: &GridDomain, x: &[f64]) -> Result<Vec<(u32, f64)>> {
    let n = grid.dim();
    let dims = grid.dims();
    let (cell, frac) = locate_cell(grid, x)?;
    let mut out = Vec::with_capacity(1 << n);
    for mask in 0..1usize << n {
        let mut flat = 0usize;
        let mut w = 1.0;
        for d in 0..n {
            let hi = mask >> d & 1 == 1;
            let idx = cell[d] + hi as usize;
            flat += idx * stride(dims, d);
            w *= if hi { frac[d] } else { 1.0 - frac[d] };
        }
        if grid.region(flat as u32) == Region::Outside {
            return Err(Error::OutsideRegion(x.to_vec()));
        }
        out.push((flat as u32, w));
    }
    Ok(out)
}

fn stride(dims: &[usize], d: usize) -> usize {
    dims[d + 1..].iter().product()
}
