//! The one-step game operator on lattice fields and the monotone fixed-point
//! iteration that produces the value function.
//!
//! At an interior node the operator mixes the best/worst/average value over
//! the closed ε-ball of lattice nodes with an interpolated lookup at the
//! drift target; on the collar it pins the boundary data. Sweeps are
//! Jacobi-style: every output is computed from the previous iterate, which is
//! what makes the iteration monotone from below.

use crate::boundary::{extend_boundary, BoundaryData};
use crate::error::{Error, Result};
use crate::field::{interp_stencil, ValueField};
use crate::grid::GridDomain;
use crate::params::{GameParams, DELTA_GRAD};
use crate::weight::{gamma_value, WeightField};
use rayon::prelude::*;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Nodewise slack tolerated before an iterate counts as non-monotone.
pub const MONOTONE_SLACK: f64 = 1e-13;

/// Convergence record of a fixed-point solve.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub monotone_violations: usize,
    pub converged: bool,
}

/// Precomputed one-step operator for a fixed (grid, weight, boundary data,
/// parameters) tuple. Immutable once built; `apply` is data-parallel over
/// interior nodes with a fixed per-node summation order, so results do not
/// depend on the worker count.
pub struct TOperator<'a> {
    grid: &'a GridDomain,
    params: GameParams,
    gamma: Vec<f64>,
    ball_start: Vec<usize>,
    ball_idx: Vec<u32>,
    drift_start: Vec<usize>,
    drift_idx: Vec<u32>,
    drift_w: Vec<f64>,
    /// Full-length template: NaN outside, F on the collar, 0 on interior.
    template: Vec<f64>,
}

impl<'a> TOperator<'a> {
    pub fn new(
        grid: &'a GridDomain,
        w: &WeightField,
        f: &BoundaryData,
        params: &GameParams,
    ) -> Result<Self> {
        if grid.dim() != params.n {
            return Err(Error::InvalidParameter(
                "grid dimension does not match the game parameters".into(),
            ));
        }
        if (grid.eps - params.eps).abs() > 1e-12 * params.eps {
            return Err(Error::InvalidParameter(
                "grid was built for a different step scale".into(),
            ));
        }
        let interior = grid.interior_nodes();
        let mut gamma = Vec::with_capacity(interior.len());
        let mut ball_start = Vec::with_capacity(interior.len() + 1);
        let mut ball_idx = Vec::new();
        let mut drift_start = Vec::with_capacity(interior.len() + 1);
        let mut drift_idx = Vec::new();
        let mut drift_w = Vec::new();
        ball_start.push(0);
        drift_start.push(0);
        for &id in interior {
            let x = grid.node_point(id);
            let fv = w.eval(&x)?;
            let g = w.grad(&x)?;
            let gn = crate::geom::norm(&g);
            gamma.push(gamma_value(fv, gn, params));
            ball_idx.extend(grid.ball_iter(id));
            ball_start.push(ball_idx.len());
            if gn >= DELTA_GRAD {
                let scale = params.eps * params.eps / gn;
                let target = crate::geom::add_scaled(&x, scale, &g);
                let stencil = interp_stencil(grid, &target).map_err(|_| {
                    Error::Internal(format!("drift target {target:?} left the covered region"))
                })?;
                for (idx, wgt) in stencil {
                    drift_idx.push(idx);
                    drift_w.push(wgt);
                }
            }
            drift_start.push(drift_idx.len());
        }

        let boundary = extend_boundary(grid, f)?;
        let mut template = vec![f64::NAN; grid.num_nodes()];
        for &id in interior {
            template[id as usize] = 0.0;
        }
        for &id in grid.layer_nodes() {
            template[id as usize] = boundary.get(id);
        }

        Ok(TOperator {
            grid,
            params: *params,
            gamma,
            ball_start,
            ball_idx,
            drift_start,
            drift_idx,
            drift_w,
            template,
        })
    }

    pub fn grid(&self) -> &GridDomain {
        self.grid
    }

    /// Boundary values pinned by the operator (aligned with the node array).
    pub fn template(&self) -> &[f64] {
        &self.template
    }

    fn node_output(&self, k: usize, cur: &[f64]) -> f64 {
        let g = self.gamma[k];
        let (s, e) = (self.ball_start[k], self.ball_start[k + 1]);
        let mut mx = f64::NEG_INFINITY;
        let mut mn = f64::INFINITY;
        let mut sum = 0.0;
        for &j in &self.ball_idx[s..e] {
            let v = cur[j as usize];
            if v > mx {
                mx = v;
            }
            if v < mn {
                mn = v;
            }
            sum += v;
        }
        let mean = sum / (e - s) as f64;
        let mut out = g * self.params.alpha * 0.5 * (mx + mn) + g * self.params.beta * mean;
        let (ds, de) = (self.drift_start[k], self.drift_start[k + 1]);
        if de > ds {
            let mut dv = 0.0;
            for m in ds..de {
                dv += self.drift_w[m] * cur[self.drift_idx[m] as usize];
            }
            out += (1.0 - g) * dv;
        }
        out
    }

    /// Writes the interior outputs of one sweep into `out` (indexed like the
    /// interior node list).
    fn sweep_interior(&self, cur: &[f64], out: &mut [f64]) {
        const CHUNK: usize = 2048;
        out.par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(ci, chunk)| {
                let base = ci * CHUNK;
                for (t, slot) in chunk.iter_mut().enumerate() {
                    *slot = self.node_output(base + t, cur);
                }
            });
    }

    /// One full application of the operator: boundary data on the collar,
    /// game mix on the interior.
    pub fn apply(&self, v: &ValueField) -> ValueField {
        let interior = self.grid.interior_nodes();
        let mut vals = vec![0.0; interior.len()];
        self.sweep_interior(v.values(), &mut vals);
        let mut out = self.template.clone();
        for (k, &id) in interior.iter().enumerate() {
            out[id as usize] = vals[k];
        }
        ValueField::from_values(out)
    }
}

/// One application of the operator (convenience wrapper over `TOperator`).
pub fn apply_t(
    v: &ValueField,
    grid: &GridDomain,
    w: &WeightField,
    f: &BoundaryData,
    params: &GameParams,
) -> Result<ValueField> {
    Ok(TOperator::new(grid, w, f, params)?.apply(v))
}

/// Sup-norm of `Tv − v` over interior nodes.
pub fn residual(
    v: &ValueField,
    grid: &GridDomain,
    w: &WeightField,
    f: &BoundaryData,
    params: &GameParams,
) -> Result<f64> {
    let tv = apply_t(v, grid, w, f, params)?;
    Ok(grid
        .interior_nodes()
        .iter()
        .map(|&i| (tv.get(i) - v.get(i)).abs())
        .fold(0.0, f64::max))
}

/// Monotone fixed-point iteration from the pessimistic start (the infimum of
/// the boundary data on the collar). Returns the last iterate and a report;
/// non-convergence within `max_iter` is flagged, not an error.
pub fn solve_fixed_point(
    grid: &GridDomain,
    w: &WeightField,
    f: &BoundaryData,
    params: &GameParams,
    tol: f64,
    max_iter: usize,
) -> Result<(ValueField, SolveReport)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    if max_iter == 0 {
        return Err(Error::InvalidParameter(
            "max_iter must be at least 1".into(),
        ));
    }
    let op = TOperator::new(grid, w, f, params)?;
    let (inf_f, _) = f.range_on_layer(grid)?;
    let interior = grid.interior_nodes();

    let mut cur = op.template().to_vec();
    for &id in interior {
        cur[id as usize] = inf_f;
    }
    let mut next = cur.clone();
    let mut interior_out = vec![0.0; interior.len()];

    let mut history = Vec::new();
    let mut violations = 0usize;
    let mut converged = false;
    for _ in 0..max_iter {
        op.sweep_interior(&cur, &mut interior_out);
        let mut delta: f64 = 0.0;
        for (k, &id) in interior.iter().enumerate() {
            let new = interior_out[k];
            let old = cur[id as usize];
            delta = delta.max((new - old).abs());
            if new < old - MONOTONE_SLACK {
                violations += 1;
            }
            next[id as usize] = new;
        }
        history.push(delta);
        std::mem::swap(&mut cur, &mut next);
        if delta <= tol {
            converged = true;
            break;
        }
    }

    let final_residual = *history.last().unwrap_or(&0.0);
    let report = SolveReport {
        iterations: history.len(),
        residual_history: history,
        final_residual,
        monotone_violations: violations,
        converged,
    };
    Ok((ValueField::from_values(cur), report))
}
