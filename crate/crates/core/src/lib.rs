//! Solver, game simulator and verification harness for the Dirichlet problem
//! of the weighted p-Laplace equation.
//!
//! The value function of a two-player tug-of-war game with noise and a
//! gradient-drift move is computed by fixed-point iteration of its dynamic
//! programming principle on a lattice, estimated independently by Monte Carlo
//! playouts of the game, and cross-checked against Taylor-expansion
//! predictions, closed-form 1D references and the p → ∞ limit.

// Guards written as `!(x > 0.0)` are NaN-rejecting on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod boundary;
pub mod config;
pub mod error;
pub mod field;
pub mod geom;
pub mod grid;
pub mod params;
pub mod runner;
pub mod shape;
pub mod sim;
pub mod solver;
pub mod study;
pub mod weight;

pub use boundary::{extend_boundary, BoundaryData, BoundaryKind};
pub use error::{Error, Result};
pub use field::{value_at, ValueField};
pub use grid::{GridDomain, Region};
pub use params::{GameParams, DELTA_GRAD};
pub use shape::{Bbox, DomainShape};
pub use sim::{MCEstimate, MoveKind, Simulator, Strategy, StrategyKind, Trajectory};
pub use solver::{apply_t, residual, solve_fixed_point, SolveReport, TOperator};
pub use weight::{
    drift_target, gamma, gamma_value, move_distribution, MoveDistribution, WeightField, WeightKind,
};
