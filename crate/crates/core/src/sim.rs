//! Plays the stochastic game with reproducible randomness: greedy positional
//! strategies extracted from a solved value field, Monte Carlo estimates of
//! the game value, and the supermartingale diagnostic for near-optimal play.
//!
//! Randomness is split per trajectory with a counter-based stream, so results
//! are independent of worker scheduling.

use crate::boundary::BoundaryData;
use crate::error::{Error, Result};
use crate::field::{fmt_f64, value_at, ValueField};
use crate::geom::{add_scaled, norm, pairwise_sum, Point};
use crate::grid::{GridDomain, Region};
use crate::params::GameParams;
use crate::weight::{gamma_value, MoveDistribution, WeightField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::io::Write;

/// How the token moved into a position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MoveKind {
    PlayerA,
    PlayerB,
    Noise,
    Drift,
}

impl MoveKind {
    pub fn tag(&self) -> &'static str {
        match self {
            MoveKind::PlayerA => "player_a",
            MoveKind::PlayerB => "player_b",
            MoveKind::Noise => "noise",
            MoveKind::Drift => "drift",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyKind {
    Maximize,
    Minimize,
}

/// Positional strategy reading a value field: picks the exact discrete
/// extremum over the admissible ball (ties to the lexicographically smallest
/// node). The slack only annotates the supermartingale bookkeeping; on a
/// finite lattice the exact extremum is attainable.
#[derive(Clone, Copy, Debug)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub slack_eta: f64,
}

impl Strategy {
    pub fn maximize() -> Self {
        Strategy {
            kind: StrategyKind::Maximize,
            slack_eta: 0.0,
        }
    }

    pub fn minimize() -> Self {
        Strategy {
            kind: StrategyKind::Minimize,
            slack_eta: 0.0,
        }
    }
}

/// One playout: positions, how each was reached, the exit index and payoff
/// (absent when the game was truncated at the step cap).
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub positions: Vec<Point>,
    pub move_kinds: Vec<MoveKind>,
    pub exit_index: Option<usize>,
    pub payoff: Option<f64>,
}

/// Monte Carlo estimate of the game value. `n_samples` counts the completed
/// games that enter the mean; truncated games are counted separately and
/// never silently dropped.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub n_truncated: usize,
    pub unreliable: bool,
}

/// Per-state record of the supermartingale diagnostic.
#[derive(Clone, Debug)]
pub struct StateCheck {
    pub point: Point,
    pub step_index: usize,
    /// Estimated conditional drift beyond the allowed slack.
    pub excess: f64,
    pub sigma: f64,
    pub violated: bool,
}

#[derive(Clone, Debug)]
pub struct SupermartingaleReport {
    pub states: Vec<StateCheck>,
    pub n_violations: usize,
}

/// Game context: immutable references to the solved instance.
pub struct Simulator<'a> {
    pub grid: &'a GridDomain,
    pub weight: &'a WeightField,
    pub boundary: &'a BoundaryData,
    pub params: &'a GameParams,
    pub value: &'a ValueField,
}

impl<'a> Simulator<'a> {
    pub fn new(
        grid: &'a GridDomain,
        weight: &'a WeightField,
        boundary: &'a BoundaryData,
        params: &'a GameParams,
        value: &'a ValueField,
    ) -> Self {
        Simulator {
            grid,
            weight,
            boundary,
            params,
            value,
        }
    }

    /// RNG stream for one trajectory: same seed, stream = index + 1 (stream 0
    /// is reserved for auxiliary draws).
    pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index + 1);
        rng
    }

    /// Value lookup extended off-lattice: interpolation inside Ω, boundary
    /// data on the collar.
    pub fn extended_value(&self, x: &[f64]) -> Result<f64> {
        if self.grid.shape().contains(x) {
            value_at(self.grid, self.value, x)
        } else {
            Ok(self.boundary.eval(x))
        }
    }

    /// The strategy's chosen node from position `x`: the exact arg-extremum
    /// of the value field over the ball of lattice nodes around the nearest
    /// node of `x`, ties to the smallest node index.
    pub fn strategy_choice(&self, strat: &Strategy, x: &[f64]) -> Result<u32> {
        let anchor = self.grid.nearest_node(x);
        if self.grid.region(anchor) == Region::Outside {
            return Err(Error::Internal(format!(
                "strategy anchored outside the covered region at {x:?}"
            )));
        }
        let mut best: Option<(u32, f64)> = None;
        for id in self.grid.ball_iter(anchor) {
            let v = self.value.get(id);
            let better = match (&best, strat.kind) {
                (None, _) => true,
                (Some((_, bv)), StrategyKind::Maximize) => v > *bv,
                (Some((_, bv)), StrategyKind::Minimize) => v < *bv,
            };
            if better {
                best = Some((id, v));
            }
        }
        best.map(|(id, _)| id)
            .ok_or_else(|| Error::Internal("empty admissible ball".into()))
    }

    /// Samples one move of the game from an interior position. The four move
    /// kinds are drawn in the fixed order A, B, noise, drift.
    pub fn step(
        &self,
        x: &[f64],
        s_a: &Strategy,
        s_b: &Strategy,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Point, MoveKind)> {
        let f = self.weight.eval(x)?;
        let grad = self.weight.grad(x)?;
        let gn = norm(&grad);
        let g = gamma_value(f, gn, self.params);
        let dist = MoveDistribution::from_gamma(g, self.params);
        let cut_a = dist.player_a;
        let cut_b = cut_a + dist.player_b;
        // Guard the floating-point sliver: when the drift probability is
        // exactly zero the noise branch must absorb the tail.
        let cut_noise = if dist.drift == 0.0 {
            1.0
        } else {
            cut_b + dist.noise
        };
        let u: f64 = rng.gen();
        if u < cut_a {
            let id = self.strategy_choice(s_a, x)?;
            Ok((self.grid.node_point(id), MoveKind::PlayerA))
        } else if u < cut_b {
            let id = self.strategy_choice(s_b, x)?;
            Ok((self.grid.node_point(id), MoveKind::PlayerB))
        } else if u < cut_noise {
            Ok((self.sample_ball(x, rng), MoveKind::Noise))
        } else {
            // gn >= cutoff is guaranteed here because drift > 0.
            let target = add_scaled(x, self.params.eps * self.params.eps / gn, &grad);
            Ok((target, MoveKind::Drift))
        }
    }

    /// Uniform point of the closed continuum ball B_ε(x), by rejection
    /// sampling from the bounding cube.
    fn sample_ball(&self, x: &[f64], rng: &mut ChaCha8Rng) -> Point {
        let eps = self.params.eps;
        let n = x.len();
        let mut offset = vec![0.0; n];
        loop {
            let mut r2 = 0.0;
            for v in offset.iter_mut() {
                *v = rng.gen_range(-eps..=eps);
                r2 += *v * *v;
            }
            if r2 <= eps * eps {
                break;
            }
        }
        x.iter().zip(&offset).map(|(a, b)| a + b).collect()
    }

    /// Plays one game from `x0` until the token leaves Ω or the step cap is
    /// reached. Exit positions are classified by the continuum shape
    /// predicate; a start on the collar exits immediately with payoff F(x0).
    pub fn play_game(
        &self,
        x0: &[f64],
        s_a: &Strategy,
        s_b: &Strategy,
        rng: &mut ChaCha8Rng,
        max_steps: usize,
    ) -> Result<Trajectory> {
        let mut positions = vec![x0.to_vec()];
        let mut move_kinds = Vec::new();
        if !self.grid.shape().contains(x0) {
            if self.grid.shape().distance(x0) > self.grid.eps {
                return Err(Error::InvalidParameter(format!(
                    "start {x0:?} lies outside the domain and its collar"
                )));
            }
            return Ok(Trajectory {
                payoff: Some(self.boundary.eval(x0)),
                positions,
                move_kinds,
                exit_index: Some(0),
            });
        }
        let mut current = x0.to_vec();
        for k in 1..=max_steps {
            let (next, kind) = self.step(&current, s_a, s_b, rng)?;
            positions.push(next.clone());
            move_kinds.push(kind);
            if !self.grid.shape().contains(&next) {
                return Ok(Trajectory {
                    payoff: Some(self.boundary.eval(&next)),
                    positions,
                    move_kinds,
                    exit_index: Some(k),
                });
            }
            current = next;
        }
        Ok(Trajectory {
            positions,
            move_kinds,
            exit_index: None,
            payoff: None,
        })
    }

    /// Replays the first `count` trajectories of a Monte Carlo run (same
    /// seed and stream layout as `estimate_value`).
    pub fn replay_trajectories(
        &self,
        x0: &[f64],
        count: usize,
        seed: u64,
        max_steps: usize,
    ) -> Result<Vec<Trajectory>> {
        let s_a = Strategy::maximize();
        let s_b = Strategy::minimize();
        (0..count)
            .map(|i| {
                let mut rng = Self::trajectory_rng(seed, i as u64);
                self.play_game(x0, &s_a, &s_b, &mut rng, max_steps)
            })
            .collect()
    }

    /// Mean payoff over independent games with greedy strategies from the
    /// value field. Trajectories are mutually independent and the mean uses a
    /// fixed pairwise summation tree, so the estimate does not depend on the
    /// degree of parallelism. Estimates with more than 1% truncated games are
    /// flagged unreliable.
    pub fn estimate_value(
        &self,
        x0: &[f64],
        n_samples: usize,
        seed: u64,
        max_steps: usize,
    ) -> Result<MCEstimate> {
        if n_samples == 0 {
            return Err(Error::InvalidParameter(
                "Monte Carlo estimate needs at least one sample".into(),
            ));
        }
        let s_a = Strategy::maximize();
        let s_b = Strategy::minimize();
        let payoffs: Vec<Option<f64>> = (0..n_samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = Self::trajectory_rng(seed, i as u64);
                self.play_game(x0, &s_a, &s_b, &mut rng, max_steps)
                    .map(|t| t.payoff)
            })
            .collect::<Result<_>>()?;
        let used: Vec<f64> = payoffs.iter().filter_map(|p| *p).collect();
        let n_truncated = n_samples - used.len();
        if used.is_empty() {
            return Err(Error::Internal(
                "every trajectory was truncated; raise max_steps".into(),
            ));
        }
        let n_used = used.len() as f64;
        let mean = pairwise_sum(&used) / n_used;
        let sq: Vec<f64> = used.iter().map(|v| (v - mean) * (v - mean)).collect();
        let std = if used.len() > 1 {
            (pairwise_sum(&sq) / (n_used - 1.0)).sqrt()
        } else {
            0.0
        };
        let std_error = std / n_used.sqrt();
        Ok(MCEstimate {
            mean,
            std_error,
            n_samples: used.len(),
            n_truncated,
            unreliable: n_truncated as f64 / n_used > 0.01,
        })
    }

    /// Checks the supermartingale property of `M_k = v(x_k) + η 2^{−k}` under
    /// the maximizing/minimizing strategy pair, by conditional resampling of
    /// single steps from states visited by the given trajectories.
    ///
    /// Sampled states are snapped to their nearest lattice node: the value
    /// certificate lives on the lattice, and off-lattice anchors would add an
    /// O(h) enumeration asymmetry that is not statistical error.
    pub fn supermartingale_check(
        &self,
        eta: f64,
        trajectories: &[Trajectory],
        n_states: usize,
        n_resamples: usize,
        seed: u64,
    ) -> Result<SupermartingaleReport> {
        if n_resamples < 2 {
            return Err(Error::InvalidParameter(
                "conditional resampling needs at least two steps".into(),
            ));
        }
        // Candidate pool: pre-move states with interior lattice anchors.
        let mut pool: Vec<(u32, usize)> = Vec::new();
        for t in trajectories {
            let steps = t.move_kinds.len();
            for k in 1..=steps {
                let state = &t.positions[k - 1];
                if !self.grid.shape().contains(state) {
                    continue;
                }
                let anchor = self.grid.nearest_node(state);
                if self.grid.region(anchor) == Region::Interior {
                    pool.push((anchor, k));
                }
            }
        }
        if pool.is_empty() {
            return Err(Error::InvalidParameter(
                "trajectories contain no usable interior states".into(),
            ));
        }
        let mut pick_rng = ChaCha8Rng::seed_from_u64(seed);
        pick_rng.set_stream(0);
        let picks: Vec<(u32, usize)> = (0..n_states)
            .map(|_| pool[pick_rng.gen_range(0..pool.len())])
            .collect();

        let s_a = Strategy::maximize();
        let s_b = Strategy {
            kind: StrategyKind::Minimize,
            slack_eta: eta,
        };
        let states: Vec<StateCheck> = picks
            .par_iter()
            .enumerate()
            .map(|(i, &(anchor, k))| -> Result<StateCheck> {
                let x = self.grid.node_point(anchor);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64 + 1);
                let slack_next = eta * 0.5f64.powi(k as i32);
                let slack_here = eta * 0.5f64.powi(k as i32 - 1);
                let mut samples = Vec::with_capacity(n_resamples);
                for _ in 0..n_resamples {
                    let (next, _) = self.step(&x, &s_a, &s_b, &mut rng)?;
                    samples.push(self.extended_value(&next)? + slack_next);
                }
                let m = n_resamples as f64;
                let mean = pairwise_sum(&samples) / m;
                let sq: Vec<f64> = samples.iter().map(|v| (v - mean) * (v - mean)).collect();
                let sigma = (pairwise_sum(&sq) / (m - 1.0)).sqrt() / m.sqrt();
                let bound = self.value.get(anchor) + slack_here;
                let excess = mean - bound;
                Ok(StateCheck {
                    point: x,
                    step_index: k,
                    excess,
                    sigma,
                    violated: excess > 4.0 * sigma,
                })
            })
            .collect::<Result<_>>()?;
        let n_violations = states.iter().filter(|s| s.violated).count();
        Ok(SupermartingaleReport {
            states,
            n_violations,
        })
    }
}

/// Writes trajectories as CSV: trajectory index, step, coordinates, move kind
/// ("start" for the initial position).
pub fn write_trajectories_csv(
    dim: usize,
    trajectories: &[Trajectory],
    out: &mut impl Write,
) -> Result<()> {
    write!(out, "trajectory,step")?;
    for d in 0..dim {
        write!(out, ",x{d}")?;
    }
    writeln!(out, ",move")?;
    for (t, traj) in trajectories.iter().enumerate() {
        for (k, pos) in traj.positions.iter().enumerate() {
            write!(out, "{t},{k}")?;
            for v in pos {
                write!(out, ",{}", fmt_f64(*v))?;
            }
            let kind = if k == 0 {
                "start"
            } else {
                traj.move_kinds[k - 1].tag()
            };
            writeln!(out, ",{kind}")?;
        }
    }
    Ok(())
}
