//! Batch front-end: validates a run configuration, dispatches one command and
//! writes machine-readable artifacts (CSV fields/tables, JSON reports).

use crate::analysis::{moment_check, moment_reference, taylor_consistency};
use crate::config::{build_problem, parse_phi, validate, Diagnostic, OracleConfig, RunConfig};
use crate::error::{Error, Result};
use crate::field::fmt_f64;
use crate::shape::DomainShape;
use crate::sim::{write_trajectories_csv, Simulator};
use crate::solver::solve_fixed_point;
use crate::study::{
    epsilon_study, p_limit_study, weighted_p_harmonic_1d, StudyInstance, StudyResult,
};
use serde::Serialize;
use std::fs;
use std::io;
use std::path::Path;

/// The batch commands.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Solve,
    Simulate,
    Consistency,
    Moment,
    Oracle,
    StudyEps,
    StudyP,
    Validate,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Solve => "solve",
            CommandKind::Simulate => "simulate",
            CommandKind::Consistency => "consistency",
            CommandKind::Moment => "moment",
            CommandKind::Oracle => "oracle",
            CommandKind::StudyEps => "study-eps",
            CommandKind::StudyP => "study-p",
            CommandKind::Validate => "validate",
        }
    }
}

/// Outcome of a run, mapped onto process exit codes.
#[derive(Clone, Debug)]
pub enum Outcome {
    Success,
    /// Constraint violations; nothing was executed.
    Invalid(Vec<Diagnostic>),
    /// A solve hit the iteration cap before reaching the tolerance.
    Unconverged,
    /// The Monte Carlo estimate exceeded the truncation budget.
    Unreliable,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Invalid(_) => 2,
            Outcome::Unconverged => 3,
            Outcome::Unreliable => 4,
        }
    }
}

// --- JSON with 17 significant digits on every float ------------------------

struct SigDigits;

impl serde_json::ser::Formatter for SigDigits {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serializes to JSON with all floating-point numbers printed to 17
/// significant digits.
pub fn to_json_17<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigits);
    value.serialize(&mut ser)?;
    let mut text = String::from_utf8(out).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

fn write_artifact(dir: &Path, name: &str, contents: &[u8]) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)?;
    Ok(())
}

#[derive(Serialize)]
struct StudySummary<'a> {
    parameters: Vec<f64>,
    distances: Vec<f64>,
    converged: Vec<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alphas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    fitted_order: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<f64>,
    command: &'a str,
}

fn study_summary<'a>(res: &StudyResult, command: &'a str) -> StudySummary<'a> {
    let alphas: Vec<f64> = res.rows.iter().filter_map(|r| r.alpha).collect();
    StudySummary {
        parameters: res.rows.iter().map(|r| r.param).collect(),
        distances: res.rows.iter().map(|r| r.distance).collect(),
        converged: res.rows.iter().map(|r| r.converged).collect(),
        alphas: if alphas.len() == res.rows.len() {
            Some(alphas)
        } else {
            None
        },
        fitted_order: res.fitted_order,
        reference: res.reference,
        command,
    }
}

fn write_study(dir: &Path, stem: &str, res: &StudyResult, command: &str) -> Result<()> {
    let mut csv = Vec::new();
    res.write_csv(&mut csv)?;
    write_artifact(dir, &format!("{stem}.csv"), &csv)?;
    let json = to_json_17(&study_summary(res, command))?;
    write_artifact(dir, &format!("{stem}.json"), json.as_bytes())?;
    Ok(())
}

/// Validates and executes one command, writing artifacts to `out_dir`.
/// `workers` caps the computation pool (results never depend on it); `seed`
/// overrides the simulation seed from the configuration.
pub fn run_command(
    kind: CommandKind,
    cfg: &RunConfig,
    out_dir: &Path,
    workers: Option<usize>,
    seed: Option<u64>,
) -> Result<Outcome> {
    let diags = validate(cfg);
    if kind == CommandKind::Validate {
        return Ok(if diags.is_empty() {
            Outcome::Success
        } else {
            Outcome::Invalid(diags)
        });
    }
    if !diags.is_empty() {
        return Ok(Outcome::Invalid(diags));
    }
    match workers {
        Some(k) if k > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Internal(e.to_string()))?;
            pool.install(|| dispatch(kind, cfg, out_dir, seed))
        }
        _ => dispatch(kind, cfg, out_dir, seed),
    }
}

fn dispatch(kind: CommandKind, cfg: &RunConfig, out: &Path, seed: Option<u64>) -> Result<Outcome> {
    match kind {
        CommandKind::Validate => unreachable!("handled by run_command"),
        CommandKind::Solve => cmd_solve(cfg, out),
        CommandKind::Simulate => cmd_simulate(cfg, out, seed),
        CommandKind::Consistency => cmd_consistency(cfg, out),
        CommandKind::Moment => cmd_moment(cfg, out),
        CommandKind::Oracle => cmd_oracle(cfg, out),
        CommandKind::StudyEps => cmd_study_eps(cfg, out),
        CommandKind::StudyP => cmd_study_p(cfg, out),
    }
}

fn cmd_solve(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let setup = build_problem(&cfg.problem)?;
    let (value, report) = solve_fixed_point(
        &setup.grid,
        &setup.weight,
        &setup.boundary,
        &setup.params,
        cfg.solve.tol,
        cfg.solve.max_iter,
    )?;
    let mut csv = Vec::new();
    value.write_csv(&setup.grid, &mut csv)?;
    write_artifact(out, "value.csv", &csv)?;
    write_artifact(out, "solve_report.json", to_json_17(&report)?.as_bytes())?;
    Ok(if report.converged {
        Outcome::Success
    } else {
        Outcome::Unconverged
    })
}

#[derive(Serialize)]
struct EstimateArtifact {
    mean: f64,
    std_error: f64,
    n_samples: usize,
    n_truncated: usize,
    unreliable: bool,
    seed: u64,
}

fn cmd_simulate(cfg: &RunConfig, out: &Path, seed_override: Option<u64>) -> Result<Outcome> {
    let sim_cfg = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| Error::Config("simulate command needs a 'simulate' block".into()))?;
    let seed = seed_override.unwrap_or(sim_cfg.seed);
    let setup = build_problem(&cfg.problem)?;
    let (value, report) = solve_fixed_point(
        &setup.grid,
        &setup.weight,
        &setup.boundary,
        &setup.params,
        cfg.solve.tol,
        cfg.solve.max_iter,
    )?;
    if !report.converged {
        return Ok(Outcome::Unconverged);
    }
    let sim = Simulator::new(
        &setup.grid,
        &setup.weight,
        &setup.boundary,
        &setup.params,
        &value,
    );
    let estimate = sim.estimate_value(&sim_cfg.x0, sim_cfg.n_samples, seed, sim_cfg.max_steps)?;
    let n_export = sim_cfg.n_export.min(sim_cfg.n_samples);
    let trajectories = sim.replay_trajectories(&sim_cfg.x0, n_export, seed, sim_cfg.max_steps)?;
    let mut csv = Vec::new();
    write_trajectories_csv(setup.grid.dim(), &trajectories, &mut csv)?;
    write_artifact(out, "trajectories.csv", &csv)?;
    let artifact = EstimateArtifact {
        mean: estimate.mean,
        std_error: estimate.std_error,
        n_samples: estimate.n_samples,
        n_truncated: estimate.n_truncated,
        unreliable: estimate.unreliable,
        seed,
    };
    write_artifact(out, "estimate.json", to_json_17(&artifact)?.as_bytes())?;
    Ok(if estimate.unreliable {
        Outcome::Unreliable
    } else {
        Outcome::Success
    })
}

fn cmd_consistency(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let c = cfg
        .consistency
        .as_ref()
        .ok_or_else(|| Error::Config("consistency command needs a 'consistency' block".into()))?;
    let setup = build_problem(&cfg.problem)?;
    let phi = parse_phi(&c.phi, setup.shape.dim())?;
    // Startup self-check of the test function's closed-form derivatives,
    // sampled at the probe point and small shifts of it.
    let probes: Vec<Vec<f64>> = (0..=setup.shape.dim())
        .map(|d| {
            let mut y = c.x.clone();
            if d > 0 {
                y[d - 1] += 0.05;
            }
            y
        })
        .collect();
    phi.check_derivatives(&probes)?;
    let res = taylor_consistency(&phi, &c.x, &setup.weight, &setup.params, &c.eps_list)?;
    write_study(out, "consistency", &res, "consistency")?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct MomentArtifact {
    n: usize,
    eps: f64,
    points: usize,
    reference: f64,
    rel_deviation: f64,
}

fn cmd_moment(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let m = cfg
        .moment
        .as_ref()
        .ok_or_else(|| Error::Config("moment command needs a 'moment' block".into()))?;
    let rel_deviation = moment_check(m.n, m.eps, m.points)?;
    let artifact = MomentArtifact {
        n: m.n,
        eps: m.eps,
        points: m.points,
        reference: moment_reference(m.n, m.eps),
        rel_deviation,
    };
    write_artifact(out, "moment.json", to_json_17(&artifact)?.as_bytes())?;
    Ok(Outcome::Success)
}

fn cmd_oracle(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let o = cfg.oracle.clone().unwrap_or_else(OracleConfig::default);
    let setup = build_problem(&cfg.problem)?;
    let (a, b) = match setup.shape {
        DomainShape::Interval { a, b } => (a, b),
        _ => {
            return Err(Error::Unsupported(
                "the 1D reference needs an interval domain".into(),
            ))
        }
    };
    let fa = setup.boundary.eval(&[a]);
    let fb = setup.boundary.eval(&[b]);
    let kind = setup.weight.kind().clone();
    let oracle = weighted_p_harmonic_1d(
        move |t| kind.eval(&[t]),
        a,
        b,
        fa,
        fb,
        setup.params.p,
        o.quad_points,
    )?;
    let mut csv = Vec::new();
    {
        use std::io::Write;
        writeln!(&mut csv, "x,u")?;
        for i in 0..o.samples {
            let x = a + (b - a) * i as f64 / (o.samples - 1) as f64;
            writeln!(&mut csv, "{},{}", fmt_f64(x), fmt_f64(oracle.eval(x)))?;
        }
    }
    write_artifact(out, "oracle.csv", &csv)?;
    Ok(Outcome::Success)
}

fn study_instance(cfg: &RunConfig) -> Result<StudyInstance> {
    let setup = build_problem(&cfg.problem)?;
    Ok(StudyInstance {
        shape: setup.shape,
        weight: setup.weight.kind().clone(),
        boundary: setup.boundary,
        p: setup.params.p,
    })
}

fn cmd_study_eps(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let s = cfg
        .study_eps
        .as_ref()
        .ok_or_else(|| Error::Config("study-eps command needs a 'study_eps' block".into()))?;
    let instance = study_instance(cfg)?;
    let res = epsilon_study(&instance, &s.eps_list, cfg.solve.tol, cfg.solve.max_iter)?;
    write_study(out, "study_eps", &res, "study-eps")?;
    Ok(if res.rows.iter().all(|r| r.converged) {
        Outcome::Success
    } else {
        Outcome::Unconverged
    })
}

fn cmd_study_p(cfg: &RunConfig, out: &Path) -> Result<Outcome> {
    let s = cfg
        .study_p
        .as_ref()
        .ok_or_else(|| Error::Config("study-p command needs a 'study_p' block".into()))?;
    let instance = study_instance(cfg)?;
    let res = p_limit_study(&instance, &s.p_list, cfg.solve.tol, cfg.solve.max_iter)?;
    write_study(out, "study_p", &res, "study-p")?;
    Ok(if res.rows.iter().all(|r| r.converged) {
        Outcome::Success
    } else {
        Outcome::Unconverged
    })
}
