//! JSON run configuration: problem definition plus command-specific blocks,
//! with full up-front validation.

use crate::analysis::SmoothTestFunction;
use crate::boundary::{BoundaryData, BoundaryKind};
use crate::error::{Error, Result};
use crate::grid::GridDomain;
use crate::params::GameParams;
use crate::shape::DomainShape;
use crate::solver::{DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::weight::{WeightField, WeightKind};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogEntry {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    /// Declares that F is 1-Lipschitz; checked on sampled collar node pairs.
    #[serde(default)]
    pub lipschitz: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub domain: CatalogEntry,
    pub weight: CatalogEntry,
    pub boundary: BoundaryConfig,
    pub p: f64,
    pub eps: f64,
    pub h: f64,
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iter() -> usize {
    DEFAULT_MAX_ITER
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

fn default_max_steps() -> usize {
    1_000_000
}

fn default_n_export() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub x0: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    /// How many trajectories are written to the CSV artifact.
    #[serde(default = "default_n_export")]
    pub n_export: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsistencyConfig {
    pub phi: CatalogEntry,
    pub x: Vec<f64>,
    pub eps_list: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentConfig {
    pub n: usize,
    pub eps: f64,
    pub points: usize,
}

fn default_samples() -> usize {
    257
}

fn default_quad_points() -> usize {
    4096
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            samples: default_samples(),
            quad_points: default_quad_points(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyEpsConfig {
    pub eps_list: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyPConfig {
    pub p_list: Vec<f64>,
}

/// Full run configuration. Round-trips through JSON unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub simulate: Option<SimulateConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub consistency: Option<ConsistencyConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub moment: Option<MomentConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle: Option<OracleConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub study_eps: Option<StudyEpsConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub study_p: Option<StudyPConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// One named constraint violation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn diag(field: &str, message: String) -> Diagnostic {
    Diagnostic {
        field: field.to_string(),
        message,
    }
}

pub fn parse_domain(entry: &CatalogEntry) -> Result<DomainShape> {
    let p = &entry.params;
    let shape = match entry.kind.as_str() {
        "interval" => {
            if p.len() != 2 {
                return Err(Error::Config("interval needs params [a, b]".into()));
            }
            DomainShape::Interval { a: p[0], b: p[1] }
        }
        "box" => {
            if p.is_empty() || p.len() % 2 != 0 {
                return Err(Error::Config(
                    "box needs params [lo..., hi...] with matching halves".into(),
                ));
            }
            let n = p.len() / 2;
            DomainShape::Box {
                lo: p[..n].to_vec(),
                hi: p[n..].to_vec(),
            }
        }
        "ball" => {
            if p.len() < 2 {
                return Err(Error::Config(
                    "ball needs params [center..., radius]".into(),
                ));
            }
            DomainShape::Ball {
                center: p[..p.len() - 1].to_vec(),
                radius: p[p.len() - 1],
            }
        }
        "lshape" => {
            if p.len() != 2 {
                return Err(Error::Config("lshape needs params [a, b]".into()));
            }
            DomainShape::LShape { a: p[0], b: p[1] }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown domain kind '{other}' (catalog: interval, box, ball, lshape)"
            )))
        }
    };
    shape.validate()?;
    Ok(shape)
}

pub fn parse_weight(entry: &CatalogEntry, n: usize) -> Result<WeightKind> {
    let p = &entry.params;
    let kind = match entry.kind.as_str() {
        "constant" => {
            if p.len() != 1 {
                return Err(Error::Config("constant weight needs params [c]".into()));
            }
            WeightKind::Constant { value: p[0] }
        }
        "affine" => {
            if p.len() != n {
                return Err(Error::Config(format!(
                    "affine weight needs {n} coefficients"
                )));
            }
            WeightKind::Affine { coeffs: p.clone() }
        }
        "exp" => {
            if p.len() != n {
                return Err(Error::Config(format!("exp weight needs {n} coefficients")));
            }
            WeightKind::Exponential { coeffs: p.clone() }
        }
        "sin" => {
            if p.len() != n + 1 {
                return Err(Error::Config(format!(
                    "sin weight needs params [c, k0..k{}]",
                    n - 1
                )));
            }
            WeightKind::Sinusoidal {
                offset: p[0],
                wave: p[1..].to_vec(),
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown weight kind '{other}' (catalog: constant, affine, exp, sin)"
            )))
        }
    };
    Ok(kind)
}

pub fn parse_boundary(cfg: &BoundaryConfig, n: usize) -> Result<BoundaryData> {
    let p = &cfg.params;
    let kind = match cfg.kind.as_str() {
        "constant" => {
            if p.len() != 1 {
                return Err(Error::Config(
                    "constant boundary data needs params [c]".into(),
                ));
            }
            BoundaryKind::Constant { value: p[0] }
        }
        "affine" => {
            if p.len() != n + 1 {
                return Err(Error::Config(format!(
                    "affine boundary data needs params [b, a0..a{}]",
                    n - 1
                )));
            }
            BoundaryKind::Affine {
                offset: p[0],
                coeffs: p[1..].to_vec(),
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown boundary kind '{other}' (catalog: constant, affine)"
            )))
        }
    };
    Ok(BoundaryData::new(kind).with_lipschitz_flag(cfg.lipschitz))
}

pub fn parse_phi(entry: &CatalogEntry, n: usize) -> Result<SmoothTestFunction> {
    let p = &entry.params;
    let phi = match entry.kind.as_str() {
        "affine" => {
            if p.len() != n + 1 {
                return Err(Error::Config(format!(
                    "affine phi needs params [b, a0..a{}]",
                    n - 1
                )));
            }
            SmoothTestFunction::Affine {
                offset: p[0],
                coeffs: p[1..].to_vec(),
            }
        }
        "quadratic" => {
            if p.len() != n * n + n + 1 {
                return Err(Error::Config(format!(
                    "quadratic phi needs params [q (row-major {n}x{n}), a ({n}), b]"
                )));
            }
            let q = (0..n).map(|i| p[i * n..(i + 1) * n].to_vec()).collect();
            SmoothTestFunction::Quadratic {
                q,
                a: p[n * n..n * n + n].to_vec(),
                b: p[n * n + n],
            }
        }
        "separable_power" => {
            if p.len() != 2 * n {
                return Err(Error::Config(format!(
                    "separable_power phi needs params [c0, k0, ..., c{m}, k{m}]",
                    m = n - 1
                )));
            }
            let coeffs = (0..n).map(|i| p[2 * i]).collect();
            let exponents = (0..n)
                .map(|i| {
                    let k = p[2 * i + 1];
                    if k < 1.0 || k.fract() != 0.0 {
                        return Err(Error::Config(
                            "separable_power exponents must be integers >= 1".into(),
                        ));
                    }
                    Ok(k as u32)
                })
                .collect::<Result<Vec<u32>>>()?;
            SmoothTestFunction::SeparablePower { coeffs, exponents }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown phi kind '{other}' (catalog: affine, quadratic, separable_power)"
            )))
        }
    };
    phi.validate()?;
    Ok(phi)
}

/// Everything a command needs, built from a validated configuration.
pub struct ProblemSetup {
    pub shape: DomainShape,
    pub params: GameParams,
    pub grid: GridDomain,
    pub weight: WeightField,
    pub boundary: BoundaryData,
}

pub fn build_problem(cfg: &ProblemConfig) -> Result<ProblemSetup> {
    let shape = parse_domain(&cfg.domain)?;
    let n = shape.dim();
    let params = GameParams::new(cfg.p, n, cfg.eps)?;
    let grid = GridDomain::build(shape.clone(), &params, cfg.h)?;
    let weight_kind = parse_weight(&cfg.weight, n)?;
    let weight = WeightField::new(weight_kind, &shape.bbox().inflate(cfg.eps))?;
    let boundary = parse_boundary(&cfg.boundary, n)?;
    Ok(ProblemSetup {
        shape,
        params,
        grid,
        weight,
        boundary,
    })
}

/// Sampled test that the closed ball of radius `r` around `x` stays in Ω:
/// the center, axis points and diagonal points must all be inside.
fn ball_inside(shape: &DomainShape, x: &[f64], r: f64) -> bool {
    if !shape.contains(x) {
        return false;
    }
    let n = x.len();
    for d in 0..n {
        for sgn in [-1.0, 1.0] {
            let mut y = x.to_vec();
            y[d] += sgn * r;
            if !shape.contains(&y) {
                return false;
            }
        }
    }
    let diag = r / (n as f64).sqrt();
    for mask in 0..1usize << n {
        let y: Vec<f64> = (0..n)
            .map(|d| x[d] + if mask >> d & 1 == 1 { diag } else { -diag })
            .collect();
        if !shape.contains(&y) {
            return false;
        }
    }
    true
}

/// Collects every constraint violation in the configuration; an empty list
/// means a run cannot fail validation. Never executes a command.
pub fn validate(cfg: &RunConfig) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let shape = match parse_domain(&cfg.problem.domain) {
        Ok(s) => Some(s),
        Err(e) => {
            diags.push(diag("problem.domain", e.to_string()));
            None
        }
    };
    let n = shape.as_ref().map(|s| s.dim());

    let params = match GameParams::new(cfg.problem.p, n.unwrap_or(1), cfg.problem.eps) {
        Ok(p) => Some(p),
        Err(e) => {
            diags.push(diag("problem", e.to_string()));
            None
        }
    };

    if !(cfg.problem.h > 0.0) || cfg.problem.h > cfg.problem.eps / 4.0 * (1.0 + 1e-12) {
        diags.push(diag(
            "problem.h",
            format!(
                "lattice spacing {} violates the resolution rule h <= eps/4 = {}",
                cfg.problem.h,
                cfg.problem.eps / 4.0
            ),
        ));
    }

    let weight = n.and_then(|n| match parse_weight(&cfg.problem.weight, n) {
        Ok(k) => Some(k),
        Err(e) => {
            diags.push(diag("problem.weight", e.to_string()));
            None
        }
    });
    if let (Some(shape), Some(kind)) = (&shape, &weight) {
        if let Err(e) = WeightField::new(kind.clone(), &shape.bbox().inflate(cfg.problem.eps)) {
            diags.push(diag("problem.weight", e.to_string()));
        }
    }

    let boundary = n.and_then(|n| match parse_boundary(&cfg.problem.boundary, n) {
        Ok(b) => Some(b),
        Err(e) => {
            diags.push(diag("problem.boundary", e.to_string()));
            None
        }
    });

    // Grid-dependent checks: collar sampling for the Lipschitz declaration.
    let clean_so_far = diags.is_empty();
    let grid = match (&shape, &params) {
        (Some(s), Some(p)) if clean_so_far => {
            match GridDomain::build(s.clone(), p, cfg.problem.h) {
                Ok(g) => Some(g),
                Err(e) => {
                    diags.push(diag("problem", e.to_string()));
                    None
                }
            }
        }
        _ => None,
    };
    if let (Some(grid), Some(b)) = (&grid, &boundary) {
        if b.lipschitz {
            let nodes = grid.layer_nodes();
            let step = (nodes.len() / 64).max(1);
            let sampled: Vec<_> = nodes.iter().step_by(step).collect();
            'outer: for (i, &&a) in sampled.iter().enumerate() {
                for &&c in sampled.iter().skip(i + 1) {
                    let xa = grid.node_point(a);
                    let xc = grid.node_point(c);
                    let dist = crate::geom::dist(&xa, &xc);
                    if dist < 1e-12 {
                        continue;
                    }
                    let ratio = (b.eval(&xa) - b.eval(&xc)).abs() / dist;
                    if ratio > 1.0 + 1e-9 {
                        diags.push(diag(
                            "problem.boundary",
                            format!(
                                "declared 1-Lipschitz but a sampled collar pair gives constant {ratio:.3}"
                            ),
                        ));
                        break 'outer;
                    }
                }
            }
        }
    }

    if let Some(sim) = &cfg.simulate {
        if sim.n_samples == 0 {
            diags.push(diag("simulate.n_samples", "must be at least 1".into()));
        }
        if sim.max_steps == 0 {
            diags.push(diag("simulate.max_steps", "must be at least 1".into()));
        }
        if let Some(n) = n {
            if sim.x0.len() != n {
                diags.push(diag("simulate.x0", format!("needs {n} coordinates")));
            } else if let Some(shape) = &shape {
                if !shape.contains(&sim.x0) && shape.distance(&sim.x0) > cfg.problem.eps {
                    diags.push(diag(
                        "simulate.x0",
                        "start point lies outside the domain and its collar".into(),
                    ));
                }
            }
        }
    }

    if let Some(c) = &cfg.consistency {
        if let Some(n) = n {
            if c.x.len() != n {
                diags.push(diag("consistency.x", format!("needs {n} coordinates")));
            } else {
                match parse_phi(&c.phi, n) {
                    Ok(phi) => {
                        if crate::geom::norm(&phi.grad(&c.x)) < crate::params::DELTA_GRAD {
                            diags.push(diag(
                                "consistency.x",
                                "test function gradient is degenerate at x".into(),
                            ));
                        }
                    }
                    Err(e) => diags.push(diag("consistency.phi", e.to_string())),
                }
                if let (Some(shape), Some(&emax)) = (
                    &shape,
                    c.eps_list.iter().max_by(|a, b| a.partial_cmp(b).unwrap()),
                ) {
                    // Sampled margin check on the largest requested ball.
                    if !ball_inside(shape, &c.x, emax) {
                        diags.push(diag(
                            "consistency.x",
                            format!("x must be interior with margin larger than {emax}"),
                        ));
                    }
                }
            }
        }
        if c.eps_list.is_empty() {
            diags.push(diag("consistency.eps_list", "must not be empty".into()));
        }
        if c.eps_list.iter().any(|&e| !(e > 0.0)) {
            diags.push(diag(
                "consistency.eps_list",
                "entries must be positive".into(),
            ));
        }
    }

    if let Some(m) = &cfg.moment {
        if !(1..=3).contains(&m.n) {
            diags.push(diag("moment.n", "dimension must be 1, 2 or 3".into()));
        }
        if !(m.eps > 0.0) {
            diags.push(diag("moment.eps", "must be positive".into()));
        }
        if m.points == 0 {
            diags.push(diag("moment.points", "must be at least 1".into()));
        }
    }

    if let Some(o) = &cfg.oracle {
        if o.samples < 2 {
            diags.push(diag(
                "oracle.samples",
                "needs at least two sample points".into(),
            ));
        }
        if o.quad_points == 0 {
            diags.push(diag("oracle.quad_points", "must be at least 1".into()));
        }
        if let Some(shape) = &shape {
            if !matches!(shape, DomainShape::Interval { .. }) {
                diags.push(diag(
                    "oracle",
                    "the 1D reference needs an interval domain".into(),
                ));
            }
        }
    }

    if let Some(s) = &cfg.study_eps {
        for &e in &s.eps_list {
            if !(e > 0.0 && e <= 1.0) {
                diags.push(diag(
                    "study_eps.eps_list",
                    format!("entry {e} outside (0, 1]"),
                ));
            }
        }
    }

    if let Some(s) = &cfg.study_p {
        if s.p_list.iter().any(|&p| !(p > 2.0)) {
            diags.push(diag("study_p.p_list", "entries must be > 2".into()));
        }
        if let Some(b) = &boundary {
            if b.lipschitz_constant() > 1.0 + 1e-12 {
                diags.push(diag(
                    "study_p",
                    "the p-limit study needs boundary data with Lipschitz constant <= 1".into(),
                ));
            }
        }
        if matches!(shape, Some(DomainShape::LShape { .. })) {
            diags.push(diag(
                "study_p",
                "the p-limit study is restricted to interval, box and ball domains".into(),
            ));
        }
    }

    if !(cfg.solve.tol > 0.0) {
        diags.push(diag("solve.tol", "must be positive".into()));
    }
    if cfg.solve.max_iter == 0 {
        diags.push(diag("solve.max_iter", "must be at least 1".into()));
    }

    diags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_config() -> RunConfig {
        RunConfig {
            problem: ProblemConfig {
                domain: CatalogEntry {
                    kind: "interval".into(),
                    params: vec![0.0, 1.0],
                },
                weight: CatalogEntry {
                    kind: "affine".into(),
                    params: vec![1.0],
                },
                boundary: BoundaryConfig {
                    kind: "affine".into(),
                    params: vec![0.0, 1.0],
                    lipschitz: true,
                },
                p: 4.0,
                eps: 0.05,
                h: 0.0125,
            },
            solve: SolveConfig::default(),
            simulate: Some(SimulateConfig {
                x0: vec![0.5],
                n_samples: 200,
                seed: 7,
                max_steps: 100_000,
                n_export: 3,
            }),
            consistency: None,
            moment: None,
            oracle: None,
            study_eps: None,
            study_p: None,
            out_dir: None,
        }
    }

    #[test]
    fn reference_config_is_valid() {
        let diags = validate(&reference_config());
        assert!(diags.is_empty(), "{diags:?}");
    }

    #[test]
    fn config_roundtrips_unchanged() {
        let cfg = reference_config();
        let text = cfg.to_json().unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn p_two_rejected_with_named_constraint() {
        let mut cfg = reference_config();
        cfg.problem.p = 2.0;
        let diags = validate(&cfg);
        assert!(diags.iter().any(|d| d.message.contains("p must be")));
    }

    #[test]
    fn coarse_lattice_rejected() {
        let mut cfg = reference_config();
        cfg.problem.h = cfg.problem.eps / 2.0;
        let diags = validate(&cfg);
        assert!(diags.iter().any(|d| d.field == "problem.h"));
    }

    #[test]
    fn lipschitz_declaration_checked_on_collar_pairs() {
        let mut cfg = reference_config();
        cfg.problem.boundary.params = vec![0.0, 2.0]; // F(x) = 2x
        let diags = validate(&cfg);
        assert!(
            diags
                .iter()
                .any(|d| d.field == "problem.boundary" && d.message.contains("Lipschitz")),
            "{diags:?}"
        );
    }

    #[test]
    fn unknown_catalog_kinds_are_named() {
        let mut cfg = reference_config();
        cfg.problem.domain.kind = "torus".into();
        let diags = validate(&cfg);
        assert!(diags
            .iter()
            .any(|d| d.message.contains("unknown domain kind")));
    }

    #[test]
    fn x0_outside_collar_flagged() {
        let mut cfg = reference_config();
        cfg.simulate.as_mut().unwrap().x0 = vec![3.0];
        let diags = validate(&cfg);
        assert!(diags.iter().any(|d| d.field == "simulate.x0"));
    }

    #[test]
    fn consistency_margin_checked() {
        let mut cfg = reference_config();
        cfg.consistency = Some(ConsistencyConfig {
            phi: CatalogEntry {
                kind: "quadratic".into(),
                params: vec![1.0, 0.5, 0.5],
            },
            x: vec![0.95],
            eps_list: vec![0.2, 0.1],
        });
        let diags = validate(&cfg);
        assert!(
            diags
                .iter()
                .any(|d| d.field == "consistency.x" && d.message.contains("margin")),
            "{diags:?}"
        );
    }
}
