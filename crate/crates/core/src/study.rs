//! Convergence studies and the 1D reference solution they compare against.

use crate::boundary::{BoundaryData, BoundaryKind};
use crate::error::{Error, Result};
use crate::field::fmt_f64;
use crate::grid::GridDomain;
use crate::params::GameParams;
use crate::shape::DomainShape;
use crate::solver::solve_fixed_point;
use crate::weight::{WeightField, WeightKind};
use std::io::Write;

/// Step scale used by the p → ∞ study; fixed so the rows differ only in p.
pub const P_STUDY_EPS: f64 = 0.02;

/// One row of a parameter study.
#[derive(Clone, Copy, Debug)]
pub struct StudyRow {
    pub param: f64,
    pub distance: f64,
    pub converged: bool,
    /// Derived mixing constant, reported by the p-study.
    pub alpha: Option<f64>,
}

/// Table of sup-norm distances over a parameter sweep, with the fitted
/// log-log slope where at least three positive distances exist.
#[derive(Clone, Debug)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    pub fitted_order: Option<f64>,
    /// Study-specific scalar reference (e.g. the predicted generator).
    pub reference: Option<f64>,
}

impl StudyResult {
    pub fn distances(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.distance).collect()
    }

    /// True when consecutive distances are nonincreasing up to the given
    /// relative slack.
    pub fn monotone_within_slack(&self, slack: f64) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].distance <= w[0].distance * (1.0 + slack))
    }

    /// CSV rows: parameter, distance, order fitted over the rows so far,
    /// converged flag.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "parameter,distance,order_so_far,converged")?;
        for (i, row) in self.rows.iter().enumerate() {
            let prefix: Vec<(f64, f64)> = self.rows[..=i]
                .iter()
                .filter(|r| r.distance > 0.0 && r.distance.is_finite())
                .map(|r| (r.param, r.distance))
                .collect();
            let order = fit_order(&prefix);
            write!(out, "{},{},", fmt_f64(row.param), fmt_f64(row.distance))?;
            match order {
                Some(o) => write!(out, "{}", fmt_f64(o))?,
                None => write!(out, "")?,
            }
            writeln!(out, ",{}", row.converged)?;
        }
        Ok(())
    }
}

/// Least-squares slope of log(distance) against log(parameter); `None` with
/// fewer than three usable points.
pub fn fit_order(points: &[(f64, f64)]) -> Option<f64> {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if data.len() < 3 {
        return None;
    }
    let n = data.len() as f64;
    let mx = data.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = data.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = data.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = data.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        None
    } else {
        Some(sxy / sxx)
    }
}

// ---------------------------------------------------------------------------
// 1D reference solution.
// ---------------------------------------------------------------------------

/// Reference solution of the 1D weighted problem on [a, b]: the flux
/// f |u'|^{p-2} u' is constant, so
/// u(x) = Fa + (Fb − Fa) · ∫_a^x f^{−1/(p−1)} / ∫_a^b f^{−1/(p−1)},
/// computed by composite Simpson quadrature.
pub struct WeightedPHarmonic1d {
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    panel_width: f64,
    /// Cumulative integral of the integrand at panel edges.
    cum: Vec<f64>,
    total: f64,
    integrand: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

/// Builds the reference solution with `quad_points` Simpson panels.
pub fn weighted_p_harmonic_1d(
    f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    p: f64,
    quad_points: usize,
) -> Result<WeightedPHarmonic1d> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter("oracle needs a < b".into()));
    }
    if !(p > 1.0) {
        return Err(Error::InvalidParameter("oracle needs p > 1".into()));
    }
    if quad_points == 0 {
        return Err(Error::InvalidParameter(
            "oracle needs at least one panel".into(),
        ));
    }
    let expo = -1.0 / (p - 1.0);
    let integrand = move |t: f64| f(t).powf(expo);
    let w = (b - a) / quad_points as f64;
    let mut cum = Vec::with_capacity(quad_points + 1);
    cum.push(0.0);
    let mut acc = 0.0;
    for i in 0..quad_points {
        let lo = a + i as f64 * w;
        let hi = lo + w;
        let s = w / 6.0 * (integrand(lo) + 4.0 * integrand(0.5 * (lo + hi)) + integrand(hi));
        if !s.is_finite() {
            return Err(Error::InvalidParameter(
                "oracle integrand is not finite; the weight must stay positive".into(),
            ));
        }
        acc += s;
        cum.push(acc);
    }
    Ok(WeightedPHarmonic1d {
        a,
        b,
        fa,
        fb,
        panel_width: w,
        cum,
        total: acc,
        integrand: Box::new(integrand),
    })
}

impl WeightedPHarmonic1d {
    pub fn eval(&self, x: f64) -> f64 {
        if self.fa == self.fb {
            return self.fa;
        }
        let x = x.clamp(self.a, self.b);
        let panels = self.cum.len() - 1;
        let i = (((x - self.a) / self.panel_width).floor() as usize).min(panels - 1);
        let lo = self.a + i as f64 * self.panel_width;
        let g = &self.integrand;
        let partial = (x - lo) / 6.0 * (g(lo) + 4.0 * g(0.5 * (lo + x)) + g(x));
        let ratio = (self.cum[i] + partial) / self.total;
        self.fa + (self.fb - self.fa) * ratio
    }
}

// ---------------------------------------------------------------------------
// Parameter studies.
// ---------------------------------------------------------------------------

/// A solvable instance with a known reference solution.
#[derive(Clone, Debug)]
pub struct StudyInstance {
    pub shape: DomainShape,
    pub weight: WeightKind,
    pub boundary: BoundaryData,
    pub p: f64,
}

impl StudyInstance {
    /// Resolves the reference solution: the 1D flux oracle on intervals, or
    /// the affine solution for constant weight with affine data.
    pub fn oracle(&self, quad_points: usize) -> Result<Box<dyn Fn(&[f64]) -> f64 + Send + Sync>> {
        match (&self.shape, &self.weight, &self.boundary.kind) {
            (DomainShape::Interval { a, b }, kind, _) => {
                let fa = self.boundary.eval(&[*a]);
                let fb = self.boundary.eval(&[*b]);
                let k = kind.clone();
                let oracle = weighted_p_harmonic_1d(
                    move |t| k.eval(&[t]),
                    *a,
                    *b,
                    fa,
                    fb,
                    self.p,
                    quad_points,
                )?;
                Ok(Box::new(move |x: &[f64]| oracle.eval(x[0])))
            }
            (_, WeightKind::Constant { .. }, BoundaryKind::Affine { .. }) => {
                // Affine data is the exact solution for constant weight.
                let f = self.boundary.clone();
                Ok(Box::new(move |x: &[f64]| f.eval(x)))
            }
            _ => Err(Error::Unsupported(
                "no reference solution for this instance (need an interval, or constant weight \
                 with affine data)"
                    .into(),
            )),
        }
    }

    fn solve_distance(
        &self,
        p: f64,
        eps: f64,
        tol: f64,
        max_iter: usize,
        oracle: &(dyn Fn(&[f64]) -> f64 + Send + Sync),
    ) -> Result<(f64, bool)> {
        let params = GameParams::new(p, self.shape.dim(), eps)?;
        let h = eps / 4.0;
        let grid = GridDomain::build(self.shape.clone(), &params, h)?;
        let weight = WeightField::new(self.weight.clone(), &self.shape.bbox().inflate(eps))?;
        let (v, report) =
            solve_fixed_point(&grid, &weight, &self.boundary, &params, tol, max_iter)?;
        let dist = grid
            .interior_nodes()
            .iter()
            .map(|&id| (v.get(id) - oracle(&grid.node_point(id))).abs())
            .fold(0.0, f64::max);
        Ok((dist, report.converged))
    }
}

/// Solves the instance for each ε (with h = ε/4) and tabulates the sup-norm
/// distance to the reference solution.
pub fn epsilon_study(
    instance: &StudyInstance,
    eps_list: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<StudyResult> {
    let oracle = instance.oracle(20_000)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let (distance, converged) =
            instance.solve_distance(instance.p, eps, tol, max_iter, oracle.as_ref())?;
        rows.push(StudyRow {
            param: eps,
            distance,
            converged,
            alpha: None,
        });
    }
    let fitted_order = fit_order(
        &rows
            .iter()
            .filter(|r| r.converged)
            .map(|r| (r.param, r.distance))
            .collect::<Vec<_>>(),
    );
    Ok(StudyResult {
        rows,
        fitted_order,
        reference: None,
    })
}

/// Solves the instance for each p at the fixed step scale and tabulates the
/// sup-norm distance to the affine limit solution. Requires affine boundary
/// data with Lipschitz constant at most one, on an interval, box or ball.
pub fn p_limit_study(
    instance: &StudyInstance,
    p_list: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<StudyResult> {
    if matches!(instance.shape, DomainShape::LShape { .. }) {
        return Err(Error::Unsupported(
            "the p-limit study is restricted to interval, box and ball domains".into(),
        ));
    }
    let lip = instance.boundary.lipschitz_constant();
    let affine = matches!(instance.boundary.kind, BoundaryKind::Affine { .. })
        || matches!(instance.boundary.kind, BoundaryKind::Constant { .. });
    if !affine || lip > 1.0 + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "the p-limit study needs affine boundary data with Lipschitz constant <= 1 (got {lip})"
        )));
    }
    // Affine data solves the limit equation exactly, with no weight left.
    let reference = instance.boundary.clone();
    let n = instance.shape.dim() as f64;
    let mut rows = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let (distance, converged) =
            instance.solve_distance(p, P_STUDY_EPS, tol, max_iter, &|x: &[f64]| {
                reference.eval(x)
            })?;
        rows.push(StudyRow {
            param: p,
            distance,
            converged,
            alpha: Some((p - 2.0) / (p + n)),
        });
    }
    let fitted_order = fit_order(
        &rows
            .iter()
            .filter(|r| r.converged)
            .map(|r| (r.param, r.distance))
            .collect::<Vec<_>>(),
    );
    Ok(StudyResult {
        rows,
        fitted_order,
        reference: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_linear_for_constant_weight() {
        let o = weighted_p_harmonic_1d(|_| 1.0, 0.0, 1.0, 0.0, 1.0, 4.0, 512).unwrap();
        for &x in &[0.0, 0.1, 0.33, 0.5, 0.91, 1.0] {
            assert!((o.eval(x) - x).abs() < 1e-12, "at {x}");
        }
    }

    #[test]
    fn oracle_constant_for_equal_data() {
        let o = weighted_p_harmonic_1d(|t| 1.0 + t, 0.0, 1.0, 2.0, 2.0, 4.0, 128).unwrap();
        assert_eq!(o.eval(0.37), 2.0);
    }

    #[test]
    fn oracle_matches_closed_form_for_affine_weight() {
        // f(x) = 1+x, p = 4: u(x) = ((1+x)^{2/3} − 1)/(2^{2/3} − 1).
        let o = weighted_p_harmonic_1d(|t| 1.0 + t, 0.0, 1.0, 0.0, 1.0, 4.0, 20_000).unwrap();
        let denom = 2.0f64.powf(2.0 / 3.0) - 1.0;
        for &x in &[0.05f64, 0.25, 0.5, 0.75, 0.95] {
            let exact = ((1.0 + x).powf(2.0 / 3.0) - 1.0) / denom;
            assert!((o.eval(x) - exact).abs() < 1e-10, "at {x}");
        }
    }

    #[test]
    fn oracle_monotone_between_boundary_values() {
        let o = weighted_p_harmonic_1d(|t| 2.0 + t.sin(), 0.0, 1.0, -1.0, 1.0, 3.0, 4096).unwrap();
        let mut prev = o.eval(0.0);
        for k in 1..=100 {
            let v = o.eval(k as f64 / 100.0);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
        assert!((o.eval(0.0) - -1.0).abs() < 1e-12);
        assert!((o.eval(1.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_order_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&e| (e, 3.0 * e * e))
            .collect();
        let q = fit_order(&pts).unwrap();
        assert!((q - 2.0).abs() < 1e-10);
        assert!(fit_order(&pts[..2]).is_none());
    }

    fn instance_1d(weight: WeightKind) -> StudyInstance {
        StudyInstance {
            shape: DomainShape::Interval { a: 0.0, b: 1.0 },
            weight,
            boundary: BoundaryData::new(BoundaryKind::Affine {
                offset: 0.0,
                coeffs: vec![1.0],
            }),
            p: 4.0,
        }
    }

    #[test]
    fn epsilon_study_constant_weight_within_two_cells() {
        let inst = instance_1d(WeightKind::Constant { value: 1.0 });
        let res = epsilon_study(&inst, &[0.2, 0.1, 0.05], 1e-9, 500_000).unwrap();
        for row in &res.rows {
            assert!(row.converged);
            let h = row.param / 4.0;
            assert!(
                row.distance <= 2.0 * h,
                "eps {}: {}",
                row.param,
                row.distance
            );
        }
    }

    #[test]
    fn epsilon_study_empty_list_gives_empty_result() {
        let inst = instance_1d(WeightKind::Constant { value: 1.0 });
        let res = epsilon_study(&inst, &[], 1e-8, 10).unwrap();
        assert!(res.rows.is_empty());
        assert!(res.fitted_order.is_none());
    }

    #[test]
    fn epsilon_study_weighted_distance_shrinks() {
        let inst = instance_1d(WeightKind::Affine { coeffs: vec![1.0] });
        let res = epsilon_study(&inst, &[0.08, 0.02], 1e-8, 1_000_000).unwrap();
        assert!(res.rows.iter().all(|r| r.converged));
        assert!(
            res.rows[1].distance < res.rows[0].distance,
            "{:?}",
            res.distances()
        );
    }

    #[test]
    fn epsilon_study_nonincreasing_along_halvings() {
        // Consecutive halvings must not increase the distance beyond 10%.
        let inst = instance_1d(WeightKind::Affine { coeffs: vec![1.0] });
        let res = epsilon_study(&inst, &[0.08, 0.04, 0.02], 1e-8, 1_000_000).unwrap();
        assert!(res.rows.iter().all(|r| r.converged));
        assert!(res.monotone_within_slack(0.10), "{:?}", res.distances());
    }

    #[test]
    fn p_study_alpha_column_and_affine_exactness() {
        // Constant weight: affine data is the exact discrete solution, so the
        // distance is tiny for every p.
        let inst = StudyInstance {
            shape: DomainShape::Box {
                lo: vec![0.0, 0.0],
                hi: vec![0.5, 0.5],
            },
            weight: WeightKind::Constant { value: 1.0 },
            boundary: BoundaryData::new(BoundaryKind::Affine {
                offset: 0.0,
                coeffs: vec![1.0, 0.0],
            }),
            p: 4.0,
        };
        let res = p_limit_study(&inst, &[4.0, 10.0], 1e-8, 400_000).unwrap();
        for row in &res.rows {
            assert!(row.converged);
            // The iteration stops at residual 1e-8; the remaining gap to the
            // exact affine fixed point scales with the mixing time.
            assert!(row.distance < 1e-5, "p {}: {}", row.param, row.distance);
            let expected = (row.param - 2.0) / (row.param + 2.0);
            assert!((row.alpha.unwrap() - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn p_study_rejects_steep_or_lshape_instances() {
        let steep = StudyInstance {
            shape: DomainShape::Interval { a: 0.0, b: 1.0 },
            weight: WeightKind::Constant { value: 1.0 },
            boundary: BoundaryData::new(BoundaryKind::Affine {
                offset: 0.0,
                coeffs: vec![2.0],
            }),
            p: 4.0,
        };
        assert!(p_limit_study(&steep, &[4.0], 1e-8, 10).is_err());
        let lshape = StudyInstance {
            shape: DomainShape::LShape { a: -1.0, b: 1.0 },
            weight: WeightKind::Constant { value: 1.0 },
            boundary: BoundaryData::new(BoundaryKind::Affine {
                offset: 0.0,
                coeffs: vec![0.5, 0.5],
            }),
            p: 4.0,
        };
        assert!(p_limit_study(&lshape, &[4.0], 1e-8, 10).is_err());
    }

    #[test]
    fn study_csv_shape() {
        let res = StudyResult {
            rows: vec![
                StudyRow {
                    param: 0.2,
                    distance: 0.1,
                    converged: true,
                    alpha: None,
                },
                StudyRow {
                    param: 0.1,
                    distance: 0.05,
                    converged: true,
                    alpha: None,
                },
            ],
            fitted_order: None,
            reference: None,
        };
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("parameter,distance,order_so_far,converged"));
    }
}
