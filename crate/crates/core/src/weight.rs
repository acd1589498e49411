//! The weight function f and the quantities derived from it: the mixing
//! probability γ, the drift target and the per-move probability distribution.

use crate::error::{Error, Result};
use crate::geom::{add_scaled, dot, norm, Point};
use crate::params::{GameParams, DELTA_GRAD};
use crate::shape::Bbox;

/// Built-in weight catalog. All entries are C¹ with closed-form gradients.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightKind {
    /// f(x) = c, c > 0.
    Constant { value: f64 },
    /// f(x) = 1 + a·x.
    Affine { coeffs: Vec<f64> },
    /// f(x) = exp(a·x).
    Exponential { coeffs: Vec<f64> },
    /// f(x) = c + sin(k·x), c > 1.
    Sinusoidal { offset: f64, wave: Vec<f64> },
}

impl WeightKind {
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        match self {
            WeightKind::Constant { value } => *value,
            WeightKind::Affine { coeffs } => 1.0 + dot(coeffs, x),
            WeightKind::Exponential { coeffs } => dot(coeffs, x).exp(),
            WeightKind::Sinusoidal { offset, wave } => offset + dot(wave, x).sin(),
        }
    }

    fn grad(&self, x: &[f64]) -> Point {
        match self {
            WeightKind::Constant { .. } => vec![0.0; x.len()],
            WeightKind::Affine { coeffs } => coeffs.clone(),
            WeightKind::Exponential { coeffs } => {
                let v = dot(coeffs, x).exp();
                coeffs.iter().map(|a| a * v).collect()
            }
            WeightKind::Sinusoidal { offset: _, wave } => {
                let c = dot(wave, x).cos();
                wave.iter().map(|k| k * c).collect()
            }
        }
    }

    fn dim_matches(&self, n: usize) -> bool {
        match self {
            WeightKind::Constant { .. } => true,
            WeightKind::Affine { coeffs } | WeightKind::Exponential { coeffs } => coeffs.len() == n,
            WeightKind::Sinusoidal { wave, .. } => wave.len() == n,
        }
    }

    /// Analytic range of f over a box, slightly widened so that the
    /// evaluation-time bound check never trips from rounding alone.
    fn bounds_over(&self, bbox: &Bbox) -> Result<(f64, f64)> {
        let widen = |lo: f64, hi: f64| {
            let pad = 1e-9 * hi.abs().max(1.0);
            (lo - pad, hi + pad)
        };
        let linear_range = |coeffs: &[f64]| {
            // A linear form attains its extremes over a box at corners.
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for c in bbox.corners() {
                let v = dot(coeffs, &c);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            (lo, hi)
        };
        let (lo, hi) = match self {
            WeightKind::Constant { value } => (*value, *value),
            WeightKind::Affine { coeffs } => {
                let (lo, hi) = linear_range(coeffs);
                (1.0 + lo, 1.0 + hi)
            }
            WeightKind::Exponential { coeffs } => {
                let (lo, hi) = linear_range(coeffs);
                (lo.exp(), hi.exp())
            }
            WeightKind::Sinusoidal { offset, .. } => (offset - 1.0, offset + 1.0),
        };
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weight is not uniformly positive on the domain (range [{lo}, {hi}])"
            )));
        }
        Ok(widen(lo, hi))
    }
}

/// A weight function together with its declared positive bounds on the
/// covered region. Bounds are checked at every evaluation.
#[derive(Clone, Debug)]
pub struct WeightField {
    kind: WeightKind,
    f_lower: f64,
    f_upper: f64,
    /// Central-difference step used by the self-check and the fallback mode.
    fd_step: f64,
    use_fd_gradient: bool,
}

impl WeightField {
    /// Builds the field for a region with bounding box `bbox`, derives the
    /// bounds analytically and runs the gradient self-check.
    pub fn new(kind: WeightKind, bbox: &Bbox) -> Result<Self> {
        if !kind.dim_matches(bbox.dim()) {
            return Err(Error::InvalidParameter(
                "weight coefficient dimension does not match the domain".into(),
            ));
        }
        let (f_lower, f_upper) = kind.bounds_over(bbox)?;
        let field = Self {
            kind,
            f_lower,
            f_upper,
            fd_step: 1e-6 * bbox.diameter().max(1e-12),
            use_fd_gradient: false,
        };
        field.check_gradient(&sample_points(bbox))?;
        Ok(field)
    }

    /// Switches gradient evaluation to central finite differences.
    pub fn with_fd_gradient(mut self) -> Self {
        self.use_fd_gradient = true;
        self
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.f_lower, self.f_upper)
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    /// Evaluates f(x), enforcing the declared bounds.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let v = self.kind.eval(x);
        if !(v >= self.f_lower && v <= self.f_upper) {
            return Err(Error::WeightBounds {
                point: x.to_vec(),
                value: v,
                lower: self.f_lower,
                upper: self.f_upper,
            });
        }
        Ok(v)
    }

    /// Evaluates Df(x).
    pub fn grad(&self, x: &[f64]) -> Result<Point> {
        self.eval(x)?;
        if self.use_fd_gradient {
            Ok(self.grad_fd(x))
        } else {
            Ok(self.kind.grad(x))
        }
    }

    fn grad_fd(&self, x: &[f64]) -> Point {
        let h = self.fd_step;
        let mut g = vec![0.0; x.len()];
        let mut y = x.to_vec();
        for d in 0..x.len() {
            y[d] = x[d] + h;
            let fp = self.kind.eval(&y);
            y[d] = x[d] - h;
            let fm = self.kind.eval(&y);
            y[d] = x[d];
            g[d] = (fp - fm) / (2.0 * h);
        }
        g
    }

    /// Compares the closed-form gradient against central differences at the
    /// given points (relative tolerance 1e-4).
    pub fn check_gradient(&self, points: &[Point]) -> Result<()> {
        for x in points {
            let exact = self.kind.grad(x);
            let approx = self.grad_fd(x);
            let scale = norm(&exact).max(1.0);
            for d in 0..x.len() {
                let err = (exact[d] - approx[d]).abs() / scale;
                if err > 1e-4 {
                    return Err(Error::GradientCheck(format!(
                        "component {d} at {x:?}: closed-form {} vs central difference {}",
                        exact[d], approx[d]
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Deterministic sample of a box: center, corners and edge midpoints.
fn sample_points(bbox: &Bbox) -> Vec<Point> {
    let center: Point = bbox
        .lo
        .iter()
        .zip(&bbox.hi)
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let mut pts = vec![center.clone()];
    for c in bbox.corners() {
        let mid = c
            .iter()
            .zip(&center)
            .map(|(a, b)| 0.5 * (a + b))
            .collect::<Point>();
        pts.push(mid);
        pts.push(c);
    }
    pts
}

/// Mixing probability between the tug-of-war/noise moves and the drift move,
/// as a pure function of f(x) and |Df(x)|.
///
/// Returns exactly 1 when the gradient is treated as zero.
pub fn gamma_value(f: f64, grad_norm: f64, params: &GameParams) -> f64 {
    if grad_norm < DELTA_GRAD {
        1.0
    } else {
        f / (grad_norm / params.gradient_scale() + f)
    }
}

/// γ(x) for a weight field. Only meaningful inside Ω; callers that walk the
/// grid must never request it on the boundary layer.
pub fn gamma(x: &[f64], w: &WeightField, params: &GameParams) -> Result<f64> {
    let f = w.eval(x)?;
    let g = norm(&w.grad(x)?);
    Ok(gamma_value(f, g, params))
}

/// Target of the drift move, `x + ε² Df(x)/|Df(x)|`, or `None` when the
/// gradient is treated as zero.
pub fn drift_target(x: &[f64], w: &WeightField, params: &GameParams) -> Result<Option<Point>> {
    let g = w.grad(x)?;
    let gn = norm(&g);
    if gn < DELTA_GRAD {
        return Ok(None);
    }
    let scale = params.eps * params.eps / gn;
    Ok(Some(add_scaled(x, scale, &g)))
}

/// Probabilities of the four moves at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MoveDistribution {
    pub player_a: f64,
    pub player_b: f64,
    pub noise: f64,
    pub drift: f64,
}

impl MoveDistribution {
    pub fn from_gamma(g: f64, params: &GameParams) -> Self {
        MoveDistribution {
            player_a: g * params.alpha * 0.5,
            player_b: g * params.alpha * 0.5,
            noise: g * params.beta,
            // Exactly zero when gamma is exactly one (zero-gradient case).
            drift: 1.0 - g,
        }
    }

    pub fn sum(&self) -> f64 {
        self.player_a + self.player_b + self.noise + self.drift
    }
}

/// Move distribution at `x`.
pub fn move_distribution(
    x: &[f64],
    w: &WeightField,
    params: &GameParams,
) -> Result<MoveDistribution> {
    Ok(MoveDistribution::from_gamma(gamma(x, w, params)?, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_bbox(n: usize) -> Bbox {
        Bbox {
            lo: vec![0.0; n],
            hi: vec![1.0; n],
        }
    }

    fn params(p: f64, n: usize) -> GameParams {
        GameParams::new(p, n, 0.1).unwrap()
    }

    #[test]
    fn gamma_is_one_for_zero_gradient() {
        let gp = params(4.0, 2);
        assert_eq!(gamma_value(1.7, 0.0, &gp), 1.0);
        let w = WeightField::new(WeightKind::Constant { value: 2.0 }, &unit_bbox(2)).unwrap();
        assert_eq!(gamma(&[0.5, 0.5], &w, &gp).unwrap(), 1.0);
    }

    #[test]
    fn gamma_half_when_gradient_matches_scale() {
        let gp = params(4.0, 2);
        // |Df| = 2(p+n) makes the two terms in the denominator equal.
        let g = gamma_value(1.0, gp.gradient_scale(), &gp);
        assert!((g - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gamma_direct_arithmetic() {
        let gp = params(4.0, 2);
        // f = 2, |Df| = 1: 2 / (1/12 + 2) = 24/25.
        let g = gamma_value(2.0, 1.0, &gp);
        assert!((g - 0.96).abs() < 1e-15);
    }

    #[test]
    fn gamma_scale_invariant_in_weight() {
        let gp = params(7.3, 3);
        for &(f, gn) in &[(1.0, 0.5), (2.5, 3.0), (0.7, 10.0)] {
            let base = gamma_value(f, gn, &gp);
            for &c in &[0.1, 2.0, 55.0] {
                let scaled = gamma_value(c * f, c * gn, &gp);
                assert!((base - scaled).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn contraction_factor_below_one_when_drifting() {
        // γα + 1 − γ < 1 whenever γ < 1 (i.e. |Df| ≥ cutoff).
        let gp = params(4.0, 2);
        for &(f, gn) in &[(1.0, 1e-6), (1.0, 1.0), (3.0, 20.0), (0.5, 0.01)] {
            let g = gamma_value(f, gn, &gp);
            assert!(g * gp.alpha + 1.0 - g < 1.0);
        }
    }

    #[test]
    fn drift_target_unit_gradient() {
        let gp = params(4.0, 2);
        let w = WeightField::new(
            WeightKind::Affine {
                coeffs: vec![1.0, 0.0],
            },
            &unit_bbox(2),
        )
        .unwrap();
        let t = drift_target(&[0.0, 0.0], &w, &gp).unwrap().unwrap();
        assert!((t[0] - 0.01).abs() < 1e-15);
        assert_eq!(t[1], 0.0);
    }

    #[test]
    fn drift_target_none_for_constant_weight() {
        let gp = params(4.0, 2);
        let w = WeightField::new(WeightKind::Constant { value: 1.0 }, &unit_bbox(2)).unwrap();
        assert!(drift_target(&[0.3, 0.3], &w, &gp).unwrap().is_none());
    }

    #[test]
    fn drift_target_normalizes_gradient() {
        let gp = params(4.0, 2);
        let w = WeightField::new(
            WeightKind::Affine {
                coeffs: vec![3.0, 4.0],
            },
            &unit_bbox(2),
        )
        .unwrap();
        // |Df| = 5, so the step is eps² (3/5, 4/5).
        let t = drift_target(&[0.0, 0.0], &w, &gp).unwrap().unwrap();
        assert!((t[0] - 0.006).abs() < 1e-15);
        assert!((t[1] - 0.008).abs() < 1e-15);
    }

    #[test]
    fn drift_step_length_is_eps_squared() {
        let gp = GameParams::new(5.5, 2, 0.37).unwrap();
        let w = WeightField::new(
            WeightKind::Exponential {
                coeffs: vec![0.8, -0.3],
            },
            &unit_bbox(2),
        )
        .unwrap();
        let x = vec![0.4, 0.6];
        let t = drift_target(&x, &w, &gp).unwrap().unwrap();
        let step = crate::geom::dist(&x, &t);
        assert!((step - gp.eps * gp.eps).abs() < 1e-15);
        assert!(step <= gp.eps);
    }

    #[test]
    fn move_distribution_no_drift_case() {
        let gp = GameParams::new(4.0, 1, 0.1).unwrap(); // alpha = 0.4
        let md = MoveDistribution::from_gamma(1.0, &gp);
        assert_eq!(md.drift, 0.0);
        assert!((md.player_a - gp.alpha / 2.0).abs() < 1e-16);
        assert!((md.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn move_distribution_matches_arithmetic() {
        // γ = 1 and α = 1/3 → (1/6, 1/6, 2/3, 0); γ = 1/2 → (1/12, 1/12, 1/3, 1/2).
        let gp = GameParams::new(4.0, 2, 0.1).unwrap(); // alpha = 1/3
        let full = MoveDistribution::from_gamma(1.0, &gp);
        assert!((full.player_a - 1.0 / 6.0).abs() < 1e-15);
        assert!((full.noise - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(full.drift, 0.0);
        let half = MoveDistribution::from_gamma(0.5, &gp);
        assert!((half.player_a - 1.0 / 12.0).abs() < 1e-15);
        assert!((half.noise - 1.0 / 3.0).abs() < 1e-15);
        assert!((half.drift - 0.5).abs() < 1e-15);
        assert!((half.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bounds_checked_at_evaluation() {
        let w = WeightField::new(
            WeightKind::Affine { coeffs: vec![1.0] },
            &Bbox {
                lo: vec![0.0],
                hi: vec![1.0],
            },
        )
        .unwrap();
        assert!(w.eval(&[0.5]).is_ok());
        // Outside the declared box the affine weight leaves its bounds.
        assert!(matches!(w.eval(&[5.0]), Err(Error::WeightBounds { .. })));
        // ... and can even turn negative.
        assert!(w.eval(&[-3.0]).is_err());
    }

    #[test]
    fn nonpositive_weight_rejected_at_construction() {
        // 1 + 3x reaches -2 on [-1, 1].
        let r = WeightField::new(
            WeightKind::Affine { coeffs: vec![3.0] },
            &Bbox {
                lo: vec![-1.0],
                hi: vec![1.0],
            },
        );
        assert!(r.is_err());
        // Sinusoidal needs offset > 1.
        let r = WeightField::new(
            WeightKind::Sinusoidal {
                offset: 0.9,
                wave: vec![1.0],
            },
            &Bbox {
                lo: vec![0.0],
                hi: vec![1.0],
            },
        );
        assert!(r.is_err());
    }

    #[test]
    fn closed_form_gradients_match_central_differences() {
        let bbox = Bbox {
            lo: vec![-0.5, 0.1],
            hi: vec![0.8, 1.2],
        };
        for kind in [
            WeightKind::Constant { value: 1.3 },
            WeightKind::Affine {
                coeffs: vec![0.4, -0.2],
            },
            WeightKind::Exponential {
                coeffs: vec![0.7, 0.1],
            },
            WeightKind::Sinusoidal {
                offset: 2.5,
                wave: vec![1.1, 0.3],
            },
        ] {
            // Construction runs the self-check; failure would be an Err here.
            let w = WeightField::new(kind, &bbox).unwrap();
            w.check_gradient(&sample_points(&bbox)).unwrap();
        }
    }

    #[test]
    fn fd_gradient_mode_agrees_with_closed_form() {
        let bbox = unit_bbox(2);
        let w = WeightField::new(
            WeightKind::Exponential {
                coeffs: vec![0.5, -0.3],
            },
            &bbox,
        )
        .unwrap();
        let wfd = w.clone().with_fd_gradient();
        let x = vec![0.4, 0.7];
        let a = w.grad(&x).unwrap();
        let b = wfd.grad(&x).unwrap();
        for d in 0..2 {
            assert!((a[d] - b[d]).abs() < 1e-6);
        }
    }
}
