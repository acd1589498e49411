//! Consistency checks independent of the lattice solver: smooth test
//! functions, the predicted infinitesimal generator of the game, continuum
//! ball quadratures and the ball moment identity.

use crate::error::{Error, Result};
use crate::geom::{add_scaled, dot, norm, Point};
use crate::params::{GameParams, DELTA_GRAD};
use crate::study::{fit_order, StudyResult, StudyRow};
use crate::weight::{gamma_value, WeightField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// C² test functions with closed-form derivatives.
#[derive(Clone, Debug, PartialEq)]
pub enum SmoothTestFunction {
    /// φ(x) = b + a·x.
    Affine { offset: f64, coeffs: Vec<f64> },
    /// φ(x) = ½ xᵀQx + a·x + b with symmetric Q.
    Quadratic {
        q: Vec<Vec<f64>>,
        a: Vec<f64>,
        b: f64,
    },
    /// φ(x) = Σ cᵢ xᵢ^{kᵢ} with integer exponents kᵢ ≥ 1.
    SeparablePower {
        coeffs: Vec<f64>,
        exponents: Vec<u32>,
    },
}

impl SmoothTestFunction {
    pub fn dim(&self) -> usize {
        match self {
            SmoothTestFunction::Affine { coeffs, .. } => coeffs.len(),
            SmoothTestFunction::Quadratic { a, .. } => a.len(),
            SmoothTestFunction::SeparablePower { coeffs, .. } => coeffs.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SmoothTestFunction::Affine { coeffs, .. } => {
                if coeffs.is_empty() {
                    return Err(Error::InvalidParameter(
                        "affine phi needs coefficients".into(),
                    ));
                }
            }
            SmoothTestFunction::Quadratic { q, a, .. } => {
                if a.is_empty() || q.len() != a.len() || q.iter().any(|row| row.len() != a.len()) {
                    return Err(Error::InvalidParameter(
                        "quadratic phi needs a square matrix matching the linear part".into(),
                    ));
                }
                for i in 0..a.len() {
                    for j in 0..i {
                        if (q[i][j] - q[j][i]).abs() > 1e-12 * (1.0 + q[i][j].abs()) {
                            return Err(Error::InvalidParameter(
                                "quadratic phi matrix must be symmetric".into(),
                            ));
                        }
                    }
                }
            }
            SmoothTestFunction::SeparablePower { coeffs, exponents } => {
                if coeffs.is_empty() || coeffs.len() != exponents.len() {
                    return Err(Error::InvalidParameter(
                        "separable phi needs one exponent per coefficient".into(),
                    ));
                }
                if exponents.iter().any(|&k| k < 1) {
                    return Err(Error::InvalidParameter(
                        "separable phi exponents must be >= 1".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SmoothTestFunction::Affine { offset, coeffs } => offset + dot(coeffs, x),
            SmoothTestFunction::Quadratic { q, a, b } => {
                let mut quad = 0.0;
                for i in 0..x.len() {
                    quad += x[i] * dot(&q[i], x);
                }
                0.5 * quad + dot(a, x) + b
            }
            SmoothTestFunction::SeparablePower { coeffs, exponents } => coeffs
                .iter()
                .zip(exponents)
                .zip(x)
                .map(|((c, &k), v)| c * v.powi(k as i32))
                .sum(),
        }
    }

    pub fn grad(&self, x: &[f64]) -> Point {
        match self {
            SmoothTestFunction::Affine { coeffs, .. } => coeffs.clone(),
            SmoothTestFunction::Quadratic { q, a, .. } => {
                (0..x.len()).map(|i| dot(&q[i], x) + a[i]).collect()
            }
            SmoothTestFunction::SeparablePower { coeffs, exponents } => coeffs
                .iter()
                .zip(exponents)
                .zip(x)
                .map(|((c, &k), v)| c * k as f64 * v.powi(k as i32 - 1))
                .collect(),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = x.len();
        match self {
            SmoothTestFunction::Affine { .. } => vec![vec![0.0; n]; n],
            SmoothTestFunction::Quadratic { q, .. } => q.clone(),
            SmoothTestFunction::SeparablePower { coeffs, exponents } => {
                let mut h = vec![vec![0.0; n]; n];
                for i in 0..n {
                    let k = exponents[i];
                    if k >= 2 {
                        h[i][i] = coeffs[i] * (k * (k - 1)) as f64 * x[i].powi(k as i32 - 2);
                    }
                }
                h
            }
        }
    }

    pub fn laplacian(&self, x: &[f64]) -> f64 {
        let h = self.hessian(x);
        (0..x.len()).map(|i| h[i][i]).sum()
    }

    /// Compares closed-form gradient and Hessian with central differences at
    /// the given points (relative tolerance 1e-5).
    pub fn check_derivatives(&self, points: &[Point]) -> Result<()> {
        let fd = 1e-5;
        for x in points {
            let g = self.grad(x);
            let hess = self.hessian(x);
            let scale_g = norm(&g).max(1.0);
            let mut y = x.clone();
            for d in 0..x.len() {
                y[d] = x[d] + fd;
                let fp = self.eval(&y);
                let gp = self.grad(&y);
                y[d] = x[d] - fd;
                let fm = self.eval(&y);
                let gm = self.grad(&y);
                y[d] = x[d];
                let g_fd = (fp - fm) / (2.0 * fd);
                if (g[d] - g_fd).abs() / scale_g > 1e-5 {
                    return Err(Error::GradientCheck(format!(
                        "phi gradient component {d} at {x:?}"
                    )));
                }
                for e in 0..x.len() {
                    let h_fd = (gp[e] - gm[e]) / (2.0 * fd);
                    let scale_h = hess[d][e].abs().max(1.0);
                    if (hess[d][e] - h_fd).abs() / scale_h > 1e-5 {
                        return Err(Error::GradientCheck(format!(
                            "phi hessian entry ({d},{e}) at {x:?}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The three bracket terms and the denominator of the predicted generator.
#[derive(Clone, Copy, Debug)]
pub struct GeneratorParts {
    /// f Δφ
    pub laplace: f64,
    /// f (p−2) D²φ ξ·ξ with ξ = Dφ/|Dφ|
    pub game: f64,
    /// Dφ·Df
    pub drift: f64,
    /// |Df| + 2 f (p+n)
    pub denominator: f64,
}

impl GeneratorParts {
    pub fn value(&self) -> f64 {
        (self.laplace + self.game + self.drift) / self.denominator
    }
}

/// Term-by-term breakdown of the limiting one-step expansion of the game
/// operator on a smooth test function.
pub fn predicted_generator_parts(
    phi: &SmoothTestFunction,
    x: &[f64],
    w: &WeightField,
    params: &GameParams,
) -> Result<GeneratorParts> {
    let dphi = phi.grad(x);
    let dphi_norm = norm(&dphi);
    if dphi_norm < DELTA_GRAD {
        return Err(Error::InvalidParameter(
            "predicted generator needs a nondegenerate test-function gradient".into(),
        ));
    }
    let f = w.eval(x)?;
    let df = w.grad(x)?;
    let xi: Point = dphi.iter().map(|v| v / dphi_norm).collect();
    let hess = phi.hessian(x);
    let hxi: Point = (0..x.len()).map(|i| dot(&hess[i], &xi)).collect();
    Ok(GeneratorParts {
        laplace: f * phi.laplacian(x),
        game: f * (params.p - 2.0) * dot(&hxi, &xi),
        drift: dot(&dphi, &df),
        denominator: norm(&df) + f * params.gradient_scale(),
    })
}

/// Expected limit of `(T̃φ(x) − φ(x)) / ε²` as ε → 0, where T̃ is the
/// continuum one-step operator of the game.
pub fn predicted_generator(
    phi: &SmoothTestFunction,
    x: &[f64],
    w: &WeightField,
    params: &GameParams,
) -> Result<f64> {
    Ok(predicted_generator_parts(phi, x, w, params)?.value())
}

// ---------------------------------------------------------------------------
// Continuum ball quadratures.
// ---------------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-like initial guess.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            // p1 = P_n(x), derivative via the standard identity.
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0, x);
        for k in 2..=n {
            let kf = k as f64;
            let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Mean value of `phi` over the closed ball B_ε(center), by tensor-product
/// Gauss quadrature in radius/angle coordinates. Supports n ≤ 3.
pub fn ball_mean(phi: &dyn Fn(&[f64]) -> f64, center: &[f64], eps: f64, n: usize) -> Result<f64> {
    match n {
        1 => {
            let (t, w) = gauss_legendre(64);
            let mut acc = 0.0;
            for i in 0..t.len() {
                acc += w[i] * phi(&[center[0] + eps * t[i]]);
            }
            Ok(0.5 * acc)
        }
        2 => {
            let (t, w) = gauss_legendre(48);
            let n_ang = 256usize;
            let mut acc = 0.0;
            for j in 0..n_ang {
                let th = 2.0 * std::f64::consts::PI * j as f64 / n_ang as f64;
                let (c, s) = (th.cos(), th.sin());
                for i in 0..t.len() {
                    let r = 0.5 * (t[i] + 1.0); // radius fraction in [0, 1]
                    let p = [center[0] + eps * r * c, center[1] + eps * r * s];
                    // d(area)/dr ∝ r; the 2/N̄ normalizations fold into
                    // "mean of w·r samples / mean of w·r on 1".
                    acc += w[i] * r * phi(&p);
                }
            }
            Ok(acc / n_ang as f64) // Σ w_i r_i = 1 for the unit function
        }
        3 => {
            let (tr, wr) = gauss_legendre(48);
            let (tu, wu) = gauss_legendre(32);
            let n_az = 64usize;
            let mut acc = 0.0;
            for j in 0..n_az {
                let az = 2.0 * std::f64::consts::PI * j as f64 / n_az as f64;
                let (ca, sa) = (az.cos(), az.sin());
                for (u, wu_i) in tu.iter().zip(&wu) {
                    let sq = (1.0 - u * u).sqrt();
                    let dir = [sq * ca, sq * sa, *u];
                    for i in 0..tr.len() {
                        let r = 0.5 * (tr[i] + 1.0);
                        let p = [
                            center[0] + eps * r * dir[0],
                            center[1] + eps * r * dir[1],
                            center[2] + eps * r * dir[2],
                        ];
                        acc += wr[i] * wu_i * r * r * phi(&p);
                    }
                }
            }
            // Normalization: Σ_r w r² = ∫₀¹ 2 s² ds = 2/3, Σ_u w = 2.
            Ok(acc / (n_az as f64 * 2.0 * 2.0 / 3.0))
        }
        _ => Err(Error::Unsupported(format!(
            "continuum ball mean implemented for n <= 3, got n = {n}"
        ))),
    }
}

fn golden_section_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..90 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let xm = 0.5 * (a + b);
    (xm, f(xm).max(fc).max(fd))
}

/// Extremum (max or min) of `phi` over the closed ball B̄_ε(center): dense
/// deterministic sampling followed by golden-section refinement. n ≤ 3.
pub fn ball_extremum(
    phi: &dyn Fn(&[f64]) -> f64,
    center: &[f64],
    eps: f64,
    n: usize,
    maximize: bool,
) -> Result<f64> {
    let sign = if maximize { 1.0 } else { -1.0 };
    let g = |p: &[f64]| sign * phi(p);
    let best = match n {
        1 => {
            let m = 1024usize;
            let mut best_x = center[0];
            let mut best_v = f64::NEG_INFINITY;
            for i in 0..=m {
                let x = center[0] - eps + 2.0 * eps * i as f64 / m as f64;
                let v = g(&[x]);
                if v > best_v {
                    best_v = v;
                    best_x = x;
                }
            }
            let span = 2.0 * eps / m as f64;
            let lo = (best_x - span).max(center[0] - eps);
            let hi = (best_x + span).min(center[0] + eps);
            let (_, refined) = golden_section_max(&|x| g(&[x]), lo, hi);
            refined.max(best_v)
        }
        2 => {
            let n_ang = 720usize;
            let n_rad = 16usize;
            let mut best = (f64::NEG_INFINITY, 0.0, 0.0); // (value, theta, radius)
            for j in 0..n_ang {
                let th = 2.0 * std::f64::consts::PI * j as f64 / n_ang as f64;
                let (c, s) = (th.cos(), th.sin());
                for i in 0..=n_rad {
                    let r = eps * i as f64 / n_rad as f64;
                    let v = g(&[center[0] + r * c, center[1] + r * s]);
                    if v > best.0 {
                        best = (v, th, r);
                    }
                }
            }
            // Nested refinement: best radius for a direction, then the angle.
            let radial_max = |th: f64| -> f64 {
                let (c, s) = (th.cos(), th.sin());
                let f_r = |r: f64| g(&[center[0] + r * c, center[1] + r * s]);
                let (_, v) = golden_section_max(&f_r, 0.0, eps);
                v.max(f_r(0.0)).max(f_r(eps))
            };
            let dth = 2.0 * std::f64::consts::PI / n_ang as f64;
            let (_, refined) =
                golden_section_max(&radial_max, best.1 - 2.0 * dth, best.1 + 2.0 * dth);
            refined.max(best.0)
        }
        3 => {
            // Fibonacci sphere of directions, then nested golden refinement
            // in spherical coordinates.
            let n_dir = 2048usize;
            let n_rad = 8usize;
            let golden_angle = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            let dir_of = |u: f64, az: f64| -> [f64; 3] {
                let sq = (1.0 - u * u).max(0.0).sqrt();
                [sq * az.cos(), sq * az.sin(), u]
            };
            let mut best = (f64::NEG_INFINITY, 0.0, 0.0); // (value, u, az)
            for j in 0..n_dir {
                let u = 1.0 - 2.0 * (j as f64 + 0.5) / n_dir as f64;
                let az = golden_angle * j as f64;
                let d = dir_of(u, az);
                for i in 0..=n_rad {
                    let r = eps * i as f64 / n_rad as f64;
                    let v = g(&[
                        center[0] + r * d[0],
                        center[1] + r * d[1],
                        center[2] + r * d[2],
                    ]);
                    if v > best.0 {
                        best = (v, u, az);
                    }
                }
            }
            let radial_max = |u: f64, az: f64| -> f64 {
                let d = dir_of(u.clamp(-1.0, 1.0), az);
                let f_r = |r: f64| {
                    g(&[
                        center[0] + r * d[0],
                        center[1] + r * d[1],
                        center[2] + r * d[2],
                    ])
                };
                let (_, v) = golden_section_max(&f_r, 0.0, eps);
                v.max(f_r(0.0)).max(f_r(eps))
            };
            let (mut u, mut az) = (best.1, best.2);
            let du = 2.0 / (n_dir as f64).sqrt();
            let mut value = best.0;
            for _ in 0..3 {
                let (u_new, v1) = golden_section_max(&|t| radial_max(t, az), u - du, u + du);
                u = u_new.clamp(-1.0, 1.0);
                let (az_new, v2) = golden_section_max(&|t| radial_max(u, t), az - du, az + du);
                az = az_new;
                value = value.max(v1).max(v2);
            }
            value
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "continuum ball extremum implemented for n <= 3, got n = {n}"
            )))
        }
    };
    Ok(sign * best)
}

// ---------------------------------------------------------------------------
// Taylor consistency of the continuum operator against the generator.
// ---------------------------------------------------------------------------

/// One-step action of the continuum game operator on `phi` at `x`, minus
/// `phi(x)`, for step scale `eps`.
pub fn continuum_step_increment(
    phi: &SmoothTestFunction,
    x: &[f64],
    w: &WeightField,
    params: &GameParams,
    eps: f64,
) -> Result<f64> {
    let n = params.n;
    let phi_x = phi.eval(x);
    let f = w.eval(x)?;
    let df = w.grad(x)?;
    let gn = norm(&df);
    let g = gamma_value(f, gn, params);
    let eval = |p: &[f64]| phi.eval(p);
    let mx = ball_extremum(&eval, x, eps, n, true)?;
    let mn = ball_extremum(&eval, x, eps, n, false)?;
    let mean = ball_mean(&eval, x, eps, n)?;
    let drift = if gn < DELTA_GRAD {
        0.0
    } else {
        let target = add_scaled(x, eps * eps / gn, &df);
        (1.0 - g) * (phi.eval(&target) - phi_x)
    };
    Ok(g * params.alpha * 0.5 * ((mx - phi_x) + (mn - phi_x))
        + g * params.beta * (mean - phi_x)
        + drift)
}

/// For each ε in `eps_list`, compares `(T̃φ(x) − φ(x))/ε²` with the predicted
/// generator and reports the deviation plus the fitted order of the remainder.
pub fn taylor_consistency(
    phi: &SmoothTestFunction,
    x: &[f64],
    w: &WeightField,
    params: &GameParams,
    eps_list: &[f64],
) -> Result<StudyResult> {
    phi.validate()?;
    let generator = predicted_generator(phi, x, w, params)?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "consistency step scale must be positive, got {eps}"
            )));
        }
        let inc = continuum_step_increment(phi, x, w, params, eps)?;
        let dev = (inc / (eps * eps) - generator).abs();
        rows.push(StudyRow {
            param: eps,
            distance: dev,
            converged: true,
            alpha: None,
        });
    }
    let fitted_order = fit_order(
        &rows
            .iter()
            .filter(|r| r.distance > 1e-13)
            .map(|r| (r.param, r.distance))
            .collect::<Vec<_>>(),
    );
    Ok(StudyResult {
        rows,
        fitted_order,
        reference: Some(generator),
    })
}

/// Monte Carlo estimate of the mean of h_i² over the ball B_ε(0), returned as
/// the relative deviation from ε²/(n+2). Rejection sampling from the bounding
/// cube; fixed internal seed keyed on (n, points) for reproducibility.
pub fn moment_check(n: usize, eps: f64, quadrature_points: usize) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return Err(Error::Unsupported(format!(
            "moment check defined for n in {{1,2,3}}, got {n}"
        )));
    }
    if !(eps > 0.0) || quadrature_points == 0 {
        return Err(Error::InvalidParameter(
            "moment check needs eps > 0 and at least one sample".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x4d4f_4d45_4e54);
    rng.set_stream(n as u64);
    let mut acc = 0.0;
    let mut h = vec![0.0; n];
    for _ in 0..quadrature_points {
        loop {
            let mut r2 = 0.0;
            for v in h.iter_mut() {
                *v = rng.gen_range(-eps..=eps);
                r2 += *v * *v;
            }
            if r2 <= eps * eps {
                break;
            }
        }
        acc += h[0] * h[0];
    }
    let estimate = acc / quadrature_points as f64;
    let reference = eps * eps / (n as f64 + 2.0);
    Ok((estimate - reference).abs() / reference)
}

/// The reference value ε²/(n+2) of the ball second moment.
pub fn moment_reference(n: usize, eps: f64) -> f64 {
    eps * eps / (n as f64 + 2.0)
}
