//! Game constants derived from the exponent `p`, the dimension `n` and the
//! step scale `ε`.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Gradient magnitudes below this threshold are treated as exactly zero.
///
/// The drift move is defined through `Df/|Df|`, with a separate case when the
/// gradient vanishes; with finite-difference gradients an exact zero is not
/// attainable, so this cutoff decides the case split.
pub const DELTA_GRAD: f64 = 1e-12;

/// Numeric backbone of the game: exponent, dimension, step scale and the
/// derived mixing constants.
///
/// Invariants: `alpha = (p - 2)/(p + n)`, `beta = 1 - alpha`, both strictly in
/// (0, 1), and `alpha + beta == 1` exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub p: f64,
    pub n: usize,
    pub eps: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl GameParams {
    /// Builds the parameter set, rejecting `p ≤ 2`, `n < 1` and `eps` outside
    /// (0, 1]. The upper bound on `eps` keeps the drift step `ε²` no longer
    /// than the move radius `ε`.
    pub fn new(p: f64, n: usize, eps: f64) -> Result<Self> {
        if !p.is_finite() || p <= 2.0 {
            return Err(Error::InvalidParameter(format!(
                "exponent p must be finite and > 2, got {p}"
            )));
        }
        if n < 1 {
            return Err(Error::InvalidParameter(
                "dimension n must be at least 1".into(),
            ));
        }
        if !eps.is_finite() || eps <= 0.0 || eps > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "step scale eps must lie in (0, 1], got {eps}"
            )));
        }
        let alpha = (p - 2.0) / (p + n as f64);
        let beta = 1.0 - alpha;
        Ok(Self {
            p,
            n,
            eps,
            alpha,
            beta,
        })
    }

    /// `2 (p + n)`, the scale that weighs the gradient against the weight in
    /// the drift probability.
    pub fn gradient_scale(&self) -> f64 {
        2.0 * (self.p + self.n as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p4_n2_gives_third() {
        let gp = GameParams::new(4.0, 2, 0.1).unwrap();
        assert!((gp.alpha - 1.0 / 3.0).abs() < 1e-15);
        assert!((gp.beta - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(gp.alpha + gp.beta, 1.0);
    }

    #[test]
    fn p_equal_two_rejected() {
        assert!(GameParams::new(2.0, 2, 0.1).is_err());
        assert!(GameParams::new(1.5, 2, 0.1).is_err());
    }

    #[test]
    fn huge_p_approaches_one() {
        let gp = GameParams::new(1e6, 2, 0.1).unwrap();
        assert!((gp.alpha - 999_998.0 / 1_000_002.0).abs() < 1e-15);
        assert!((gp.beta - 4.0 / 1_000_002.0).abs() < 1e-15);
        assert!((gp.beta - 4.0e-6).abs() < 1e-11);
    }

    #[test]
    fn eps_bounds_enforced() {
        assert!(GameParams::new(4.0, 2, 0.0).is_err());
        assert!(GameParams::new(4.0, 2, -0.1).is_err());
        assert!(GameParams::new(4.0, 2, 1.5).is_err());
        assert!(GameParams::new(4.0, 2, 1.0).is_ok());
    }

    #[test]
    fn n_zero_rejected() {
        assert!(GameParams::new(4.0, 0, 0.1).is_err());
    }

    #[test]
    fn alpha_in_unit_interval_and_monotone_in_p() {
        for n in 1..=4 {
            let mut prev = 0.0;
            for k in 0..200 {
                let p = 2.0 + 0.1 * (k + 1) as f64;
                let gp = GameParams::new(p, n, 0.5).unwrap();
                assert!(gp.alpha > 0.0 && gp.alpha < 1.0);
                assert!(gp.beta > 0.0 && gp.beta < 1.0);
                assert!(gp.alpha > prev, "alpha must increase with p");
                prev = gp.alpha;
            }
        }
    }
}
