//! Reward models: value, action-gradient and action-Hessian for each of the
//! five parametric families, plus their smoothness constants.
//!
//! Smoothness constants are stated on the ball `‖a‖ ≤ 2` (the regularized
//! families are negative outside it, so ascent never leaves it) and on the
//! unit ball for the two piecewise-linear families:
//!
//! | family      | ζ_g          | ζ_h               | ζ_3rd |
//! |-------------|--------------|-------------------|-------|
//! | Linear      | 3            | 1                 | 0     |
//! | Logistic    | 1/4 + 2c     | c + 1/(6√3)       | 1/8   |
//! | TwoLayer    | 3            | 2                 | 1     |
//! | ReluNeedle  | 1            | 0                 | 0     |
//! | UcbTrap     | 65/64        | 0                 | 0     |
//!
//! where `c = e/(e+1)²` is the logistic regularization weight. With this
//! choice of `c` the logistic reward is maximized exactly at `a = θ`.

use crate::error::{check_dim, Result, ViolinError};
use crate::linalg::{axpy, dot, norm, Matrix};
use serde::{Deserialize, Serialize};

/// Logistic regularization weight `e/(e+1)²`, which equals `σ'(1)`.
pub fn logistic_c() -> f64 {
    let e = std::f64::consts::E;
    e / ((e + 1.0) * (e + 1.0))
}

/// Kink detection tolerance for the piecewise-linear families.
pub const KINK_TOL: f64 = 1e-12;

/// Threshold inside the UCB trap's bump term.
pub const TRAP_THRESHOLD: f64 = 31.0 / 32.0;

/// Slope of the UCB trap's linear term.
pub const TRAP_SLOPE: f64 = 1.0 / 64.0;

const NORM_TOL: f64 = 1e-9;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_d1(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s)
}

pub fn sigmoid_d2(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 - s) * (1.0 - 2.0 * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Linear,
    Logistic,
    TwoLayer,
    ReluNeedle,
    UcbTrap,
}

impl Family {
    /// Radius of the ball the action set is confined to.
    pub fn action_bound(self) -> f64 {
        match self {
            Family::Linear | Family::Logistic | Family::TwoLayer => 2.0,
            Family::ReluNeedle | Family::UcbTrap => 1.0,
        }
    }

    /// An upper bound on `sup η − inf η` over the action set and all
    /// admissible parameters.
    pub fn reward_range(self) -> f64 {
        match self {
            Family::Linear => 4.5,
            Family::Logistic => 1.0 + 2.0 * logistic_c(),
            Family::TwoLayer => 4.0,
            Family::ReluNeedle => 1.0,
            Family::UcbTrap => 1.0 / 16.0,
        }
    }

    /// True when `∇²_a η` does not depend on the parameter, so the Hessian
    /// term of the learner's loss is identical across hypotheses.
    pub fn hessian_is_parameter_free(self) -> bool {
        matches!(self, Family::Linear)
    }

    /// True for the families with kinks (no Hessian on a measure-zero set).
    pub fn is_piecewise(self) -> bool {
        matches!(self, Family::ReluNeedle | Family::UcbTrap)
    }
}

/// Smoothness constants of a family on its visited action ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    pub zeta_g: f64,
    pub zeta_h: f64,
    pub zeta_3rd: f64,
}

pub fn smoothness(family: Family) -> SmoothnessConstants {
    let c = logistic_c();
    let (zeta_g, zeta_h, zeta_3rd) = match family {
        Family::Linear => (3.0, 1.0, 0.0),
        Family::Logistic => (0.25 + 2.0 * c, c + 1.0 / (6.0 * 3f64.sqrt()), 0.125),
        Family::TwoLayer => (3.0, 2.0, 1.0),
        Family::ReluNeedle => (1.0, 0.0, 0.0),
        Family::UcbTrap => (1.0 + TRAP_SLOPE, 0.0, 0.0),
    };
    SmoothnessConstants {
        zeta_g,
        zeta_h,
        zeta_3rd,
    }
}

/// A parameter point of one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelParams {
    Linear {
        theta: Vec<f64>,
    },
    Logistic {
        theta: Vec<f64>,
    },
    TwoLayer {
        w1: Matrix,
        w2: Vec<f64>,
    },
    ReluNeedle {
        theta: Vec<f64>,
        eps: f64,
    },
    UcbTrap {
        theta1: Vec<f64>,
        theta2: Vec<f64>,
        alpha: f64,
    },
}

fn invalid(msg: impl Into<String>) -> ViolinError {
    ViolinError::InvalidParams(msg.into())
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} has non-finite entries")))
    }
}

impl ModelParams {
    /// Linear model with `‖θ‖ ≤ 1`.
    pub fn linear(theta: Vec<f64>) -> Result<Self> {
        check_finite(&theta, "theta")?;
        if norm(&theta) > 1.0 + NORM_TOL {
            return Err(invalid("linear theta must satisfy ‖θ‖ ≤ 1"));
        }
        Ok(Self::Linear { theta })
    }

    /// Logistic model with `‖θ‖ = 1`.
    pub fn logistic(theta: Vec<f64>) -> Result<Self> {
        check_finite(&theta, "theta")?;
        if (norm(&theta) - 1.0).abs() > NORM_TOL {
            return Err(invalid("logistic theta must be a unit vector"));
        }
        Ok(Self::Logistic { theta })
    }

    /// Two-layer network with every row of `w1` in the ℓ1 unit ball and
    /// `‖w2‖₁ ≤ 1`.
    pub fn two_layer(w1: Matrix, w2: Vec<f64>) -> Result<Self> {
        check_dim(w1.rows(), w2.len())?;
        check_finite(w1.as_slice(), "w1")?;
        check_finite(&w2, "w2")?;
        for i in 0..w1.rows() {
            if w1.row(i).iter().map(|x| x.abs()).sum::<f64>() > 1.0 + NORM_TOL {
                return Err(invalid("two-layer w1 rows must have ℓ1 norm ≤ 1"));
            }
        }
        if w2.iter().map(|x| x.abs()).sum::<f64>() > 1.0 + NORM_TOL {
            return Err(invalid("two-layer w2 must have ℓ1 norm ≤ 1"));
        }
        Ok(Self::TwoLayer { w1, w2 })
    }

    pub fn relu_needle(theta: Vec<f64>, eps: f64) -> Result<Self> {
        check_finite(&theta, "theta")?;
        if (norm(&theta) - 1.0).abs() > NORM_TOL {
            return Err(invalid("needle theta must be a unit vector"));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(invalid("needle eps must lie in (0, 1)"));
        }
        Ok(Self::ReluNeedle { theta, eps })
    }

    pub fn ucb_trap(theta1: Vec<f64>, theta2: Vec<f64>, alpha: f64) -> Result<Self> {
        check_dim(theta1.len(), theta2.len())?;
        check_finite(&theta1, "theta1")?;
        check_finite(&theta2, "theta2")?;
        if norm(&theta1) > 1.0 + NORM_TOL {
            return Err(invalid("trap theta1 must satisfy ‖θ1‖ ≤ 1"));
        }
        if (norm(&theta2) - 1.0).abs() > NORM_TOL {
            return Err(invalid("trap theta2 must be a unit vector"));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(invalid("trap alpha must lie in [0, 1]"));
        }
        Ok(Self::UcbTrap {
            theta1,
            theta2,
            alpha,
        })
    }

    pub fn family(&self) -> Family {
        match self {
            Self::Linear { .. } => Family::Linear,
            Self::Logistic { .. } => Family::Logistic,
            Self::TwoLayer { .. } => Family::TwoLayer,
            Self::ReluNeedle { .. } => Family::ReluNeedle,
            Self::UcbTrap { .. } => Family::UcbTrap,
        }
    }

    /// Action dimension.
    pub fn dim(&self) -> usize {
        match self {
            Self::Linear { theta } | Self::Logistic { theta } | Self::ReluNeedle { theta, .. } => {
                theta.len()
            }
            Self::TwoLayer { w1, .. } => w1.cols(),
            Self::UcbTrap { theta1, .. } => theta1.len(),
        }
    }

    /// Checks that `a` is a valid action for this model.
    pub fn validate_action(&self, a: &[f64]) -> Result<()> {
        check_dim(self.dim(), a.len())?;
        check_finite(a, "action")?;
        if norm(a) > self.family().action_bound() + NORM_TOL {
            return Err(invalid("action outside the family's action ball"));
        }
        Ok(())
    }

    /// A representative point used to seed ascent: the direction the model
    /// rewards most.
    pub fn anchor(&self) -> Vec<f64> {
        match self {
            Self::Linear { theta } | Self::Logistic { theta } | Self::ReluNeedle { theta, .. } => {
                theta.clone()
            }
            Self::TwoLayer { w1, .. } => vec![0.0; w1.cols()],
            Self::UcbTrap { theta1, .. } => {
                let n = norm(theta1);
                if n > 0.0 {
                    theta1.iter().map(|x| x / n).collect()
                } else {
                    vec![0.0; theta1.len()]
                }
            }
        }
    }

    /// The global maximizer over the action set when it has a closed form.
    pub fn known_optimum(&self) -> Option<Vec<f64>> {
        match self {
            Self::Linear { theta } | Self::Logistic { theta } | Self::ReluNeedle { theta, .. } => {
                Some(theta.clone())
            }
            Self::UcbTrap { alpha, .. } if *alpha == 0.0 => Some(self.anchor()),
            _ => None,
        }
    }

    pub fn eta(&self, a: &[f64]) -> Result<f64> {
        check_dim(self.dim(), a.len())?;
        Ok(match self {
            Self::Linear { theta } => dot(theta, a) - 0.5 * dot(a, a),
            Self::Logistic { theta } => sigmoid(dot(theta, a)) - 0.5 * logistic_c() * dot(a, a),
            Self::TwoLayer { w1, w2 } => {
                let z = w1.matvec(a);
                let out: f64 = w2.iter().zip(&z).map(|(w, zj)| w * sigmoid(*zj)).sum();
                out - 0.5 * dot(a, a)
            }
            Self::ReluNeedle { theta, eps } => (dot(theta, a) - 1.0 + eps).max(0.0),
            Self::UcbTrap {
                theta1,
                theta2,
                alpha,
            } => TRAP_SLOPE * dot(a, theta1) + alpha * (dot(theta2, a) - TRAP_THRESHOLD).max(0.0),
        })
    }

    pub fn grad_a(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), a.len())?;
        Ok(match self {
            Self::Linear { theta } => theta.iter().zip(a).map(|(t, x)| t - x).collect(),
            Self::Logistic { theta } => {
                let s1 = sigmoid_d1(dot(theta, a));
                let c = logistic_c();
                theta.iter().zip(a).map(|(t, x)| s1 * t - c * x).collect()
            }
            Self::TwoLayer { w1, w2 } => {
                let z = w1.matvec(a);
                let weights: Vec<f64> = w2.iter().zip(&z).map(|(w, zj)| w * sigmoid_d1(*zj)).collect();
                let mut g = w1.t_matvec(&weights);
                axpy(&mut g, -1.0, a);
                g
            }
            Self::ReluNeedle { theta, eps } => {
                if dot(theta, a) - 1.0 + eps > 0.0 {
                    theta.clone()
                } else {
                    vec![0.0; theta.len()]
                }
            }
            Self::UcbTrap {
                theta1,
                theta2,
                alpha,
            } => {
                let mut g: Vec<f64> = theta1.iter().map(|t| TRAP_SLOPE * t).collect();
                if *alpha != 0.0 && dot(theta2, a) - TRAP_THRESHOLD > 0.0 {
                    axpy(&mut g, *alpha, theta2);
                }
                g
            }
        })
    }

    /// Signed distance to the kink, for the piecewise families.
    pub(crate) fn kink_distance(&self, a: &[f64]) -> Option<f64> {
        match self {
            Self::ReluNeedle { theta, eps } => Some(dot(theta, a) - 1.0 + eps),
            Self::UcbTrap { theta2, alpha, .. } if *alpha != 0.0 => {
                Some(dot(theta2, a) - TRAP_THRESHOLD)
            }
            _ => None,
        }
    }

    fn check_kink(&self, a: &[f64]) -> Result<()> {
        if let Some(distance) = self.kink_distance(a) {
            if distance.abs() < KINK_TOL {
                return Err(ViolinError::Kink { distance });
            }
        }
        Ok(())
    }

    pub fn hess_a(&self, a: &[f64]) -> Result<Matrix> {
        check_dim(self.dim(), a.len())?;
        self.check_kink(a)?;
        let d = self.dim();
        Ok(match self {
            Self::Linear { .. } => Matrix::identity(d).scaled(-1.0),
            Self::Logistic { theta } => {
                let s2 = sigmoid_d2(dot(theta, a));
                let mut h = Matrix::outer(theta, theta).scaled(s2);
                let c = logistic_c();
                for i in 0..d {
                    h[(i, i)] -= c;
                }
                h
            }
            Self::TwoLayer { w1, w2 } => {
                let z = w1.matvec(a);
                let mut h = Matrix::identity(d).scaled(-1.0);
                for (j, (w, zj)) in w2.iter().zip(&z).enumerate() {
                    let row = w1.row(j);
                    h.add_scaled(w * sigmoid_d2(*zj), &Matrix::outer(row, row));
                }
                h
            }
            Self::ReluNeedle { .. } | Self::UcbTrap { .. } => Matrix::zeros(d, d),
        })
    }

    /// `⟨∇_a η, u⟩` without forming the gradient for the two-layer family.
    pub fn grad_dot(&self, a: &[f64], u: &[f64]) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        Ok(dot(&self.grad_a(a)?, u))
    }

    /// `uᵀ ∇²_a η v`.
    pub fn hess_form(&self, a: &[f64], u: &[f64], v: &[f64]) -> Result<f64> {
        check_dim(self.dim(), u.len())?;
        check_dim(self.dim(), v.len())?;
        check_dim(self.dim(), a.len())?;
        self.check_kink(a)?;
        Ok(match self {
            Self::Linear { .. } => -dot(u, v),
            Self::Logistic { theta } => {
                sigmoid_d2(dot(theta, a)) * dot(theta, u) * dot(theta, v) - logistic_c() * dot(u, v)
            }
            Self::TwoLayer { w1, w2 } => {
                let z = w1.matvec(a);
                let wu = w1.matvec(u);
                let wv = w1.matvec(v);
                let mut acc = 0.0;
                for j in 0..w2.len() {
                    acc += w2[j] * sigmoid_d2(z[j]) * wu[j] * wv[j];
                }
                acc - dot(u, v)
            }
            Self::ReluNeedle { .. } | Self::UcbTrap { .. } => 0.0,
        })
    }
}

/// Cumulative count of environment reward evaluations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RewardQuery {
    count: u64,
}

impl RewardQuery {
    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn add(&mut self, n: u64) {
        self.count += n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn linear_at_theta_is_half() {
        let m = ModelParams::linear(e(3, 0)).unwrap();
        assert!((m.eta(&e(3, 0)).unwrap() - 0.5).abs() < 1e-15);
        assert!(m.grad_a(&e(3, 0)).unwrap().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn logistic_at_origin() {
        let m = ModelParams::logistic(e(2, 1)).unwrap();
        assert!((m.eta(&[0.0, 0.0]).unwrap() - 0.5).abs() < 1e-15);
        let g = m.grad_a(&[0.0, 0.0]).unwrap();
        assert!((g[1] - 0.25).abs() < 1e-15 && g[0] == 0.0);
    }

    #[test]
    fn logistic_optimum_is_theta() {
        let m = ModelParams::logistic(e(2, 0)).unwrap();
        let g = m.grad_a(&e(2, 0)).unwrap();
        assert!(norm(&g) < 1e-15);
    }

    #[test]
    fn ucb_trap_along_theta1() {
        let t1 = vec![0.6, 0.0, 0.0];
        let m = ModelParams::ucb_trap(t1, e(3, 1), 0.0).unwrap();
        assert!((m.eta(&e(3, 0)).unwrap() - 0.6 / 64.0).abs() < 1e-15);
    }

    #[test]
    fn linear_hessian_is_minus_identity() {
        let m = ModelParams::linear(vec![0.3, 0.4]).unwrap();
        let h = m.hess_a(&[1.0, -0.2]).unwrap();
        assert_eq!(h, Matrix::identity(2).scaled(-1.0));
    }

    #[test]
    fn needle_flat_region_has_zero_hessian() {
        let m = ModelParams::relu_needle(e(3, 0), 0.1).unwrap();
        let h = m.hess_a(&[0.0, 0.5, 0.0]).unwrap();
        assert!(h.as_slice().iter().all(|x| *x == 0.0));
        assert_eq!(m.eta(&[0.0, 0.5, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn kink_is_reported() {
        let m = ModelParams::relu_needle(e(2, 0), 0.25).unwrap();
        assert!(matches!(m.hess_a(&[0.75, 0.0]), Err(ViolinError::Kink { .. })));
        let t = ModelParams::ucb_trap(e(2, 0), e(2, 1), 0.5).unwrap();
        assert!(matches!(t.hess_a(&[0.0, TRAP_THRESHOLD]), Err(ViolinError::Kink { .. })));
    }

    #[test]
    fn dimension_mismatch() {
        let m = ModelParams::linear(e(3, 0)).unwrap();
        assert!(matches!(m.eta(&[1.0]), Err(ViolinError::DimensionMismatch { .. })));
    }

    #[test]
    fn constructors_enforce_norms() {
        assert!(ModelParams::linear(vec![1.0, 1.0]).is_err());
        assert!(ModelParams::logistic(vec![0.5, 0.0]).is_err());
        let w1 = Matrix::from_rows(&[vec![0.7, 0.7]]).unwrap();
        assert!(ModelParams::two_layer(w1, vec![1.0]).is_err());
        assert!(ModelParams::relu_needle(e(2, 0), 1.5).is_err());
        assert!(ModelParams::ucb_trap(e(2, 0), e(2, 1), 2.0).is_err());
    }

    #[test]
    fn smoothness_values() {
        assert_eq!(smoothness(Family::Linear).zeta_3rd, 0.0);
        assert!(smoothness(Family::TwoLayer).zeta_3rd <= 1.0);
    }
}
