//! Sparsity-promoting ICL update law
//!
//! ```text
//! θ̂̇ ∈ proj_Θ(θ̂, Γ(Y(x)ᵀe + γ(𝒰 − 𝒴θ̂)), Γ) − λγΓ·SGN(θ̂)
//! ```
//!
//! with the selection `0 ∈ SGN(0)` and the smooth projection onto the ball
//! `Θ = {‖θ‖ ≤ r_θ}` with boundary layer `ε`.

use crate::error::{Error, Result};
use crate::history_stack::MemoryRegressor;
use crate::linalg::{dot, norm1, norm2, Matrix};
use crate::scalar::Scalar;

/// `J(θ̂) = ½θ̂ᵀ𝒴θ̂ − θ̂ᵀ𝒰 + λ‖θ̂‖₁`.
pub fn cost<S: Scalar>(theta_hat: &[S], ysum: &Matrix<S>, usum: &[S], lambda: S) -> S {
    let quad = dot(theta_hat, &ysum.matvec(theta_hat));
    S::lit(0.5) * quad - dot(theta_hat, usum) + lambda * norm1(theta_hat)
}

/// Componentwise sign with the zero selection at the origin.
pub fn sign_selection<S: Scalar>(theta_hat: &[S]) -> Vec<S> {
    theta_hat
        .iter()
        .map(|&v| {
            if v > S::zero() {
                S::one()
            } else if v < S::zero() {
                -S::one()
            } else {
                S::zero()
            }
        })
        .collect()
}

/// Parameter ball `‖θ‖ ≤ radius` with boundary layer `boundary`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionSet<S> {
    pub radius: S,
    pub boundary: S,
    /// Tolerated numerical overshoot beyond `radius + boundary` before the projection errors.
    pub slack: S,
}

impl<S: Scalar> ProjectionSet<S> {
    pub fn outer_radius(&self) -> S {
        self.radius + self.boundary
    }

    /// Activation `q(θ) = (‖θ‖² − r²)/(ε² + 2εr)`; zero on `‖θ‖ = r`, one on `‖θ‖ = r + ε`.
    pub fn activation(&self, theta: &[S]) -> S {
        let denom = self.boundary * self.boundary + S::lit(2.0) * self.boundary * self.radius;
        (dot(theta, theta) - self.radius * self.radius) / denom
    }

    /// Smooth projection of the direction `v` under diagonal gain `gain`.
    pub fn project(&self, theta: &[S], v: &[S], gain: &[S]) -> Result<Vec<S>> {
        let norm = norm2(theta);
        let limit = self.outer_radius() + self.slack;
        if !(norm <= limit) {
            return Err(Error::ProjectionViolation {
                norm: norm.as_f64(),
                limit: limit.as_f64(),
            });
        }
        let q = self.activation(theta);
        if q <= S::zero() {
            return Ok(v.to_vec());
        }
        let denom = self.boundary * self.boundary + S::lit(2.0) * self.boundary * self.radius;
        let grad: Vec<S> = theta.iter().map(|&t| S::lit(2.0) * t / denom).collect();
        let outward = dot(&grad, v);
        if outward <= S::zero() {
            return Ok(v.to_vec());
        }
        let weighted: Vec<S> = grad.iter().zip(gain).map(|(&g, &k)| k * g).collect();
        let metric = dot(&grad, &weighted);
        let c = q * outward / metric;
        Ok(v.iter().zip(&weighted).map(|(&vi, &wi)| vi - c * wi).collect())
    }
}

/// Estimate and gains of the update law.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState<S> {
    pub theta_hat: Vec<S>,
    /// Diagonal of the adaptation gain `Γ`.
    pub adaptation_gain: Vec<S>,
    /// ICL learning gain `γ`.
    pub icl_gain: S,
    /// Sparsity parameter `λ`.
    pub sparsity: S,
    pub projection: ProjectionSet<S>,
}

impl<S: Scalar> EstimatorState<S> {
    pub fn validate(&self) -> Result<()> {
        let p = self.theta_hat.len();
        if self.adaptation_gain.len() != p {
            return Err(Error::DimensionMismatch {
                what: "adaptation gain diagonal",
                expected: p,
                got: self.adaptation_gain.len(),
            });
        }
        if self.adaptation_gain.iter().any(|&g| !(g > S::zero())) {
            return Err(Error::InvalidConfig("adaptation gain entries must be positive".into()));
        }
        if !(self.icl_gain > S::zero()) {
            return Err(Error::InvalidConfig("ICL gain must be positive".into()));
        }
        if !(self.sparsity >= S::zero()) {
            return Err(Error::InvalidConfig("sparsity parameter must be non-negative".into()));
        }
        if !(self.projection.radius > S::zero()) || !(self.projection.boundary > S::zero()) {
            return Err(Error::InvalidConfig(
                "projection radius and boundary must be positive".into(),
            ));
        }
        if !(norm2(&self.theta_hat) <= self.projection.outer_radius()) {
            return Err(Error::InvalidConfig(
                "initial estimate lies outside the projection set".into(),
            ));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.theta_hat.len()
    }

    /// Update direction at an arbitrary estimate with a given sign selection.
    pub fn direction_at(
        &self,
        theta: &[S],
        regressor: &Matrix<S>,
        e: &[S],
        ysum: &Matrix<S>,
        usum: &[S],
        sign: &[S],
    ) -> Result<Vec<S>> {
        let tracking = regressor.tr_matvec(e);
        let fitted = ysum.matvec(theta);
        let raw: Vec<S> = (0..theta.len())
            .map(|i| self.adaptation_gain[i] * (tracking[i] + self.icl_gain * (usum[i] - fitted[i])))
            .collect();
        let projected = self.projection.project(theta, &raw, &self.adaptation_gain)?;
        let shrink = self.sparsity * self.icl_gain;
        let out: Vec<S> = projected
            .iter()
            .zip(sign.iter().zip(&self.adaptation_gain))
            .map(|(&v, (&s, &g))| v - shrink * g * s)
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence {
                t: f64::NAN,
                what: "non-finite parameter update direction".into(),
            });
        }
        Ok(out)
    }

    /// `θ̂̇` at the current estimate using the sign selection at `θ̂`.
    pub fn update_direction(&self, regressor: &Matrix<S>, e: &[S], mr: &MemoryRegressor<S>) -> Result<Vec<S>> {
        let sign = sign_selection(&self.theta_hat);
        self.direction_at(&self.theta_hat, regressor, e, &mr.ysum, &mr.usum, &sign)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn state(p: usize, lambda: f64) -> EstimatorState<f64> {
        EstimatorState {
            theta_hat: vec![0.0; p],
            adaptation_gain: vec![1.0; p],
            icl_gain: 0.1,
            sparsity: lambda,
            projection: ProjectionSet {
                radius: 5.0,
                boundary: 0.5,
                slack: 0.0,
            },
        }
    }

    #[test]
    fn cost_examples() {
        let y = Matrix::from_rows(&[vec![2.0]]).unwrap();
        assert_eq!(cost(&[0.0], &y, &[2.0], 1.0), 0.0);
        assert_abs_diff_eq!(cost(&[1.0], &y, &[2.0], 1.0), 0.0);
    }

    #[test]
    fn sign_examples() {
        assert_eq!(sign_selection(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(sign_selection(&[3.0, -0.5]), vec![1.0, -1.0]);
    }

    #[test]
    fn projection_interior_and_inward() {
        let set = ProjectionSet {
            radius: 1.0,
            boundary: 0.1,
            slack: 0.0,
        };
        let v = vec![3.0, -2.0];
        assert_eq!(set.project(&[0.5, 0.5], &v, &[1.0, 1.0]).unwrap(), v);
        let theta = vec![1.1, 0.0];
        let inward = vec![-1.0, 0.3];
        assert_eq!(set.project(&theta, &inward, &[1.0, 1.0]).unwrap(), inward);
    }

    #[test]
    fn projection_cancels_outward_component_on_outer_shell() {
        let set = ProjectionSet {
            radius: 1.0,
            boundary: 0.1,
            slack: 0.0,
        };
        let theta = vec![1.1 * 0.6, 1.1 * 0.8];
        assert_abs_diff_eq!(set.activation(&theta), 1.0, epsilon = 1e-12);
        let out = set.project(&theta, &theta, &[1.0, 1.0]).unwrap();
        assert!(dot(&theta, &out) <= 1e-12);
        let v = vec![2.0, -0.3];
        let out = set.project(&theta, &v, &[3.0, 0.5]).unwrap();
        assert!(dot(&theta, &out) <= 1e-12);
    }

    #[test]
    fn projection_errors_outside_set() {
        let set = ProjectionSet {
            radius: 1.0,
            boundary: 0.1,
            slack: 0.0,
        };
        assert!(matches!(
            set.project(&[2.0, 0.0], &[1.0, 0.0], &[1.0, 1.0]),
            Err(Error::ProjectionViolation { .. })
        ));
    }

    #[test]
    fn update_direction_examples() {
        let est = state(3, 0.0);
        let mr = MemoryRegressor::zeros(3, 0.01);
        let y = Matrix::zeros(1, 3);
        assert_eq!(est.update_direction(&y, &[0.0], &mr).unwrap(), vec![0.0; 3]);

        let mut est = state(2, 0.3);
        est.theta_hat = vec![0.4, -0.2];
        est.adaptation_gain = vec![2.0, 0.5];
        let mr = MemoryRegressor::zeros(2, 0.01);
        let d = est.update_direction(&Matrix::zeros(1, 2), &[0.0], &mr).unwrap();
        assert_abs_diff_eq!(d[0], -0.3 * 0.1 * 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d[1], 0.3 * 0.1 * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn validation() {
        let mut est = state(2, 0.0);
        assert!(est.validate().is_ok());
        est.adaptation_gain[1] = 0.0;
        assert!(est.validate().is_err());
        let mut est = state(2, -1.0);
        assert!(est.validate().is_err());
        est.sparsity = 0.0;
        est.theta_hat = vec![10.0, 0.0];
        assert!(est.validate().is_err());
    }
}
