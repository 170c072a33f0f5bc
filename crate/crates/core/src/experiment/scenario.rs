use crate::basis::{BasisLibrary, ControlEffectiveness};
use crate::controller::{check_gains, regressor_bound, ControllerGains, GainCheckInput, GainReport};
use crate::error::{Error, Result};
use crate::estimator::{EstimatorState, ProjectionSet};
use crate::history_stack::StackPolicy;
use crate::linalg::{norm2, Matrix};
use crate::scalar::Scalar;

use super::trajectory::SumOfSines;

/// Every constant of one closed-loop scenario.
#[derive(Clone, Debug)]
pub struct SimConfig<S> {
    // plant
    /// Total degree of the block-diagonal monomial library.
    pub basis_degree: u32,
    pub effectiveness: ControlEffectiveness<S>,
    pub x0: Vec<S>,
    pub theta_true: Vec<S>,
    pub trajectory: SumOfSines<S>,
    // controller
    pub k: Matrix<S>,
    /// Analysis radius for the tracking error ball.
    pub r_e: S,
    /// Analysis radius for the composite state.
    pub r: S,
    // estimator
    pub theta_hat0: Vec<S>,
    /// Diagonal of `Γ`.
    pub adaptation_gain: Vec<S>,
    pub icl_gain: S,
    pub sparsity: S,
    pub r_theta: S,
    pub epsilon: S,
    /// Holds `θ̂` at its initial value (open-loop estimator check).
    pub freeze_estimate: bool,
    // stack
    pub stack: StackPolicy<S>,
    pub window: S,
    // simulation
    pub h: S,
    pub t_final: S,
    pub decimate: usize,
    // metrics
    pub sparsity_threshold: S,
    pub error_window: (S, S),
    pub chatter_window: (S, S),
    pub bound_window: (S, S),
}

impl SimConfig<f64> {
    /// Two-state cubic-library scenario with the reference gains.
    pub fn demo() -> Self {
        let mut theta_true = vec![0.0; 20];
        theta_true[1] = -1.0;
        theta_true[2] = -1.0;
        theta_true[11] = -0.5;
        theta_true[15] = -0.5;
        theta_true[17] = -0.5;
        Self {
            basis_degree: 3,
            effectiveness: ControlEffectiveness::Identity(2),
            x0: vec![0.5, 0.5],
            theta_true,
            trajectory: SumOfSines::demo(),
            k: Matrix::identity(2).scaled(10.0),
            r_e: 1.0,
            r: 11.0,
            theta_hat0: vec![0.0; 20],
            adaptation_gain: vec![1.0; 20],
            icl_gain: 0.1,
            sparsity: 0.0,
            r_theta: 5.0,
            epsilon: 0.5,
            freeze_estimate: false,
            stack: StackPolicy::default(),
            window: 0.25,
            h: 1e-3,
            t_final: 100.0,
            decimate: 10,
            sparsity_threshold: 0.05,
            error_window: (50.0, 100.0),
            chatter_window: (90.0, 100.0),
            bound_window: (75.0, 100.0),
        }
    }

    /// The reference sparsity grid.
    pub fn reference_lambdas() -> Vec<f64> {
        vec![0.0, 1e-5, 1e-4, 1e-3, 5e-3, 1e-2, 5e-2, 1e-1]
    }
}

impl<S: Scalar> SimConfig<S> {
    pub fn n(&self) -> usize {
        self.x0.len()
    }

    pub fn library(&self) -> BasisLibrary<S> {
        BasisLibrary::polynomial(self.n(), self.basis_degree)
    }

    pub fn p(&self) -> usize {
        self.library().p()
    }

    pub fn with_sparsity(&self, lambda: S) -> Self {
        Self {
            sparsity: lambda,
            ..self.clone()
        }
    }

    pub fn gains(&self) -> Result<ControllerGains<S>> {
        ControllerGains::new(self.k.clone())
    }

    pub fn estimator(&self) -> EstimatorState<S> {
        EstimatorState {
            theta_hat: self.theta_hat0.clone(),
            adaptation_gain: self.adaptation_gain.clone(),
            icl_gain: self.icl_gain,
            sparsity: self.sparsity,
            projection: ProjectionSet {
                radius: self.r_theta,
                boundary: self.epsilon,
                slack: self.invariance_slack(),
            },
        }
    }

    /// Discretization allowance on the projection set, `10·h`.
    pub fn invariance_slack(&self) -> S {
        S::lit(10.0) * self.h
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let p = self.p();
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if n == 0 {
            return invalid("[plant].x0 must not be empty".into());
        }
        if self.basis_degree > 8 {
            return invalid("[plant].basis_degree must be at most 8".into());
        }
        if self.trajectory.dim() != n {
            return invalid(format!(
                "[plant] trajectory has {} components, state has {n}",
                self.trajectory.dim()
            ));
        }
        if self.effectiveness.n() != n || self.effectiveness.m() < n {
            return invalid(format!(
                "[plant].g must be {n}xm with m >= {n}, got {}x{}",
                self.effectiveness.n(),
                self.effectiveness.m()
            ));
        }
        for (key, len) in [
            ("[plant].theta_true", self.theta_true.len()),
            ("[estimator].theta_hat0", self.theta_hat0.len()),
            ("[estimator].Gamma", self.adaptation_gain.len()),
        ] {
            if len != p {
                return invalid(format!("{key} has {len} entries, the library has p = {p}"));
            }
        }
        if self.k.shape() != (n, n) {
            return invalid(format!("[controller].K must be {n}x{n}"));
        }
        self.gains()?;
        self.estimator().validate()?;
        self.stack.validate()?;
        if !(self.h > S::zero()) {
            return invalid("[simulation].h must be positive".into());
        }
        if !(self.window > S::zero()) || !(self.t_final > self.window) {
            return invalid("need t_final > T_window > 0".into());
        }
        if self.decimate == 0 {
            return invalid("[simulation].decimate must be at least 1".into());
        }
        if !(self.sparsity_threshold > S::zero()) {
            return invalid("[metrics].threshold must be positive".into());
        }
        if !(self.r_e > S::zero()) || !(self.r > S::zero()) {
            return invalid("[controller].r_e and [controller].r must be positive".into());
        }
        self.effectiveness
            .check_full_row_rank(&[self.x0.clone(), self.trajectory.eval(S::zero()).0], S::lit(1e-9))?;
        Ok(())
    }

    /// `x̄_d = max ‖x_d(t)‖` over one period.
    pub fn desired_bound(&self) -> S {
        self.trajectory.max_norm(self.t_final, 20_001)
    }

    /// Static gain-condition report for this configuration.
    pub fn gain_report(&self) -> Result<GainReport> {
        let gains = self.gains()?;
        let library = self.library();
        let half_width = self.r_e + self.desired_bound();
        let points = match self.n() {
            1 => 10_001,
            2 => 101,
            3 => 41,
            _ => 11,
        };
        let y_bound = regressor_bound(&library, half_width, points)?;
        let (xd0, _) = self.trajectory.eval(S::zero());
        let e0: Vec<S> = self.x0.iter().zip(&xd0).map(|(&a, &b)| a - b).collect();
        Ok(check_gains(&GainCheckInput {
            k_min: gains.min_gain(),
            icl_gain: self.icl_gain,
            ybar: self.stack.ybar,
            sparsity: self.sparsity,
            p: library.p(),
            adaptation_gain: self.adaptation_gain.clone(),
            r_theta: self.r_theta,
            epsilon: self.epsilon,
            y_bound,
            e0_norm: norm2(&e0),
            r_e: self.r_e,
            r: self.r,
        }))
    }
}
