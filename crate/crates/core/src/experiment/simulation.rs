use crate::basis::BasisLibrary;
use crate::controller::{control_with_regressor, z_norm, GainReport};
use crate::error::{Error, Result};
use crate::estimator::{sign_selection, EstimatorState};
use crate::history_stack::{HistoryStack, MemoryRegressor, StackEvent};
use crate::integrator::{rk4_step, HistoryBuffer, TimeGrid};
use crate::linalg::{norm2, sub_vec, Matrix};
use crate::scalar::Scalar;

use super::recovery::{classify_sparsity, confusion_counts, true_support, ConfusionCounts, RecoveryScores};
use super::scenario::SimConfig;

/// Decimated time series of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSeries<S> {
    pub times: Vec<S>,
    pub e_norm: Vec<S>,
    pub theta_err_norm: Vec<S>,
    pub lambda_min: Vec<S>,
}

impl<S: Scalar> RunSeries<S> {
    fn push(&mut self, t: S, e: S, th: S, l: S) {
        self.times.push(t);
        self.e_norm.push(e);
        self.theta_err_norm.push(th);
        self.lambda_min.push(l);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Scalar summaries of one run, computed from every integration step.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    /// RMS of `‖e(t)‖` over the error window.
    pub rms_e: f64,
    /// `‖θ̃(t_f)‖`.
    pub theta_err_final: f64,
    pub nonzeros: usize,
    pub confusion: ConfusionCounts,
    pub scores: RecoveryScores,
    pub max_theta_hat_norm: f64,
    /// Largest `‖U_f − Y_f θ‖` over every filtered pair formed.
    pub max_filter_residual: f64,
    pub lambda_min_final: f64,
    /// First time `λ_min(𝒴) ≥ y̲` held.
    pub target_met_at: Option<f64>,
    /// Smallest `λ_min(𝒴)` observed after the target was first met.
    pub lambda_min_after_target: Option<f64>,
    /// Peak-to-peak `‖θ̃‖` over the chatter window.
    pub chatter: f64,
    /// Largest `‖z‖ = ‖(e, θ̃)‖` over the bound window.
    pub z_limsup: f64,
    pub accepted_insertions: usize,
}

#[derive(Clone, Debug)]
pub struct RunResult<S> {
    pub lambda: S,
    pub series: RunSeries<S>,
    pub theta_hat_final: Vec<S>,
    pub stack_events: Vec<StackEvent<S>>,
    pub memory_regressor: MemoryRegressor<S>,
    pub gain_report: GainReport,
    pub metrics: RunMetrics,
}

struct WindowStats {
    sum_sq: f64,
    count: usize,
}

fn in_window<S: Scalar>(t: S, w: (S, S)) -> bool {
    t >= w.0 - S::lit(1e-9) && t <= w.1 + S::lit(1e-9)
}

fn with_time(err: Error, t: f64) -> Error {
    match err {
        Error::Divergence { t: bad, what } if bad.is_nan() => Error::Divergence { t, what },
        other => other,
    }
}

/// Closed-loop vector field for the augmented state `(x, θ̂)`.
struct ClosedLoop<'a, S: Scalar> {
    cfg: &'a SimConfig<S>,
    library: &'a BasisLibrary<S>,
    gains: &'a crate::controller::ControllerGains<S>,
    estimator: &'a EstimatorState<S>,
}

impl<'a, S: Scalar> ClosedLoop<'a, S> {
    /// Returns `(Y(x), u)` at `(t, x, θ̂)`.
    fn control(&self, t: S, x: &[S], theta_hat: &[S]) -> Result<(Matrix<S>, Vec<S>)> {
        let (xd, xd_dot) = self.cfg.trajectory.eval(t);
        let y = self.library.eval_y(x)?;
        let u = control_with_regressor(&self.cfg.effectiveness, &y, x, &xd, &xd_dot, theta_hat, self.gains)?;
        Ok((y, u))
    }

    fn field(&self, t: S, state: &[S], ysum: &Matrix<S>, usum: &[S], sign: &[S]) -> Result<Vec<S>> {
        let n = self.cfg.n();
        let (x, theta_hat) = state.split_at(n);
        let (y, u) = self.control(t, x, theta_hat)?;
        let drift = y.matvec(&self.cfg.theta_true);
        let gu = self.cfg.effectiveness.apply(x, &u);
        let mut out: Vec<S> = drift.iter().zip(&gu).map(|(&a, &b)| a + b).collect();
        if self.cfg.freeze_estimate {
            out.extend(std::iter::repeat_n(S::zero(), theta_hat.len()));
        } else {
            let (xd, _) = self.cfg.trajectory.eval(t);
            let e = sub_vec(x, &xd);
            out.extend(self.estimator.direction_at(theta_hat, &y, &e, ysum, usum, sign)?);
        }
        Ok(out)
    }
}

/// Simulates plant, controller, filters, history stack and estimator on the fixed grid.
pub fn run_scenario<S: Scalar>(cfg: &SimConfig<S>) -> Result<RunResult<S>> {
    cfg.validate()?;
    let library = cfg.library();
    let gains = cfg.gains()?;
    let estimator = cfg.estimator();
    let gain_report = cfg.gain_report()?;
    let n = cfg.n();
    let p = library.p();
    let grid = TimeGrid {
        t0: S::zero(),
        h: cfg.h,
    };
    let steps = grid.steps_for(cfg.t_final);
    let limit = estimator.projection.outer_radius() + estimator.projection.slack;
    let loop_ = ClosedLoop {
        cfg,
        library: &library,
        gains: &gains,
        estimator: &estimator,
    };

    let mut stack = HistoryStack::new(p, cfg.stack)?;
    let mut x = cfg.x0.clone();
    let mut theta_hat = cfg.theta_hat0.clone();
    let (y0, u0) = loop_.control(S::zero(), &x, &theta_hat)?;
    let gu0 = cfg.effectiveness.apply(&x, &u0);
    let mut buffer = HistoryBuffer::new(grid, cfg.window, x.clone(), y0, gu0)?;

    let mut series = RunSeries::default();
    let mut err_stats = WindowStats { sum_sq: 0.0, count: 0 };
    let mut chatter = (f64::INFINITY, f64::NEG_INFINITY);
    let mut z_limsup = 0.0f64;
    let mut max_theta_hat_norm = norm2(&theta_hat).as_f64();
    let mut max_filter_residual = 0.0f64;
    let mut target_met_at: Option<f64> = None;
    let mut lambda_min_after_target: Option<f64> = None;
    let mut accepted = 0usize;

    let (xd0, _) = cfg.trajectory.eval(S::zero());
    let e0 = norm2(&sub_vec(&x, &xd0));
    let th0 = norm2(&sub_vec(&cfg.theta_true, &theta_hat));
    series.push(S::zero(), e0, th0, S::zero());

    let mut state = Vec::with_capacity(n + p);
    for k in 0..steps {
        let t = grid.time(k);
        let sign = sign_selection(&theta_hat);
        state.clear();
        state.extend_from_slice(&x);
        state.extend_from_slice(&theta_hat);
        let next = {
            let (ysum, usum) = (stack.ysum(), stack.usum());
            rk4_step(|ts, ys| loop_.field(ts, ys, ysum, usum, &sign), t, &state, cfg.h)
                .map_err(|e| with_time(e, t.as_f64()))?
        };
        x.copy_from_slice(&next[..n]);
        theta_hat.copy_from_slice(&next[n..]);

        let t1 = grid.time(k + 1);
        let th_norm = norm2(&theta_hat);
        max_theta_hat_norm = max_theta_hat_norm.max(th_norm.as_f64());
        if !(th_norm <= limit) {
            return Err(Error::ProjectionViolation {
                norm: th_norm.as_f64(),
                limit: limit.as_f64(),
            });
        }

        let (y1, u1) = loop_
            .control(t1, &x, &theta_hat)
            .map_err(|e| with_time(e, t1.as_f64()))?;
        let gu1 = cfg.effectiveness.apply(&x, &u1);
        buffer.push(x.clone(), y1, gu1);

        if t1 > cfg.window {
            let pair = buffer.filtered_pair(t1)?;
            max_filter_residual = max_filter_residual.max(pair.residual(&cfg.theta_true).as_f64());
            if stack.try_insert(pair.into())?.accepted {
                accepted += 1;
            }
        }
        let lambda_min = stack.lambda_min()?;
        if stack.is_full() && lambda_min >= cfg.stack.ybar && target_met_at.is_none() {
            target_met_at = Some(t1.as_f64());
        }
        if target_met_at.is_some() {
            let l = lambda_min.as_f64();
            lambda_min_after_target = Some(lambda_min_after_target.map_or(l, |m: f64| m.min(l)));
        }

        let (xd1, _) = cfg.trajectory.eval(t1);
        let e = sub_vec(&x, &xd1);
        let theta_tilde = sub_vec(&cfg.theta_true, &theta_hat);
        let e_norm = norm2(&e);
        let th_err = norm2(&theta_tilde);
        if in_window(t1, cfg.error_window) {
            err_stats.sum_sq += e_norm.as_f64().powi(2);
            err_stats.count += 1;
        }
        if in_window(t1, cfg.chatter_window) {
            chatter = (chatter.0.min(th_err.as_f64()), chatter.1.max(th_err.as_f64()));
        }
        if in_window(t1, cfg.bound_window) {
            z_limsup = z_limsup.max(z_norm(&e, &theta_tilde).as_f64());
        }
        if (k + 1) % cfg.decimate == 0 {
            series.push(t1, e_norm, th_err, lambda_min);
        }
    }

    let predicted = classify_sparsity(&theta_hat, cfg.sparsity_threshold);
    let confusion = confusion_counts(&predicted, &true_support(&cfg.theta_true))?;
    let memory_regressor = stack.memory_regressor()?;
    let metrics = RunMetrics {
        rms_e: if err_stats.count > 0 {
            (err_stats.sum_sq / err_stats.count as f64).sqrt()
        } else {
            f64::NAN
        },
        theta_err_final: norm2(&sub_vec(&cfg.theta_true, &theta_hat)).as_f64(),
        nonzeros: predicted.iter().filter(|&&b| b).count(),
        confusion,
        scores: confusion.scores(),
        max_theta_hat_norm,
        max_filter_residual,
        lambda_min_final: memory_regressor.lambda_min.as_f64(),
        target_met_at,
        lambda_min_after_target,
        chatter: if chatter.1 >= chatter.0 {
            chatter.1 - chatter.0
        } else {
            f64::NAN
        },
        z_limsup,
        accepted_insertions: accepted,
    };
    Ok(RunResult {
        lambda: cfg.sparsity,
        series,
        theta_hat_final: theta_hat,
        stack_events: stack.events().to_vec(),
        memory_regressor,
        gain_report,
        metrics,
    })
}

/// Integrates the estimator alone against a frozen memory regressor with `e ≡ 0`.
/// Returns the estimate after `duration`.
pub fn frozen_stack_flow<S: Scalar>(
    estimator: &EstimatorState<S>,
    mr: &MemoryRegressor<S>,
    h: S,
    duration: S,
) -> Result<Vec<S>> {
    let p = estimator.p();
    let grid = TimeGrid { t0: S::zero(), h };
    let steps = grid.steps_for(duration);
    let regressor = Matrix::zeros(1, p);
    let e = [S::zero()];
    let mut theta = estimator.theta_hat.clone();
    for k in 0..steps {
        let t = grid.time(k);
        let sign = sign_selection(&theta);
        theta = rk4_step(
            |_, th| estimator.direction_at(th, &regressor, &e, &mr.ysum, &mr.usum, &sign),
            t,
            &theta,
            h,
        )
        .map_err(|e| with_time(e, t.as_f64()))?;
    }
    Ok(theta)
}
