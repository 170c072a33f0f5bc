//! Fixed-step RK4 and the sliding-window state history behind the filtered pair
//! `(Y_f, U_f)`:
//!
//! ```text
//! Y_f(t) = ∫_{t-T}^{t} Y(x(τ)) dτ
//! U_f(t) = x(t) - x(t-T) - ∫_{t-T}^{t} g(x(τ)) u(τ) dτ      (both zero for t < T)
//! ```
//!
//! Cumulative trapezoid integrals from `t = 0` are stored with every sample, so a window
//! integral is the difference of two cumulative values.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// One classical fourth-order Runge–Kutta step of `ẏ = f(t, y)`.
pub fn rk4_step<S, F>(mut f: F, t: S, y: &[S], h: S) -> Result<Vec<S>>
where
    S: Scalar,
    F: FnMut(S, &[S]) -> Result<Vec<S>>,
{
    if !(h > S::zero()) {
        return Err(Error::InvalidConfig(format!("step size must be positive, got {h}")));
    }
    let half = S::lit(0.5);
    let hh = h * half;
    let stage = |k: &[S], scale: S| -> Vec<S> { y.iter().zip(k).map(|(&yi, &ki)| yi + scale * ki).collect() };
    let k1 = f(t, y)?;
    let k2 = f(t + hh, &stage(&k1, hh))?;
    let k3 = f(t + hh, &stage(&k2, hh))?;
    let k4 = f(t + h, &stage(&k3, h))?;
    let sixth = h / S::lit(6.0);
    let two = S::lit(2.0);
    let out: Vec<S> = (0..y.len())
        .map(|i| y[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect();
    if let Some(i) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::Divergence {
            t: (t + h).as_f64(),
            what: format!("state component {i} is not finite"),
        });
    }
    Ok(out)
}

/// Uniform time grid; `t_k = t0 + k·h` is computed by multiplication so it never drifts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<S> {
    pub t0: S,
    pub h: S,
}

impl<S: Scalar> TimeGrid<S> {
    #[inline]
    pub fn time(&self, k: usize) -> S {
        self.t0 + S::from_count(k) * self.h
    }

    /// Number of whole steps needed to cover `duration`.
    pub fn steps_for(&self, duration: S) -> usize {
        (duration / self.h - S::lit(1e-9)).ceil().to_usize().unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
struct Sample<S> {
    t: S,
    x: Vec<S>,
    cum_y: Matrix<S>,
    cum_gu: Vec<S>,
}

/// Filtered regressor/state at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct FilteredPair<S> {
    pub t: S,
    pub yf: Matrix<S>,
    pub uf: Vec<S>,
}

impl<S: Scalar> FilteredPair<S> {
    pub fn zeros(t: S, n: usize, p: usize) -> Self {
        Self {
            t,
            yf: Matrix::zeros(n, p),
            uf: vec![S::zero(); n],
        }
    }

    /// `‖U_f − Y_f θ‖`.
    pub fn residual(&self, theta: &[S]) -> S {
        let pred = self.yf.matvec(theta);
        crate::linalg::norm2(&crate::linalg::sub_vec(&self.uf, &pred))
    }
}

/// Ring of `(t, x(t))` samples plus cumulative integrals of `Y(x)` and `g(x)u`.
#[derive(Clone, Debug)]
pub struct HistoryBuffer<S> {
    grid: TimeGrid<S>,
    window: S,
    capacity: usize,
    steps: usize,
    samples: VecDeque<Sample<S>>,
    last_y: Matrix<S>,
    last_gu: Vec<S>,
}

const RETENTION_SLACK: usize = 10;

impl<S: Scalar> HistoryBuffer<S> {
    /// Starts a buffer at `grid.t0` with the initial sample and integrands.
    pub fn new(grid: TimeGrid<S>, window: S, x0: Vec<S>, y0: Matrix<S>, gu0: Vec<S>) -> Result<Self> {
        if !(grid.h > S::zero()) || !(window > S::zero()) {
            return Err(Error::InvalidConfig(
                "history buffer needs positive step and window".into(),
            ));
        }
        if gu0.len() != x0.len() || y0.rows() != x0.len() {
            return Err(Error::DimensionMismatch {
                what: "history buffer integrands",
                expected: x0.len(),
                got: gu0.len(),
            });
        }
        let span = window.max(grid.h + grid.h);
        let capacity = (span / grid.h).ceil().to_usize().unwrap_or(0) + 1 + RETENTION_SLACK;
        let mut samples = VecDeque::with_capacity(capacity + 1);
        samples.push_back(Sample {
            t: grid.t0,
            x: x0,
            cum_y: Matrix::zeros(y0.rows(), y0.cols()),
            cum_gu: vec![S::zero(); gu0.len()],
        });
        Ok(Self {
            grid,
            window,
            capacity,
            steps: 0,
            samples,
            last_y: y0,
            last_gu: gu0,
        })
    }

    pub fn grid(&self) -> TimeGrid<S> {
        self.grid
    }

    pub fn window(&self) -> S {
        self.window
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Time of the newest sample.
    pub fn now(&self) -> S {
        self.grid.time(self.steps)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn oldest_time(&self) -> S {
        self.samples.front().map_or(self.grid.t0, |s| s.t)
    }

    pub fn latest_state(&self) -> &[S] {
        &self.samples.back().expect("buffer never empty").x
    }

    /// Appends the sample one step after the newest, advancing the trapezoid integrals.
    pub fn push(&mut self, x: Vec<S>, y: Matrix<S>, gu: Vec<S>) {
        let half_h = self.grid.h * S::lit(0.5);
        let prev = self.samples.back().expect("buffer never empty");
        let mut cum_y = prev.cum_y.clone();
        cum_y.add_scaled(half_h, &self.last_y);
        cum_y.add_scaled(half_h, &y);
        let cum_gu = prev
            .cum_gu
            .iter()
            .zip(self.last_gu.iter().zip(&gu))
            .map(|(&c, (&a, &b))| c + half_h * (a + b))
            .collect();
        self.steps += 1;
        let t = self.grid.time(self.steps);
        self.samples.push_back(Sample { t, x, cum_y, cum_gu });
        self.last_y = y;
        self.last_gu = gu;
        while self.samples.len() > self.capacity {
            self.samples.pop_front();
        }
    }

    /// Locates `t_query` as `(index, fraction)` relative to the stored samples.
    fn locate(&self, t_query: S) -> Result<(usize, S)> {
        let start = self.oldest_time();
        let end = self.now();
        let out_of_range = || Error::Lookup {
            query: t_query.as_f64(),
            start: start.as_f64(),
            end: end.as_f64(),
        };
        let pos = (t_query - start) / self.grid.h;
        // Grid positions agree to rounding; the tolerance scales with the position for f32.
        let snap = S::lit(1e-9).max(S::epsilon() * S::lit(64.0) * (S::one() + pos.abs()));
        let last = S::from_count(self.samples.len() - 1);
        if !(pos >= -snap) || !(pos <= last + snap) {
            return Err(out_of_range());
        }
        let nearest = pos.round();
        if (pos - nearest).abs() <= snap {
            let i = nearest.to_usize().ok_or_else(out_of_range)?;
            return Ok((i.min(self.samples.len() - 1), S::zero()));
        }
        let i = pos.floor().to_usize().ok_or_else(out_of_range)?;
        Ok((i, pos - pos.floor()))
    }

    fn lerp_vec(a: &[S], b: &[S], w: S) -> Vec<S> {
        a.iter().zip(b).map(|(&u, &v)| u + w * (v - u)).collect()
    }

    /// `x(t_query)` by linear interpolation between bracketing samples; exact at grid points.
    pub fn delayed_state(&self, t_query: S) -> Result<Vec<S>> {
        let (i, w) = self.locate(t_query)?;
        if w == S::zero() {
            return Ok(self.samples[i].x.clone());
        }
        Ok(Self::lerp_vec(&self.samples[i].x, &self.samples[i + 1].x, w))
    }

    fn cumulative_at(&self, t_query: S) -> Result<(Matrix<S>, Vec<S>)> {
        let (i, w) = self.locate(t_query)?;
        let a = &self.samples[i];
        if w == S::zero() {
            return Ok((a.cum_y.clone(), a.cum_gu.clone()));
        }
        let b = &self.samples[i + 1];
        let mut cy = a.cum_y.clone();
        cy.add_scaled(w, &b.cum_y);
        cy.add_scaled(-w, &a.cum_y);
        Ok((cy, Self::lerp_vec(&a.cum_gu, &b.cum_gu, w)))
    }

    /// Filtered pair at time `t` over the buffer's window (zeros while `t < T`).
    pub fn filtered_pair(&self, t: S) -> Result<FilteredPair<S>> {
        let n = self.last_gu.len();
        let p = self.last_y.cols();
        if t < self.grid.t0 + self.window {
            return Ok(FilteredPair::zeros(t, n, p));
        }
        let (cy_now, cgu_now) = self.cumulative_at(t)?;
        let (cy_then, cgu_then) = self.cumulative_at(t - self.window)?;
        let x_now = self.delayed_state(t)?;
        let x_then = self.delayed_state(t - self.window)?;
        let yf = cy_now.sub(&cy_then);
        let uf = (0..n)
            .map(|i| x_now[i] - x_then[i] - (cgu_now[i] - cgu_then[i]))
            .collect();
        Ok(FilteredPair { t, yf, uf })
    }
}
