//! Certainty-equivalence tracking law `u = g⁺(x)(ẋ_d − Y(x)θ̂ − K e)` and the
//! gain-condition / ultimate-bound report for the closed loop.

use std::fmt;

use crate::basis::{BasisLibrary, ControlEffectiveness};
use crate::error::{Error, Result};
use crate::linalg::{min_eigenvalue, norm2, Matrix};
use crate::scalar::Scalar;

/// Feedback gain `K = Kᵀ ≻ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ControllerGains<S> {
    pub k: Matrix<S>,
}

impl<S: Scalar> ControllerGains<S> {
    pub fn new(k: Matrix<S>) -> Result<Self> {
        if !k.is_square() {
            return Err(Error::InvalidConfig("[controller].K must be square".into()));
        }
        if k.asymmetry() > S::lit(1e-12) {
            return Err(Error::InvalidConfig(format!(
                "[controller].K must be symmetric (asymmetry {:e})",
                k.asymmetry().as_f64()
            )));
        }
        let kmin = min_eigenvalue(&k)?;
        if !(kmin > S::zero()) {
            return Err(Error::InvalidConfig(format!(
                "[controller].K must be positive definite (min eigenvalue {kmin})"
            )));
        }
        Ok(Self { k })
    }

    pub fn scalar(n: usize, k: S) -> Self {
        Self {
            k: Matrix::identity(n).scaled(k),
        }
    }

    /// `λ_min(K)`.
    pub fn min_gain(&self) -> S {
        min_eigenvalue(&self.k).unwrap_or_else(|_| S::zero())
    }
}

/// Control input given a precomputed regressor `Y(x)`.
pub fn control_with_regressor<S: Scalar>(
    effectiveness: &ControlEffectiveness<S>,
    regressor: &Matrix<S>,
    x: &[S],
    x_d: &[S],
    x_d_dot: &[S],
    theta_hat: &[S],
    gains: &ControllerGains<S>,
) -> Result<Vec<S>> {
    let n = x.len();
    let e: Vec<S> = (0..n).map(|i| x[i] - x_d[i]).collect();
    let drift = regressor.matvec(theta_hat);
    let ke = gains.k.matvec(&e);
    let v: Vec<S> = (0..n).map(|i| x_d_dot[i] - drift[i] - ke[i]).collect();
    match effectiveness {
        ControlEffectiveness::Identity(_) => Ok(v),
        _ => Ok(effectiveness.pseudoinverse(x)?.matvec(&v)),
    }
}

/// `u = g⁺(x)(ẋ_d − Y(x)θ̂ − K e)` with `e = x − x_d`.
pub fn control_input<S: Scalar>(
    library: &BasisLibrary<S>,
    effectiveness: &ControlEffectiveness<S>,
    x: &[S],
    x_d: &[S],
    x_d_dot: &[S],
    theta_hat: &[S],
    gains: &ControllerGains<S>,
) -> Result<Vec<S>> {
    let y = library.eval_y(x)?;
    control_with_regressor(effectiveness, &y, x, x_d, x_d_dot, theta_hat, gains)
}

/// `ė = −K e + Y(x) θ̃`.
pub fn tracking_error_dynamics<S: Scalar>(
    e: &[S],
    regressor: &Matrix<S>,
    theta_tilde: &[S],
    gains: &ControllerGains<S>,
) -> Vec<S> {
    let ke = gains.k.matvec(e);
    let d = regressor.matvec(theta_tilde);
    ke.iter().zip(&d).map(|(&a, &b)| b - a).collect()
}

/// Largest `‖Y(x)‖_F` over a uniform grid on the box `[−half_width, half_width]ⁿ`.
pub fn regressor_bound<S: Scalar>(library: &BasisLibrary<S>, half_width: S, points_per_axis: usize) -> Result<S> {
    let n = library.n();
    let m = points_per_axis.max(2);
    let total = m
        .checked_pow(n as u32)
        .ok_or_else(|| Error::InvalidConfig("regressor bound grid too large".into()))?;
    let step = (half_width + half_width) / S::from_count(m - 1);
    let mut x = vec![S::zero(); n];
    let mut best = S::zero();
    let mut y = Matrix::zeros(n, library.p());
    for idx in 0..total {
        let mut rem = idx;
        for xi in x.iter_mut() {
            *xi = -half_width + step * S::from_count(rem % m);
            rem /= m;
        }
        library.eval_y_into(&x, &mut y)?;
        best = best.max(y.frobenius_norm());
    }
    Ok(best)
}

/// Inputs of the gain-condition check.
#[derive(Clone, Debug, PartialEq)]
pub struct GainCheckInput<S> {
    /// `λ_min(K)`.
    pub k_min: S,
    pub icl_gain: S,
    pub ybar: S,
    pub sparsity: S,
    pub p: usize,
    /// Diagonal of `Γ`.
    pub adaptation_gain: Vec<S>,
    pub r_theta: S,
    pub epsilon: S,
    /// `‖Y(x)‖ ≤ Ȳ` on the operating ball.
    pub y_bound: S,
    /// `‖e(t₀)‖`.
    pub e0_norm: S,
    pub r_e: S,
    pub r: S,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GainCondition {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

impl GainCondition {
    fn less(name: &'static str, lhs: f64, rhs: f64) -> Self {
        Self {
            name,
            lhs,
            rhs,
            passed: lhs < rhs,
        }
    }
}

/// Quantities from the stability analysis together with per-condition verdicts.
#[derive(Clone, Debug, PartialEq)]
pub struct GainReport {
    pub k: f64,
    pub alpha: f64,
    pub iota: f64,
    pub m_lo: f64,
    pub m_hi: f64,
    pub d_bar: f64,
    pub y_bound: f64,
    pub r_e: f64,
    pub r: f64,
    /// `√((m_hi/m_lo)(ι/α))`.
    pub ultimate_bound: f64,
    /// Conditions with the `m_lo/m_hi` ratio as printed in the radius conditions.
    pub printed: Vec<GainCondition>,
    /// Same conditions with the ratio inverted (`m_hi/m_lo`).
    pub inverted: Vec<GainCondition>,
}

impl GainReport {
    pub fn passes_printed(&self) -> bool {
        self.printed.iter().all(|c| c.passed)
    }

    pub fn passes_inverted(&self) -> bool {
        self.inverted.iter().all(|c| c.passed)
    }

    /// `key = value` lines, as embedded in run summaries.
    pub fn to_kv_lines(&self) -> Vec<(String, String)> {
        let mut out = vec![
            ("k".to_string(), format!("{:e}", self.k)),
            ("alpha".to_string(), format!("{:e}", self.alpha)),
            ("iota".to_string(), format!("{:e}", self.iota)),
            ("m_lo".to_string(), format!("{:e}", self.m_lo)),
            ("m_hi".to_string(), format!("{:e}", self.m_hi)),
            ("y_bound".to_string(), format!("{:e}", self.y_bound)),
            ("d_bar".to_string(), format!("{:e}", self.d_bar)),
            ("r_e".to_string(), format!("{:e}", self.r_e)),
            ("r".to_string(), format!("{:e}", self.r)),
            ("ultimate_bound".to_string(), format!("{:e}", self.ultimate_bound)),
        ];
        for (tag, conds) in [("printed", &self.printed), ("inverted", &self.inverted)] {
            for c in conds {
                out.push((
                    format!("{tag}.{}", c.name),
                    format!("{} ({:e} < {:e})", if c.passed { "pass" } else { "fail" }, c.lhs, c.rhs),
                ));
            }
        }
        out.push(("passes_printed".into(), self.passes_printed().to_string()));
        out.push(("passes_inverted".into(), self.passes_inverted().to_string()));
        out
    }
}

impl fmt::Display for GainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.to_kv_lines() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

/// Evaluates the gain conditions and the ultimate bound radius.
pub fn check_gains<S: Scalar>(input: &GainCheckInput<S>) -> GainReport {
    let f = |v: S| v.as_f64();
    let k = f(input.k_min);
    let alpha = k.min(f(input.icl_gain) * f(input.ybar));
    let iota = f(input.sparsity) * f(input.icl_gain) * (input.p as f64).sqrt();
    let inv: Vec<f64> = input.adaptation_gain.iter().map(|&g| 1.0 / f(g)).collect();
    let inv_min = inv.iter().copied().fold(f64::INFINITY, f64::min);
    let inv_max = inv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let m_lo = 0.5 * inv_min.min(1.0);
    let m_hi = 0.5 * inv_max.max(1.0);
    let theta_span = 2.0 * f(input.r_theta) + f(input.epsilon);
    let d_bar = theta_span * f(input.y_bound);
    let (r_e, r) = (f(input.r_e), f(input.r));
    let ultimate_bound = ((m_hi / m_lo) * (iota / alpha)).sqrt();

    let base = [
        GainCondition::less("initial_error", f(input.e0_norm).powi(2), r_e * r_e),
        GainCondition::less("disturbance_ball", d_bar * d_bar / (k * k), r_e * r_e),
    ];
    let radius_conditions = |ratio: f64| {
        vec![
            GainCondition::less("radius", ratio * r_e.max(theta_span), r),
            GainCondition::less("bound_ratio", iota / alpha, ratio * r * r),
        ]
    };
    let mut printed = base.to_vec();
    printed.extend(radius_conditions(m_lo / m_hi));
    let mut inverted = base.to_vec();
    inverted.extend(radius_conditions(m_hi / m_lo));

    GainReport {
        k,
        alpha,
        iota,
        m_lo,
        m_hi,
        d_bar,
        y_bound: f(input.y_bound),
        r_e,
        r,
        ultimate_bound,
        printed,
        inverted,
    }
}

/// `‖z‖ = √(‖e‖² + ‖θ̃‖²)`.
pub fn z_norm<S: Scalar>(e: &[S], theta_tilde: &[S]) -> S {
    let a = norm2(e);
    let b = norm2(theta_tilde);
    (a * a + b * b).sqrt()
}
