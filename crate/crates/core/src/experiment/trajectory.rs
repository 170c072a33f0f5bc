use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Desired trajectory whose components are sums of sines, `x_d,i(t) = Σ a·sin(ω t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SumOfSines<S> {
    /// Per component, the `(amplitude, angular frequency)` terms.
    pub components: Vec<Vec<(S, S)>>,
}

impl SumOfSines<f64> {
    /// `x_d(t) = (sin t + 0.12 sin 3t − 0.04 sin 5t, 0.95 sin 2t + 0.08 sin 4t)`.
    pub fn demo() -> Self {
        Self {
            components: vec![
                vec![(1.0, 1.0), (0.12, 3.0), (-0.04, 5.0)],
                vec![(0.95, 2.0), (0.08, 4.0)],
            ],
        }
    }
}

impl<S: Scalar> SumOfSines<S> {
    pub fn dim(&self) -> usize {
        self.components.len()
    }

    /// Builds a trajectory from parallel amplitude / frequency rows.
    pub fn from_rows(amplitudes: &[Vec<S>], frequencies: &[Vec<S>]) -> Result<Self> {
        if amplitudes.len() != frequencies.len() {
            return Err(Error::DimensionMismatch {
                what: "trajectory frequency rows",
                expected: amplitudes.len(),
                got: frequencies.len(),
            });
        }
        let components = amplitudes
            .iter()
            .zip(frequencies)
            .map(|(a, w)| {
                if a.len() != w.len() {
                    return Err(Error::DimensionMismatch {
                        what: "trajectory frequency terms",
                        expected: a.len(),
                        got: w.len(),
                    });
                }
                Ok(a.iter().copied().zip(w.iter().copied()).collect())
            })
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }

    pub fn amplitudes(&self) -> Vec<Vec<S>> {
        self.components
            .iter()
            .map(|c| c.iter().map(|t| t.0).collect())
            .collect()
    }

    pub fn frequencies(&self) -> Vec<Vec<S>> {
        self.components
            .iter()
            .map(|c| c.iter().map(|t| t.1).collect())
            .collect()
    }

    /// `(x_d(t), ẋ_d(t))`.
    pub fn eval(&self, t: S) -> (Vec<S>, Vec<S>) {
        let mut x = Vec::with_capacity(self.dim());
        let mut v = Vec::with_capacity(self.dim());
        for terms in &self.components {
            let (mut xi, mut vi) = (S::zero(), S::zero());
            for &(a, w) in terms {
                let (s, c) = (w * t).sin_cos();
                xi += a * s;
                vi += a * w * c;
            }
            x.push(xi);
            v.push(vi);
        }
        (x, v)
    }

    /// Common period `2π/gcd(ω)` when every frequency is an integer multiple of the smallest.
    pub fn period(&self) -> Option<S> {
        let freqs: Vec<S> = self
            .components
            .iter()
            .flatten()
            .map(|t| t.1.abs())
            .filter(|w| *w > S::zero())
            .collect();
        let base = freqs.iter().copied().fold(S::infinity(), S::min);
        if !base.is_finite() {
            return None;
        }
        let commensurate = freqs.iter().all(|&w| {
            let r = w / base;
            (r - r.round()).abs() < S::lit(1e-9)
        });
        commensurate.then(|| S::lit(std::f64::consts::TAU) / base)
    }

    /// `max ‖x_d(t)‖` over `samples` points spanning one period (or `[0, span]` if aperiodic).
    pub fn max_norm(&self, span: S, samples: usize) -> S {
        let horizon = self.period().unwrap_or(span);
        let m = samples.max(2);
        (0..m)
            .map(|i| {
                let t = horizon * S::from_count(i) / S::from_count(m - 1);
                crate::linalg::norm2(&self.eval(t).0)
            })
            .fold(S::zero(), S::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn demo_at_origin() {
        let traj = SumOfSines::demo();
        let (x, v) = traj.eval(0.0);
        assert_eq!(x, vec![0.0, 0.0]);
        assert_abs_diff_eq!(v[0], 1.16, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 2.22, epsilon = 1e-15);
    }

    #[test]
    fn derivative_matches_central_differences() {
        let traj = SumOfSines::demo();
        let h = 1e-6;
        for i in 0..=628 {
            let t = i as f64 * 0.01;
            let (_, v) = traj.eval(t);
            let (xp, _) = traj.eval(t + h);
            let (xm, _) = traj.eval(t - h);
            for k in 0..2 {
                assert!(((xp[k] - xm[k]) / (2.0 * h) - v[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn period_and_bound() {
        let traj = SumOfSines::demo();
        assert_abs_diff_eq!(traj.period().unwrap(), std::f64::consts::TAU);
        let m = traj.max_norm(100.0, 20_001);
        assert!(m > 1.0 && m < 1.0 + 0.12 + 0.04 + 0.95 + 0.08);
        let aperiodic = SumOfSines {
            components: vec![vec![(1.0, 1.0), (1.0, std::f64::consts::SQRT_2)]],
        };
        assert!(aperiodic.period().is_none());
    }
}
