//! History stack of filtered pairs, the eigenvalue-driven data selection policy, and the
//! memory regressor
//!
//! ```text
//! 𝒴 = Σ Y_fᵢᵀ Y_fᵢ / (1 + κ‖Y_fᵢ‖²)      𝒰 = Σ Y_fᵢᵀ U_fᵢ / (1 + κ‖Y_fᵢ‖²)
//! ```
//!
//! where `‖·‖` is the Frobenius norm.

use crate::error::{Error, Result};
use crate::integrator::FilteredPair;
use crate::linalg::{exceeds_shift, min_eigenvalue, shifted_logdet, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct StackEntry<S> {
    pub t: S,
    pub yf: Matrix<S>,
    pub uf: Vec<S>,
}

impl<S: Scalar> From<FilteredPair<S>> for StackEntry<S> {
    fn from(fp: FilteredPair<S>) -> Self {
        Self {
            t: fp.t,
            yf: fp.yf,
            uf: fp.uf,
        }
    }
}

/// `(YfᵀYf, YfᵀUf) / (1 + κ‖Yf‖²_F)`.
pub fn normalized_terms<S: Scalar>(entry: &StackEntry<S>, kappa: S) -> (Matrix<S>, Vec<S>) {
    let fro2 = entry.yf.as_slice().iter().fold(S::zero(), |a, &v| a + v * v);
    let scale = S::one() / (S::one() + kappa * fro2);
    let gram = entry.yf.gram().scaled(scale);
    let proj = entry.yf.tr_matvec(&entry.uf).into_iter().map(|v| v * scale).collect();
    (gram, proj)
}

/// Memory regressor `(𝒴, 𝒰)` with its smallest eigenvalue.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryRegressor<S> {
    pub ysum: Matrix<S>,
    pub usum: Vec<S>,
    pub kappa: S,
    pub lambda_min: S,
}

impl<S: Scalar> MemoryRegressor<S> {
    pub fn zeros(p: usize, kappa: S) -> Self {
        Self {
            ysum: Matrix::zeros(p, p),
            usum: vec![S::zero(); p],
            kappa,
            lambda_min: S::zero(),
        }
    }

    pub fn p(&self) -> usize {
        self.usum.len()
    }

    /// `‖𝒰 − 𝒴θ‖`.
    pub fn consistency_residual(&self, theta: &[S]) -> S {
        let pred = self.ysum.matvec(theta);
        crate::linalg::norm2(&crate::linalg::sub_vec(&self.usum, &pred))
    }
}

/// Sums the normalized terms of every entry and caches `λ_min(𝒴)`.
pub fn assemble<S: Scalar>(entries: &[StackEntry<S>], p: usize, kappa: S) -> Result<MemoryRegressor<S>> {
    let mut mr = MemoryRegressor::zeros(p, kappa);
    for e in entries {
        if e.yf.cols() != p {
            return Err(Error::DimensionMismatch {
                what: "stack entry regressor columns",
                expected: p,
                got: e.yf.cols(),
            });
        }
        let (g, v) = normalized_terms(e, kappa);
        mr.ysum.add_scaled(S::one(), &g);
        for (a, b) in mr.usum.iter_mut().zip(v) {
            *a += b;
        }
    }
    mr.lambda_min = min_eigenvalue(&mr.ysum)?;
    Ok(mr)
}

/// Data selection parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StackPolicy<S> {
    /// Number of stored pairs `N`.
    pub capacity: usize,
    /// Eigenvalue target `y̲`.
    pub ybar: S,
    /// Improvement factor `δ ≥ 1` used while the target is unmet.
    pub delta: S,
    /// Normalization gain `κ`.
    pub kappa: S,
}

impl Default for StackPolicy<f64> {
    fn default() -> Self {
        Self {
            capacity: 20,
            ybar: 0.5,
            delta: 1.01,
            kappa: 0.01,
        }
    }
}

impl<S: Scalar> StackPolicy<S> {
    pub fn validate(&self) -> Result<()> {
        if self.capacity == 0 {
            return Err(Error::InvalidConfig("stack capacity N must be at least 1".into()));
        }
        if !(self.ybar > S::zero()) {
            return Err(Error::InvalidConfig("eigenvalue target ybar must be positive".into()));
        }
        if !(self.delta >= S::one()) {
            return Err(Error::InvalidConfig("improvement factor delta must be >= 1".into()));
        }
        if !(self.kappa > S::zero()) {
            return Err(Error::InvalidConfig("normalization gain kappa must be positive".into()));
        }
        Ok(())
    }
}

/// Result of offering one candidate to the stack.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InsertOutcome {
    pub accepted: bool,
    /// Zero-based slot that was dropped (oldest first); `None` while filling or on rejection.
    pub replaced_index: Option<usize>,
}

/// One accepted insertion, for the stack trace log.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StackEvent<S> {
    pub t: S,
    pub replaced_index: Option<usize>,
    pub lambda_min: S,
}

#[derive(Clone, Copy, Debug)]
enum Rule<S> {
    /// Target met: the replacement must keep `λ_min ≥ y̲`.
    KeepTarget(S),
    /// Target unmet: the replacement must give `λ_min > δ·λ_min(𝒴)`.
    Improve(S),
    /// Target unmet and `𝒴` numerically singular: the replacement must raise
    /// `log det(𝒴 + μI)` by at least `ln δ`.
    Volume { shift: S, threshold: S },
}

/// `N`-slot history stack ordered oldest to newest.
#[derive(Clone, Debug)]
pub struct HistoryStack<S> {
    policy: StackPolicy<S>,
    p: usize,
    entries: Vec<StackEntry<S>>,
    terms: Vec<(Matrix<S>, Vec<S>)>,
    ysum: Matrix<S>,
    usum: Vec<S>,
    lambda_min: Option<S>,
    target_met: bool,
    target_met_at: Option<S>,
    work: Matrix<S>,
    trial: Matrix<S>,
    events: Vec<StackEvent<S>>,
    record_events: bool,
}

impl<S: Scalar> HistoryStack<S> {
    pub fn new(p: usize, policy: StackPolicy<S>) -> Result<Self> {
        policy.validate()?;
        Ok(Self {
            policy,
            p,
            entries: Vec::with_capacity(policy.capacity),
            terms: Vec::with_capacity(policy.capacity),
            ysum: Matrix::zeros(p, p),
            usum: vec![S::zero(); p],
            lambda_min: Some(S::zero()),
            target_met: false,
            target_met_at: None,
            work: Matrix::zeros(p, p),
            trial: Matrix::zeros(p, p),
            events: Vec::new(),
            record_events: true,
        })
    }

    /// Disables the per-insertion event log (sweeps only need the aggregate).
    pub fn without_event_log(mut self) -> Self {
        self.record_events = false;
        self
    }

    pub fn policy(&self) -> &StackPolicy<S> {
        &self.policy
    }

    pub fn entries(&self) -> &[StackEntry<S>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() == self.policy.capacity
    }

    pub fn events(&self) -> &[StackEvent<S>] {
        &self.events
    }

    /// Time at which `λ_min(𝒴) ≥ y̲` first held.
    pub fn target_met_at(&self) -> Option<S> {
        self.target_met_at
    }

    pub fn ysum(&self) -> &Matrix<S> {
        &self.ysum
    }

    pub fn usum(&self) -> &[S] {
        &self.usum
    }

    /// `λ_min(𝒴)`, computed on demand after a change.
    pub fn lambda_min(&mut self) -> Result<S> {
        if let Some(l) = self.lambda_min {
            return Ok(l);
        }
        let l = min_eigenvalue(&self.ysum)?;
        self.lambda_min = Some(l);
        Ok(l)
    }

    /// Snapshot of `(𝒴, 𝒰, λ_min)`.
    pub fn memory_regressor(&mut self) -> Result<MemoryRegressor<S>> {
        let lambda_min = self.lambda_min()?;
        Ok(MemoryRegressor {
            ysum: self.ysum.clone(),
            usum: self.usum.clone(),
            kappa: self.policy.kappa,
            lambda_min,
        })
    }

    fn rebuild(&mut self) {
        self.ysum.fill_zero();
        self.usum.iter_mut().for_each(|v| *v = S::zero());
        for (g, v) in &self.terms {
            self.ysum.add_scaled(S::one(), g);
            for (a, &b) in self.usum.iter_mut().zip(v) {
                *a += b;
            }
        }
        self.lambda_min = None;
    }

    fn form_trial(&mut self, j: usize, candidate: &Matrix<S>) {
        let (gj, _) = &self.terms[j];
        for ((t, &y), (&g, &c)) in self
            .trial
            .as_mut_slice()
            .iter_mut()
            .zip(self.ysum.as_slice())
            .zip(gj.as_slice().iter().zip(candidate.as_slice()))
        {
            *t = y - g + c;
        }
    }

    /// Whether replacing slot `j` with the candidate satisfies the acceptance rule.
    fn replacement_accepted(&mut self, j: usize, candidate: &Matrix<S>, rule: Rule<S>) -> Result<bool> {
        self.form_trial(j, candidate);
        let trial = &self.trial;
        match rule {
            Rule::KeepTarget(ybar) => {
                if exceeds_shift(trial, ybar, &mut self.work) {
                    return Ok(true);
                }
                // λ_min == y̲ to rounding: settle it with the eigenvalue itself.
                let tiny = S::epsilon() * S::lit(64.0) * trial.max_abs().max(S::one());
                if exceeds_shift(trial, ybar - tiny, &mut self.work) {
                    return Ok(min_eigenvalue(trial)? >= ybar);
                }
                Ok(false)
            }
            Rule::Improve(shift) => Ok(exceeds_shift(trial, shift, &mut self.work)),
            Rule::Volume { shift, threshold } => {
                Ok(shifted_logdet(trial, shift, &mut self.work).is_some_and(|ld| ld > threshold))
            }
        }
    }

    /// Acceptance rule for the current stack.
    fn rule(&mut self, t: S) -> Result<Rule<S>> {
        if self.target_met {
            return Ok(Rule::KeepTarget(self.policy.ybar));
        }
        let current = self.lambda_min()?;
        if current >= self.policy.ybar {
            self.mark_target(t);
            return Ok(Rule::KeepTarget(self.policy.ybar));
        }
        let trace = self.ysum.diagonal().into_iter().fold(S::zero(), |a, v| a + v);
        let floor = S::epsilon().sqrt() * if trace > S::zero() { trace } else { S::one() };
        if current > floor {
            return Ok(Rule::Improve(self.policy.delta * current));
        }
        // λ_min is rounding noise: rank the stack by regularized volume instead.
        let base = shifted_logdet(&self.ysum, floor, &mut self.work).unwrap_or_else(S::neg_infinity);
        Ok(Rule::Volume {
            shift: floor,
            threshold: base + self.policy.delta.ln(),
        })
    }

    fn check_candidate(&self, candidate: &StackEntry<S>) -> Result<()> {
        if candidate.yf.cols() != self.p || candidate.uf.len() != candidate.yf.rows() {
            return Err(Error::DimensionMismatch {
                what: "stack candidate",
                expected: self.p,
                got: candidate.yf.cols(),
            });
        }
        Ok(())
    }

    /// Offers a candidate pair.
    ///
    /// The first `N` candidates are stored unconditionally. Afterwards, if `λ_min(𝒴) ≥ y̲`
    /// the oldest slot whose replacement keeps `λ_min ≥ y̲` is dropped; otherwise the oldest
    /// slot whose replacement gives `λ_min > δ·λ_min(𝒴)` is dropped. While `𝒴` is singular to
    /// working precision (`λ_min ≤ √ε·tr 𝒴`) the eigenvalue comparison is meaningless, and the
    /// regularized volume `det(𝒴 + μI)`, `μ = √ε·tr 𝒴`, must grow by the factor `δ` instead. Entries after the dropped
    /// slot shift down and the candidate becomes the newest entry.
    pub fn try_insert(&mut self, candidate: StackEntry<S>) -> Result<InsertOutcome> {
        self.check_candidate(&candidate)?;
        let term = normalized_terms(&candidate, self.policy.kappa);

        if !self.is_full() {
            let t = candidate.t;
            self.entries.push(candidate);
            self.terms.push(term);
            self.rebuild();
            self.after_accept(t, None)?;
            return Ok(InsertOutcome {
                accepted: true,
                replaced_index: None,
            });
        }

        let rule = self.rule(candidate.t)?;
        for j in 0..self.entries.len() {
            if self.replacement_accepted(j, &term.0, rule)? {
                let t = candidate.t;
                self.entries.remove(j);
                self.terms.remove(j);
                self.entries.push(candidate);
                self.terms.push(term);
                self.rebuild();
                if let Rule::KeepTarget(_) = rule {
                    // The acceptance test already certifies λ_min ≥ y̲.
                    self.target_met = true;
                }
                self.after_accept(t, Some(j))?;
                return Ok(InsertOutcome {
                    accepted: true,
                    replaced_index: Some(j),
                });
            }
        }
        Ok(InsertOutcome {
            accepted: false,
            replaced_index: None,
        })
    }

    fn mark_target(&mut self, t: S) {
        self.target_met = true;
        if self.target_met_at.is_none() {
            self.target_met_at = Some(t);
        }
    }

    fn after_accept(&mut self, t: S, replaced_index: Option<usize>) -> Result<()> {
        if self.record_events || !self.target_met {
            let l = self.lambda_min()?;
            if l >= self.policy.ybar && self.is_full() {
                self.mark_target(t);
            }
            if self.record_events {
                self.events.push(StackEvent {
                    t,
                    replaced_index,
                    lambda_min: l,
                });
            }
        }
        Ok(())
    }

    /// Writes the event log as `t,replaced_index,lambda_min` lines with a header.
    pub fn write_event_log<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,replaced_index,lambda_min")?;
        for e in &self.events {
            let idx = e
                .replaced_index
                .map_or_else(|| "fill".to_string(), |i| (i + 1).to_string());
            writeln!(out, "{},{},{:e}", e.t, idx, e.lambda_min)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn entry(t: f64, yf: Vec<Vec<f64>>, uf: Vec<f64>) -> StackEntry<f64> {
        StackEntry {
            t,
            yf: Matrix::from_rows(&yf).unwrap(),
            uf,
        }
    }

    #[test]
    fn normalized_terms_examples() {
        let zero = entry(1.0, vec![vec![0.0, 0.0]], vec![3.0]);
        let (g, v) = normalized_terms(&zero, 0.01);
        assert_eq!(g, Matrix::zeros(2, 2));
        assert_eq!(v, vec![0.0, 0.0]);

        let (g, v) = normalized_terms(&entry(1.0, vec![vec![1.0]], vec![2.0]), 1.0);
        assert_abs_diff_eq!(g[(0, 0)], 0.5);
        assert_abs_diff_eq!(v[0], 1.0);

        // ‖Yf‖²_F = 9 + 16 = 25 → denominator 1.25 at κ = 0.01
        let (g, _) = normalized_terms(&entry(1.0, vec![vec![3.0, 4.0]], vec![0.0]), 0.01);
        assert_abs_diff_eq!(g[(0, 0)], 9.0 / 1.25, epsilon = 1e-14);
        assert_abs_diff_eq!(g[(0, 1)], 12.0 / 1.25, epsilon = 1e-14);
    }

    #[test]
    fn assemble_examples() {
        let zeros: Vec<_> = (0..3)
            .map(|i| entry(i as f64, vec![vec![0.0, 0.0]], vec![0.0]))
            .collect();
        let mr = assemble(&zeros, 2, 0.01).unwrap();
        assert_eq!(mr.ysum, Matrix::zeros(2, 2));
        assert_eq!(mr.usum, vec![0.0, 0.0]);
        assert_eq!(mr.lambda_min, 0.0);

        // κ = 0 leaves the single term unnormalized: 𝒰 = 𝒴θ.
        let theta = -0.7;
        let mr = assemble(&[entry(1.0, vec![vec![1.0]], vec![theta])], 1, 0.0).unwrap();
        assert_eq!(mr.ysum[(0, 0)], 1.0);
        assert_eq!(mr.usum[0], theta);
        assert_eq!(mr.consistency_residual(&[theta]), 0.0);
    }

    fn identity_candidate(t: f64, p: usize) -> StackEntry<f64> {
        // YfᵀYf = c·I with c/(1 + κ c p) = 1 after normalization.
        let kappa = 0.01;
        let c = 1.0 / (1.0 - kappa * p as f64);
        let yf = Matrix::identity(p).scaled(c.sqrt());
        StackEntry {
            t,
            yf,
            uf: vec![0.0; p],
        }
    }

    #[test]
    fn informative_candidate_replaces_zero_data() {
        let p = 3;
        let policy = StackPolicy {
            capacity: 4,
            ybar: 0.5,
            delta: 1.01,
            kappa: 0.01,
        };
        let mut stack = HistoryStack::new(p, policy).unwrap();
        for i in 0..4 {
            let out = stack
                .try_insert(StackEntry {
                    t: i as f64,
                    yf: Matrix::zeros(p, p),
                    uf: vec![0.0; p],
                })
                .unwrap();
            assert_eq!(
                out,
                InsertOutcome {
                    accepted: true,
                    replaced_index: None
                }
            );
        }
        let before = stack.lambda_min().unwrap();
        let cand = identity_candidate(10.0, p);
        let (g, _) = normalized_terms(&cand, 0.01);
        assert!(g.max_abs_diff(&Matrix::identity(p)) < 1e-12);
        let out = stack.try_insert(cand).unwrap();
        assert_eq!(
            out,
            InsertOutcome {
                accepted: true,
                replaced_index: Some(0)
            }
        );
        assert!(stack.lambda_min().unwrap() > before);
        assert_eq!(stack.entries().last().unwrap().t, 10.0);
        assert_eq!(stack.entries()[0].t, 1.0);
    }

    #[test]
    fn zero_candidate_rejected_while_improving() {
        let p = 2;
        let policy = StackPolicy {
            capacity: 2,
            ybar: 10.0,
            delta: 1.01,
            kappa: 0.01,
        };
        let mut stack = HistoryStack::new(p, policy).unwrap();
        stack.try_insert(identity_candidate(0.0, p)).unwrap();
        stack.try_insert(identity_candidate(1.0, p)).unwrap();
        let out = stack
            .try_insert(StackEntry {
                t: 2.0,
                yf: Matrix::zeros(p, p),
                uf: vec![0.0; p],
            })
            .unwrap();
        assert_eq!(
            out,
            InsertOutcome {
                accepted: false,
                replaced_index: None
            }
        );
        assert_eq!(stack.entries()[1].t, 1.0);
    }

    #[test]
    fn duplicate_of_newest_accepted_when_target_met() {
        let p = 2;
        let policy = StackPolicy {
            capacity: 3,
            ybar: 0.5,
            delta: 1.01,
            kappa: 0.01,
        };
        let mut stack = HistoryStack::new(p, policy).unwrap();
        let rows = [vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]], vec![vec![1.0, 1.0]]];
        for (i, r) in rows.iter().enumerate() {
            stack.try_insert(entry(i as f64, r.clone(), vec![0.0])).unwrap();
        }
        assert!(stack.lambda_min().unwrap() >= 0.5);
        let dup = entry(3.0, rows[2].clone(), vec![0.0]);

        // Brute force: first j (oldest first) whose replacement keeps λ_min ≥ y̲.
        let expected = (0..3).find(|&j| {
            let mut trial: Vec<_> = stack.entries().to_vec();
            trial.remove(j);
            trial.push(dup.clone());
            assemble(&trial, p, 0.01).unwrap().lambda_min >= 0.5
        });
        let out = stack.try_insert(dup).unwrap();
        assert!(out.accepted);
        assert_eq!(out.replaced_index, expected);
        assert!(stack.lambda_min().unwrap() >= 0.5);
    }

    #[test]
    fn singular_stack_accepts_new_directions_only() {
        // Rank-one data along e₁; λ_min stays at zero, so the volume rule decides.
        let p = 2;
        let policy = StackPolicy {
            capacity: 3,
            ybar: 0.5,
            delta: 1.01,
            kappa: 0.01,
        };
        let mut stack = HistoryStack::new(p, policy).unwrap();
        for i in 0..3 {
            stack
                .try_insert(entry(i as f64, vec![vec![1.0, 0.0]], vec![0.0]))
                .unwrap();
        }
        assert_eq!(stack.lambda_min().unwrap(), 0.0);
        let same = stack.try_insert(entry(3.0, vec![vec![1.0, 0.0]], vec![0.0])).unwrap();
        assert!(!same.accepted);
        let fresh = stack.try_insert(entry(4.0, vec![vec![0.0, 1.0]], vec![0.0])).unwrap();
        assert_eq!(
            fresh,
            InsertOutcome {
                accepted: true,
                replaced_index: Some(0)
            }
        );
        assert!(stack.lambda_min().unwrap() > 0.0);
    }

    #[test]
    fn rejects_bad_candidates_and_policies() {
        let mut stack = HistoryStack::new(3, StackPolicy::default()).unwrap();
        assert!(stack.try_insert(entry(0.0, vec![vec![1.0, 2.0]], vec![0.0])).is_err());
        let bad = StackPolicy {
            delta: 0.9,
            ..StackPolicy::default()
        };
        assert!(HistoryStack::<f64>::new(3, bad).is_err());
        let bad = StackPolicy {
            capacity: 0,
            ..StackPolicy::default()
        };
        assert!(HistoryStack::<f64>::new(3, bad).is_err());
    }

    #[test]
    fn event_log_format() {
        let mut stack = HistoryStack::new(
            1,
            StackPolicy {
                capacity: 1,
                ..StackPolicy::default()
            },
        )
        .unwrap();
        stack.try_insert(entry(0.5, vec![vec![1.0]], vec![1.0])).unwrap();
        stack.try_insert(entry(0.75, vec![vec![2.0]], vec![1.0])).unwrap();
        let mut buf = Vec::new();
        stack.write_event_log(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,replaced_index,lambda_min");
        assert!(lines[1].starts_with("0.5,fill,"));
        assert!(lines[2].starts_with("0.75,1,"));
    }
}
