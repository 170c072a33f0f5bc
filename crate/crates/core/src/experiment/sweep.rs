use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::recovery::{format_score, ConfusionCounts, RecoveryScores};
use super::scenario::SimConfig;
use super::simulation::{run_scenario, RunMetrics, RunResult};

/// One λ of a sweep; `failure` is set when the run did not complete.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub failure: Option<String>,
    pub metrics: Option<RunMetrics>,
    pub ultimate_bound: f64,
    pub gains_pass: bool,
}

impl SweepRow {
    pub fn nonzeros(&self) -> Option<usize> {
        self.metrics.as_ref().map(|m| m.nonzeros)
    }

    pub fn confusion(&self) -> Option<ConfusionCounts> {
        self.metrics.as_ref().map(|m| m.confusion)
    }

    pub fn scores(&self) -> Option<RecoveryScores> {
        self.metrics.as_ref().map(|m| m.scores)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
}

pub const SUMMARY_COLUMNS: [&str; 20] = [
    "lambda",
    "failed",
    "nonzeros",
    "rms_e",
    "theta_err_tf",
    "tp",
    "fp",
    "fn",
    "tn",
    "precision",
    "recall",
    "f1",
    "chatter_p2p",
    "lambda_min_final",
    "target_met_at",
    "max_theta_hat_norm",
    "max_filter_residual",
    "z_limsup",
    "ultimate_bound",
    "gains_pass",
];

fn num(v: f64) -> String {
    format!("{v:.6e}")
}

impl SweepReport {
    pub fn row(&self, lambda: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.lambda == lambda)
    }

    /// Comma-separated table with a header row; failed rows keep every column.
    pub fn summary_table(&self) -> String {
        let mut out = SUMMARY_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let mut cells = vec![num(r.lambda), r.failure.is_some().to_string()];
            match &r.metrics {
                Some(m) => {
                    let c = m.confusion;
                    cells.extend([
                        m.nonzeros.to_string(),
                        num(m.rms_e),
                        num(m.theta_err_final),
                        c.tp.to_string(),
                        c.fp.to_string(),
                        c.fn_.to_string(),
                        c.tn.to_string(),
                        format_score(m.scores.precision),
                        format_score(m.scores.recall),
                        format!("{:.2}", m.scores.f1),
                        num(m.chatter),
                        num(m.lambda_min_final),
                        m.target_met_at.map_or_else(|| "--".to_string(), num),
                        num(m.max_theta_hat_norm),
                        num(m.max_filter_residual),
                        num(m.z_limsup),
                    ]);
                }
                None => cells.extend(std::iter::repeat_n("--".to_string(), 16)),
            }
            cells.push(num(r.ultimate_bound));
            cells.push(r.gains_pass.to_string());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    /// One block per λ with the confusion counts and derived scores.
    pub fn confusion_blocks(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let _ = writeln!(out, "[lambda = {}]", num(r.lambda));
            match (&r.metrics, &r.failure) {
                (Some(m), _) => {
                    let c = m.confusion;
                    let _ = writeln!(out, "TP = {}", c.tp);
                    let _ = writeln!(out, "FP = {}", c.fp);
                    let _ = writeln!(out, "FN = {}", c.fn_);
                    let _ = writeln!(out, "TN = {}", c.tn);
                    let _ = writeln!(out, "precision = {}", format_score(m.scores.precision));
                    let _ = writeln!(out, "recall = {}", format_score(m.scores.recall));
                    let _ = writeln!(out, "f1 = {:.2}", m.scores.f1);
                }
                (None, Some(msg)) => {
                    let _ = writeln!(out, "failed = {msg}");
                }
                (None, None) => {}
            }
            out.push('\n');
        }
        out
    }
}

fn to_row<S: Scalar>(lambda: S, cfg: &SimConfig<S>, outcome: &Result<RunResult<S>>) -> SweepRow {
    let static_report = cfg.with_sparsity(lambda).gain_report().ok();
    match outcome {
        Ok(run) => SweepRow {
            lambda: lambda.as_f64(),
            failure: None,
            metrics: Some(run.metrics.clone()),
            ultimate_bound: run.gain_report.ultimate_bound,
            gains_pass: run.gain_report.passes_printed(),
        },
        Err(e) => SweepRow {
            lambda: lambda.as_f64(),
            failure: Some(e.to_string()),
            metrics: None,
            ultimate_bound: static_report.as_ref().map_or(f64::NAN, |r| r.ultimate_bound),
            gains_pass: static_report.is_some_and(|r| r.passes_printed()),
        },
    }
}

/// Runs one scenario per λ on `workers` threads. `on_run` is called from the worker that
/// produced each run (per-λ file output belongs there); rows come back in input order.
pub fn lambda_sweep_with<S, F>(cfg: &SimConfig<S>, lambdas: &[S], workers: usize, on_run: F) -> Result<SweepReport>
where
    S: Scalar,
    F: Fn(S, &Result<RunResult<S>>) + Sync,
{
    if let Some(bad) = lambdas.iter().find(|l| !(**l >= S::zero())) {
        return Err(Error::InvalidConfig(format!("sparsity values must be >= 0, got {bad}")));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let rows = pool.install(|| {
        lambdas
            .par_iter()
            .map(|&lambda| {
                let run_cfg = cfg.with_sparsity(lambda);
                let outcome = run_scenario(&run_cfg);
                on_run(lambda, &outcome);
                to_row(lambda, &run_cfg, &outcome)
            })
            .collect::<Vec<_>>()
    });
    Ok(SweepReport { rows })
}

/// Runs one scenario per λ and collects the report rows.
pub fn lambda_sweep<S: Scalar>(cfg: &SimConfig<S>, lambdas: &[S], workers: usize) -> Result<SweepReport> {
    lambda_sweep_with(cfg, lambdas, workers, |_, _| {})
}

/// Directory name for a λ: `%g`-style text with `.` → `p` and `-` → `m`
/// (`0`, `1em05`, `0p0001`, `0p005`, `0p1`).
pub fn lambda_dir_name(lambda: f64) -> String {
    let text = if lambda != 0.0 && lambda.abs() < 1e-4 {
        let s = format!("{lambda:e}");
        let (mant, exp) = s.split_once('e').expect("exponent form");
        let exp: i32 = exp.parse().expect("integer exponent");
        format!("{mant}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        format!("{lambda}")
    };
    format!("lambda_{}", text.replace('.', "p").replace('-', "m").replace('+', ""))
}
