//! Plot-ready text output of runs.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::scalar::Scalar;

use super::recovery::format_score;
use super::simulation::RunResult;

pub const TRACKING_ERROR_FILE: &str = "tracking_error_norm.dat";
pub const PARAMETER_ERROR_FILE: &str = "parameter_estimation_error_norm.dat";
pub const STACK_EVENTS_FILE: &str = "stack_events.csv";
pub const RUN_SUMMARY_FILE: &str = "run_summary.txt";
pub const GAIN_REPORT_FILE: &str = "gain_report.txt";

/// Two whitespace-separated columns `t value`, one row per sample.
pub fn write_series<S: Scalar, W: Write>(mut out: W, times: &[S], values: &[S]) -> io::Result<()> {
    for (t, v) in times.iter().zip(values) {
        writeln!(out, "{:.6} {:.9e}", t.as_f64(), v.as_f64())?;
    }
    out.flush()
}

/// `key = value` lines describing a completed run.
pub fn run_summary<S: Scalar>(run: &RunResult<S>, ybar: S) -> String {
    let m = &run.metrics;
    let c = m.confusion;
    let mut lines = vec![
        ("lambda".to_string(), format!("{:e}", run.lambda.as_f64())),
        ("failed".into(), "false".into()),
        ("rms_e".into(), format!("{:.6e}", m.rms_e)),
        ("theta_err_tf".into(), format!("{:.6e}", m.theta_err_final)),
        ("nonzeros".into(), m.nonzeros.to_string()),
        ("tp".into(), c.tp.to_string()),
        ("fp".into(), c.fp.to_string()),
        ("fn".into(), c.fn_.to_string()),
        ("tn".into(), c.tn.to_string()),
        ("precision".into(), format_score(m.scores.precision)),
        ("recall".into(), format_score(m.scores.recall)),
        ("f1".into(), format!("{:.2}", m.scores.f1)),
        ("lambda_min_final".into(), format!("{:.6e}", m.lambda_min_final)),
        (
            "lambda_min_target_met".into(),
            (m.lambda_min_final >= ybar.as_f64()).to_string(),
        ),
        (
            "target_met_at".into(),
            m.target_met_at.map_or_else(|| "--".into(), |t| format!("{t}")),
        ),
        ("max_theta_hat_norm".into(), format!("{:.6e}", m.max_theta_hat_norm)),
        ("max_filter_residual".into(), format!("{:.6e}", m.max_filter_residual)),
        ("chatter_p2p".into(), format!("{:.6e}", m.chatter)),
        ("z_limsup".into(), format!("{:.6e}", m.z_limsup)),
        ("accepted_insertions".into(), m.accepted_insertions.to_string()),
        (
            "theta_hat_tf".into(),
            run.theta_hat_final
                .iter()
                .map(|v| format!("{:.6e}", v.as_f64()))
                .collect::<Vec<_>>()
                .join(","),
        ),
    ];
    lines.extend(
        run.gain_report
            .to_kv_lines()
            .into_iter()
            .map(|(k, v)| (format!("gains.{k}"), v)),
    );
    lines.into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Writes series files, the stack event log, the gain report and the run summary into `dir`.
pub fn write_run_files<S: Scalar>(dir: &Path, run: &RunResult<S>, ybar: S) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let s = &run.series;
    write_series(
        BufWriter::new(fs::File::create(dir.join(TRACKING_ERROR_FILE))?),
        &s.times,
        &s.e_norm,
    )?;
    write_series(
        BufWriter::new(fs::File::create(dir.join(PARAMETER_ERROR_FILE))?),
        &s.times,
        &s.theta_err_norm,
    )?;
    let mut ev = BufWriter::new(fs::File::create(dir.join(STACK_EVENTS_FILE))?);
    writeln!(ev, "t,replaced_index,lambda_min")?;
    for e in &run.stack_events {
        let idx = e
            .replaced_index
            .map_or_else(|| "fill".to_string(), |i| (i + 1).to_string());
        writeln!(ev, "{:.6},{},{:.6e}", e.t.as_f64(), idx, e.lambda_min.as_f64())?;
    }
    ev.flush()?;
    fs::write(dir.join(GAIN_REPORT_FILE), run.gain_report.to_string())?;
    fs::write(dir.join(RUN_SUMMARY_FILE), run_summary(run, ybar))?;
    Ok(())
}
