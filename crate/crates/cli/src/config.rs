//! Sectioned `key = value` scenario files.
//!
//! ```text
//! # comment
//! [controller]
//! K = 10, 0; 0, 10
//! [estimator]
//! lambda = 0.01
//! ```
//!
//! Vectors are comma lists, matrices are `;`-separated rows. Keys left out keep the
//! reference scenario value. `--set section.key=value` goes through the same path.

use std::fmt::Write as _;
use std::path::Path;

use spicl::basis::ControlEffectiveness;
use spicl::experiment::{SimConfig, SumOfSines};
use spicl::history_stack::StackPolicy;
use spicl::{Matrix64, SimConfig64};

use crate::error::CliError;

pub const SECTIONS: [&str; 6] = ["plant", "controller", "estimator", "stack", "simulation", "metrics"];

/// Parsed scenario file. Plain data, so it can be compared and written back out.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioFile {
    // [plant]
    pub basis_degree: u32,
    pub x0: Vec<f64>,
    pub theta_true: Vec<f64>,
    /// `None` is the identity.
    pub g: Option<Vec<Vec<f64>>>,
    pub xd_amplitudes: Vec<Vec<f64>>,
    pub xd_frequencies: Vec<Vec<f64>>,
    // [controller]
    pub k: Vec<Vec<f64>>,
    pub r_e: f64,
    pub r: f64,
    // [estimator]
    pub theta_hat0: Vec<f64>,
    pub gamma_matrix: Vec<f64>,
    pub gamma: f64,
    pub lambda: f64,
    pub r_theta: f64,
    pub epsilon: f64,
    pub freeze: bool,
    // [stack]
    pub stack_size: usize,
    pub ybar: f64,
    pub delta: f64,
    pub kappa: f64,
    pub t_window: f64,
    // [simulation]
    pub h: f64,
    pub t_final: f64,
    pub decimate: usize,
    // [metrics]
    pub threshold: f64,
    pub error_window: Vec<f64>,
    pub chatter_window: Vec<f64>,
    pub bound_window: Vec<f64>,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        let d = SimConfig::demo();
        Self {
            basis_degree: d.basis_degree,
            x0: d.x0.clone(),
            theta_true: d.theta_true.clone(),
            g: None,
            xd_amplitudes: d.trajectory.amplitudes(),
            xd_frequencies: d.trajectory.frequencies(),
            k: d.k.to_rows(),
            r_e: d.r_e,
            r: d.r,
            theta_hat0: d.theta_hat0.clone(),
            gamma_matrix: d.adaptation_gain.clone(),
            gamma: d.icl_gain,
            lambda: d.sparsity,
            r_theta: d.r_theta,
            epsilon: d.epsilon,
            freeze: d.freeze_estimate,
            stack_size: d.stack.capacity,
            ybar: d.stack.ybar,
            delta: d.stack.delta,
            kappa: d.stack.kappa,
            t_window: d.window,
            h: d.h,
            t_final: d.t_final,
            decimate: d.decimate,
            threshold: d.sparsity_threshold,
            error_window: vec![d.error_window.0, d.error_window.1],
            chatter_window: vec![d.chatter_window.0, d.chatter_window.1],
            bound_window: vec![d.bound_window.0, d.bound_window.1],
        }
    }
}

fn scalar(key: &str, v: &str) -> Result<f64, String> {
    let x: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("{key}: expected a number, got {v:?}"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{key}: value must be finite"))
    }
}

fn count(key: &str, v: &str) -> Result<usize, String> {
    v.trim()
        .parse()
        .map_err(|_| format!("{key}: expected a non-negative integer, got {v:?}"))
}

fn boolean(key: &str, v: &str) -> Result<bool, String> {
    match v.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("{key}: expected true or false, got {other:?}")),
    }
}

fn vector(key: &str, v: &str) -> Result<Vec<f64>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|c| scalar(key, c)).collect()
}

fn rows(key: &str, v: &str) -> Result<Vec<Vec<f64>>, String> {
    v.split(';').map(|r| vector(key, r)).collect()
}

fn matrix(key: &str, v: &str) -> Result<Vec<Vec<f64>>, String> {
    let m = rows(key, v)?;
    if m.iter().any(|r| r.len() != m[0].len() || r.is_empty()) {
        return Err(format!("{key}: matrix rows must be non-empty and of equal length"));
    }
    Ok(m)
}

fn window(key: &str, v: &str) -> Result<Vec<f64>, String> {
    let w = vector(key, v)?;
    if w.len() != 2 || w[0] >= w[1] {
        return Err(format!("{key}: expected start, end with start < end"));
    }
    Ok(w)
}

fn fmt_vector(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn fmt_rows(m: &[Vec<f64>]) -> String {
    m.iter().map(|r| fmt_vector(r)).collect::<Vec<_>>().join("; ")
}

impl ScenarioFile {
    /// Assigns one key. `Ok(false)` means the key is unknown.
    fn assign(&mut self, section: &str, key: &str, value: &str) -> Result<bool, String> {
        let name = format!("{section}.{key}");
        let k = name.as_str();
        match (section, key) {
            ("plant", "basis_degree") => self.basis_degree = count(k, value)? as u32,
            ("plant", "x0") => self.x0 = vector(k, value)?,
            ("plant", "theta_true") => self.theta_true = vector(k, value)?,
            ("plant", "g") => {
                self.g = if value.trim() == "identity" {
                    None
                } else {
                    Some(matrix(k, value)?)
                }
            }
            ("plant", "xd_amplitudes") => self.xd_amplitudes = rows(k, value)?,
            ("plant", "xd_frequencies") => self.xd_frequencies = rows(k, value)?,
            ("controller", "K") => self.k = matrix(k, value)?,
            ("controller", "r_e") => self.r_e = scalar(k, value)?,
            ("controller", "r") => self.r = scalar(k, value)?,
            ("estimator", "theta_hat0") => self.theta_hat0 = vector(k, value)?,
            ("estimator", "Gamma") => self.gamma_matrix = vector(k, value)?,
            ("estimator", "gamma") => self.gamma = scalar(k, value)?,
            ("estimator", "lambda") => self.lambda = scalar(k, value)?,
            ("estimator", "r_theta") => self.r_theta = scalar(k, value)?,
            ("estimator", "epsilon") => self.epsilon = scalar(k, value)?,
            ("estimator", "freeze") => self.freeze = boolean(k, value)?,
            ("stack", "N") => self.stack_size = count(k, value)?,
            ("stack", "ybar") => self.ybar = scalar(k, value)?,
            ("stack", "delta") => self.delta = scalar(k, value)?,
            ("stack", "kappa") => self.kappa = scalar(k, value)?,
            ("stack", "T_window") => self.t_window = scalar(k, value)?,
            ("simulation", "h") => self.h = scalar(k, value)?,
            ("simulation", "t_final") => self.t_final = scalar(k, value)?,
            ("simulation", "decimate") => self.decimate = count(k, value)?,
            ("metrics", "threshold") => self.threshold = scalar(k, value)?,
            ("metrics", "error_window") => self.error_window = window(k, value)?,
            ("metrics", "chatter_window") => self.chatter_window = window(k, value)?,
            ("metrics", "bound_window") => self.bound_window = window(k, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn entries(&self) -> Vec<(&'static str, &'static str, String)> {
        vec![
            ("plant", "basis_degree", self.basis_degree.to_string()),
            ("plant", "x0", fmt_vector(&self.x0)),
            ("plant", "theta_true", fmt_vector(&self.theta_true)),
            (
                "plant",
                "g",
                self.g.as_deref().map_or_else(|| "identity".into(), fmt_rows),
            ),
            ("plant", "xd_amplitudes", fmt_rows(&self.xd_amplitudes)),
            ("plant", "xd_frequencies", fmt_rows(&self.xd_frequencies)),
            ("controller", "K", fmt_rows(&self.k)),
            ("controller", "r_e", self.r_e.to_string()),
            ("controller", "r", self.r.to_string()),
            ("estimator", "theta_hat0", fmt_vector(&self.theta_hat0)),
            ("estimator", "Gamma", fmt_vector(&self.gamma_matrix)),
            ("estimator", "gamma", self.gamma.to_string()),
            ("estimator", "lambda", self.lambda.to_string()),
            ("estimator", "r_theta", self.r_theta.to_string()),
            ("estimator", "epsilon", self.epsilon.to_string()),
            ("estimator", "freeze", self.freeze.to_string()),
            ("stack", "N", self.stack_size.to_string()),
            ("stack", "ybar", self.ybar.to_string()),
            ("stack", "delta", self.delta.to_string()),
            ("stack", "kappa", self.kappa.to_string()),
            ("stack", "T_window", self.t_window.to_string()),
            ("simulation", "h", self.h.to_string()),
            ("simulation", "t_final", self.t_final.to_string()),
            ("simulation", "decimate", self.decimate.to_string()),
            ("metrics", "threshold", self.threshold.to_string()),
            ("metrics", "error_window", fmt_vector(&self.error_window)),
            ("metrics", "chatter_window", fmt_vector(&self.chatter_window)),
            ("metrics", "bound_window", fmt_vector(&self.bound_window)),
        ]
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        let mut section: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::parse(line_no, format!("unterminated section header {line:?}")))?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(CliError::parse(line_no, format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::parse(line_no, format!("expected key = value, got {line:?}")))?;
            let key = key.trim();
            let section = section
                .as_deref()
                .ok_or_else(|| CliError::parse(line_no, format!("key {key} appears before any section")))?;
            match cfg.assign(section, key, value) {
                Ok(true) => {}
                Ok(false) => {
                    return Err(CliError::parse(line_no, format!("unknown key {section}.{key}")));
                }
                Err(msg) => return Err(CliError::parse(line_no, msg)),
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| e.in_file(path))
    }

    /// Applies one `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), CliError> {
        let bad = |msg: String| CliError::Config(format!("--set {spec}: {msg}"));
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| bad("expected section.key=value".into()))?;
        let (section, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| bad("key must be written as section.key".into()))?;
        match self.assign(section, key, value) {
            Ok(true) => Ok(()),
            Ok(false) => Err(bad(format!("unknown key {}", path.trim()))),
            Err(msg) => Err(bad(msg)),
        }
    }

    pub fn serialize(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for (section, key, value) in self.entries() {
            if section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Builds and validates the core scenario.
    pub fn to_sim_config(&self) -> Result<SimConfig64, CliError> {
        let matrix_of =
            |key: &str, m: &[Vec<f64>]| Matrix64::from_rows(m).map_err(|e| CliError::Config(format!("{key}: {e}")));
        let effectiveness = match &self.g {
            None => ControlEffectiveness::Identity(self.x0.len()),
            Some(g) => ControlEffectiveness::Constant(matrix_of("[plant].g", g)?),
        };
        let trajectory = SumOfSines::from_rows(&self.xd_amplitudes, &self.xd_frequencies)
            .map_err(|e| CliError::Config(format!("[plant].xd_amplitudes/xd_frequencies: {e}")))?;
        let cfg = SimConfig {
            basis_degree: self.basis_degree,
            effectiveness,
            x0: self.x0.clone(),
            theta_true: self.theta_true.clone(),
            trajectory,
            k: matrix_of("[controller].K", &self.k)?,
            r_e: self.r_e,
            r: self.r,
            theta_hat0: self.theta_hat0.clone(),
            adaptation_gain: self.gamma_matrix.clone(),
            icl_gain: self.gamma,
            sparsity: self.lambda,
            r_theta: self.r_theta,
            epsilon: self.epsilon,
            freeze_estimate: self.freeze,
            stack: StackPolicy {
                capacity: self.stack_size,
                ybar: self.ybar,
                delta: self.delta,
                kappa: self.kappa,
            },
            window: self.t_window,
            h: self.h,
            t_final: self.t_final,
            decimate: self.decimate,
            sparsity_threshold: self.threshold,
            error_window: (self.error_window[0], self.error_window[1]),
            chatter_window: (self.chatter_window[0], self.chatter_window[1]),
            bound_window: (self.bound_window[0], self.bound_window[1]),
        };
        cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(cfg)
    }
}
