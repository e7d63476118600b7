//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Vectors are comma separated;
//! matrices are written inline with `;` between rows (`1, 0; 0, 1`) or as a
//! path to a text grid with one row per line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};

use super::RunConfig;
use crate::error::{IsadError, Result};
use crate::penalty::ApoKind;
use crate::problems::{bundled, ProblemInstance, ProblemKind, ProblemOptions};
use crate::sampling::{DistributionKind, SamplingRegime};

const KNOWN_KEYS: &[&str] = &[
    "problem.kind",
    "problem.n",
    "dist.kind",
    "dist.mean",
    "dist.noise_scale",
    "dist.subgaussian",
    "apo.kind",
    "apo.eps",
    "beta0",
    "regime.epsilon",
    "regime.theta_scale",
    "max_rounds",
    "tol_dx",
    "tol_kkt",
    "stop_window",
    "seed",
    "gamma",
    "phi.mu",
    "inner_tol",
    "max_inner",
    "bound_guard",
    "x0",
    "z0",
    "tikhonov.lambda",
    "irl.g",
    "irl.f_inv",
    "out",
    "verify.trials",
    "verify.t_max",
    "verify.eps_prime",
    "verify.samples",
    "verify.beta",
];

/// Settings of the Monte-Carlo checks.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub trials: usize,
    pub t_max: usize,
    pub eps_prime: f64,
    /// Matrices averaged per estimate in the bias check.
    pub samples: usize,
    pub beta: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            t_max: 30,
            eps_prime: 0.25,
            samples: 4,
            beta: 1.0,
        }
    }
}

/// A parsed configuration file.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub options: ProblemOptions,
    pub run: RunConfig,
    /// `apo.kind` when given; otherwise the problem's natural oracle is used.
    pub apo: Option<ApoKind>,
    /// `regime.epsilon`.
    pub regime_epsilon: f64,
    pub theta_scale: f64,
    pub out: Option<PathBuf>,
    pub verify: VerifyConfig,
}

impl ExperimentConfig {
    /// Builds the problem and completes the run settings from it.
    pub fn build(&self) -> Result<(RunConfig, ProblemInstance)> {
        let instance = bundled(self.problem, self.run.seed, &self.options)?;
        let mut run = self.run.clone();
        run.apo = self.apo.unwrap_or(instance.apo);
        run.regime = SamplingRegime::with_scale(self.regime_epsilon, instance.dist.subgaussian(), self.theta_scale)?;
        if run.x0.is_none() {
            run.x0 = instance.x0.clone();
        }
        Ok((run, instance))
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> IsadError {
    IsadError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_real(raw: &str) -> std::result::Result<f64, String> {
    raw.trim()
        .parse::<f64>()
        .map_err(|e| format!("'{raw}' is not a number ({e})"))
}

/// Comma- or whitespace-separated reals.
pub fn parse_vector(raw: &str) -> std::result::Result<Vec<f64>, String> {
    raw.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(parse_real)
        .collect()
}

/// Rows separated by `;` or newlines, entries by commas or whitespace.
pub fn parse_matrix(raw: &str) -> Result<DMatrix<f64>> {
    let rows: Vec<Vec<f64>> = raw
        .split(['\n', ';'])
        .map(|r| r.split('#').next().unwrap_or(""))
        .filter(|r| !r.trim().is_empty())
        .map(parse_vector)
        .collect::<std::result::Result<_, _>>()
        .map_err(IsadError::Config)?;
    let cols = rows.first().map(Vec::len).unwrap_or(0);
    if rows.is_empty() || cols == 0 {
        return Err(IsadError::Config("empty matrix".into()));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(IsadError::Config(format!(
            "matrix row {bad} has {} entries, expected {cols}",
            rows[bad].len()
        )));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn load_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix(&fs::read_to_string(path)?)
}

/// Parses a configuration. Relative paths inside it resolve against `base_dir`.
pub fn parse_config(text: &str, base_dir: Option<&Path>) -> Result<ExperimentConfig> {
    let mut entries: BTreeMap<String, (usize, String)> = BTreeMap::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(line_no, format!("expected 'key = value', got '{line}'")))?;
        let key = key.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(parse_err(line_no, format!("unknown key '{key}'")));
        }
        if entries
            .insert(key.to_string(), (line_no, value.trim().to_string()))
            .is_some()
        {
            return Err(parse_err(line_no, format!("duplicate key '{key}'")));
        }
    }

    let take = |key: &str| entries.get(key).map(|(l, v)| (*l, v.as_str()));
    let real = |key: &str| -> Result<Option<f64>> {
        take(key)
            .map(|(l, v)| parse_real(v).map_err(|m| parse_err(l, m)))
            .transpose()
    };
    let count = |key: &str| -> Result<Option<usize>> {
        take(key)
            .map(|(l, v)| v.parse::<usize>().map_err(|e| parse_err(l, format!("{key}: {e}"))))
            .transpose()
    };
    let boolean = |key: &str| -> Result<Option<bool>> {
        take(key)
            .map(|(l, v)| match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(parse_err(l, format!("{key}: '{other}' is not a boolean"))),
            })
            .transpose()
    };
    let vector = |key: &str| -> Result<Option<Vec<f64>>> {
        take(key)
            .map(|(l, v)| parse_vector(v).map_err(|m| parse_err(l, m)))
            .transpose()
    };
    let resolve = |raw: &str| -> PathBuf {
        let p = PathBuf::from(raw);
        match base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p,
        }
    };

    let (kind_line, kind_raw) = take("problem.kind").ok_or_else(|| parse_err(0, "missing problem.kind"))?;
    let problem: ProblemKind = kind_raw
        .parse()
        .map_err(|e: IsadError| parse_err(kind_line, e.to_string()))?;

    let mean = match take("dist.mean") {
        None => None,
        Some((l, v)) => {
            let looks_inline = v.chars().all(|c| c.is_ascii_digit() || " \t,;.-+eE".contains(c));
            let m = if looks_inline {
                parse_matrix(v)
            } else {
                load_matrix(&resolve(v))
            };
            Some(m.map_err(|e| parse_err(l, format!("dist.mean: {e}")))?)
        }
    };
    let dist_kind = take("dist.kind")
        .map(|(l, v)| v.parse::<DistributionKind>().map_err(|e| parse_err(l, e.to_string())))
        .transpose()?;
    let apo = take("apo.kind")
        .map(|(l, v)| v.parse::<ApoKind>().map_err(|e| parse_err(l, e.to_string())))
        .transpose()?;

    let options = ProblemOptions {
        dim: count("problem.n")?,
        mean,
        dist_kind,
        noise_scale: real("dist.noise_scale")?,
        subgaussian: boolean("dist.subgaussian")?,
        phi_scale: real("phi.mu")?,
        gamma: real("gamma")?,
        tikhonov_lambda: real("tikhonov.lambda")?,
        irl_g: vector("irl.g")?,
        irl_f_inv: vector("irl.f_inv")?,
    };

    let defaults = RunConfig::default();
    let run = RunConfig {
        x0: vector("x0")?.map(DVector::from_vec),
        z0: vector("z0")?.map(DVector::from_vec),
        beta0: real("beta0")?.unwrap_or(defaults.beta0),
        regime: defaults.regime,
        apo: apo.unwrap_or(defaults.apo),
        apo_eps: real("apo.eps")?.unwrap_or(defaults.apo_eps),
        max_rounds: count("max_rounds")?.unwrap_or(defaults.max_rounds),
        tol_dx: real("tol_dx")?.unwrap_or(defaults.tol_dx),
        tol_kkt: real("tol_kkt")?.unwrap_or(defaults.tol_kkt),
        stop_window: count("stop_window")?.unwrap_or(defaults.stop_window),
        seed: take("seed")
            .map(|(l, v)| v.parse::<u64>().map_err(|e| parse_err(l, format!("seed: {e}"))))
            .transpose()?
            .unwrap_or(defaults.seed),
        inner_tol: real("inner_tol")?.unwrap_or(defaults.inner_tol),
        max_inner: count("max_inner")?.unwrap_or(defaults.max_inner),
        bound_guard: real("bound_guard")?.unwrap_or(defaults.bound_guard),
    };
    run.validate()?;

    let vdef = VerifyConfig::default();
    let verify = VerifyConfig {
        trials: count("verify.trials")?.unwrap_or(vdef.trials),
        t_max: count("verify.t_max")?.unwrap_or(vdef.t_max),
        eps_prime: real("verify.eps_prime")?.unwrap_or(vdef.eps_prime),
        samples: count("verify.samples")?.unwrap_or(vdef.samples),
        beta: real("verify.beta")?.unwrap_or(vdef.beta),
    };

    Ok(ExperimentConfig {
        problem,
        options,
        run,
        apo,
        regime_epsilon: real("regime.epsilon")?.unwrap_or(defaults.regime.epsilon()),
        theta_scale: real("regime.theta_scale")?.unwrap_or(1.0),
        out: take("out").map(|(_, v)| resolve(v)),
        verify,
    })
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    parse_config(&text, path.parent())
}
