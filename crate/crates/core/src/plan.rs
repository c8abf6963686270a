//! Run plans and the flat `key = value` config format.
//!
//! ```text
//! # Dyson run
//! model = dyson
//! scheme = rbm1
//! intra = split_exact
//! n = 10000
//! tau = 0.001
//! t_end = 5
//! snapshots = 0.5,5
//! beta = 1
//! ```
//!
//! Model coefficients (`beta`, `kappa`, ...) are top-level keys. Unknown keys
//! are rejected. [`SimPlan::to_config`] writes every field, so an emitted plan
//! is itself a valid config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::integrators::{Intra, SchemeKind};
use crate::models::{model_param_defaults, ModelParams, MODEL_NAMES};

/// Every model coefficient key accepted by some model.
pub const PARAM_KEYS: [&str; 6] = ["beta", "sigma", "kappa", "diffusion", "alpha", "epsilon_exponent"];

/// Plan keys in the order they are written.
pub const PLAN_KEYS: [&str; 17] = [
    "model",
    "scheme",
    "intra",
    "n",
    "p",
    "tau",
    "t_end",
    "seed",
    "snapshots",
    "record_every",
    "threads",
    "sampler",
    "sizes",
    "p_in",
    "q_out",
    "matrix",
    "out",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerChoice {
    Uniform,
    Edges,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimPlan {
    pub model: String,
    pub scheme: SchemeKind,
    pub intra: Intra,
    pub n: usize,
    pub p: usize,
    pub tau: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Times at which histograms are written.
    pub snapshots: Vec<f64>,
    /// Interval between metric rows; `0` records only the start and the end.
    pub record_every: f64,
    pub threads: usize,
    pub sampler: SamplerChoice,
    pub params: ModelParams,
    /// Stochastic block model used when no matrix file is given (cluster only).
    pub sizes: Vec<usize>,
    pub p_in: f64,
    pub q_out: f64,
    pub matrix: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl SimPlan {
    /// Desk-scale defaults for a model.
    pub fn defaults_for(model: &str) -> Result<SimPlan> {
        let mut params = ModelParams::new();
        for &(k, v) in model_param_defaults(model)? {
            if !v.is_nan() {
                params.insert(k.to_string(), v);
            }
        }
        let mut plan = SimPlan {
            model: model.to_string(),
            scheme: SchemeKind::Rbm1,
            intra: Intra::SplitExact,
            n: 1000,
            p: 2,
            tau: 1e-3,
            t_end: 1.0,
            seed: 0,
            snapshots: Vec::new(),
            record_every: 0.0,
            threads: 1,
            sampler: SamplerChoice::Uniform,
            params,
            sizes: Vec::new(),
            p_in: 0.7,
            q_out: 0.3,
            matrix: None,
            out: None,
        };
        match model {
            "test1d" => {
                plan.intra = Intra::Euler;
                plan.n = 500;
                plan.tau = 2f64.powi(-7);
                plan.record_every = 0.125;
            }
            "hamiltonian1d" => {
                plan.intra = Intra::Verlet;
                plan.n = 500;
                plan.tau = 2f64.powi(-7);
                plan.record_every = 0.125;
            }
            "dyson" => {
                plan.n = 10_000;
                plan.t_end = 5.0;
                plan.snapshots = vec![0.5, 5.0];
                plan.record_every = 0.5;
            }
            "thomson" => {
                plan.scheme = SchemeKind::RbmR;
                plan.n = 60;
                plan.tau = 1e-4;
                plan.t_end = 3.0;
                plan.record_every = 0.1;
            }
            "wealth" => {
                plan.n = 10_000;
                plan.t_end = 3.0;
                plan.snapshots = vec![3.0];
                plan.record_every = 0.5;
            }
            "opinion" => {
                plan.tau = 1e-4;
                plan.snapshots = vec![0.0, 1.0];
                plan.record_every = 0.1;
                plan.params.insert("epsilon_exponent".into(), 1.0 / 3.0);
            }
            "cluster" => {
                plan.scheme = SchemeKind::RbmR;
                plan.sizes = vec![50, 100, 150];
                plan.n = 300;
                plan.t_end = 5.0;
                plan.record_every = 0.5;
            }
            _ => unreachable!("checked by model_param_defaults"),
        }
        Ok(plan)
    }

    /// Number of steps to reach `t_end`.
    pub fn steps(&self) -> u64 {
        crate::integrators::steps_for(self.t_end, self.tau)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let num = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::param(format!("{key}: expected a number, got '{v}'")))
        };
        let count = |v: &str| -> Result<usize> {
            let x = num(v)?;
            if x < 0.0 || x.fract() != 0.0 || x > usize::MAX as f64 {
                return Err(Error::param(format!("{key}: expected a count, got '{v}'")));
            }
            Ok(x as usize)
        };
        fn list(v: &str) -> Vec<&str> {
            v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
        }
        match key {
            "model" => {
                if !MODEL_NAMES.contains(&value) {
                    return Err(Error::UnknownModel(value.to_string()));
                }
                self.model = value.to_string();
            }
            "scheme" => self.scheme = value.parse()?,
            "intra" => self.intra = value.parse()?,
            "n" => self.n = count(value)?,
            "p" => self.p = count(value)?,
            "tau" => self.tau = num(value)?,
            "t_end" => self.t_end = num(value)?,
            "seed" => {
                self.seed = value
                    .parse()
                    .map_err(|_| Error::param(format!("seed: expected a 64-bit integer, got '{value}'")))?
            }
            "snapshots" => self.snapshots = list(value).into_iter().map(num).collect::<Result<_>>()?,
            "record_every" => self.record_every = num(value)?,
            "threads" => self.threads = count(value)?,
            "sampler" => {
                self.sampler = match value {
                    "uniform" => SamplerChoice::Uniform,
                    "edges" => SamplerChoice::Edges,
                    other => return Err(Error::param(format!("sampler: expected uniform or edges, got '{other}'"))),
                }
            }
            "sizes" => self.sizes = list(value).into_iter().map(count).collect::<Result<_>>()?,
            "p_in" => self.p_in = num(value)?,
            "q_out" => self.q_out = num(value)?,
            "matrix" => self.matrix = (!value.is_empty()).then(|| PathBuf::from(value)),
            "out" => self.out = (!value.is_empty()).then(|| PathBuf::from(value)),
            k if PARAM_KEYS.contains(&k) => {
                self.params.insert(k.to_string(), num(value)?);
            }
            other => return Err(Error::param(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Checks the plan's own constraints (model-specific checks happen when the
    /// model is built).
    pub fn validate(&self) -> Result<()> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::param(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::param(format!("t_end must be >= 0, got {}", self.t_end)));
        }
        if self.t_end > 0.0 && self.t_end < self.tau {
            return Err(Error::param("t_end must be at least tau"));
        }
        let steps = self.t_end / self.tau;
        if (steps - steps.round()).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::param(format!(
                "t_end = {} is not a whole number of steps of {}",
                self.t_end, self.tau
            )));
        }
        if self.n < 2 {
            return Err(Error::param(format!("n must be at least 2, got {}", self.n)));
        }
        if self.scheme != SchemeKind::Full && (self.p < 2 || self.p > self.n) {
            return Err(Error::BatchSize { n: self.n, p: self.p });
        }
        if let Some(t) = self.snapshots.iter().find(|&&t| !(t >= 0.0 && t <= self.t_end + 1e-12)) {
            return Err(Error::param(format!("snapshot time {t} outside [0, t_end]")));
        }
        if !(self.record_every.is_finite() && self.record_every >= 0.0) {
            return Err(Error::param("record_every must be >= 0"));
        }
        if self.threads == 0 {
            return Err(Error::param("threads must be at least 1"));
        }
        for key in self.params.keys() {
            if !model_param_defaults(&self.model)?.iter().any(|(k, _)| k == key) {
                return Err(Error::UnknownParam {
                    model: self.model.clone(),
                    key: key.clone(),
                });
            }
        }
        if self.model == "cluster" && self.matrix.is_none() {
            if self.sizes.is_empty() {
                return Err(Error::param("cluster needs sizes or a matrix"));
            }
            if self.sizes.iter().sum::<usize>() != self.n {
                return Err(Error::Shape(format!(
                    "block sizes sum to {} but n = {}",
                    self.sizes.iter().sum::<usize>(),
                    self.n
                )));
            }
        }
        Ok(())
    }

    /// Applies `key = value` config text over this plan.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (line, key, value) in parse_config(text)? {
            self.set(&key, &value).map_err(|e| Error::Config {
                line,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    /// Reads a config file; the model named in it selects the defaults.
    pub fn from_config_file(path: &Path) -> Result<SimPlan> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_config_text(&text)
    }

    pub fn from_config_text(text: &str) -> Result<SimPlan> {
        let entries = parse_config(text)?;
        let model = entries
            .iter()
            .find(|(_, k, _)| k == "model")
            .map(|(_, _, v)| v.clone())
            .ok_or(Error::Config {
                line: 0,
                msg: "missing 'model'".into(),
            })?;
        let mut plan = SimPlan::defaults_for(&model)?;
        plan.apply_config(text)?;
        Ok(plan)
    }

    /// Serializes every field; the result parses back to an equal plan.
    pub fn to_config(&self) -> String {
        let mut s = String::new();
        let join = |xs: Vec<String>| xs.join(",");
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let _ = writeln!(s, "model = {}", self.model);
        let _ = writeln!(s, "scheme = {}", self.scheme);
        let _ = writeln!(s, "intra = {}", self.intra);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "tau = {:?}", self.tau);
        let _ = writeln!(s, "t_end = {:?}", self.t_end);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "snapshots = {}", join(self.snapshots.iter().map(|t| format!("{t:?}")).collect()));
        let _ = writeln!(s, "record_every = {:?}", self.record_every);
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(
            s,
            "sampler = {}",
            match self.sampler {
                SamplerChoice::Uniform => "uniform",
                SamplerChoice::Edges => "edges",
            }
        );
        let _ = writeln!(s, "sizes = {}", join(self.sizes.iter().map(|k| k.to_string()).collect()));
        let _ = writeln!(s, "p_in = {:?}", self.p_in);
        let _ = writeln!(s, "q_out = {:?}", self.q_out);
        let _ = writeln!(s, "matrix = {}", path(&self.matrix));
        let _ = writeln!(s, "out = {}", path(&self.out));
        for (k, v) in &self.params {
            let _ = writeln!(s, "{k} = {v:?}");
        }
        s
    }
}

/// Splits config text into `(line, key, value)` entries. Blank lines and `#`
/// comments are skipped; a key may appear once.
pub fn parse_config(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or(Error::Config {
            line,
            msg: format!("expected 'key = value', got '{content}'"),
        })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config {
                line,
                msg: "empty key".into(),
            });
        }
        if out.iter().any(|(_, k, _)| k == key) {
            return Err(Error::Config {
                line,
                msg: format!("duplicate key '{key}'"),
            });
        }
        out.push((line, key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}
