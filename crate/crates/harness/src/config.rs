//! Flat `key = value` experiment configuration.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Lists are comma-separated. Unknown or repeated keys are errors. Serializing a
//! parsed config emits the set keys in a fixed order, so parse → serialize is
//! idempotent.

use std::fmt;
use std::str::FromStr;

use smoothloc_core::estimator1d::Config1d;
use smoothloc_core::estimatorhd::ConfigHd;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Estimate,
    EstimateHd,
    FisherSweep,
    Coverage,
    CoverageHd,
    SawtoothPhase,
    Concentration,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Self::Estimate,
        Self::EstimateHd,
        Self::FisherSweep,
        Self::Coverage,
        Self::CoverageHd,
        Self::SawtoothPhase,
        Self::Concentration,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Estimate => "estimate",
            Self::EstimateHd => "estimate-hd",
            Self::FisherSweep => "fisher-sweep",
            Self::Coverage => "coverage",
            Self::CoverageHd => "coverage-hd",
            Self::SawtoothPhase => "sawtooth-phase",
            Self::Concentration => "concentration",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub model: Option<String>,
    pub n: Option<usize>,
    pub n_grid: Option<Vec<usize>>,
    pub trials: Option<usize>,
    /// Per-`n` trial counts for `sawtooth-phase`, aligned with `n_grid`.
    pub trials_grid: Option<Vec<usize>>,
    pub delta: Option<f64>,
    pub delta_grid: Option<Vec<f64>>,
    pub r: Option<f64>,
    pub r_grid: Option<Vec<f64>>,
    pub r_star_multiplier: Option<f64>,
    pub init_fraction_exponent: Option<f64>,
    pub q_multiplier: Option<f64>,
    pub alpha_grid_step: Option<f64>,
    pub min_n_constant: Option<f64>,
    pub radius_multiplier: Option<f64>,
    pub eta: Option<f64>,
    pub init_fraction: Option<f64>,
    pub mom_buckets_multiplier: Option<f64>,
    /// True location; every coordinate in the multivariate experiments.
    pub lambda: Option<f64>,
    pub width: Option<f64>,
    pub slope: Option<f64>,
    pub families: Option<Vec<String>>,
    pub d_grid: Option<Vec<usize>>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub output: Option<String>,
}

/// Keys in serialization order.
pub const KEYS: [&str; 27] = [
    "experiment",
    "model",
    "n",
    "n_grid",
    "trials",
    "trials_grid",
    "delta",
    "delta_grid",
    "r",
    "r_grid",
    "r_star_multiplier",
    "init_fraction_exponent",
    "q_multiplier",
    "alpha_grid_step",
    "min_n_constant",
    "radius_multiplier",
    "eta",
    "init_fraction",
    "mom_buckets_multiplier",
    "lambda",
    "width",
    "slope",
    "families",
    "d_grid",
    "seed",
    "threads",
    "output",
];

fn scalar<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("invalid value '{value}' for {key}"),
    })
}

fn list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    let items: Result<Vec<T>> = value.split(',').map(|s| scalar(line, key, s.trim())).collect();
    let items = items?;
    if items.is_empty() {
        return Err(Error::Config {
            line,
            message: format!("{key} must not be empty"),
        });
    }
    Ok(items)
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected 'key = value', found '{content}'"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key '{key}'"),
                });
            }
            cfg.set(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => {
                self.experiment = Some(value.parse().map_err(|message| Error::Config { line, message })?);
            }
            "model" => self.model = Some(value.to_string()),
            "n" => self.n = Some(scalar(line, key, value)?),
            "n_grid" => self.n_grid = Some(list(line, key, value)?),
            "trials" => self.trials = Some(scalar(line, key, value)?),
            "trials_grid" => self.trials_grid = Some(list(line, key, value)?),
            "delta" => self.delta = Some(scalar(line, key, value)?),
            "delta_grid" => self.delta_grid = Some(list(line, key, value)?),
            "r" => self.r = Some(scalar(line, key, value)?),
            "r_grid" => self.r_grid = Some(list(line, key, value)?),
            "r_star_multiplier" => self.r_star_multiplier = Some(scalar(line, key, value)?),
            "init_fraction_exponent" => self.init_fraction_exponent = Some(scalar(line, key, value)?),
            "q_multiplier" => self.q_multiplier = Some(scalar(line, key, value)?),
            "alpha_grid_step" => self.alpha_grid_step = Some(scalar(line, key, value)?),
            "min_n_constant" => self.min_n_constant = Some(scalar(line, key, value)?),
            "radius_multiplier" => self.radius_multiplier = Some(scalar(line, key, value)?),
            "eta" => self.eta = Some(scalar(line, key, value)?),
            "init_fraction" => self.init_fraction = Some(scalar(line, key, value)?),
            "mom_buckets_multiplier" => self.mom_buckets_multiplier = Some(scalar(line, key, value)?),
            "lambda" => self.lambda = Some(scalar(line, key, value)?),
            "width" => self.width = Some(scalar(line, key, value)?),
            "slope" => self.slope = Some(scalar(line, key, value)?),
            "families" => self.families = Some(list(line, key, value)?),
            "d_grid" => self.d_grid = Some(list(line, key, value)?),
            "seed" => self.seed = Some(scalar(line, key, value)?),
            "threads" => self.threads = Some(scalar(line, key, value)?),
            "output" => self.output = Some(value.to_string()),
            other => {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key '{other}'"),
                })
            }
        }
        Ok(())
    }

    /// Range checks that do not depend on the experiment kind.
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Err(Error::Config { line: 0, message });
        let positive_counts = [
            ("n", self.n),
            ("trials", self.trials),
            ("threads", self.threads),
        ];
        for (key, v) in positive_counts {
            if v == Some(0) {
                return bad(format!("{key} must be at least 1"));
            }
        }
        for (key, v) in [("n_grid", &self.n_grid), ("trials_grid", &self.trials_grid), ("d_grid", &self.d_grid)] {
            if v.as_ref().is_some_and(|xs| xs.contains(&0)) {
                return bad(format!("{key} entries must be at least 1"));
            }
        }
        if let (Some(ns), Some(ts)) = (&self.n_grid, &self.trials_grid) {
            if ns.len() != ts.len() {
                return bad(format!("trials_grid has {} entries but n_grid has {}", ts.len(), ns.len()));
            }
        }
        let probabilities = self.delta.into_iter().chain(self.delta_grid.iter().flatten().copied());
        for d in probabilities {
            if !(d > 0.0 && d < 1.0) {
                return bad(format!("delta = {d} must lie in (0, 1)"));
            }
        }
        let positives = [
            ("r", self.r),
            ("r_star_multiplier", self.r_star_multiplier),
            ("init_fraction_exponent", self.init_fraction_exponent),
            ("q_multiplier", self.q_multiplier),
            ("alpha_grid_step", self.alpha_grid_step),
            ("min_n_constant", self.min_n_constant),
            ("radius_multiplier", self.radius_multiplier),
            ("eta", self.eta),
            ("init_fraction", self.init_fraction),
            ("mom_buckets_multiplier", self.mom_buckets_multiplier),
            ("width", self.width),
        ];
        for (key, v) in positives {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{key} = {v} must be positive"));
                }
            }
        }
        if self.r_grid.as_ref().is_some_and(|rs| rs.iter().any(|&r| !(r > 0.0 && r.is_finite()))) {
            return bad("r_grid entries must be positive".into());
        }
        for (key, v) in [("lambda", self.lambda), ("slope", self.slope)] {
            if v.is_some_and(|v| !v.is_finite()) {
                return bad(format!("{key} must be finite"));
            }
        }
        Ok(())
    }

    pub fn require<T: Clone>(value: &Option<T>, key: &str, experiment: Experiment) -> Result<T> {
        value.clone().ok_or_else(|| Error::Config {
            line: 0,
            message: format!("experiment '{experiment}' requires key '{key}'"),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn config_1d(&self) -> Config1d {
        let d = Config1d::default();
        Config1d {
            delta: self.delta.unwrap_or(d.delta),
            r_star_multiplier: self.r_star_multiplier.unwrap_or(d.r_star_multiplier),
            init_fraction_exponent: self.init_fraction_exponent.unwrap_or(d.init_fraction_exponent),
            q_multiplier: self.q_multiplier.unwrap_or(d.q_multiplier),
            alpha_grid_step: self.alpha_grid_step.unwrap_or(d.alpha_grid_step),
            r_override: self.r,
            min_n_constant: self.min_n_constant.unwrap_or(d.min_n_constant),
        }
    }

    pub fn config_hd(&self) -> ConfigHd {
        let d = ConfigHd::default();
        ConfigHd {
            delta: self.delta.unwrap_or(d.delta),
            r: self.r.unwrap_or(d.r),
            eta: self.eta.unwrap_or(d.eta),
            init_fraction: self.init_fraction,
            m: None,
            mom_buckets_multiplier: self.mom_buckets_multiplier.unwrap_or(d.mom_buckets_multiplier),
        }
    }

    fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        macro_rules! push {
            ($key:literal, $field:expr, scalar) => {
                if let Some(v) = &$field {
                    out.push(($key, v.to_string()));
                }
            };
            ($key:literal, $field:expr, list) => {
                if let Some(v) = &$field {
                    out.push(($key, join(v)));
                }
            };
        }
        push!("experiment", self.experiment, scalar);
        push!("model", self.model, scalar);
        push!("n", self.n, scalar);
        push!("n_grid", self.n_grid, list);
        push!("trials", self.trials, scalar);
        push!("trials_grid", self.trials_grid, list);
        push!("delta", self.delta, scalar);
        push!("delta_grid", self.delta_grid, list);
        push!("r", self.r, scalar);
        push!("r_grid", self.r_grid, list);
        push!("r_star_multiplier", self.r_star_multiplier, scalar);
        push!("init_fraction_exponent", self.init_fraction_exponent, scalar);
        push!("q_multiplier", self.q_multiplier, scalar);
        push!("alpha_grid_step", self.alpha_grid_step, scalar);
        push!("min_n_constant", self.min_n_constant, scalar);
        push!("radius_multiplier", self.radius_multiplier, scalar);
        push!("eta", self.eta, scalar);
        push!("init_fraction", self.init_fraction, scalar);
        push!("mom_buckets_multiplier", self.mom_buckets_multiplier, scalar);
        push!("lambda", self.lambda, scalar);
        push!("width", self.width, scalar);
        push!("slope", self.slope, scalar);
        push!("families", self.families, list);
        push!("d_grid", self.d_grid, list);
        push!("seed", self.seed, scalar);
        push!("threads", self.threads, scalar);
        push!("output", self.output, scalar);
        out
    }
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (key, value) in self.entries() {
            writeln!(f, "{key} = {value}")?;
        }
        Ok(())
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}
