//! Hyperparameters, split description and the flat `key = value` config format.
//!
//! ```text
//! # comments start with '#' or ';'
//! [train]          # section headers are accepted and ignored
//! tau = 0.1
//! rho = 5
//! betas = 0, 2, 5
//! ```
//!
//! Keys are the field names of [`Hyperparams`], [`SplitSpec`],
//! [`TrainSettings`] plus `sep` and the sweep lists `rhos`, `alphas`,
//! `betas`, `seeds`. Unknown keys are an error.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparams {
    /// Contrastive temperature.
    pub tau: f64,
    /// Prototype softmax temperature.
    pub tau_p: f64,
    /// Weight of the supervised contrastive term.
    pub lambda: f64,
    /// Weight of the prior-alignment term.
    pub alpha: f64,
    /// Weight of the uniform (tail reweighting) term.
    pub beta: f64,
    /// Momentum of the class-prior moving average.
    pub mu: f64,
    pub lr0: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            tau: 0.1,
            tau_p: 0.1,
            lambda: 1.0,
            alpha: 1.0,
            beta: 2.0,
            mu: 0.99,
            lr0: 0.02,
            momentum: 0.9,
            weight_decay: 1e-4,
            epochs: 60,
            batch_size: 256,
            seed: 0,
        }
    }
}

fn check(ok: bool, what: &str, reason: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(what, reason()))
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        check(self.tau > 0.0 && self.tau.is_finite(), "tau", || format!("must be > 0, got {}", self.tau))?;
        check(self.tau_p > 0.0 && self.tau_p.is_finite(), "tau_p", || {
            format!("must be > 0, got {}", self.tau_p)
        })?;
        for (name, v) in [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("weight_decay", self.weight_decay),
        ] {
            check(v >= 0.0 && v.is_finite(), name, || format!("must be >= 0, got {v}"))?;
        }
        check((0.0..=1.0).contains(&self.mu), "mu", || format!("must lie in [0, 1], got {}", self.mu))?;
        check(self.lr0 > 0.0 && self.lr0.is_finite(), "lr0", || format!("must be > 0, got {}", self.lr0))?;
        check((0.0..1.0).contains(&self.momentum), "momentum", || {
            format!("must lie in [0, 1), got {}", self.momentum)
        })?;
        check(self.batch_size > 0, "batch_size", || "must be positive".into())?;
        Ok(())
    }
}

/// Shape of a long-tailed split: `num_known` head classes with
/// `samples_per_known` rows each and `num_classes - num_known` tail classes
/// with `round(samples_per_known / rho)` rows each.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub num_classes: usize,
    pub num_known: usize,
    pub samples_per_known: usize,
    pub rho: f64,
    pub labeled_fraction: f64,
    pub dim: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            num_classes: 20,
            num_known: 10,
            samples_per_known: 200,
            rho: 5.0,
            labeled_fraction: 0.5,
            dim: 64,
        }
    }
}

/// `round(x)` with halves rounded up.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

impl SplitSpec {
    pub fn num_unknown(&self) -> usize {
        self.num_classes - self.num_known
    }

    /// Rows per unknown class.
    pub fn samples_per_unknown(&self) -> usize {
        round_half_up(self.samples_per_known as f64 / self.rho)
    }

    /// Labeled rows per known class.
    pub fn labeled_per_known(&self) -> usize {
        round_half_up(self.samples_per_known as f64 * self.labeled_fraction)
    }

    pub fn validate(&self) -> Result<()> {
        check(self.num_known > 0, "num_known", || "must be positive".into())?;
        check(self.num_known < self.num_classes, "num_known", || {
            format!("must be below num_classes ({}), got {}", self.num_classes, self.num_known)
        })?;
        check(self.samples_per_known > 0, "samples_per_known", || "must be positive".into())?;
        check(self.dim > 0, "dim", || "must be positive".into())?;
        check(self.rho > 0.0 && self.rho.is_finite(), "rho", || format!("must be > 0, got {}", self.rho))?;
        check(self.labeled_fraction > 0.0 && self.labeled_fraction < 1.0, "labeled_fraction", || {
            format!("must lie in (0, 1), got {}", self.labeled_fraction)
        })?;
        check(self.samples_per_unknown() >= 1, "rho", || {
            format!(
                "samples_per_known / rho = {} rounds to zero rows per unknown class",
                self.samples_per_known as f64 / self.rho
            )
        })?;
        let labeled = self.labeled_per_known();
        check(labeled >= 1 && labeled < self.samples_per_known, "labeled_fraction", || {
            format!("gives {labeled} labeled of {} rows per known class", self.samples_per_known)
        })?;
        Ok(())
    }
}

/// Model and augmentation settings that are not part of the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainSettings {
    pub hidden_dim: usize,
    pub proj_dim: usize,
    /// Standard deviation of additive view noise.
    pub noise_sigma: f64,
    /// Per-coordinate dropout probability of a view.
    pub drop_prob: f64,
    /// Blend factor of the per-epoch prototype refresh.
    pub proto_ema: f64,
    /// k-means restarts per evaluation pass; the lowest-dissimilarity run wins.
    pub eval_restarts: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            proj_dim: 32,
            noise_sigma: 0.1,
            drop_prob: 0.1,
            proto_ema: 0.9,
            eval_restarts: 5,
        }
    }
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        check(self.hidden_dim > 0, "hidden_dim", || "must be positive".into())?;
        check(self.proj_dim > 1, "proj_dim", || "must be at least 2".into())?;
        check(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite(), "noise_sigma", || {
            format!("must be >= 0, got {}", self.noise_sigma)
        })?;
        check((0.0..1.0).contains(&self.drop_prob), "drop_prob", || {
            format!("must lie in [0, 1), got {}", self.drop_prob)
        })?;
        check((0.0..=1.0).contains(&self.proto_ema), "proto_ema", || {
            format!("must lie in [0, 1], got {}", self.proto_ema)
        })?;
        check(self.eval_restarts > 0, "eval_restarts", || "must be positive".into())?;
        Ok(())
    }
}

/// Everything a config file can set.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub hp: Hyperparams,
    pub split: SplitSpec,
    pub train: TrainSettings,
    /// Radius of the sphere the synthetic class means are drawn on.
    pub sep: f64,
    pub rhos: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let hp = Hyperparams::default();
        let split = SplitSpec::default();
        Self {
            hp,
            split,
            train: TrainSettings::default(),
            sep: 5.0,
            rhos: vec![split.rho],
            alphas: vec![hp.alpha],
            betas: vec![hp.beta],
            seeds: vec![0, 1, 2],
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        reason: format!("bad value for {key}: {value:?}"),
    })
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s, line))
        .collect()
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// Sets one key. `line` is only used for error messages.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let v = value.trim();
        match key {
            "tau" => self.hp.tau = parse_num(key, v, line)?,
            "tau_p" => self.hp.tau_p = parse_num(key, v, line)?,
            "lambda" => self.hp.lambda = parse_num(key, v, line)?,
            "alpha" => self.hp.alpha = parse_num(key, v, line)?,
            "beta" => self.hp.beta = parse_num(key, v, line)?,
            "mu" => self.hp.mu = parse_num(key, v, line)?,
            "lr0" => self.hp.lr0 = parse_num(key, v, line)?,
            "momentum" => self.hp.momentum = parse_num(key, v, line)?,
            "weight_decay" => self.hp.weight_decay = parse_num(key, v, line)?,
            "epochs" => self.hp.epochs = parse_num(key, v, line)?,
            "batch_size" => self.hp.batch_size = parse_num(key, v, line)?,
            "seed" => self.hp.seed = parse_num(key, v, line)?,
            "num_classes" => self.split.num_classes = parse_num(key, v, line)?,
            "num_known" => self.split.num_known = parse_num(key, v, line)?,
            "samples_per_known" => self.split.samples_per_known = parse_num(key, v, line)?,
            "rho" => self.split.rho = parse_num(key, v, line)?,
            "labeled_fraction" => self.split.labeled_fraction = parse_num(key, v, line)?,
            "dim" => self.split.dim = parse_num(key, v, line)?,
            "hidden_dim" => self.train.hidden_dim = parse_num(key, v, line)?,
            "proj_dim" => self.train.proj_dim = parse_num(key, v, line)?,
            "noise_sigma" => self.train.noise_sigma = parse_num(key, v, line)?,
            "drop_prob" => self.train.drop_prob = parse_num(key, v, line)?,
            "proto_ema" => self.train.proto_ema = parse_num(key, v, line)?,
            "eval_restarts" => self.train.eval_restarts = parse_num(key, v, line)?,
            "sep" => self.sep = parse_num(key, v, line)?,
            "rhos" => self.rhos = parse_list(key, v, line)?,
            "alphas" => self.alphas = parse_list(key, v, line)?,
            "betas" => self.betas = parse_list(key, v, line)?,
            "seeds" => self.seeds = parse_list(key, v, line)?,
            _ => {
                return Err(Error::Config {
                    line,
                    reason: format!("unknown key {key:?}"),
                })
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split(['#', ';']).next().unwrap_or("").trim();
            if content.is_empty() || (content.starts_with('[') && content.ends_with(']')) {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                reason: format!("expected key = value, got {content:?}"),
            })?;
            cfg.set(key.trim(), value, line)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.hp.validate()?;
        self.split.validate()?;
        self.train.validate()?;
        check(self.sep >= 0.0 && self.sep.is_finite(), "sep", || format!("must be >= 0, got {}", self.sep))?;
        Ok(())
    }

    /// Serializes every key; `parse(to_ini())` reproduces `self`.
    pub fn to_ini(&self) -> String {
        let h = &self.hp;
        let s = &self.split;
        let t = &self.train;
        let mut out = String::new();
        let _ = writeln!(out, "[hyperparams]");
        for (k, v) in [
            ("tau", h.tau),
            ("tau_p", h.tau_p),
            ("lambda", h.lambda),
            ("alpha", h.alpha),
            ("beta", h.beta),
            ("mu", h.mu),
            ("lr0", h.lr0),
            ("momentum", h.momentum),
            ("weight_decay", h.weight_decay),
        ] {
            let _ = writeln!(out, "{k} = {v}");
        }
        let _ = writeln!(out, "epochs = {}", h.epochs);
        let _ = writeln!(out, "batch_size = {}", h.batch_size);
        let _ = writeln!(out, "seed = {}", h.seed);
        let _ = writeln!(out, "\n[split]");
        let _ = writeln!(out, "num_classes = {}", s.num_classes);
        let _ = writeln!(out, "num_known = {}", s.num_known);
        let _ = writeln!(out, "samples_per_known = {}", s.samples_per_known);
        let _ = writeln!(out, "rho = {}", s.rho);
        let _ = writeln!(out, "labeled_fraction = {}", s.labeled_fraction);
        let _ = writeln!(out, "dim = {}", s.dim);
        let _ = writeln!(out, "sep = {}", self.sep);
        let _ = writeln!(out, "\n[train]");
        let _ = writeln!(out, "hidden_dim = {}", t.hidden_dim);
        let _ = writeln!(out, "proj_dim = {}", t.proj_dim);
        let _ = writeln!(out, "noise_sigma = {}", t.noise_sigma);
        let _ = writeln!(out, "drop_prob = {}", t.drop_prob);
        let _ = writeln!(out, "proto_ema = {}", t.proto_ema);
        let _ = writeln!(out, "eval_restarts = {}", t.eval_restarts);
        let _ = writeln!(out, "\n[sweep]");
        let _ = writeln!(out, "rhos = {}", join(&self.rhos));
        let _ = writeln!(out, "alphas = {}", join(&self.alphas));
        let _ = writeln!(out, "betas = {}", join(&self.betas));
        let _ = writeln!(out, "seeds = {}", join(&self.seeds));
        out
    }
}
