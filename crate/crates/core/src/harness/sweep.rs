//! Cross-product sweeps over rho, alpha, beta and seeds.
//!
//! Runs execute concurrently but results are kept in plan order (rho, then
//! alpha, then beta, then seed), so every output file is independent of
//! scheduling. Each seed draws its dataset from that seed's split stream;
//! runs that differ only in alpha or beta therefore share data.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::datagen::generate_mixture;
use crate::error::{Error, Result};
use crate::eval::MetricsReport;
use crate::harness::output::{metric_values, results_csv, summary_csv, METRIC_NAMES};
use crate::harness::svg::{line_plot, Series};
use crate::harness::train::{train_one, RunRecord};
use crate::rng::{RngService, STREAM_SPLIT};

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    /// Base settings; the sweep lists inside it define the grid.
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        let c = &self.config;
        c.validate()?;
        for (name, empty) in [
            ("rhos", c.rhos.is_empty()),
            ("alphas", c.alphas.is_empty()),
            ("betas", c.betas.is_empty()),
            ("seeds", c.seeds.is_empty()),
        ] {
            if empty {
                return Err(Error::invalid(name, "sweep list is empty"));
            }
        }
        for &rho in &c.rhos {
            crate::config::SplitSpec { rho, ..c.split }.validate()?;
        }
        for &alpha in &c.alphas {
            crate::config::Hyperparams { alpha, ..c.hp }.validate()?;
        }
        for &beta in &c.betas {
            crate::config::Hyperparams { beta, ..c.hp }.validate()?;
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<RunPoint> {
        let c = &self.config;
        let mut out = Vec::new();
        for &rho in &c.rhos {
            for &alpha in &c.alphas {
                for &beta in &c.betas {
                    for &seed in &c.seeds {
                        out.push(RunPoint {
                            run_id: out.len(),
                            rho,
                            alpha,
                            beta,
                            lambda: c.hp.lambda,
                            seed,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPoint {
    pub run_id: usize,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupKey {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub point: RunPoint,
    /// The error message when the run could not complete.
    pub result: std::result::Result<RunRecord, String>,
}

impl RunOutcome {
    pub fn metrics(&self) -> Option<&MetricsReport> {
        self.result.as_ref().ok().and_then(|r| r.metrics.as_ref())
    }

    pub fn failure(&self) -> Option<String> {
        match &self.result {
            Err(e) => Some(e.clone()),
            Ok(r) => r.aborted.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub runs: Vec<RunOutcome>,
    pub rhos: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl SweepResult {
    /// Runs grouped by configuration (all seeds together), in plan order.
    pub fn groups(&self) -> Vec<(GroupKey, Vec<&RunOutcome>)> {
        let mut groups: Vec<(GroupKey, Vec<&RunOutcome>)> = Vec::new();
        for run in &self.runs {
            let p = run.point;
            let key = GroupKey {
                rho: p.rho,
                alpha: p.alpha,
                beta: p.beta,
                lambda: p.lambda,
            };
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(run),
                None => groups.push((key, vec![run])),
            }
        }
        groups
    }

    /// Mean of one metric over successful runs matching `filter`.
    pub fn mean_metric(&self, metric: usize, filter: impl Fn(&RunPoint) -> bool) -> Option<f64> {
        let values: Vec<f64> = self
            .runs
            .iter()
            .filter(|r| filter(&r.point))
            .filter_map(|r| r.metrics().and_then(|m| metric_values(m)[metric]))
            .collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    }
}

fn run_point(config: &ExperimentConfig, point: &RunPoint) -> Result<RunRecord> {
    let split = crate::config::SplitSpec { rho: point.rho, ..config.split };
    let mut rng = RngService::derive_stream(point.seed, STREAM_SPLIT);
    let data = generate_mixture(&split, config.sep, &mut rng)?;
    let hp = crate::config::Hyperparams {
        alpha: point.alpha,
        beta: point.beta,
        seed: point.seed,
        ..config.hp
    };
    train_one(&data, &hp, &config.train)
}

/// Runs every grid point. Individual failures are recorded, not raised.
pub fn run_plan(plan: &ExperimentPlan) -> Result<SweepResult> {
    plan.validate()?;
    let points = plan.points();
    let runs = points
        .par_iter()
        .map(|p| RunOutcome {
            point: *p,
            result: run_point(&plan.config, p).map_err(|e| e.to_string()),
        })
        .collect();
    Ok(SweepResult {
        runs,
        rhos: plan.config.rhos.clone(),
        alphas: plan.config.alphas.clone(),
        betas: plan.config.betas.clone(),
    })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn axis_plot(result: &SweepResult, axis: &str, values: &[f64], pick: fn(&RunPoint) -> f64) -> String {
    let ticks: Vec<String> = values.iter().map(ToString::to_string).collect();
    let labels = ["All", "Known", "Un1", "Un2"];
    let series: Vec<Series> = (0..METRIC_NAMES.len())
        .map(|m| Series {
            name: labels[m].to_string(),
            values: values.iter().map(|&v| result.mean_metric(m, |p| pick(p) == v)).collect(),
        })
        .collect();
    line_plot(&format!("accuracy vs {axis}"), axis, &ticks, &series)
}

/// Writes `results.csv`, `summary.csv`, one `sweep_<axis>.svg` per axis with
/// at least two values, and `failures.csv` when any run failed. Returns the
/// written paths.
pub fn write_artifacts(result: &SweepResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        let path = out_dir.join(name);
        write(&path, &text)?;
        written.push(path);
        Ok(())
    };
    put("results.csv", results_csv(result))?;
    put("summary.csv", summary_csv(result))?;
    let axes: [(&str, &[f64], fn(&RunPoint) -> f64); 3] = [
        ("rho", &result.rhos, |p| p.rho),
        ("alpha", &result.alphas, |p| p.alpha),
        ("beta", &result.betas, |p| p.beta),
    ];
    for (axis, values, pick) in axes {
        if values.len() >= 2 {
            put(&format!("sweep_{axis}.svg"), axis_plot(result, axis, values, pick))?;
        }
    }
    let failures: Vec<String> = result
        .runs
        .iter()
        .filter_map(|r| r.failure().map(|e| format!("{},\"{}\"", r.point.run_id, e.replace('"', "'"))))
        .collect();
    if !failures.is_empty() {
        put("failures.csv", format!("run_id,error\n{}\n", failures.join("\n")))?;
    }
    Ok(written)
}

/// Validates, runs and writes a full plan.
pub fn sweep(plan: &ExperimentPlan) -> Result<SweepResult> {
    let result = run_plan(plan)?;
    write_artifacts(&result, &plan.out_dir)?;
    Ok(result)
}
