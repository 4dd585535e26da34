//! CSV renderings of metrics, sweep results and training logs.
//!
//! Floats use Rust's shortest round-trip formatting so files are
//! byte-stable and re-parse to the exact values; absent metrics are `NA`.

use std::fmt::Write as _;

use crate::eval::MetricsReport;
use crate::harness::sweep::{RunOutcome, SweepResult};
use crate::harness::train::RunRecord;

pub const METRICS_HEADER: &str = "seed,rho,alpha,beta,all,known,un1,un2";
pub const RESULTS_HEADER: &str = "run_id,seed,rho,alpha,beta,lambda,all,known,un1,un2";
pub const SUMMARY_HEADER: &str = "rho,alpha,beta,lambda,metric,mean,std,n";
pub const METRIC_NAMES: [&str; 4] = ["all", "known", "un1", "un2"];

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// The four metrics in `METRIC_NAMES` order.
pub fn metric_values(m: &MetricsReport) -> [Option<f64>; 4] {
    [Some(m.all_acc), m.known_acc, m.un1_acc, m.un2_acc]
}

/// One `seed,rho,alpha,beta,all,known,un1,un2` line without newline.
pub fn metrics_row(m: &MetricsReport, rho: f64, alpha: f64, beta: f64) -> String {
    let [all, known, un1, un2] = metric_values(m);
    format!(
        "{},{rho},{alpha},{beta},{},{},{},{}",
        m.seed,
        fmt_opt(all),
        fmt_opt(known),
        fmt_opt(un1),
        fmt_opt(un2)
    )
}

pub fn results_csv(result: &SweepResult) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for run in &result.runs {
        let p = &run.point;
        let vals = run.metrics().map_or([None; 4], metric_values);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            p.run_id,
            p.seed,
            p.rho,
            p.alpha,
            p.beta,
            p.lambda,
            fmt_opt(vals[0]),
            fmt_opt(vals[1]),
            fmt_opt(vals[2]),
            fmt_opt(vals[3])
        );
    }
    out
}

/// Mean and sample standard deviation (n - 1 in the denominator, 0 for a
/// single value). `None` for an empty slice.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some((mean, std))
}

pub fn summary_csv(result: &SweepResult) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for (key, runs) in result.groups() {
        for (m, name) in METRIC_NAMES.iter().enumerate() {
            let values: Vec<f64> = runs
                .iter()
                .filter_map(|r: &&RunOutcome| r.metrics().and_then(|x| metric_values(x)[m]))
                .collect();
            let (mean, std) = match mean_std(&values) {
                Some((a, b)) => (a.to_string(), b.to_string()),
                None => ("NA".into(), "NA".into()),
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{name},{mean},{std},{}",
                key.rho,
                key.alpha,
                key.beta,
                key.lambda,
                values.len()
            );
        }
    }
    out
}

pub fn train_log_csv(record: &RunRecord) -> String {
    let c = record.class_order.len();
    let mut out = String::from("epoch,lr,batches,l_ins,l_sup,h_prior,h_uniform,l_overall");
    for slot in 0..c {
        let _ = write!(out, ",r{slot}");
    }
    out.push('\n');
    for e in &record.log {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{}",
            e.epoch, e.lr, e.batches, e.l_ins, e.l_sup, e.h_prior, e.h_uniform, e.l_overall
        );
        for r in &e.prior {
            let _ = write!(out, ",{r}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[0.5]), Some((0.5, 0.0)));
        assert_eq!(mean_std(&[]), None);
    }

    #[test]
    fn metrics_line() {
        let m = MetricsReport {
            all_acc: 0.5,
            known_acc: Some(1.0),
            un1_acc: None,
            un2_acc: Some(0.25),
            n_all: 4,
            n_known: 2,
            n_novel: 2,
            seed: 7,
        };
        assert_eq!(metrics_row(&m, 5.0, 0.0, 2.0), "7,5,0,2,0.5,1,NA,0.25");
    }
}
