//! Paired comparison of two runs over the same bank and seeds.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::report::{MetricReport, RunReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedDelta {
    pub seed: u64,
    pub baseline: f64,
    pub treatment: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub baseline_agent: String,
    pub treatment_agent: String,
    pub metric: String,
    pub baseline_mean: f64,
    pub treatment_mean: f64,
    /// Mean of the per-seed differences, treatment minus baseline.
    pub delta: f64,
    /// `delta / |baseline_mean| * 100`; `None` when the baseline mean is 0.
    pub percent: Option<f64>,
    pub per_seed: Vec<SeedDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline_run: String,
    pub treatment_run: String,
    pub rows: Vec<MetricDelta>,
}

impl Comparison {
    pub fn find(&self, treatment_agent: &str, metric: &str) -> Option<&MetricDelta> {
        self.rows
            .iter()
            .find(|r| r.treatment_agent == treatment_agent && r.metric == metric)
    }
}

/// Agents are paired by position; metrics by seed.
pub fn compare_runs(baseline: &RunReport, treatment: &RunReport) -> Result<Comparison> {
    if baseline.bank_digest != treatment.bank_digest {
        return Err(Error::Comparability("runs used different banks".into()));
    }
    let (mut a, mut b) = (baseline.config.seeds.clone(), treatment.config.seeds.clone());
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Err(Error::Comparability(format!("seed sets differ: {a:?} vs {b:?}")));
    }
    if baseline.summary.len() != treatment.summary.len() {
        return Err(Error::Comparability(format!(
            "agent counts differ: {} vs {}",
            baseline.summary.len(),
            treatment.summary.len()
        )));
    }
    let mut rows = Vec::new();
    for (ba, ta) in baseline.summary.iter().zip(&treatment.summary) {
        for (i, metric) in MetricReport::NAMES.iter().enumerate() {
            let mut per_seed = Vec::new();
            for &seed in &a {
                let pick = |r: &RunReport, agent: &str| {
                    r.per_seed
                        .iter()
                        .find(|m| m.agent == agent && m.seed == seed)
                        .and_then(|m| m.metrics.values()[i])
                };
                if let (Some(x), Some(y)) = (pick(baseline, &ba.agent), pick(treatment, &ta.agent)) {
                    per_seed.push(SeedDelta {
                        seed,
                        baseline: x,
                        treatment: y,
                        delta: y - x,
                    });
                }
            }
            if per_seed.is_empty() {
                continue;
            }
            let n = per_seed.len() as f64;
            let baseline_mean = per_seed.iter().map(|d| d.baseline).sum::<f64>() / n;
            let treatment_mean = per_seed.iter().map(|d| d.treatment).sum::<f64>() / n;
            let delta = per_seed.iter().map(|d| d.delta).sum::<f64>() / n;
            rows.push(MetricDelta {
                baseline_agent: ba.agent.clone(),
                treatment_agent: ta.agent.clone(),
                metric: metric.to_string(),
                baseline_mean,
                treatment_mean,
                delta,
                percent: (baseline_mean != 0.0).then(|| delta / baseline_mean.abs() * 100.0),
                per_seed,
            });
        }
    }
    Ok(Comparison {
        baseline_run: baseline.run_id.clone(),
        treatment_run: treatment.run_id.clone(),
        rows,
    })
}

pub fn comparison_csv(c: &Comparison) -> String {
    let mut out = String::from("baseline_agent,treatment_agent,metric,baseline_mean,treatment_mean,delta,percent\n");
    for r in &c.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.baseline_agent,
            r.treatment_agent,
            r.metric,
            r.baseline_mean,
            r.treatment_mean,
            r.delta,
            r.percent.map(|p| p.to_string()).unwrap_or_default()
        );
    }
    out
}

pub fn comparison_markdown(c: &Comparison) -> String {
    let mut out = format!("# Comparison {} -> {}\n\n", c.baseline_run, c.treatment_run);
    out.push_str("| baseline | treatment | metric | baseline mean | treatment mean | delta | % |\n|---|---|---|---|---|---|---|\n");
    for r in &c.rows {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {:.4} | {:.4} | {:+.4} | {} |",
            r.baseline_agent,
            r.treatment_agent,
            r.metric,
            r.baseline_mean,
            r.treatment_mean,
            r.delta,
            r.percent.map_or("n/a".into(), |p| format!("{p:+.1}"))
        );
    }
    out
}
