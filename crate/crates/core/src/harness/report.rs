//! Metric fold over an event log, the persisted run report, and the CSV and
//! Markdown summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{confidence_dynamics_fit_pooled, fit_temperature, DynamicsFit, ScoredObservation};
use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::harness::events::{file_digest, read_events, Event, Payload};
use crate::metrics::{
    clamp_lc, gts, judgment_calibration_quality, loss_chasing_pooled, loss_chasing_rate_pooled, overconfidence_bias,
    pja, probability_misjudgment, risk_calibration_error, risk_reward_miscalibration, EpisodeTrace,
};
use crate::prospect::{fit_loss_aversion, ProspectParams};
use crate::tasks::bank::Bank;
use crate::tasks::iowa::{iowa_optimal_rate, Draw};
use crate::tasks::protocols::{interval_summary, trace_of, IntervalRecord, ProbabilityRecord, ScenarioStep};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_MD: &str = "summary.md";
/// Largest difference tolerated between stored and recomputed metrics.
pub const RECOMPUTE_TOLERANCE: f64 = 1e-12;
/// Temperature assumed when fitting loss aversion from gamble choices.
pub const LAC_TEMPERATURE: f64 = 1.0;

/// Every score for one agent and seed; `None` where the inputs were absent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub gts: Option<f64>,
    pub ob: Option<f64>,
    pub interval_ob: Option<f64>,
    pub lc: Option<f64>,
    pub lc_clamped: Option<f64>,
    pub loss_chase_rate: Option<f64>,
    pub pm: Option<f64>,
    pub rrm: Option<f64>,
    pub rce: Option<f64>,
    pub pja: Option<f64>,
    pub calibration_quality: Option<f64>,
    pub iowa_optimal_rate: Option<f64>,
    pub lac: Option<f64>,
    pub dynamics_slope: Option<f64>,
    pub temperature: Option<f64>,
}

impl MetricReport {
    pub const NAMES: [&'static str; 15] = [
        "gts",
        "ob",
        "interval_ob",
        "lc",
        "lc_clamped",
        "loss_chase_rate",
        "pm",
        "rrm",
        "rce",
        "pja",
        "calibration_quality",
        "iowa_optimal_rate",
        "lac",
        "dynamics_slope",
        "temperature",
    ];

    pub fn values(&self) -> [Option<f64>; 15] {
        [
            self.gts,
            self.ob,
            self.interval_ob,
            self.lc,
            self.lc_clamped,
            self.loss_chase_rate,
            self.pm,
            self.rrm,
            self.rce,
            self.pja,
            self.calibration_quality,
            self.iowa_optimal_rate,
            self.lac,
            self.dynamics_slope,
            self.temperature,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        Self::NAMES.iter().position(|n| *n == name).and_then(|i| self.values()[i])
    }

    fn from_values(v: [Option<f64>; 15]) -> Self {
        Self {
            gts: v[0],
            ob: v[1],
            interval_ob: v[2],
            lc: v[3],
            lc_clamped: v[4],
            loss_chase_rate: v[5],
            pm: v[6],
            rrm: v[7],
            rce: v[8],
            pja: v[9],
            calibration_quality: v[10],
            iowa_optimal_rate: v[11],
            lac: v[12],
            dynamics_slope: v[13],
            temperature: v[14],
        }
    }

    /// Per-field mean over the reports that have the field.
    pub fn mean(reports: &[MetricReport]) -> Self {
        let mut out = [None; 15];
        for (i, slot) in out.iter_mut().enumerate() {
            let vals: Vec<f64> = reports.iter().filter_map(|r| r.values()[i]).collect();
            if !vals.is_empty() {
                *slot = Some(vals.iter().sum::<f64>() / vals.len() as f64);
            }
        }
        Self::from_values(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedMetrics {
    pub agent: String,
    pub seed: u64,
    pub metrics: MetricReport,
    pub dynamics: Option<DynamicsFit>,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent: String,
    pub seeds: usize,
    pub metrics: MetricReport,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub run_id: String,
    pub config: RunConfig,
    pub bank_digest: String,
    pub event_count: usize,
    pub event_chain_tail: String,
    pub events_digest: String,
    pub per_seed: Vec<SeedMetrics>,
    pub summary: Vec<AgentSummary>,
    pub started_unix_secs: u64,
    pub elapsed_secs: f64,
}

#[derive(Default)]
struct Bucket<'a> {
    scenario: BTreeMap<(usize, usize), &'a ScenarioStep>,
    probability: Vec<&'a ProbabilityRecord>,
    interval: Vec<&'a IntervalRecord>,
    gambles: Vec<(&'a str, bool)>,
    draws: BTreeMap<(usize, usize), &'a Draw>,
    failures: usize,
}

fn ok<T>(r: Result<T>) -> Option<T> {
    r.ok()
}

fn metrics_for(bucket: &Bucket<'_>, config: &RunConfig, bank: &Bank) -> (MetricReport, Option<DynamicsFit>) {
    let mut m = MetricReport::default();

    let mut episodes: BTreeMap<usize, Vec<ScenarioStep>> = BTreeMap::new();
    for (&(episode, _), step) in &bucket.scenario {
        episodes.entry(episode).or_default().push((*step).clone());
    }
    let steps: Vec<&ScenarioStep> = bucket.scenario.values().copied().collect();
    let traces: Vec<EpisodeTrace> = episodes.values().map(|s| trace_of(s)).collect();

    let mut confidence: Vec<_> = steps.iter().map(|s| s.confidence_record()).collect();
    let intervals: Vec<IntervalRecord> = bucket.interval.iter().map(|r| (*r).clone()).collect();
    confidence.extend(intervals.iter().map(IntervalRecord::confidence_record));
    m.ob = ok(overconfidence_bias(&confidence));
    m.interval_ob = ok(interval_summary(&intervals)).map(|s| s.interval_ob);

    if !traces.is_empty() {
        m.lc = ok(loss_chasing_pooled(&traces));
        m.lc_clamped = m.lc.map(clamp_lc);
        m.loss_chase_rate = ok(loss_chasing_rate_pooled(&traces, &config.metric_config));
    }

    let judgments: Vec<_> = bucket.probability.iter().map(|r| r.judgment()).collect();
    m.pm = ok(probability_misjudgment(&judgments));
    m.pja = ok(pja(&judgments));
    m.calibration_quality = ok(judgment_calibration_quality(&judgments));

    let eu: Vec<_> = steps.iter().map(|s| s.eu_record()).collect();
    m.rrm = ok(risk_reward_miscalibration(&eu));
    let pairs: Vec<_> = steps.iter().map(|s| s.risk_pair()).collect();
    m.rce = ok(risk_calibration_error(&pairs));

    if let (Some(ob), Some(lc), Some(pm), Some(rrm)) = (m.ob, m.lc_clamped, m.pm, m.rrm) {
        m.gts = ok(gts(ob, lc, pm, rrm, &config.metric_weights));
    }

    let mut draws_by_episode: BTreeMap<usize, Vec<Draw>> = BTreeMap::new();
    for (&(episode, _), d) in &bucket.draws {
        draws_by_episode.entry(episode).or_default().push(**d);
    }
    let scored: Vec<Draw> = draws_by_episode
        .values()
        .flat_map(|d| d.iter().skip(config.iowa.unscored_picks).copied())
        .collect();
    m.iowa_optimal_rate = ok(iowa_optimal_rate(&scored));

    let choices: Vec<_> = bucket
        .gambles
        .iter()
        .filter_map(|(id, risky)| bank.gamble_pairs.iter().find(|p| p.id == *id).map(|p| p.record(*risky)))
        .collect();
    m.lac = ok(fit_loss_aversion(&choices, &ProspectParams::default(), LAC_TEMPERATURE));

    let dynamics = ok(confidence_dynamics_fit_pooled(&traces));
    m.dynamics_slope = dynamics.map(|d| d.slope_on_error);

    let observations: Vec<ScoredObservation> = steps
        .iter()
        .filter_map(|s| {
            s.logits.as_ref().map(|l| ScoredObservation {
                scores: l.clone(),
                label: s.option_index,
            })
        })
        .collect();
    m.temperature = ok(fit_temperature(&observations));
    (m, dynamics)
}

/// Pure fold from events to per-agent, per-seed metrics in config order.
pub fn compute_metrics(events: &[Event], config: &RunConfig, bank: &Bank) -> Vec<SeedMetrics> {
    let mut buckets: BTreeMap<(String, u64), Bucket<'_>> = BTreeMap::new();
    for e in events {
        let b = buckets.entry((e.agent.clone(), e.seed)).or_default();
        match &e.payload {
            Payload::Scenario(s) => {
                b.scenario.insert((e.episode, e.step), s);
            }
            Payload::Probability(r) => b.probability.push(r),
            Payload::Interval(r) => b.interval.push(r),
            Payload::Gamble(r) => b.gambles.push((r.pair.as_str(), r.chose_risky)),
            Payload::Draw(d) => {
                b.draws.insert((e.episode, e.step), d);
            }
            Payload::Failure(_) => b.failures += 1,
        }
    }
    // fixed item order so the fold does not depend on event order
    for b in buckets.values_mut() {
        b.probability.sort_by(|x, y| x.item.cmp(&y.item));
        b.interval.sort_by(|x, y| x.item.cmp(&y.item));
        b.gambles.sort();
    }
    let mut out = Vec::new();
    for spec in &config.agents {
        let agent = spec.display_name();
        for &seed in &config.seeds {
            let empty = Bucket::default();
            let bucket = buckets.get(&(agent.clone(), seed)).unwrap_or(&empty);
            let (metrics, dynamics) = metrics_for(bucket, config, bank);
            out.push(SeedMetrics {
                agent: agent.clone(),
                seed,
                metrics,
                dynamics,
                failures: bucket.failures,
            });
        }
    }
    out
}

pub fn summarize(per_seed: &[SeedMetrics], config: &RunConfig) -> Vec<AgentSummary> {
    config
        .agents
        .iter()
        .map(|spec| {
            let agent = spec.display_name();
            let rows: Vec<&SeedMetrics> = per_seed.iter().filter(|m| m.agent == agent).collect();
            let reports: Vec<MetricReport> = rows.iter().map(|r| r.metrics).collect();
            AgentSummary {
                agent,
                seeds: rows.len(),
                metrics: MetricReport::mean(&reports),
                failures: rows.iter().map(|r| r.failures).sum(),
            }
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn summary_csv(summary: &[AgentSummary]) -> String {
    let mut out = String::from("agent,seeds,failures");
    for n in MetricReport::NAMES {
        out.push(',');
        out.push_str(n);
    }
    out.push('\n');
    for row in summary {
        let _ = write!(out, "{},{},{}", csv_field(&row.agent), row.seeds, row.failures);
        for v in row.metrics.values() {
            out.push(',');
            out.push_str(&fmt_opt(v));
        }
        out.push('\n');
    }
    out
}

pub fn summary_markdown(report: &RunReport) -> String {
    let mut out = format!("# Run {}\n\n", report.run_id);
    let _ = writeln!(out, "- bank digest: `{}`", report.bank_digest);
    let _ = writeln!(out, "- seeds: {:?}", report.config.seeds);
    let _ = writeln!(out, "- events: {}", report.event_count);
    let _ = writeln!(out, "- elapsed: {:.2} s\n", report.elapsed_secs);
    let cols = ["gts", "ob", "lc_clamped", "pm", "rrm", "rce", "pja", "iowa_optimal_rate", "loss_chase_rate", "lac"];
    let _ = writeln!(out, "| agent | {} |", cols.join(" | "));
    let _ = writeln!(out, "|---|{}", "---|".repeat(cols.len()));
    for row in &report.summary {
        let cells: Vec<String> = cols
            .iter()
            .map(|c| row.metrics.get(c).map_or("n/a".into(), |v| format!("{v:.4}")))
            .collect();
        let _ = writeln!(out, "| {} | {} |", row.agent, cells.join(" | "));
    }
    let failures: usize = report.summary.iter().map(|s| s.failures).sum();
    if failures > 0 {
        let _ = writeln!(out, "\n{failures} item failures were recorded; see the event log.");
    }
    out
}

pub fn write_summaries(dir: &Path, report: &RunReport) -> Result<()> {
    let csv = dir.join(SUMMARY_CSV);
    std::fs::write(&csv, summary_csv(&report.summary)).map_err(|e| Error::io(&csv, e))?;
    let md = dir.join(SUMMARY_MD);
    std::fs::write(&md, summary_markdown(report)).map_err(|e| Error::io(&md, e))
}

pub fn load_report(dir: &Path) -> Result<RunReport> {
    let path = dir.join(REPORT_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => x == y || (x - y).abs() <= RECOMPUTE_TOLERANCE,
        _ => false,
    }
}

/// Verifies the log of a finished run, recomputes every metric from it, and
/// rewrites the summaries.
pub fn emit_report(dir: &Path) -> Result<RunReport> {
    let report = load_report(dir)?;
    let (events, tail) = read_events(&dir.join(EVENTS_FILE))?;
    if events.len() != report.event_count || tail != report.event_chain_tail {
        return Err(Error::Integrity {
            line: events.len().min(report.event_count) + 1,
            message: format!(
                "log has {} events but the report recorded {}; the log was truncated or extended",
                events.len(),
                report.event_count
            ),
        });
    }
    let bank = report.config.load_bank()?;
    if bank.digest() != report.bank_digest {
        return Err(Error::Integrity {
            line: 0,
            message: "bank file changed since the run".into(),
        });
    }
    let recomputed = compute_metrics(&events, &report.config, &bank);
    if recomputed.len() != report.per_seed.len() {
        return Err(Error::Integrity {
            line: 0,
            message: "report rows do not match the configured agents and seeds".into(),
        });
    }
    for (stored, fresh) in report.per_seed.iter().zip(&recomputed) {
        for (i, name) in MetricReport::NAMES.iter().enumerate() {
            let (a, b) = (stored.metrics.values()[i], fresh.metrics.values()[i]);
            if !close(a, b) {
                return Err(Error::Integrity {
                    line: 0,
                    message: format!(
                        "{name} for {} seed {}: stored {a:?}, recomputed {b:?}",
                        stored.agent, stored.seed
                    ),
                });
            }
        }
    }
    if file_digest(&dir.join(EVENTS_FILE))? != report.events_digest {
        return Err(Error::Integrity {
            line: 0,
            message: "event log bytes differ from the recorded digest".into(),
        });
    }
    write_summaries(dir, &report)?;
    Ok(report)
}
