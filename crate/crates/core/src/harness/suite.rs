//! Run orchestration: build agents, fan episodes out over a worker pool,
//! funnel events through one ordered writer, and fold the log into metrics.

use std::path::{Path, PathBuf};
use std::sync::{mpsc, Arc};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::agents::{Agent, LlmAgent, LlmClient, ScriptedAgent, ScriptedProfile, ToyAgent, ToyPolicy, UniformAgent};
use crate::error::{Error, Result};
use crate::harness::config::{AgentKind, RunConfig};
use crate::harness::events::{file_digest, read_events, Event, EventWriter, Payload};
use crate::harness::report::{compute_metrics, summarize, write_summaries, RunReport, EVENTS_FILE, REPORT_FILE};
use crate::risk::RiskWeights;
use crate::tasks::bank::Bank;
use crate::tasks::protocols::{
    run_gamble_task, run_iowa_episode, run_loss_chasing_episode, run_overconfidence_task, run_probability_task,
    EpisodeStreams, TaskKind, TaskRun,
};
use crate::training::{train_toy_policy, AntiChasingConfig, AntiChasingWrapper, TrainingConfig};

#[derive(Debug, Clone)]
enum Subject {
    Scripted(ScriptedProfile),
    Uniform,
    Toy(ToyPolicy),
    Llm(Arc<LlmClient>),
}

/// Everything needed to spawn a fresh agent for one episode.
#[derive(Debug, Clone)]
struct Prototype {
    name: String,
    subject: Subject,
    wrapper: Option<AntiChasingConfig>,
    weights: RiskWeights,
}

impl Prototype {
    fn spawn(&self) -> Result<Box<dyn Agent>> {
        let inner: Box<dyn Agent> = match &self.subject {
            Subject::Scripted(p) => Box::new(ScriptedAgent::new(*p, self.weights)),
            Subject::Uniform => Box::new(UniformAgent),
            Subject::Toy(policy) => Box::new(ToyAgent::new(policy.clone(), self.weights).named(self.name.clone())),
            Subject::Llm(client) => Box::new(LlmAgent::new(Arc::clone(client))),
        };
        Ok(match self.wrapper {
            Some(cfg) => Box::new(AntiChasingWrapper::new(inner, cfg, self.weights)?),
            None => inner,
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    seq: usize,
    agent: usize,
    seed_index: usize,
    task: TaskKind,
    episode: usize,
}

/// Stable id derived from the config, so identical configs give identical logs.
pub fn run_id(config: &RunConfig) -> Result<String> {
    let mut snapshot = config.clone();
    snapshot.parallelism = 1;
    snapshot.out_dir = None;
    let text = serde_json::to_string(&snapshot)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes()))[..12].to_string())
}

fn build_prototypes(config: &RunConfig, bank: &Bank) -> Result<Vec<Vec<Prototype>>> {
    let mut shared_llm: Vec<Option<Arc<LlmClient>>> = Vec::new();
    for spec in &config.agents {
        shared_llm.push(match &spec.agent {
            AgentKind::Llm { client } => Some(Arc::new(LlmClient::new(client.clone())?)),
            _ => None,
        });
    }
    let mut loaded: Vec<Option<ToyPolicy>> = Vec::new();
    for spec in &config.agents {
        loaded.push(match &spec.agent {
            AgentKind::Toy { policy } => Some(ToyPolicy::load(policy)?),
            _ => None,
        });
    }
    let jobs: Vec<(usize, usize)> = (0..config.agents.len())
        .flat_map(|a| (0..config.seeds.len()).map(move |s| (a, s)))
        .collect();
    let built: Vec<Result<Prototype>> = jobs
        .par_iter()
        .map(|&(a, s)| {
            let spec = &config.agents[a];
            let subject = match &spec.agent {
                AgentKind::Scripted { profile } => Subject::Scripted(*profile),
                AgentKind::Uniform => Subject::Uniform,
                AgentKind::Toy { .. } => Subject::Toy(loaded[a].clone().expect("loaded above")),
                AgentKind::ToyTrain { training, ablation } => {
                    let training = TrainingConfig {
                        seed: config.seeds[s],
                        risk_weights: config.risk_weights,
                        ..training.clone()
                    };
                    Subject::Toy(train_toy_policy(bank, &training, ablation)?.policy)
                }
                AgentKind::Llm { .. } => Subject::Llm(Arc::clone(shared_llm[a].as_ref().expect("built above"))),
            };
            Ok(Prototype {
                name: spec.display_name(),
                subject,
                wrapper: spec.wraps_anti_chasing().then_some(config.anti_chasing),
                weights: config.risk_weights,
            })
        })
        .collect();
    let mut out = vec![Vec::with_capacity(config.seeds.len()); config.agents.len()];
    for (&(a, _), p) in jobs.iter().zip(built) {
        out[a].push(p?);
    }
    Ok(out)
}

fn units(config: &RunConfig) -> Vec<Unit> {
    let mut tasks = config.tasks.clone();
    tasks.sort();
    tasks.dedup();
    let mut out = Vec::new();
    for agent in 0..config.agents.len() {
        for seed_index in 0..config.seeds.len() {
            for &task in &tasks {
                for episode in 0..config.episodes(task) {
                    out.push(Unit {
                        seq: out.len(),
                        agent,
                        seed_index,
                        task,
                        episode,
                    });
                }
            }
        }
    }
    out
}

fn to_events<T>(run: TaskRun<T>, wrap: impl Fn(T) -> Payload, make: &dyn Fn(usize, Payload) -> Event) -> Vec<Event> {
    let mut events: Vec<Event> = run.records.into_iter().enumerate().map(|(i, r)| make(i, wrap(r))).collect();
    events.extend(run.failures.into_iter().enumerate().map(|(i, f)| make(i, Payload::Failure(f))));
    events
}

fn run_unit(unit: &Unit, proto: &Prototype, config: &RunConfig, bank: &Bank, run_id: &str) -> Result<Vec<Event>> {
    let seed = config.seeds[unit.seed_index];
    let streams = EpisodeStreams::new(seed, unit.task, unit.episode);
    let mut agent = proto.spawn()?;
    let make = |step: usize, payload: Payload| Event {
        run_id: run_id.to_string(),
        seed,
        task: unit.task,
        episode: unit.episode,
        step,
        agent: proto.name.clone(),
        payload,
        check: String::new(),
    };
    Ok(match unit.task {
        TaskKind::Probability => to_events(
            run_probability_task(&bank.probability_items, &mut agent, streams)?,
            Payload::Probability,
            &make,
        ),
        TaskKind::Interval => to_events(
            run_overconfidence_task(&bank.interval_items, &mut agent, streams)?,
            Payload::Interval,
            &make,
        ),
        TaskKind::Gambles => to_events(run_gamble_task(&bank.gamble_pairs, &mut agent, streams)?, Payload::Gamble, &make),
        TaskKind::LossChasing => to_events(
            run_loss_chasing_episode(
                &bank.scenarios,
                &mut agent,
                &config.loss_chasing,
                &config.risk_weights,
                unit.episode,
                streams,
            )?,
            Payload::Scenario,
            &make,
        ),
        TaskKind::Iowa => to_events(run_iowa_episode(&config.iowa, &mut agent, streams)?, Payload::Draw, &make),
    })
}

/// Runs every configured task for every agent and seed into `out_dir`.
pub fn run_suite(config: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    config.validate()?;
    let bank = config.load_bank()?;
    let started = Instant::now();
    let started_unix_secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let id = run_id(config)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
    let prototypes = pool.install(|| build_prototypes(config, &bank))?;
    let work = units(config);
    log::info!("run {id}: {} work units on {} workers", work.len(), config.parallelism);

    let events_path = out_dir.join(EVENTS_FILE);
    let mut writer = EventWriter::create(&events_path)?;
    let (tx, rx) = mpsc::channel::<(usize, Result<Vec<Event>>)>();
    let outcome: Result<()> = std::thread::scope(|scope| {
        let producer = scope.spawn(|| {
            pool.install(|| {
                work.par_iter().for_each_with(tx, |tx, unit| {
                    let proto = &prototypes[unit.agent][unit.seed_index];
                    let _ = tx.send((unit.seq, run_unit(unit, proto, config, &bank, &id)));
                });
            });
        });
        let mut first_error = None;
        for (seq, result) in rx {
            match result {
                Ok(events) if first_error.is_none() => writer.submit(seq, events)?,
                Ok(_) => {}
                Err(e) => {
                    if first_error.is_none() {
                        first_error = Some(e);
                    }
                }
            }
        }
        producer.join().map_err(|_| Error::Config("worker thread panicked".into()))?;
        first_error.map_or(Ok(()), Err)
    });
    outcome?;
    let (event_count, tail) = writer.finish()?;

    let (events, _) = read_events(&events_path)?;
    let per_seed = compute_metrics(&events, config, &bank);
    let report = RunReport {
        run_id: id,
        config: config.clone(),
        bank_digest: bank.digest(),
        event_count,
        event_chain_tail: tail,
        events_digest: file_digest(&events_path)?,
        summary: summarize(&per_seed, config),
        per_seed,
        started_unix_secs,
        elapsed_secs: started.elapsed().as_secs_f64(),
    };
    let report_path = out_dir.join(REPORT_FILE);
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n").map_err(|e| Error::io(&report_path, e))?;
    write_summaries(out_dir, &report)?;
    Ok(report)
}

/// Output directory: explicit override, then the config's, then `runs/<id>`.
pub fn resolve_out_dir(config: &RunConfig, override_dir: Option<&Path>) -> Result<PathBuf> {
    if let Some(d) = override_dir {
        return Ok(d.to_path_buf());
    }
    if let Some(d) = &config.out_dir {
        return Ok(d.clone());
    }
    Ok(PathBuf::from("runs").join(run_id(config)?))
}

/// Events of a finished run as a set, ignoring file order.
pub fn event_set(dir: &Path) -> Result<Vec<String>> {
    let (events, _) = read_events(&dir.join(EVENTS_FILE))?;
    let mut lines = events
        .into_iter()
        .map(|mut e| {
            e.check.clear();
            serde_json::to_string(&e).map_err(Error::from)
        })
        .collect::<Result<Vec<_>>>()?;
    lines.sort();
    Ok(lines)
}
