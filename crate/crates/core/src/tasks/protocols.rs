//! Drivers for the evaluation tasks. Each driver owns its environment stream
//! and hands the agent a separate stream, so environment draws line up across
//! agents evaluated with the same seed.

use serde::{Deserialize, Serialize};

use crate::agents::scripted::IOWA_EXPLORATION_PICKS;
use crate::agents::{Agent, Feedback, StepContext};
use crate::error::{Error, Result};
use crate::metrics::{ConfidenceRecord, EUChoiceRecord, EpisodeStep, EpisodeTrace, ProbabilityJudgment};
use crate::risk::RiskWeights;
use crate::rng::RngState;
use crate::tasks::bank::{FallacyTag, GamblePair, IntervalItem, ProbabilityItem, Scenario};
use crate::tasks::iowa::{DeckSchedule, Draw, IowaState, DEFAULT_EPISODE_PICKS, DEFAULT_INITIAL_BANKROLL};

pub const MIN_PROTOCOL_SCENARIOS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Probability,
    Interval,
    Gambles,
    LossChasing,
    Iowa,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [
        TaskKind::Probability,
        TaskKind::Interval,
        TaskKind::Gambles,
        TaskKind::LossChasing,
        TaskKind::Iowa,
    ];

    fn code(self) -> u64 {
        self as u64
    }
}

/// Environment and agent streams for one episode of one task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeStreams {
    pub env: RngState,
    pub agent: RngState,
}

impl EpisodeStreams {
    pub fn new(seed: u64, task: TaskKind, episode: usize) -> Self {
        let index = (task.code() << 24) | episode as u64;
        Self {
            env: RngState::for_stream(seed, 2 * index),
            agent: RngState::for_stream(seed, 2 * index + 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub item: String,
    pub message: String,
}

/// Records produced by one task episode plus items the agent failed on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRun<T> {
    pub records: Vec<T>,
    pub failures: Vec<ItemFailure>,
}

impl<T> Default for TaskRun<T> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
            failures: Vec::new(),
        }
    }
}

impl<T> TaskRun<T> {
    /// Keeps non-fatal failures; fatal ones abort with the item id attached.
    fn absorb(&mut self, item: &str, result: Result<T>) -> Result<()> {
        match result {
            Ok(r) => self.records.push(r),
            Err(e) if e.is_fatal() => return Err(e.for_item(item)),
            Err(e) => self.failures.push(ItemFailure {
                item: item.to_string(),
                message: e.to_string(),
            }),
        }
        Ok(())
    }
}

fn shuffled_order(len: usize, rng: &mut RngState) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    rng.shuffle(&mut order);
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityRecord {
    pub item: String,
    pub fallacy_tag: Option<FallacyTag>,
    pub p_model: f64,
    pub p_true: f64,
}

impl ProbabilityRecord {
    pub fn judgment(&self) -> ProbabilityJudgment {
        ProbabilityJudgment {
            p_model: self.p_model,
            p_true: self.p_true,
        }
    }
}

pub fn run_probability_task(
    items: &[ProbabilityItem],
    agent: &mut dyn Agent,
    streams: EpisodeStreams,
) -> Result<TaskRun<ProbabilityRecord>> {
    if items.is_empty() {
        return Err(Error::validation("probability_items", "bank has no probability items"));
    }
    let EpisodeStreams { mut env, agent: mut agent_rng } = streams;
    let mut run = TaskRun::default();
    for i in shuffled_order(items.len(), &mut env) {
        let item = &items[i];
        let result = agent.estimate_probability(item, &mut agent_rng).and_then(|p| {
            if (0.0..=1.0).contains(&p) {
                Ok(ProbabilityRecord {
                    item: item.id.clone(),
                    fallacy_tag: item.fallacy_tag,
                    p_model: p,
                    p_true: item.p_true,
                })
            } else {
                Err(Error::MalformedAnswer {
                    item: item.id.clone(),
                    message: format!("probability {p} is outside [0, 1]"),
                })
            }
        });
        run.absorb(&item.id, result)?;
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalRecord {
    pub item: String,
    pub lo: f64,
    pub hi: f64,
    pub true_value: f64,
    pub nominal_level: f64,
    pub covered: bool,
}

impl IntervalRecord {
    pub fn confidence_record(&self) -> ConfidenceRecord {
        ConfidenceRecord {
            stated_confidence: self.nominal_level,
            p_correct: if self.covered { 1.0 } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub coverage: f64,
    pub mean_nominal: f64,
    pub interval_ob: f64,
}

pub fn interval_summary(records: &[IntervalRecord]) -> Result<IntervalSummary> {
    if records.is_empty() {
        return Err(Error::Estimation("no interval answers".into()));
    }
    let n = records.len() as f64;
    let coverage = records.iter().filter(|r| r.covered).count() as f64 / n;
    let mean_nominal = records.iter().map(|r| r.nominal_level).sum::<f64>() / n;
    Ok(IntervalSummary {
        coverage,
        mean_nominal,
        interval_ob: (mean_nominal - coverage).max(0.0),
    })
}

pub fn run_overconfidence_task(
    items: &[IntervalItem],
    agent: &mut dyn Agent,
    streams: EpisodeStreams,
) -> Result<TaskRun<IntervalRecord>> {
    if items.is_empty() {
        return Err(Error::validation("interval_items", "bank has no interval items"));
    }
    let EpisodeStreams { mut env, agent: mut agent_rng } = streams;
    let mut run = TaskRun::default();
    for i in shuffled_order(items.len(), &mut env) {
        let item = &items[i];
        let result = agent.give_interval(item, &mut agent_rng).and_then(|(lo, hi)| {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::MalformedAnswer {
                    item: item.id.clone(),
                    message: format!("interval [{lo}, {hi}] is not ordered"),
                });
            }
            Ok(IntervalRecord {
                item: item.id.clone(),
                lo,
                hi,
                true_value: item.true_value,
                nominal_level: item.nominal_level,
                covered: lo <= item.true_value && item.true_value <= hi,
            })
        });
        run.absorb(&item.id, result)?;
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GambleRecord {
    pub pair: String,
    pub chose_risky: bool,
}

pub fn run_gamble_task(pairs: &[GamblePair], agent: &mut dyn Agent, streams: EpisodeStreams) -> Result<TaskRun<GambleRecord>> {
    if pairs.is_empty() {
        return Err(Error::validation("gamble_pairs", "bank has no gamble pairs"));
    }
    let EpisodeStreams { mut env, agent: mut agent_rng } = streams;
    let mut run = TaskRun::default();
    for i in shuffled_order(pairs.len(), &mut env) {
        let pair = &pairs[i];
        let result = agent.choose_gamble(pair, &mut agent_rng).map(|chose_risky| GambleRecord {
            pair: pair.id.clone(),
            chose_risky,
        });
        run.absorb(&pair.id, result)?;
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeedbackPolicy {
    /// Negative exactly when the realised outcome is an error.
    Truthful,
    /// Negative on the listed steps, or on every step when none are listed.
    Adversarial {
        #[serde(default)]
        negative_steps: Option<Vec<usize>>,
    },
}

impl FeedbackPolicy {
    pub fn all_negative() -> Self {
        FeedbackPolicy::Adversarial { negative_steps: None }
    }

    fn negative(&self, step: usize, error: bool) -> bool {
        match self {
            FeedbackPolicy::Truthful => error,
            FeedbackPolicy::Adversarial { negative_steps: None } => true,
            FeedbackPolicy::Adversarial {
                negative_steps: Some(steps),
            } => steps.contains(&step),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossChasingConfig {
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub feedback: FeedbackPolicy,
}

impl Default for LossChasingConfig {
    fn default() -> Self {
        Self {
            episodes: 8,
            steps_per_episode: 10,
            feedback: FeedbackPolicy::all_negative(),
        }
    }
}

/// One scenario decision with everything the metrics need.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStep {
    pub scenario: String,
    pub label: String,
    pub option_index: usize,
    pub optimal_index: usize,
    pub risk: f64,
    pub confidence: f64,
    pub p_correct: f64,
    pub error: bool,
    pub feedback_negative: bool,
    /// Chosen option is strictly riskier than the most conservative one.
    pub chose_risky: bool,
    pub eu_risky: f64,
    pub eu_conservative: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<f64>>,
}

impl ScenarioStep {
    pub fn episode_step(&self) -> EpisodeStep {
        EpisodeStep {
            risk: self.risk,
            confidence: self.confidence,
            error: self.error,
            feedback_negative: self.feedback_negative,
        }
    }

    pub fn confidence_record(&self) -> ConfidenceRecord {
        ConfidenceRecord {
            stated_confidence: self.confidence,
            p_correct: self.p_correct,
        }
    }

    pub fn eu_record(&self) -> EUChoiceRecord {
        EUChoiceRecord {
            eu_risky: self.eu_risky,
            eu_conservative: self.eu_conservative,
            chose_risky: self.chose_risky,
        }
    }

    /// Stated risk `1 - confidence` against realised risk `1 - p_correct`.
    pub fn risk_pair(&self) -> (f64, f64) {
        (1.0 - self.confidence, 1.0 - self.p_correct)
    }
}

pub fn trace_of(steps: &[ScenarioStep]) -> EpisodeTrace {
    EpisodeTrace::new(steps.iter().map(ScenarioStep::episode_step).collect())
}

fn scenario_step(
    scenario: &Scenario,
    choice: crate::agents::Choice,
    weights: &RiskWeights,
    policy: &FeedbackPolicy,
    step: usize,
    u: f64,
) -> Result<ScenarioStep> {
    let index = scenario.option_index(&choice.label).ok_or_else(|| Error::MalformedAnswer {
        item: scenario.id.clone(),
        message: format!("label `{}` is not an option", choice.label),
    })?;
    if !(0.0..=1.0).contains(&choice.confidence) {
        return Err(Error::MalformedAnswer {
            item: scenario.id.clone(),
            message: format!("confidence {} is outside [0, 1]", choice.confidence),
        });
    }
    let option = &scenario.options[index];
    let conservative = scenario.min_risk_index(weights);
    let risk = option.risk(weights);
    let chose_risky = risk > scenario.options[conservative].risk(weights);
    let risky = if chose_risky { index } else { scenario.max_risk_index(weights) };
    let error = u >= option.p_correct;
    Ok(ScenarioStep {
        scenario: scenario.id.clone(),
        label: choice.label,
        option_index: index,
        optimal_index: scenario.quality_optimal_index(),
        risk,
        confidence: choice.confidence,
        p_correct: option.p_correct,
        error,
        feedback_negative: policy.negative(step, error),
        chose_risky,
        eu_risky: scenario.options[risky].expected_utility,
        eu_conservative: scenario.options[conservative].expected_utility,
        logits: choice.logits,
    })
}

/// One episode of the sequential scenario protocol with feedback.
pub fn run_loss_chasing_episode(
    scenarios: &[Scenario],
    agent: &mut dyn Agent,
    config: &LossChasingConfig,
    weights: &RiskWeights,
    episode: usize,
    streams: EpisodeStreams,
) -> Result<TaskRun<ScenarioStep>> {
    if scenarios.len() < MIN_PROTOCOL_SCENARIOS {
        return Err(Error::validation(
            "scenarios",
            format!("protocol needs at least {MIN_PROTOCOL_SCENARIOS} scenarios, bank has {}", scenarios.len()),
        ));
    }
    if config.steps_per_episode > scenarios.len() {
        return Err(Error::validation(
            "loss_chasing.steps_per_episode",
            "exceeds the number of scenarios in the bank",
        ));
    }
    let EpisodeStreams { mut env, agent: mut agent_rng } = streams;
    let order = shuffled_order(scenarios.len(), &mut env);
    agent.reset();
    let mut run = TaskRun::default();
    for (step, &i) in order.iter().take(config.steps_per_episode).enumerate() {
        let scenario = &scenarios[i];
        let u = env.next_unit();
        let ctx = StepContext { episode, step };
        let result = agent
            .choose_option(scenario, &ctx, &mut agent_rng)
            .and_then(|choice| scenario_step(scenario, choice, weights, &config.feedback, step, u));
        if let Ok(s) = &result {
            agent.observe_feedback(&Feedback {
                step,
                negative: s.feedback_negative,
                chosen_risk: s.risk,
            });
        }
        run.absorb(&format!("{}@step{step}", scenario.id), result)?;
    }
    Ok(run)
}

/// All episodes of the protocol, run serially, as one pooled trace per episode.
pub fn run_loss_chasing_protocol(
    scenarios: &[Scenario],
    agent: &mut dyn Agent,
    config: &LossChasingConfig,
    weights: &RiskWeights,
    seed: u64,
) -> Result<Vec<TaskRun<ScenarioStep>>> {
    (0..config.episodes)
        .map(|e| {
            let streams = EpisodeStreams::new(seed, TaskKind::LossChasing, e);
            run_loss_chasing_episode(scenarios, agent, config, weights, e, streams)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IowaConfig {
    pub episodes: usize,
    pub picks: usize,
    pub initial_bankroll: i64,
    pub shuffle: bool,
    pub schedule: DeckSchedule,
    /// Leading picks per episode left out of the optimal-rate score.
    pub unscored_picks: usize,
}

impl Default for IowaConfig {
    fn default() -> Self {
        Self {
            episodes: 4,
            picks: DEFAULT_EPISODE_PICKS,
            initial_bankroll: DEFAULT_INITIAL_BANKROLL,
            shuffle: true,
            schedule: DeckSchedule::default(),
            unscored_picks: IOWA_EXPLORATION_PICKS,
        }
    }
}

pub fn run_iowa_episode(config: &IowaConfig, agent: &mut dyn Agent, streams: EpisodeStreams) -> Result<TaskRun<Draw>> {
    let EpisodeStreams { env, agent: mut agent_rng } = streams;
    let mut state = IowaState::new(config.schedule.clone(), config.initial_bankroll, config.shuffle, env)?;
    agent.reset();
    let mut run = TaskRun::default();
    for pick in 0..config.picks {
        let observation = state.observation();
        let result = agent.pick_deck(&observation, &mut agent_rng).map(|deck| state.step(deck));
        run.absorb(&format!("pick{pick}"), result)?;
    }
    Ok(run)
}
