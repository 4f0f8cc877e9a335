//! The agent contract shared by scripted oracles, the toy policy, and remote
//! LLM subjects.

pub mod llm;
pub mod random;
pub mod scripted;
pub mod toy;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::RngState;
use crate::tasks::bank::{GamblePair, IntervalItem, ProbabilityItem, Scenario};
use crate::tasks::iowa::{Deck, IowaObservation};

pub use llm::{LlmAgent, LlmClient, LlmClientConfig};
pub use random::UniformAgent;
pub use scripted::{ScriptedAgent, ScriptedKind, ScriptedProfile};
pub use toy::{ToyAgent, ToyPolicy};

/// Position of a decision within a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepContext {
    pub episode: usize,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Choice {
    pub label: String,
    pub confidence: f64,
    /// Option probabilities, for agents that expose them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option_probs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logits: Option<Vec<f64>>,
}

impl Choice {
    pub fn new(label: impl Into<String>, confidence: f64) -> Self {
        Self {
            label: label.into(),
            confidence,
            option_probs: None,
            logits: None,
        }
    }
}

/// What an agent is told after a scenario step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    pub step: usize,
    pub negative: bool,
    pub chosen_risk: f64,
}

pub trait Agent: Send {
    fn name(&self) -> String;

    /// Clears per-episode memory.
    fn reset(&mut self) {}

    fn choose_option(&mut self, scenario: &Scenario, ctx: &StepContext, rng: &mut RngState) -> Result<Choice>;

    /// Confidence the agent would state for `option` in its current state.
    fn confidence_for(&mut self, scenario: &Scenario, option: usize, ctx: &StepContext) -> Result<f64>;

    fn observe_feedback(&mut self, _feedback: &Feedback) {}

    fn estimate_probability(&mut self, item: &ProbabilityItem, rng: &mut RngState) -> Result<f64>;

    fn give_interval(&mut self, item: &IntervalItem, rng: &mut RngState) -> Result<(f64, f64)>;

    fn pick_deck(&mut self, observation: &IowaObservation, rng: &mut RngState) -> Result<Deck>;

    /// True when the agent takes the risky side of the pair.
    fn choose_gamble(&mut self, pair: &GamblePair, rng: &mut RngState) -> Result<bool>;
}

impl<A: Agent + ?Sized> Agent for Box<A> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn reset(&mut self) {
        (**self).reset()
    }
    fn choose_option(&mut self, scenario: &Scenario, ctx: &StepContext, rng: &mut RngState) -> Result<Choice> {
        (**self).choose_option(scenario, ctx, rng)
    }
    fn confidence_for(&mut self, scenario: &Scenario, option: usize, ctx: &StepContext) -> Result<f64> {
        (**self).confidence_for(scenario, option, ctx)
    }
    fn observe_feedback(&mut self, feedback: &Feedback) {
        (**self).observe_feedback(feedback)
    }
    fn estimate_probability(&mut self, item: &ProbabilityItem, rng: &mut RngState) -> Result<f64> {
        (**self).estimate_probability(item, rng)
    }
    fn give_interval(&mut self, item: &IntervalItem, rng: &mut RngState) -> Result<(f64, f64)> {
        (**self).give_interval(item, rng)
    }
    fn pick_deck(&mut self, observation: &IowaObservation, rng: &mut RngState) -> Result<Deck> {
        (**self).pick_deck(observation, rng)
    }
    fn choose_gamble(&mut self, pair: &GamblePair, rng: &mut RngState) -> Result<bool> {
        (**self).choose_gamble(pair, rng)
    }
}
