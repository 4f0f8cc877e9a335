//! Uniform-random baseline agent.

use crate::agents::{Agent, Choice, StepContext};
use crate::error::Result;
use crate::rng::RngState;
use crate::tasks::bank::{GamblePair, IntervalItem, ProbabilityItem, Scenario};
use crate::tasks::iowa::{Deck, IowaObservation};

/// Picks uniformly at random everywhere and states flat confidence.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformAgent;

impl Agent for UniformAgent {
    fn name(&self) -> String {
        "uniform".into()
    }

    fn choose_option(&mut self, scenario: &Scenario, _ctx: &StepContext, rng: &mut RngState) -> Result<Choice> {
        let i = rng.next_below(scenario.options.len());
        Ok(Choice::new(scenario.options[i].label.clone(), 1.0 / scenario.options.len() as f64))
    }

    fn confidence_for(&mut self, scenario: &Scenario, _option: usize, _ctx: &StepContext) -> Result<f64> {
        Ok(1.0 / scenario.options.len() as f64)
    }

    fn estimate_probability(&mut self, _item: &ProbabilityItem, rng: &mut RngState) -> Result<f64> {
        Ok(rng.next_unit())
    }

    fn give_interval(&mut self, _item: &IntervalItem, _rng: &mut RngState) -> Result<(f64, f64)> {
        Ok((0.0, 0.0))
    }

    fn pick_deck(&mut self, _observation: &IowaObservation, rng: &mut RngState) -> Result<Deck> {
        Ok(Deck::ALL[rng.next_below(4)])
    }

    fn choose_gamble(&mut self, _pair: &GamblePair, rng: &mut RngState) -> Result<bool> {
        Ok(rng.next_unit() < 0.5)
    }
}
