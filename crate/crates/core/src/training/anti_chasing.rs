//! Anti-chasing response selection: shrink the admissible risk after recent
//! errors and pick the best option that stays inside it.

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, Choice, Feedback, StepContext};
use crate::error::{Error, Result};
use crate::risk::RiskWeights;
use crate::rng::RngState;
use crate::tasks::bank::{GamblePair, IntervalItem, ProbabilityItem, Scenario, ScenarioOption};
use crate::tasks::iowa::{Deck, IowaObservation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AntiChasingConfig {
    pub base_tolerance: f64,
    /// Strength of the tolerance cut per unit of recent-error share.
    pub chase_sensitivity: f64,
    /// Window, in steps, that counts as recent.
    pub window_tau: usize,
}

impl Default for AntiChasingConfig {
    fn default() -> Self {
        Self {
            base_tolerance: 0.5,
            chase_sensitivity: 0.5,
            window_tau: 5,
        }
    }
}

impl AntiChasingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.base_tolerance) {
            return Err(Error::validation("anti_chasing.base_tolerance", "must lie in [0, 1]"));
        }
        if !(self.chase_sensitivity >= 0.0) {
            return Err(Error::validation("anti_chasing.chase_sensitivity", "must be >= 0"));
        }
        if self.window_tau == 0 {
            return Err(Error::validation("anti_chasing.window_tau", "must be >= 1"));
        }
        Ok(())
    }

    pub fn tolerance(&self, e_recent: f64) -> f64 {
        (self.base_tolerance * (1.0 - self.chase_sensitivity * e_recent)).clamp(0.0, 1.0)
    }
}

/// Steps at which errors occurred, and the current step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorHistory {
    entries: Vec<usize>,
    current: usize,
}

impl ErrorHistory {
    pub fn new(entries: Vec<usize>, current: usize) -> Result<Self> {
        if entries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("history.entries", "must be strictly increasing"));
        }
        if entries.last().is_some_and(|&e| e > current) {
            return Err(Error::validation("history.entries", "entries must not exceed the current step"));
        }
        Ok(Self { entries, current })
    }

    pub fn entries(&self) -> &[usize] {
        &self.entries
    }

    pub fn current(&self) -> usize {
        self.current
    }

    pub fn advance_to(&mut self, step: usize) {
        self.current = self.current.max(step);
    }

    pub fn record_error(&mut self, step: usize) {
        if self.entries.last().is_none_or(|&last| step > last) {
            self.entries.push(step);
        }
        self.advance_to(step);
    }

    /// Share of recorded errors that fall inside the last `tau` steps; 0 when empty.
    pub fn recent_share(&self, tau: usize) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let recent = self
            .entries
            .iter()
            .filter(|&&s| s as i64 > self.current as i64 - tau as i64)
            .count();
        recent as f64 / self.entries.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub tolerance: f64,
    pub fallback: bool,
}

/// Best-quality option within the tolerance, else the minimum-risk option
/// with the fallback flag set. Ties go to the lowest label.
pub fn anti_chasing_select(
    candidates: &[ScenarioOption],
    history: &ErrorHistory,
    config: &AntiChasingConfig,
    weights: &RiskWeights,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::validation("candidates", "no candidate options"));
    }
    let tolerance = config.tolerance(history.recent_share(config.window_tau));
    let better = |i: usize, best: usize, key: &dyn Fn(&ScenarioOption) -> f64| {
        let (a, b) = (key(&candidates[i]), key(&candidates[best]));
        a > b || (a == b && candidates[i].label < candidates[best].label)
    };
    let admissible: Vec<usize> = (0..candidates.len())
        .filter(|&i| candidates[i].risk(weights) <= tolerance)
        .collect();
    if let Some(&first) = admissible.first() {
        let index = admissible
            .iter()
            .copied()
            .fold(first, |best, i| if better(i, best, &|o| o.quality) { i } else { best });
        return Ok(Selection {
            index,
            tolerance,
            fallback: false,
        });
    }
    let index = (1..candidates.len()).fold(0, |best, i| if better(i, best, &|o| -o.risk(weights)) { i } else { best });
    Ok(Selection {
        index,
        tolerance,
        fallback: true,
    })
}

/// Wraps an agent so scenario answers go through [`anti_chasing_select`].
/// Negative feedback is logged as an error; stated confidence is scaled by
/// `tolerance / base_tolerance`.
#[derive(Debug, Clone)]
pub struct AntiChasingWrapper<A> {
    inner: A,
    config: AntiChasingConfig,
    weights: RiskWeights,
    history: ErrorHistory,
    last_tolerance: Option<f64>,
}

impl<A: Agent> AntiChasingWrapper<A> {
    pub fn new(inner: A, config: AntiChasingConfig, weights: RiskWeights) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            inner,
            config,
            weights,
            history: ErrorHistory::default(),
            last_tolerance: None,
        })
    }

    pub fn inner(&self) -> &A {
        &self.inner
    }

    pub fn history(&self) -> &ErrorHistory {
        &self.history
    }

    fn confidence_scale(&self, tolerance: f64) -> f64 {
        if self.config.base_tolerance > 0.0 {
            (tolerance / self.config.base_tolerance).clamp(0.0, 1.0)
        } else {
            1.0
        }
    }
}

impl<A: Agent> Agent for AntiChasingWrapper<A> {
    fn name(&self) -> String {
        format!("{}+anti_chasing", self.inner.name())
    }

    fn reset(&mut self) {
        self.history = ErrorHistory::default();
        self.last_tolerance = None;
        self.inner.reset();
    }

    fn choose_option(&mut self, scenario: &Scenario, ctx: &StepContext, rng: &mut RngState) -> Result<Choice> {
        self.history.advance_to(ctx.step);
        // the inner agent still answers so its state and random stream advance as unwrapped
        let proposed = self.inner.choose_option(scenario, ctx, rng)?;
        let sel = anti_chasing_select(&scenario.options, &self.history, &self.config, &self.weights)?;
        self.last_tolerance = Some(sel.tolerance);
        let confidence = self.inner.confidence_for(scenario, sel.index, ctx)? * self.confidence_scale(sel.tolerance);
        Ok(Choice {
            label: scenario.options[sel.index].label.clone(),
            confidence,
            option_probs: proposed.option_probs,
            logits: proposed.logits,
        })
    }

    fn confidence_for(&mut self, scenario: &Scenario, option: usize, ctx: &StepContext) -> Result<f64> {
        let scale = self.confidence_scale(self.last_tolerance.unwrap_or(self.config.base_tolerance));
        Ok(self.inner.confidence_for(scenario, option, ctx)? * scale)
    }

    fn observe_feedback(&mut self, feedback: &Feedback) {
        if feedback.negative {
            self.history.record_error(feedback.step);
        }
        self.inner.observe_feedback(feedback);
    }

    fn estimate_probability(&mut self, item: &ProbabilityItem, rng: &mut RngState) -> Result<f64> {
        self.inner.estimate_probability(item, rng)
    }

    fn give_interval(&mut self, item: &IntervalItem, rng: &mut RngState) -> Result<(f64, f64)> {
        self.inner.give_interval(item, rng)
    }

    fn pick_deck(&mut self, observation: &IowaObservation, rng: &mut RngState) -> Result<Deck> {
        self.inner.pick_deck(observation, rng)
    }

    fn choose_gamble(&mut self, pair: &GamblePair, rng: &mut RngState) -> Result<bool> {
        self.inner.choose_gamble(pair, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{ScriptedAgent, ScriptedProfile};
    use crate::metrics::{loss_chasing_rate_pooled, MetricConfig};
    use crate::risk::RiskComponents;
    use crate::tasks::bank::Bank;
    use crate::tasks::protocols::{run_loss_chasing_protocol, trace_of, LossChasingConfig};
    use proptest::prelude::*;

    fn option(label: &str, risk: f64, quality: f64) -> ScenarioOption {
        ScenarioOption {
            label: label.into(),
            text: String::new(),
            risk_components: RiskComponents {
                factual: risk,
                controversy: risk,
                uncertainty: risk,
            },
            quality,
            expected_utility: 0.0,
            p_correct: 0.5,
            quality_optimal: false,
        }
    }

    #[test]
    fn empty_history_uses_base() {
        let cfg = AntiChasingConfig {
            base_tolerance: 0.8,
            ..AntiChasingConfig::default()
        };
        let sel = anti_chasing_select(&[option("A", 0.2, 0.5)], &ErrorHistory::default(), &cfg, &RiskWeights::default())
            .unwrap();
        assert_eq!(sel.tolerance, 0.8);
        assert!(!sel.fallback);
    }

    #[test]
    fn tolerance_example() {
        let cfg = AntiChasingConfig {
            base_tolerance: 0.8,
            chase_sensitivity: 0.5,
            window_tau: 5,
        };
        let history = ErrorHistory::new(vec![1, 2, 8, 9], 10).unwrap();
        assert_eq!(history.recent_share(5), 0.5);
        let sel = anti_chasing_select(&[option("A", 0.2, 0.5)], &history, &cfg, &RiskWeights::default()).unwrap();
        assert!((sel.tolerance - 0.6).abs() < 1e-15);
    }

    #[test]
    fn picks_best_quality_within_tolerance() {
        let opts = [option("A", 0.9, 0.99), option("B", 0.3, 0.6), option("C", 0.2, 0.7)];
        let sel = anti_chasing_select(&opts, &ErrorHistory::default(), &AntiChasingConfig::default(), &RiskWeights::default())
            .unwrap();
        assert_eq!((sel.index, sel.fallback), (2, false));
    }

    #[test]
    fn fallback_takes_minimum_risk_with_label_ties() {
        let opts = [option("B", 0.7, 0.9), option("A", 0.7, 0.1), option("C", 0.9, 0.9)];
        let sel = anti_chasing_select(&opts, &ErrorHistory::default(), &AntiChasingConfig::default(), &RiskWeights::default())
            .unwrap();
        assert_eq!((sel.index, sel.fallback), (1, true));
        assert!(anti_chasing_select(&[], &ErrorHistory::default(), &AntiChasingConfig::default(), &RiskWeights::default()).is_err());
    }

    #[test]
    fn history_invariants() {
        assert!(ErrorHistory::new(vec![3, 3], 5).is_err());
        assert!(ErrorHistory::new(vec![6], 5).is_err());
        let mut h = ErrorHistory::default();
        h.record_error(2);
        h.record_error(2);
        assert_eq!(h.entries(), &[2]);
    }

    #[test]
    fn wrapper_stops_the_chaser() {
        let bank = Bank::default_bank();
        let weights = RiskWeights::default();
        let config = LossChasingConfig::default();
        let rate = |agent: &mut dyn Agent| {
            let runs = run_loss_chasing_protocol(&bank.scenarios, agent, &config, &weights, 4).unwrap();
            let traces: Vec<_> = runs.iter().map(|r| trace_of(&r.records)).collect();
            loss_chasing_rate_pooled(&traces, &MetricConfig::default()).unwrap()
        };
        let mut plain = ScriptedAgent::new(ScriptedProfile::loss_chaser(), weights);
        let mut wrapped =
            AntiChasingWrapper::new(ScriptedAgent::new(ScriptedProfile::loss_chaser(), weights), AntiChasingConfig::default(), weights)
                .unwrap();
        let unwrapped_rate = rate(&mut plain);
        assert!(unwrapped_rate > 0.0);
        assert!(rate(&mut wrapped) <= 0.1 * unwrapped_rate);
    }

    proptest! {
        #[test]
        fn tolerance_monotone_in_recent_share(base in 0.0f64..=1.0, beta in 0.0f64..3.0, e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0) {
            let cfg = AntiChasingConfig { base_tolerance: base, chase_sensitivity: beta, window_tau: 5 };
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(cfg.tolerance(hi) <= cfg.tolerance(lo));
            prop_assert!((0.0..=1.0).contains(&cfg.tolerance(hi)));
        }

        #[test]
        fn chosen_risk_within_tolerance(
            risks in proptest::collection::vec(0.0f64..=1.0, 1..6),
            qualities in proptest::collection::vec(0.0f64..=1.0, 6),
            entries in proptest::collection::btree_set(0usize..20, 0..8),
        ) {
            let labels = ["A", "B", "C", "D", "E", "F"];
            let opts: Vec<_> = risks.iter().enumerate().map(|(i, &r)| option(labels[i], r, qualities[i])).collect();
            let history = ErrorHistory::new(entries.into_iter().collect(), 20).unwrap();
            let w = RiskWeights::default();
            let sel = anti_chasing_select(&opts, &history, &AntiChasingConfig::default(), &w).unwrap();
            if !sel.fallback {
                prop_assert!(opts[sel.index].risk(&w) <= sel.tolerance);
            } else {
                prop_assert!(opts.iter().all(|o| o.risk(&w) > sel.tolerance));
            }
        }
    }
}
