//! Scripted oracle agents with known, tunable pathologies.

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, Choice, Feedback, StepContext};
use crate::error::{Error, Result};
use crate::risk::RiskWeights;
use crate::rng::RngState;
use crate::tasks::bank::{FallacyTag, GamblePair, IntervalItem, ProbabilityItem, Scenario};
use crate::tasks::iowa::{Deck, IowaObservation};

/// Picks spent sampling every deck in turn before exploiting.
pub const IOWA_EXPLORATION_PICKS: usize = 40;

const EXTREMIZE_CLAMP: (f64, f64) = (0.01, 0.99);
const INTERVAL_NOISE_SCALE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedKind {
    RationalCalibrated,
    Overconfident,
    LossChaser,
    HotHand,
    RiskSeeking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedProfile {
    pub kind: ScriptedKind,
    #[serde(default = "default_bias")]
    pub bias: f64,
    #[serde(default = "default_increment")]
    pub chase_increment: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    /// Risk level the loss chaser's target starts at and decays toward.
    #[serde(default = "default_baseline")]
    pub baseline_risk: f64,
}

fn default_bias() -> f64 {
    0.4
}
fn default_increment() -> f64 {
    0.1
}
fn default_decay() -> f64 {
    0.5
}
fn default_baseline() -> f64 {
    0.2
}

impl ScriptedProfile {
    pub fn of_kind(kind: ScriptedKind) -> Self {
        Self {
            kind,
            bias: default_bias(),
            chase_increment: default_increment(),
            decay: default_decay(),
            baseline_risk: default_baseline(),
        }
    }

    pub fn rational() -> Self {
        Self::of_kind(ScriptedKind::RationalCalibrated)
    }

    pub fn overconfident() -> Self {
        Self::of_kind(ScriptedKind::Overconfident)
    }

    pub fn loss_chaser() -> Self {
        Self::of_kind(ScriptedKind::LossChaser)
    }

    pub fn hot_hand() -> Self {
        Self {
            bias: 0.05,
            ..Self::of_kind(ScriptedKind::HotHand)
        }
    }

    pub fn risk_seeking() -> Self {
        Self::of_kind(ScriptedKind::RiskSeeking)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bias >= 0.0) {
            return Err(Error::validation("profile.bias", "must be >= 0"));
        }
        if !(self.chase_increment >= 0.0) {
            return Err(Error::validation("profile.chase_increment", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(Error::validation("profile.decay", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.baseline_risk) {
            return Err(Error::validation("profile.baseline_risk", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ScriptedKind::RationalCalibrated => "rational_calibrated",
            ScriptedKind::Overconfident => "overconfident",
            ScriptedKind::LossChaser => "loss_chaser",
            ScriptedKind::HotHand => "hot_hand",
            ScriptedKind::RiskSeeking => "risk_seeking",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptedMemory {
    pub risk_target: f64,
    pub streak: usize,
}

#[derive(Debug, Clone)]
pub struct ScriptedAgent {
    profile: ScriptedProfile,
    weights: RiskWeights,
    memory: ScriptedMemory,
}

impl ScriptedAgent {
    pub fn new(profile: ScriptedProfile, weights: RiskWeights) -> Self {
        Self {
            profile,
            weights,
            memory: Self::fresh_memory(&profile),
        }
    }

    fn fresh_memory(profile: &ScriptedProfile) -> ScriptedMemory {
        ScriptedMemory {
            risk_target: profile.baseline_risk,
            streak: 0,
        }
    }

    pub fn profile(&self) -> &ScriptedProfile {
        &self.profile
    }

    pub fn memory(&self) -> &ScriptedMemory {
        &self.memory
    }

    /// Option index the profile picks in its current state.
    pub fn pick(&self, scenario: &Scenario) -> usize {
        match self.profile.kind {
            ScriptedKind::RationalCalibrated | ScriptedKind::Overconfident | ScriptedKind::HotHand => {
                scenario.argmax_by(|o| o.expected_utility)
            }
            ScriptedKind::LossChaser => {
                let target = self.memory.risk_target;
                scenario.argmin_by(|o| (o.risk(&self.weights) - target).abs())
            }
            ScriptedKind::RiskSeeking => scenario.max_risk_index(&self.weights),
        }
    }

    fn confidence(&self, p_correct: f64) -> f64 {
        match self.profile.kind {
            ScriptedKind::Overconfident => (p_correct + self.profile.bias).min(1.0),
            ScriptedKind::HotHand => (p_correct + self.profile.bias * self.memory.streak as f64).min(1.0),
            _ => p_correct,
        }
    }

    fn exploit_deck(observation: &IowaObservation, key: impl Fn(&crate::tasks::iowa::DeckStats) -> f64) -> Deck {
        let mut best = Deck::A;
        let mut best_value = f64::NEG_INFINITY;
        for deck in Deck::ALL {
            let stats = &observation.decks[deck.index()];
            let value = if stats.picks == 0 { f64::NEG_INFINITY } else { key(stats) };
            if value > best_value {
                best = deck;
                best_value = value;
            }
        }
        best
    }
}

impl Agent for ScriptedAgent {
    fn name(&self) -> String {
        self.profile.name().to_string()
    }

    fn reset(&mut self) {
        self.memory = Self::fresh_memory(&self.profile);
    }

    fn choose_option(&mut self, scenario: &Scenario, _ctx: &StepContext, _rng: &mut RngState) -> Result<Choice> {
        let i = self.pick(scenario);
        let option = &scenario.options[i];
        Ok(Choice::new(option.label.clone(), self.confidence(option.p_correct)))
    }

    fn confidence_for(&mut self, scenario: &Scenario, option: usize, _ctx: &StepContext) -> Result<f64> {
        let o = scenario
            .options
            .get(option)
            .ok_or_else(|| Error::validation("option", format!("index {option} out of range")))?;
        Ok(self.confidence(o.p_correct))
    }

    fn observe_feedback(&mut self, feedback: &Feedback) {
        let p = &self.profile;
        let m = &mut self.memory;
        if feedback.negative {
            m.risk_target = (m.risk_target + p.chase_increment).min(1.0);
            m.streak = 0;
        } else {
            m.risk_target = p.baseline_risk + (1.0 - p.decay) * (m.risk_target - p.baseline_risk);
            m.streak += 1;
        }
    }

    fn estimate_probability(&mut self, item: &ProbabilityItem, _rng: &mut RngState) -> Result<f64> {
        let p = item.p_true;
        Ok(match self.profile.kind {
            ScriptedKind::Overconfident => {
                let extreme = if p >= 0.5 { 1.0 } else { 0.0 };
                (p + self.profile.bias * (extreme - p)).clamp(EXTREMIZE_CLAMP.0, EXTREMIZE_CLAMP.1)
            }
            ScriptedKind::HotHand if item.fallacy_tag == Some(FallacyTag::HotHand) => {
                (p + self.profile.bias).min(EXTREMIZE_CLAMP.1)
            }
            _ => p,
        })
    }

    fn give_interval(&mut self, item: &IntervalItem, rng: &mut RngState) -> Result<(f64, f64)> {
        let t = item.true_value;
        match self.profile.kind {
            ScriptedKind::Overconfident => {
                let scale = t.abs() * INTERVAL_NOISE_SCALE;
                let estimate = t + scale * rng.next_logistic();
                let level = item.nominal_level;
                let quantile = ((1.0 + level) / (1.0 - level)).ln();
                let half = scale * quantile * (1.0 - self.profile.bias).max(0.0);
                Ok((estimate - half, estimate + half))
            }
            _ => Ok((t, t)),
        }
    }

    fn pick_deck(&mut self, observation: &IowaObservation, _rng: &mut RngState) -> Result<Deck> {
        let step = observation.step;
        let last_lost = observation.last.is_some_and(|d| d.loss > 0);
        Ok(match self.profile.kind {
            ScriptedKind::RiskSeeking => {
                if step < 4 {
                    Deck::ALL[step]
                } else {
                    Self::exploit_deck(observation, |s| s.total_reward as f64 / s.picks as f64)
                }
            }
            _ if step < IOWA_EXPLORATION_PICKS => Deck::ALL[step % 4],
            ScriptedKind::LossChaser if last_lost => {
                Self::exploit_deck(observation, |s| s.total_reward as f64 / s.picks as f64)
            }
            _ => Self::exploit_deck(observation, |s| s.mean_net().unwrap_or(f64::NEG_INFINITY)),
        })
    }

    fn choose_gamble(&mut self, pair: &GamblePair, _rng: &mut RngState) -> Result<bool> {
        Ok(match self.profile.kind {
            ScriptedKind::RiskSeeking => true,
            _ => pair.risky.mean() > pair.conservative.mean(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tasks::bank::Bank;

    fn agent(profile: ScriptedProfile) -> ScriptedAgent {
        ScriptedAgent::new(profile, RiskWeights::default())
    }

    #[test]
    fn rational_picks_max_eu() {
        let bank = Bank::default_bank();
        let mut a = agent(ScriptedProfile::rational());
        let mut rng = RngState::new(0);
        for s in &bank.scenarios {
            let c = a.choose_option(s, &StepContext::default(), &mut rng).unwrap();
            let i = s.option_index(&c.label).unwrap();
            assert_eq!(i, s.argmax_by(|o| o.expected_utility));
            assert_eq!(c.confidence, s.options[i].p_correct);
        }
    }

    #[test]
    fn overconfident_adds_bias() {
        let a = agent(ScriptedProfile {
            bias: 0.3,
            ..ScriptedProfile::overconfident()
        });
        assert!((a.confidence(0.6) - 0.9).abs() < 1e-12);
        assert_eq!(a.confidence(0.9), 1.0);
    }

    #[test]
    fn chaser_target_rises_after_loss() {
        let mut a = agent(ScriptedProfile::loss_chaser());
        a.observe_feedback(&Feedback {
            step: 0,
            negative: true,
            chosen_risk: 0.1,
        });
        assert!((a.memory().risk_target - 0.3).abs() < 1e-12);
        a.observe_feedback(&Feedback {
            step: 1,
            negative: false,
            chosen_risk: 0.35,
        });
        assert!((a.memory().risk_target - 0.25).abs() < 1e-12);
        a.reset();
        assert_eq!(a.memory().risk_target, 0.2);
    }

    #[test]
    fn hot_hand_confidence_grows_with_streak() {
        let mut a = agent(ScriptedProfile::hot_hand());
        for step in 0..3 {
            a.observe_feedback(&Feedback {
                step,
                negative: false,
                chosen_risk: 0.1,
            });
        }
        assert!((a.confidence(0.5) - 0.65).abs() < 1e-12);
    }

    #[test]
    fn overconfident_probabilities_are_extremized() {
        let mut a = agent(ScriptedProfile::overconfident());
        let item = |p| ProbabilityItem {
            id: "x".into(),
            statement: String::new(),
            p_true: p,
            fallacy_tag: None,
        };
        let mut rng = RngState::new(1);
        assert!(a.estimate_probability(&item(0.8), &mut rng).unwrap() > 0.8);
        assert!(a.estimate_probability(&item(0.2), &mut rng).unwrap() < 0.2);
    }

    #[test]
    fn risk_seeker_takes_max_risk() {
        let bank = Bank::default_bank();
        let w = RiskWeights::default();
        let a = agent(ScriptedProfile::risk_seeking());
        for s in &bank.scenarios {
            assert_eq!(a.pick(s), s.max_risk_index(&w));
        }
    }

    #[test]
    fn profile_validation() {
        assert!(ScriptedProfile {
            decay: 1.5,
            ..ScriptedProfile::loss_chaser()
        }
        .validate()
        .is_err());
        let parsed: ScriptedProfile = serde_json::from_str(r#"{"kind": "loss_chaser", "decay": 0.0}"#).unwrap();
        assert_eq!(parsed.chase_increment, 0.1);
        assert_eq!(parsed.decay, 0.0);
    }
}
