//! Trainable toy policy: a linear softmax chooser over five option features,
//! a risk-calibrated confidence head, and a small probability-judgment model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::{Agent, Choice, StepContext};
use crate::error::{Error, Result};
use crate::optimize::{sigmoid, softmax};
use crate::prospect::{choice_prob, prospect_value, ProspectParams};
use crate::risk::{ConfidenceHead, RiskWeights};
use crate::rng::RngState;
use crate::tasks::bank::{FallacyTag, GamblePair, IntervalItem, ProbabilityItem, Scenario};
use crate::tasks::iowa::{Deck, DeckStats, IowaObservation};

/// `[quality, factual, controversy, uncertainty, expected_utility]`.
pub const FEATURE_DIM: usize = 5;
/// Option features plus epistemic uncertainty, aleatoric uncertainty, risk.
pub const HEAD_INPUT_DIM: usize = FEATURE_DIM + 3;
pub const FALLACY_BIAS_DIM: usize = 3;
/// theta, head weights, head bias, sharpness, fallacy biases.
pub const PARAM_COUNT: usize = FEATURE_DIM + HEAD_INPUT_DIM + 1 + 1 + FALLACY_BIAS_DIM;

const JUDGMENT_CLAMP: (f64, f64) = (0.02, 0.98);
const INTERVAL_NOISE_SCALE: f64 = 0.1;
const DECK_REWARD_SCALE: f64 = 100.0;
const DECK_MAX_LOSS_SCALE: f64 = 1250.0;
const GAMBLE_TEMPERATURE: f64 = 1.0;

/// Maps a stated probability to a model probability:
/// `sigmoid(sharpness * logit(p) + bias[tag])`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JudgmentModel {
    pub sharpness: f64,
    pub fallacy_bias: [f64; FALLACY_BIAS_DIM],
}

impl JudgmentModel {
    pub fn identity() -> Self {
        Self {
            sharpness: 1.0,
            fallacy_bias: [0.0; FALLACY_BIAS_DIM],
        }
    }

    pub fn input_logit(p_true: f64) -> f64 {
        let p = p_true.clamp(JUDGMENT_CLAMP.0, JUDGMENT_CLAMP.1);
        (p / (1.0 - p)).ln()
    }

    pub fn bias_slot(tag: Option<FallacyTag>) -> Option<usize> {
        match tag {
            Some(FallacyTag::GamblersFallacy) => Some(0),
            Some(FallacyTag::HotHand) => Some(1),
            Some(FallacyTag::BaseRate) => Some(2),
            Some(FallacyTag::None) | None => None,
        }
    }

    pub fn predict(&self, item: &ProbabilityItem) -> f64 {
        let bias = Self::bias_slot(item.fallacy_tag).map_or(0.0, |k| self.fallacy_bias[k]);
        sigmoid(self.sharpness * Self::input_logit(item.p_true) + bias)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyPolicy {
    pub theta: Vec<f64>,
    pub head: ConfidenceHead,
    pub judgment: JudgmentModel,
    /// Loss weight used when valuing decks and gambles.
    #[serde(default = "unit")]
    pub loss_aversion: f64,
}

fn unit() -> f64 {
    1.0
}

/// Per-option quantities shared by acting and training.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionView {
    pub features: Vec<[f64; FEATURE_DIM]>,
    pub risks: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl OptionView {
    pub fn u_epistemic(&self) -> f64 {
        1.0 - self.probs.iter().copied().fold(0.0, f64::max)
    }

    pub fn head_input(&self, option: usize) -> [f64; HEAD_INPUT_DIM] {
        let f = &self.features[option];
        [f[0], f[1], f[2], f[3], f[4], self.u_epistemic(), f[3], self.risks[option]]
    }

    /// First index of the largest logit.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &z) in self.logits.iter().enumerate() {
            if z > self.logits[best] {
                best = i;
            }
        }
        best
    }
}

impl ToyPolicy {
    pub fn zeros() -> Self {
        Self {
            theta: vec![0.0; FEATURE_DIM],
            head: ConfidenceHead::zeros(HEAD_INPUT_DIM),
            judgment: JudgmentModel::identity(),
            loss_aversion: 1.0,
        }
    }

    /// Seeded starting point with the biases of an untuned model: an
    /// overconfident head, over-sharp probability judgments, and fallacy
    /// offsets.
    pub fn pretrained(seed: u64) -> Self {
        let mut rng = RngState::new(seed);
        let theta = (0..FEATURE_DIM).map(|_| rng.next_unit() - 0.5).collect();
        let weights = (0..HEAD_INPUT_DIM).map(|_| 0.2 * (rng.next_unit() - 0.5)).collect();
        let sharpness = 1.6 + 0.4 * rng.next_unit();
        let mut fallacy_bias = [0.0; FALLACY_BIAS_DIM];
        for b in &mut fallacy_bias {
            *b = 0.4 + 0.6 * rng.next_unit();
        }
        Self {
            theta,
            head: ConfidenceHead { weights, bias: 2.0 },
            judgment: JudgmentModel {
                sharpness,
                fallacy_bias,
            },
            loss_aversion: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.len() != FEATURE_DIM {
            return Err(Error::validation(
                "theta",
                format!("expected {FEATURE_DIM} entries, found {}", self.theta.len()),
            ));
        }
        if self.head.weights.len() != HEAD_INPUT_DIM {
            return Err(Error::validation(
                "head.weights",
                format!("expected {HEAD_INPUT_DIM} entries, found {}", self.head.weights.len()),
            ));
        }
        if self.params().iter().any(|v| !v.is_finite()) || !(self.loss_aversion > 0.0) {
            return Err(Error::validation("policy", "parameters must be finite and loss_aversion > 0"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let policy: ToyPolicy = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::validation(e.path().to_string(), e.into_inner().to_string()))?;
        policy.validate()?;
        Ok(policy)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Flat parameter vector in the order documented on [`PARAM_COUNT`].
    pub fn params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(PARAM_COUNT);
        v.extend(&self.theta);
        v.extend(&self.head.weights);
        v.push(self.head.bias);
        v.push(self.judgment.sharpness);
        v.extend(self.judgment.fallacy_bias);
        v
    }

    pub fn set_params(&mut self, p: &[f64]) {
        assert_eq!(p.len(), PARAM_COUNT, "parameter vector length");
        let (theta, rest) = p.split_at(FEATURE_DIM);
        let (weights, rest) = rest.split_at(HEAD_INPUT_DIM);
        self.theta = theta.to_vec();
        self.head.weights = weights.to_vec();
        self.head.bias = rest[0];
        self.judgment.sharpness = rest[1];
        self.judgment.fallacy_bias.copy_from_slice(&rest[2..]);
    }

    pub fn score(&self, features: &[f64; FEATURE_DIM]) -> f64 {
        self.theta.iter().zip(features).map(|(t, x)| t * x).sum()
    }

    pub fn view(&self, scenario: &Scenario, weights: &RiskWeights) -> OptionView {
        let features: Vec<[f64; FEATURE_DIM]> = scenario.options.iter().map(|o| o.features()).collect();
        let risks = scenario.options.iter().map(|o| o.risk(weights)).collect();
        let logits: Vec<f64> = features.iter().map(|f| self.score(f)).collect();
        let probs = softmax(&logits);
        OptionView {
            features,
            risks,
            logits,
            probs,
        }
    }

    pub fn confidence(&self, view: &OptionView, option: usize) -> f64 {
        let input = view.head_input(option);
        let z: f64 = self.head.weights.iter().zip(&input).map(|(w, x)| w * x).sum::<f64>() + self.head.bias;
        sigmoid(z)
    }

    pub fn interval(&self, item: &IntervalItem, rng: &mut RngState) -> (f64, f64) {
        let t = item.true_value;
        let scale = t.abs() * INTERVAL_NOISE_SCALE;
        let estimate = t + scale * rng.next_logistic();
        let level = item.nominal_level;
        let quantile = ((1.0 + level) / (1.0 - level)).ln();
        let half = scale * quantile / self.judgment.sharpness.abs().max(1e-6);
        (estimate - half, estimate + half)
    }

    /// Deck features from observed draws, in the option feature layout.
    pub fn deck_features(&self, stats: &DeckStats) -> [f64; FEATURE_DIM] {
        if stats.picks == 0 {
            return [0.0, 0.0, 0.0, 1.0, 0.0];
        }
        let n = stats.picks as f64;
        let mean_reward = stats.total_reward as f64 / n;
        let mean_loss = stats.total_loss as f64 / n;
        [
            mean_reward / DECK_REWARD_SCALE,
            stats.loss_count as f64 / n,
            (stats.max_loss as f64 / DECK_MAX_LOSS_SCALE).min(1.0),
            1.0 / (1.0 + n),
            (mean_reward - self.loss_aversion * mean_loss) / DECK_REWARD_SCALE,
        ]
    }

    pub fn deck_probs(&self, observation: &IowaObservation) -> Vec<f64> {
        let logits: Vec<f64> = observation.decks.iter().map(|s| self.score(&self.deck_features(s))).collect();
        softmax(&logits)
    }

    pub fn prospect_params(&self) -> ProspectParams {
        ProspectParams::default().with_kappa(self.loss_aversion)
    }
}

fn sample_index(probs: &[f64], rng: &mut RngState) -> usize {
    let u = rng.next_unit();
    let mut cumulative = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i;
        }
    }
    probs.len() - 1
}

#[derive(Debug, Clone)]
pub struct ToyAgent {
    pub policy: ToyPolicy,
    weights: RiskWeights,
    name: String,
}

impl ToyAgent {
    pub fn new(policy: ToyPolicy, weights: RiskWeights) -> Self {
        Self {
            policy,
            weights,
            name: "toy".into(),
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

impl Agent for ToyAgent {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn choose_option(&mut self, scenario: &Scenario, _ctx: &StepContext, rng: &mut RngState) -> Result<Choice> {
        let view = self.policy.view(scenario, &self.weights);
        let i = sample_index(&view.probs, rng);
        Ok(Choice {
            label: scenario.options[i].label.clone(),
            confidence: self.policy.confidence(&view, i),
            option_probs: Some(view.probs.clone()),
            logits: Some(view.logits),
        })
    }

    fn confidence_for(&mut self, scenario: &Scenario, option: usize, _ctx: &StepContext) -> Result<f64> {
        if option >= scenario.options.len() {
            return Err(Error::validation("option", format!("index {option} out of range")));
        }
        let view = self.policy.view(scenario, &self.weights);
        Ok(self.policy.confidence(&view, option))
    }

    fn estimate_probability(&mut self, item: &ProbabilityItem, _rng: &mut RngState) -> Result<f64> {
        Ok(self.policy.judgment.predict(item))
    }

    fn give_interval(&mut self, item: &IntervalItem, rng: &mut RngState) -> Result<(f64, f64)> {
        Ok(self.policy.interval(item, rng))
    }

    fn pick_deck(&mut self, observation: &IowaObservation, rng: &mut RngState) -> Result<Deck> {
        let probs = self.policy.deck_probs(observation);
        Ok(Deck::ALL[sample_index(&probs, rng)])
    }

    fn choose_gamble(&mut self, pair: &GamblePair, rng: &mut RngState) -> Result<bool> {
        let params = self.policy.prospect_params();
        let risky = prospect_value(&pair.risky, &params)?;
        let safe = prospect_value(&pair.conservative, &params)?;
        Ok(rng.next_unit() < choice_prob(risky, safe, GAMBLE_TEMPERATURE)?)
    }
}
