//! Loss terms of the risk-aware objective and the toy policy's full
//! objective with analytic gradients.

use serde::{Deserialize, Serialize};

use crate::agents::toy::{JudgmentModel, ToyPolicy, FEATURE_DIM, HEAD_INPUT_DIM, PARAM_COUNT};
use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::metrics::kl_divergence;
use crate::optimize::{log_sum_exp, sigmoid, softmax, softplus};
use crate::risk::RiskWeights;
use crate::tasks::bank::{Bank, Scenario};

/// Temperature that sharpens `p_correct` into the option-level target distribution.
pub const TARGET_TEMPERATURE: f64 = 0.05;

const OFFSET_HEAD_W: usize = FEATURE_DIM;
const OFFSET_HEAD_B: usize = OFFSET_HEAD_W + HEAD_INPUT_DIM;
const OFFSET_SHARPNESS: usize = OFFSET_HEAD_B + 1;
const OFFSET_FALLACY: usize = OFFSET_SHARPNESS + 1;
/// Slot of epistemic uncertainty in the head input.
const HEAD_U_EPI: usize = FEATURE_DIM;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    /// Overall scale of the loss-averse term.
    pub lambda_scale: f64,
    /// Penalty multiplier applied to incorrect choices.
    pub kappa: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub risk_threshold: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Weight of the confidence-head cross-entropy.
    pub confidence_weight: f64,
    pub risk_weights: RiskWeights,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            lambda_scale: 1.0,
            kappa: 2.25,
            lambda1: 1.0,
            lambda2: 0.5,
            lambda3: 0.5,
            risk_threshold: 0.6,
            learning_rate: 0.05,
            epochs: 500,
            seed: 0,
            confidence_weight: 1.0,
            risk_weights: RiskWeights::default(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_scale > 0.0) {
            return Err(Error::validation("training.lambda_scale", "must be > 0"));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::validation("training.kappa", "must be > 0"));
        }
        if self.kappa <= 1.0 {
            log::warn!("kappa = {} <= 1: loss aversion is absent", self.kappa);
        }
        for (name, v) in [
            ("training.lambda1", self.lambda1),
            ("training.lambda2", self.lambda2),
            ("training.lambda3", self.lambda3),
            ("training.confidence_weight", self.confidence_weight),
        ] {
            if !(v >= 0.0) {
                return Err(Error::validation(name, "must be >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&self.risk_threshold) {
            return Err(Error::validation("training.risk_threshold", "must lie in [0, 1]"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::validation("training.learning_rate", "must be > 0"));
        }
        self.risk_weights.validate()
    }
}

/// Loss-averse reweighting: `λ·base` when correct, `λ·κ·base` otherwise.
pub fn loss_averse_loss(base_loss: f64, correct: bool, config: &TrainingConfig) -> Result<f64> {
    if !(base_loss >= 0.0) {
        return Err(Error::validation("base_loss", "must be >= 0"));
    }
    if config.kappa <= 1.0 {
        log::warn!("kappa = {} <= 1: loss aversion is absent", config.kappa);
    }
    let scale = if correct { 1.0 } else { config.kappa };
    Ok(config.lambda_scale * scale * base_loss)
}

/// `KL(p_true || p_model)` in nats.
pub fn prob_calibration_loss(p_true: &DiscreteDistribution, p_model: &DiscreteDistribution) -> Result<f64> {
    kl_divergence(p_true, p_model)
}

pub fn risk_regularizer(risk: f64, threshold: f64) -> f64 {
    (risk - threshold).max(0.0)
}

pub fn total_loss(lm_loss: f64, la_loss: f64, cal_loss: f64, risk_reg: f64, config: &TrainingConfig) -> f64 {
    lm_loss + config.lambda1 * la_loss + config.lambda2 * cal_loss + config.lambda3 * risk_reg
}

/// Which parts of the objective are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationFlags {
    pub loss_aversion: bool,
    pub risk_calibration: bool,
    pub anti_chasing: bool,
    pub probability_training: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self::all_on()
    }
}

impl AblationFlags {
    pub fn all_on() -> Self {
        Self {
            loss_aversion: true,
            risk_calibration: true,
            anti_chasing: true,
            probability_training: true,
        }
    }

    pub fn all_off() -> Self {
        Self {
            loss_aversion: false,
            risk_calibration: false,
            anti_chasing: false,
            probability_training: false,
        }
    }

    /// Cumulative ladder: baseline, then each component added in turn.
    pub fn ladder() -> [(&'static str, AblationFlags); 5] {
        let base = Self::all_off();
        let la = Self {
            loss_aversion: true,
            ..base
        };
        let cal = Self {
            risk_calibration: true,
            ..la
        };
        let ac = Self {
            anti_chasing: true,
            ..cal
        };
        [
            ("baseline", base),
            ("+loss_aversion", la),
            ("+risk_calibration", cal),
            ("+anti_chasing", ac),
            ("full", Self::all_on()),
        ]
    }

    /// Config with the weights of disabled components set to zero.
    pub fn apply(&self, config: &TrainingConfig) -> TrainingConfig {
        let mut c = config.clone();
        if !self.loss_aversion {
            c.lambda1 = 0.0;
        }
        if !self.risk_calibration {
            c.lambda3 = 0.0;
            c.confidence_weight = 0.0;
        }
        if !self.probability_training {
            c.lambda2 = 0.0;
        }
        c
    }
}

/// Mean values of each term at the current parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    pub lm: f64,
    pub la: f64,
    pub cal: f64,
    pub risk_reg: f64,
    pub head: f64,
    pub total: f64,
}

/// Sharpened `p_correct` distribution over a scenario's options.
pub fn option_targets(scenario: &Scenario) -> Vec<f64> {
    let z: Vec<f64> = scenario.options.iter().map(|o| o.p_correct / TARGET_TEMPERATURE).collect();
    softmax(&z)
}

fn add_scaled(acc: &mut [f64], v: &[f64], s: f64) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += s * x;
    }
}

/// Objective value and gradient with respect to [`ToyPolicy::params`].
///
/// Terms whose weight is zero in `config` are still reported but carry no
/// gradient.
pub fn objective(policy: &ToyPolicy, bank: &Bank, config: &TrainingConfig) -> Result<(ObjectiveTerms, Vec<f64>)> {
    if bank.scenarios.is_empty() {
        return Err(Error::validation("scenarios", "bank has no scenarios"));
    }
    let weights = &config.risk_weights;
    let mut grad = vec![0.0; PARAM_COUNT];
    let mut terms = ObjectiveTerms::default();
    let s_count = bank.scenarios.len() as f64;

    for scenario in &bank.scenarios {
        let view = policy.view(scenario, weights);
        let n = view.probs.len();
        let pi = &view.probs;
        let x = &view.features;
        let mut x_bar = [0.0; FEATURE_DIM];
        for (p, f) in pi.iter().zip(x) {
            add_scaled(&mut x_bar, f, *p);
        }
        let o = scenario.quality_optimal_index();

        let ce = log_sum_exp(&view.logits) - view.logits[o];
        let mut d_ce = x_bar;
        add_scaled(&mut d_ce, &x[o], -1.0);

        let correct = view.argmax() == o;
        let la = loss_averse_loss(ce, correct, config)?;
        let la_coef = config.lambda_scale * if correct { 1.0 } else { config.kappa };

        let t = option_targets(scenario);
        let kl: f64 = t.iter().zip(pi).filter(|(tj, _)| **tj > 0.0).map(|(tj, pj)| tj * (tj / pj).ln()).sum();
        let mut d_kl = x_bar;
        for (tj, f) in t.iter().zip(x) {
            add_scaled(&mut d_kl, f, -tj);
        }

        let r_bar: f64 = pi.iter().zip(&view.risks).map(|(p, r)| p * r).sum();
        let reg = risk_regularizer(r_bar, config.risk_threshold);
        let mut d_reg = [0.0; FEATURE_DIM];
        if r_bar > config.risk_threshold {
            for j in 0..n {
                add_scaled(&mut d_reg, &x[j], pi[j] * (view.risks[j] - r_bar));
            }
        }

        let scale = 1.0 / s_count;
        let theta_grad: Vec<f64> = (0..FEATURE_DIM)
            .map(|k| d_ce[k] + config.lambda1 * la_coef * d_ce[k] + config.lambda2 * d_kl[k] + config.lambda3 * d_reg[k])
            .collect();
        add_scaled(&mut grad[..FEATURE_DIM], &theta_grad, scale);

        // confidence head: cross-entropy of each option's confidence against its p_correct
        let m = view.argmax();
        let mut d_u_epi = [0.0; FEATURE_DIM];
        for k in 0..FEATURE_DIM {
            d_u_epi[k] = -pi[m] * (x[m][k] - x_bar[k]);
        }
        let mut head_loss = 0.0;
        let head_scale = scale / n as f64;
        for (j, opt) in scenario.options.iter().enumerate() {
            let input = view.head_input(j);
            let z: f64 = policy.head.weights.iter().zip(&input).map(|(w, v)| w * v).sum::<f64>() + policy.head.bias;
            let y = opt.p_correct;
            head_loss += softplus(z) - y * z;
            if config.confidence_weight > 0.0 {
                let dz = config.confidence_weight * (sigmoid(z) - y) * head_scale;
                add_scaled(&mut grad[OFFSET_HEAD_W..OFFSET_HEAD_B], &input, dz);
                grad[OFFSET_HEAD_B] += dz;
                add_scaled(&mut grad[..FEATURE_DIM], &d_u_epi, dz * policy.head.weights[HEAD_U_EPI]);
            }
        }

        terms.lm += ce * scale;
        terms.la += la * scale;
        terms.cal += kl * scale;
        terms.risk_reg += reg * scale;
        terms.head += head_loss * head_scale;
    }

    if !bank.probability_items.is_empty() {
        let scale = 1.0 / bank.probability_items.len() as f64;
        for item in &bank.probability_items {
            let l = JudgmentModel::input_logit(item.p_true);
            let slot = JudgmentModel::bias_slot(item.fallacy_tag);
            let z = policy.judgment.sharpness * l + slot.map_or(0.0, |k| policy.judgment.fallacy_bias[k]);
            let p = item.p_true;
            let neg_entropy = xlogx(p) + xlogx(1.0 - p);
            let kl = neg_entropy + p * softplus(-z) + (1.0 - p) * softplus(z);
            terms.cal += kl.max(0.0) * scale;
            let dz = config.lambda2 * (sigmoid(z) - p) * scale;
            grad[OFFSET_SHARPNESS] += dz * l;
            if let Some(k) = slot {
                grad[OFFSET_FALLACY + k] += dz;
            }
        }
    }

    terms.total = total_loss(terms.lm, terms.la, terms.cal, terms.risk_reg, config) + config.confidence_weight * terms.head;
    Ok((terms, grad))
}

fn xlogx(v: f64) -> f64 {
    if v > 0.0 {
        v * v.ln()
    } else {
        0.0
    }
}

/// Fraction of scenarios whose highest-scoring option is the quality-optimal one.
pub fn choice_accuracy(policy: &ToyPolicy, scenarios: &[Scenario], weights: &RiskWeights) -> f64 {
    if scenarios.is_empty() {
        return 0.0;
    }
    let hits = scenarios
        .iter()
        .filter(|s| policy.view(s, weights).argmax() == s.quality_optimal_index())
        .count();
    hits as f64 / scenarios.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loss_averse_examples() {
        let c = TrainingConfig::default();
        assert_eq!(loss_averse_loss(0.4, true, &c).unwrap(), 0.4);
        assert!((loss_averse_loss(0.4, false, &c).unwrap() - 0.9).abs() < 1e-12);
        assert_eq!(loss_averse_loss(0.0, false, &c).unwrap(), 0.0);
        assert_eq!(loss_averse_loss(0.0, true, &c).unwrap(), 0.0);
        assert!(loss_averse_loss(-0.1, true, &c).is_err());
    }

    #[test]
    fn weak_kappa_is_not_fatal() {
        let c = TrainingConfig {
            kappa: 0.8,
            ..TrainingConfig::default()
        };
        assert!(c.validate().is_ok());
        assert!((loss_averse_loss(1.0, false, &c).unwrap() - 0.8).abs() < 1e-12);
    }

    #[test]
    fn calibration_loss_examples() {
        let half = DiscreteDistribution::bernoulli(0.5).unwrap();
        assert_eq!(prob_calibration_loss(&half, &half).unwrap(), 0.0);
        let skew = DiscreteDistribution::bernoulli(0.75).unwrap();
        assert!((prob_calibration_loss(&half, &skew).unwrap() - 0.143_841_036_225_890_5).abs() < 1e-12);
        let zero = DiscreteDistribution::bernoulli(0.0).unwrap();
        assert!(matches!(prob_calibration_loss(&half, &zero), Err(Error::InfiniteDivergence(_))));
    }

    #[test]
    fn regularizer_examples() {
        assert_eq!(risk_regularizer(0.4, 0.5), 0.0);
        assert!((risk_regularizer(0.8, 0.5) - 0.3).abs() < 1e-15);
        assert_eq!(risk_regularizer(1.0, 0.0), 1.0);
    }

    #[test]
    fn total_loss_examples() {
        let mut c = TrainingConfig {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            ..TrainingConfig::default()
        };
        assert!((total_loss(1.0, 0.5, 0.2, 0.1, &c) - 1.8).abs() < 1e-15);
        assert_eq!(total_loss(0.0, 0.0, 0.0, 0.0, &c), 0.0);
        c.lambda1 = 0.0;
        c.lambda2 = 0.0;
        c.lambda3 = 0.0;
        assert_eq!(total_loss(1.3, 0.5, 0.2, 0.1, &c), 1.3);
    }

    #[test]
    fn ablation_zeroes_disabled_weights() {
        let c = AblationFlags::all_off().apply(&TrainingConfig::default());
        assert_eq!((c.lambda1, c.lambda2, c.lambda3, c.confidence_weight), (0.0, 0.0, 0.0, 0.0));
        let ladder = AblationFlags::ladder();
        assert_eq!(ladder[0].1, AblationFlags::all_off());
        assert_eq!(ladder[4].1, AblationFlags::all_on());
    }

    #[test]
    fn targets_favour_the_optimal_option() {
        let bank = Bank::default_bank();
        for s in &bank.scenarios {
            let t = option_targets(s);
            let best = (0..t.len()).fold(0, |b, i| if t[i] > t[b] { i } else { b });
            assert_eq!(best, s.quality_optimal_index(), "{}", s.id);
        }
    }

    #[test]
    fn objective_total_matches_parts() {
        let bank = Bank::default_bank();
        let c = TrainingConfig::default();
        let (t, g) = objective(&ToyPolicy::pretrained(4), &bank, &c).unwrap();
        assert_eq!(g.len(), PARAM_COUNT);
        let expected = total_loss(t.lm, t.la, t.cal, t.risk_reg, &c) + c.confidence_weight * t.head;
        assert!((t.total - expected).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn losses_are_non_negative(base in 0.0f64..10.0, correct: bool, risk in 0.0f64..=1.0, thr in 0.0f64..=1.0) {
            let c = TrainingConfig::default();
            prop_assert!(loss_averse_loss(base, correct, &c).unwrap() >= 0.0);
            prop_assert!(risk_regularizer(risk, thr) >= 0.0);
        }

        #[test]
        fn total_loss_is_linear_in_each_lambda(
            parts in proptest::array::uniform4(0.0f64..5.0),
            l in 0.0f64..3.0,
            which in 0usize..3,
        ) {
            let mut c = TrainingConfig { lambda1: 0.0, lambda2: 0.0, lambda3: 0.0, ..TrainingConfig::default() };
            let at = |c: &TrainingConfig| total_loss(parts[0], parts[1], parts[2], parts[3], c);
            let base = at(&c);
            match which {
                0 => c.lambda1 = l,
                1 => c.lambda2 = l,
                _ => c.lambda3 = l,
            }
            prop_assert!((at(&c) - (base + l * parts[which + 1])).abs() < 1e-12);
        }
    }
}
