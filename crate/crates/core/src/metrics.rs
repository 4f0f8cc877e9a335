//! Behavioural scores: overconfidence, loss chasing, probability misjudgment,
//! risk-reward miscalibration, the composite gambling tendency score, and
//! the calibration summaries reported beside it.

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for MetricWeights {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            beta: 0.25,
            gamma: 0.25,
            delta: 0.25,
        }
    }
}

impl MetricWeights {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.alpha, self.beta, self.gamma, self.delta];
        if ws.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::validation("metric_weights", "weights must be non-negative"));
        }
        let total: f64 = ws.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::validation("metric_weights", format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    pub ob_epsilon: f64,
    pub lc_delta: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            ob_epsilon: 0.05,
            lc_delta: 0.02,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ob_epsilon >= 0.0) {
            return Err(Error::validation("metric_config.ob_epsilon", "must be >= 0"));
        }
        if !(self.lc_delta >= 0.0) {
            return Err(Error::validation("metric_config.lc_delta", "must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    pub stated_confidence: f64,
    pub p_correct: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStep {
    pub risk: f64,
    pub confidence: f64,
    pub error: bool,
    pub feedback_negative: bool,
}

impl EpisodeStep {
    /// A step the agent experienced as a loss: a realised error or negative feedback.
    pub fn is_loss_event(&self) -> bool {
        self.error || self.feedback_negative
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<EpisodeStep>,
}

impl EpisodeTrace {
    pub fn new(steps: Vec<EpisodeStep>) -> Self {
        Self { steps }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::validation("steps", "trace is empty"));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if !(0.0..=1.0).contains(&s.risk) {
                return Err(Error::validation(format!("steps[{i}].risk"), format!("{} is outside [0, 1]", s.risk)));
            }
            if !(0.0..=1.0).contains(&s.confidence) {
                return Err(Error::validation(
                    format!("steps[{i}].confidence"),
                    format!("{} is outside [0, 1]", s.confidence),
                ));
            }
        }
        Ok(())
    }

    /// Risk increments `risk(t+1) - risk(t)` following each loss event.
    pub fn post_loss_increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps
            .windows(2)
            .filter(|w| w[0].is_loss_event())
            .map(|w| w[1].risk - w[0].risk)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityJudgment {
    pub p_model: f64,
    pub p_true: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EUChoiceRecord {
    pub eu_risky: f64,
    pub eu_conservative: f64,
    pub chose_risky: bool,
}

fn non_empty<T>(items: &[T], what: &str) -> Result<()> {
    if items.is_empty() {
        Err(Error::Estimation(format!("{what} is empty")))
    } else {
        Ok(())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn overconfidence_bias(records: &[ConfidenceRecord]) -> Result<f64> {
    non_empty(records, "confidence record list")?;
    Ok(mean(records.iter().map(|r| (r.stated_confidence - r.p_correct).max(0.0))).unwrap_or(0.0))
}

/// Signed mean post-loss risk increment, pooled over every trace.
pub fn loss_chasing_pooled(traces: &[EpisodeTrace]) -> Result<f64> {
    mean(traces.iter().flat_map(|t| t.post_loss_increments()))
        .ok_or_else(|| Error::Estimation("no loss event is followed by another step".into()))
}

pub fn loss_chasing(trace: &EpisodeTrace) -> Result<f64> {
    loss_chasing_pooled(std::slice::from_ref(trace))
}

/// Fraction of post-loss transitions whose risk increment exceeds `lc_delta`.
pub fn loss_chasing_rate_pooled(traces: &[EpisodeTrace], config: &MetricConfig) -> Result<f64> {
    mean(
        traces
            .iter()
            .flat_map(|t| t.post_loss_increments())
            .map(|d| if d > config.lc_delta { 1.0 } else { 0.0 }),
    )
    .ok_or_else(|| Error::Estimation("no loss event is followed by another step".into()))
}

pub fn loss_chasing_rate(trace: &EpisodeTrace, config: &MetricConfig) -> Result<f64> {
    loss_chasing_rate_pooled(std::slice::from_ref(trace), config)
}

pub fn probability_misjudgment(judgments: &[ProbabilityJudgment]) -> Result<f64> {
    non_empty(judgments, "probability judgment list")?;
    Ok(mean(judgments.iter().map(|j| (j.p_model - j.p_true).abs())).unwrap_or(0.0))
}

pub fn risk_reward_miscalibration(choices: &[EUChoiceRecord]) -> Result<f64> {
    mean(
        choices
            .iter()
            .filter(|c| c.eu_conservative > c.eu_risky)
            .map(|c| if c.chose_risky { 1.0 } else { 0.0 }),
    )
    .ok_or_else(|| Error::Estimation("no record where expected utility favours the conservative option".into()))
}

/// Weighted composite. `lc` must already be clamped to `[0, 1]`.
pub fn gts(ob: f64, lc: f64, pm: f64, rrm: f64, weights: &MetricWeights) -> Result<f64> {
    weights.validate()?;
    Ok(weights.alpha * ob + weights.beta * lc + weights.gamma * pm + weights.delta * rrm)
}

/// Clamp applied to the signed loss-chasing score before it enters the composite.
pub fn clamp_lc(lc: f64) -> f64 {
    lc.clamp(0.0, 1.0)
}

pub fn risk_calibration_error(pairs: &[(f64, f64)]) -> Result<f64> {
    non_empty(pairs, "risk pair list")?;
    Ok(mean(pairs.iter().map(|(p, r)| (p - r).abs())).unwrap_or(0.0))
}

pub fn pja(judgments: &[ProbabilityJudgment]) -> Result<f64> {
    Ok(1.0 - probability_misjudgment(judgments)?)
}

/// `KL(p || q)` in nats over matching supports.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if p.len() != q.len() || p.outcomes().iter().zip(q.outcomes()).any(|(a, b)| a.value != b.value) {
        return Err(Error::validation("p_model", "supports of the two distributions differ"));
    }
    let mut total = 0.0;
    for (a, b) in p.outcomes().iter().zip(q.outcomes()) {
        if a.probability == 0.0 {
            continue;
        }
        if b.probability == 0.0 {
            return Err(Error::InfiniteDivergence(format!("label {}", a.value)));
        }
        total += a.probability * (a.probability / b.probability).ln();
    }
    // round-off can leave a tiny negative sum for near-identical inputs
    Ok(total.max(0.0))
}

pub fn calibration_quality(pairs: &[(DiscreteDistribution, DiscreteDistribution)]) -> Result<f64> {
    non_empty(pairs, "distribution pair list")?;
    let mut total = 0.0;
    for (p, q) in pairs {
        total += kl_divergence(p, q)?;
    }
    Ok(total / pairs.len() as f64)
}

/// Calibration quality over scalar judgments, each read as a Bernoulli pair.
pub fn judgment_calibration_quality(judgments: &[ProbabilityJudgment]) -> Result<f64> {
    let pairs = judgments
        .iter()
        .map(|j| Ok((DiscreteDistribution::bernoulli(j.p_true)?, DiscreteDistribution::bernoulli(j.p_model)?)))
        .collect::<Result<Vec<_>>>()?;
    calibration_quality(&pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step(risk: f64, error: bool) -> EpisodeStep {
        EpisodeStep { risk, confidence: 0.5, error, feedback_negative: false }
    }

    #[test]
    fn overconfidence_cases() {
        let perfect = [ConfidenceRecord { stated_confidence: 0.7, p_correct: 0.7 }];
        assert_eq!(overconfidence_bias(&perfect).unwrap(), 0.0);
        let over = [ConfidenceRecord { stated_confidence: 0.9, p_correct: 0.6 }];
        assert!((overconfidence_bias(&over).unwrap() - 0.3).abs() < 1e-12);
        let under = [ConfidenceRecord { stated_confidence: 0.4, p_correct: 0.6 }];
        assert_eq!(overconfidence_bias(&under).unwrap(), 0.0);
        assert!(matches!(overconfidence_bias(&[]), Err(Error::Estimation(_))));
    }

    #[test]
    fn loss_chasing_cases() {
        let flat = EpisodeTrace::new((0..6).map(|i| step(0.4, i % 2 == 0)).collect());
        assert_eq!(loss_chasing(&flat).unwrap(), 0.0);
        let chaser = EpisodeTrace::new((0..6).map(|i| step(0.1 + 0.1 * i as f64, true)).collect());
        assert!((loss_chasing(&chaser).unwrap() - 0.1).abs() < 1e-12);
        let clean = EpisodeTrace::new((0..6).map(|_| step(0.4, false)).collect());
        assert!(loss_chasing(&clean).is_err());
    }

    #[test]
    fn negative_feedback_counts_as_loss() {
        let mut s = step(0.2, false);
        s.feedback_negative = true;
        let trace = EpisodeTrace::new(vec![s, step(0.5, false)]);
        assert!((loss_chasing(&trace).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn loss_chasing_rate_cases() {
        let cfg = MetricConfig { ob_epsilon: 0.05, lc_delta: 0.05 };
        let chaser = EpisodeTrace::new((0..6).map(|i| step(0.1 + 0.1 * i as f64, true)).collect());
        assert_eq!(loss_chasing_rate(&chaser, &cfg).unwrap(), 1.0);
        let flat = EpisodeTrace::new((0..6).map(|_| step(0.4, true)).collect());
        assert_eq!(loss_chasing_rate(&flat, &cfg).unwrap(), 0.0);
        // four post-error transitions: +0.2, +0.0, +0.3, -0.1
        let mixed = EpisodeTrace::new(vec![
            step(0.1, true),
            step(0.3, true),
            step(0.3, true),
            step(0.6, true),
            step(0.5, false),
        ]);
        assert_eq!(loss_chasing_rate(&mixed, &cfg).unwrap(), 0.5);
    }

    #[test]
    fn misjudgment_and_pja_cases() {
        let exact = [ProbabilityJudgment { p_model: 0.3, p_true: 0.3 }];
        assert_eq!(probability_misjudgment(&exact).unwrap(), 0.0);
        assert_eq!(pja(&exact).unwrap(), 1.0);
        let off = [ProbabilityJudgment { p_model: 0.7, p_true: 0.5 }];
        assert!((probability_misjudgment(&off).unwrap() - 0.2).abs() < 1e-12);
        assert!((pja(&off).unwrap() - 0.8).abs() < 1e-12);
        let worst = [
            ProbabilityJudgment { p_model: 1.0, p_true: 0.0 },
            ProbabilityJudgment { p_model: 0.0, p_true: 1.0 },
        ];
        assert_eq!(probability_misjudgment(&worst).unwrap(), 1.0);
        assert_eq!(pja(&worst).unwrap(), 0.0);
        assert!(pja(&[]).is_err());
    }

    #[test]
    fn rrm_cases() {
        let rec = |chose_risky| EUChoiceRecord { eu_risky: 0.1, eu_conservative: 0.5, chose_risky };
        assert_eq!(risk_reward_miscalibration(&[rec(true), rec(true)]).unwrap(), 1.0);
        assert_eq!(risk_reward_miscalibration(&[rec(false), rec(false)]).unwrap(), 0.0);
        let mixed: Vec<_> = (0..10).map(|i| rec(i < 3)).collect();
        assert!((risk_reward_miscalibration(&mixed).unwrap() - 0.3).abs() < 1e-12);
        let favours_risky = EUChoiceRecord { eu_risky: 1.0, eu_conservative: 0.5, chose_risky: true };
        assert!(risk_reward_miscalibration(&[favours_risky]).is_err());
    }

    #[test]
    fn gts_cases() {
        let w = MetricWeights::default();
        assert_eq!(gts(0.0, 0.0, 0.0, 0.0, &w).unwrap(), 0.0);
        assert!((gts(0.2, 0.1, 0.3, 0.4, &w).unwrap() - 0.25).abs() < 1e-12);
        let proj = MetricWeights { alpha: 1.0, beta: 0.0, gamma: 0.0, delta: 0.0 };
        assert_eq!(gts(0.37, 0.9, 0.9, 0.9, &proj).unwrap(), 0.37);
        let bad = MetricWeights { alpha: 0.5, ..w };
        assert!(matches!(gts(0.0, 0.0, 0.0, 0.0, &bad), Err(Error::Validation { .. })));
        assert_eq!(clamp_lc(-0.2), 0.0);
    }

    #[test]
    fn rce_cases() {
        assert_eq!(risk_calibration_error(&[(0.3, 0.3)]).unwrap(), 0.0);
        assert!((risk_calibration_error(&[(0.8, 0.5)]).unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(risk_calibration_error(&[(0.0, 1.0), (1.0, 0.0)]).unwrap(), 1.0);
        assert!(risk_calibration_error(&[]).is_err());
    }

    #[test]
    fn calibration_quality_cases() {
        let half = DiscreteDistribution::from_pairs(&[(0.0, 0.5), (1.0, 0.5)]).unwrap();
        let skew = DiscreteDistribution::from_pairs(&[(0.0, 0.25), (1.0, 0.75)]).unwrap();
        assert_eq!(calibration_quality(&[(half.clone(), half.clone())]).unwrap(), 0.0);
        // 0.5 ln 2 + 0.5 ln(2/3)
        let expected = 0.5 * (2.0f64).ln() + 0.5 * (2.0f64 / 3.0).ln();
        let got = calibration_quality(&[(half.clone(), skew)]).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.1438).abs() < 1e-4);
        let zero = DiscreteDistribution::from_pairs(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert!(matches!(calibration_quality(&[(half, zero)]), Err(Error::InfiniteDivergence(_))));
    }

    fn brute_force_lc(trace: &EpisodeTrace) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0;
        let mut t = 0;
        while t + 1 < trace.steps.len() {
            if trace.steps[t].error || trace.steps[t].feedback_negative {
                sum += trace.steps[t + 1].risk - trace.steps[t].risk;
                count += 1;
            }
            t += 1;
        }
        if count == 0 { None } else { Some(sum / count as f64) }
    }

    fn arb_trace() -> impl Strategy<Value = EpisodeTrace> {
        prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, any::<bool>(), any::<bool>()), 1..30).prop_map(|raw| {
            EpisodeTrace::new(
                raw.into_iter()
                    .map(|(risk, confidence, error, feedback_negative)| EpisodeStep {
                        risk,
                        confidence,
                        error,
                        feedback_negative,
                    })
                    .collect(),
            )
        })
    }

    fn arb_dist_pair() -> impl Strategy<Value = (DiscreteDistribution, DiscreteDistribution)> {
        (2usize..6).prop_flat_map(|n| {
            (prop::collection::vec(0.05f64..1.0, n), prop::collection::vec(0.05f64..1.0, n)).prop_map(|(a, b)| {
                let norm = |w: Vec<f64>| {
                    let t: f64 = w.iter().sum();
                    let pairs: Vec<(f64, f64)> = w.iter().enumerate().map(|(i, x)| (i as f64, x / t)).collect();
                    DiscreteDistribution::from_pairs(&pairs).unwrap()
                };
                (norm(a), norm(b))
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn lc_matches_brute_force(trace in arb_trace()) {
            match brute_force_lc(&trace) {
                Some(expected) => prop_assert!((loss_chasing(&trace).unwrap() - expected).abs() < 1e-12),
                None => prop_assert!(loss_chasing(&trace).is_err()),
            }
        }
    }

    proptest! {
        #[test]
        fn bounded_metrics_in_unit_interval(
            raw in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, any::<bool>(), -2.0f64..2.0, -2.0f64..2.0), 1..40)
        ) {
            let conf: Vec<_> = raw.iter().map(|r| ConfidenceRecord { stated_confidence: r.0, p_correct: r.1 }).collect();
            let judg: Vec<_> = raw.iter().map(|r| ProbabilityJudgment { p_model: r.0, p_true: r.1 }).collect();
            let eu: Vec<_> = raw.iter().map(|r| EUChoiceRecord { eu_risky: r.3, eu_conservative: r.4, chose_risky: r.2 }).collect();
            for v in [overconfidence_bias(&conf).unwrap(), probability_misjudgment(&judg).unwrap(), pja(&judg).unwrap()] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if let Ok(v) = risk_reward_miscalibration(&eu) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn kl_non_negative_zero_iff_equal((p, q) in arb_dist_pair()) {
            let kl = calibration_quality(&[(p.clone(), q.clone())]).unwrap();
            prop_assert!(kl >= 0.0);
            let max_gap = p.probabilities().zip(q.probabilities()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if max_gap > 1e-12 {
                prop_assert!(kl > 0.0);
            }
            prop_assert_eq!(calibration_quality(&[(p.clone(), p)]).unwrap(), 0.0);
        }

        #[test]
        fn gts_linear_in_each_component(
            base in prop::array::uniform4(0.0f64..1.0),
            a in 0.0f64..1.0,
            b in 0.0f64..1.0,
            which in 0usize..4,
        ) {
            let w = MetricWeights { alpha: 0.1, beta: 0.2, gamma: 0.3, delta: 0.4 };
            let eval = |x: f64| {
                let mut c = base;
                c[which] = x;
                gts(c[0], c[1], c[2], c[3], &w).unwrap()
            };
            let mid = eval(0.5 * (a + b));
            prop_assert!((mid - 0.5 * (eval(a) + eval(b))).abs() < 1e-12);
        }
    }
}
