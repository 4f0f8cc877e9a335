//! Central-difference verification of the analytic objective gradient.

use crate::agents::toy::ToyPolicy;
use crate::error::{Error, Result};
use crate::tasks::bank::Bank;
use crate::training::objective::{objective, TrainingConfig};

pub const EPSILON_RANGE: (f64, f64) = (1e-7, 1e-3);

/// Largest relative error `|a - n| / (|a| + |n| + 1e-12)` between the
/// analytic gradient and central differences, over all parameters.
pub fn finite_diff_check(policy: &ToyPolicy, bank: &Bank, config: &TrainingConfig, epsilon: f64) -> Result<f64> {
    if !(EPSILON_RANGE.0..=EPSILON_RANGE.1).contains(&epsilon) {
        return Err(Error::validation(
            "epsilon",
            format!("{epsilon} is outside [{}, {}]", EPSILON_RANGE.0, EPSILON_RANGE.1),
        ));
    }
    let (_, analytic) = objective(policy, bank, config)?;
    let base = policy.params();
    let mut probe = policy.clone();
    let mut worst = 0.0f64;
    for (i, a) in analytic.iter().enumerate() {
        let mut at = |delta: f64| -> Result<f64> {
            let mut p = base.clone();
            p[i] += delta;
            probe.set_params(&p);
            Ok(objective(&probe, bank, config)?.0.total)
        };
        let numeric = (at(epsilon)? - at(-epsilon)?) / (2.0 * epsilon);
        worst = worst.max((a - numeric).abs() / (a.abs() + numeric.abs() + 1e-12));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::toy::{ToyPolicy, FEATURE_DIM};

    #[test]
    fn analytic_gradient_matches_for_random_policies() {
        let bank = Bank::default_bank();
        let config = TrainingConfig::default();
        for seed in 0..3 {
            let err = finite_diff_check(&ToyPolicy::pretrained(seed), &bank, &config, 1e-5).unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn deterministic() {
        let bank = Bank::default_bank();
        let config = TrainingConfig::default();
        let p = ToyPolicy::pretrained(11);
        assert_eq!(
            finite_diff_check(&p, &bank, &config, 1e-5).unwrap(),
            finite_diff_check(&p, &bank, &config, 1e-5).unwrap()
        );
    }

    #[test]
    fn unused_direction_has_zero_error() {
        let mut bank = Bank::default_bank();
        bank.probability_items.clear();
        let config = TrainingConfig::default();
        let (_, g) = objective(&ToyPolicy::pretrained(2), &bank, &config).unwrap();
        assert!(g[FEATURE_DIM..].len() > 4);
        assert_eq!(g[g.len() - 1], 0.0);
        assert!(finite_diff_check(&ToyPolicy::pretrained(2), &bank, &config, 1e-5).unwrap() < 1e-4);
    }

    #[test]
    fn rejects_epsilon_out_of_range() {
        let bank = Bank::default_bank();
        assert!(finite_diff_check(&ToyPolicy::zeros(), &bank, &TrainingConfig::default(), 1e-2).is_err());
    }
}
