//! Full-batch gradient descent for the toy policy.

use serde::{Deserialize, Serialize};

use crate::agents::toy::ToyPolicy;
use crate::error::{Error, Result};
use crate::tasks::bank::Bank;
use crate::training::objective::{objective, AblationFlags, ObjectiveTerms, TrainingConfig};

/// Loss above which a run counts as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;
/// Window of the moving average used to judge loss monotonicity.
pub const SMOOTHING_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingOutcome {
    pub policy: ToyPolicy,
    /// Objective terms at the start of each epoch.
    pub history: Vec<ObjectiveTerms>,
}

impl TrainingOutcome {
    pub fn losses(&self) -> Vec<f64> {
        self.history.iter().map(|t| t.total).collect()
    }
}

/// Trains from [`ToyPolicy::pretrained`] seeded by `config.seed`.
pub fn train_toy_policy(bank: &Bank, config: &TrainingConfig, flags: &AblationFlags) -> Result<TrainingOutcome> {
    train_from(ToyPolicy::pretrained(config.seed), bank, config, flags)
}

pub fn train_from(
    initial: ToyPolicy,
    bank: &Bank,
    config: &TrainingConfig,
    flags: &AblationFlags,
) -> Result<TrainingOutcome> {
    config.validate()?;
    initial.validate()?;
    if bank.scenarios.is_empty() {
        return Err(Error::validation("scenarios", "bank has no scenarios"));
    }
    let effective = flags.apply(config);
    let mut policy = initial;
    if flags.loss_aversion {
        policy.loss_aversion = config.kappa;
    }
    let mut params = policy.params();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (terms, grad) = objective(&policy, bank, &effective)?;
        if !terms.total.is_finite() || terms.total > DIVERGENCE_LIMIT {
            return Err(Error::Training {
                epoch,
                loss: terms.total,
            });
        }
        history.push(terms);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= config.learning_rate * g;
        }
        policy.set_params(&params);
    }
    Ok(TrainingOutcome { policy, history })
}

/// Trailing moving average with the given window.
pub fn smoothed(losses: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    losses
        .windows(w.min(losses.len().max(1)))
        .map(|s| s.iter().sum::<f64>() / s.len() as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::objective::choice_accuracy;

    fn short(epochs: usize, seed: u64) -> TrainingConfig {
        TrainingConfig {
            epochs,
            seed,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn zero_epochs_returns_initial() {
        let bank = Bank::default_bank();
        let out = train_toy_policy(&bank, &short(0, 3), &AblationFlags::all_off()).unwrap();
        assert_eq!(out.policy, ToyPolicy::pretrained(3));
        assert!(out.history.is_empty());
    }

    #[test]
    fn same_seed_same_parameters() {
        let bank = Bank::default_bank();
        let a = train_toy_policy(&bank, &short(40, 5), &AblationFlags::all_on()).unwrap();
        let b = train_toy_policy(&bank, &short(40, 5), &AblationFlags::all_on()).unwrap();
        assert_eq!(a.policy.params(), b.policy.params());
        let c = train_toy_policy(&bank, &short(40, 6), &AblationFlags::all_on()).unwrap();
        assert_ne!(a.policy.params(), c.policy.params());
    }

    #[test]
    fn smoothed_loss_never_rises() {
        let bank = Bank::default_bank();
        for flags in [AblationFlags::all_off(), AblationFlags::all_on()] {
            let out = train_toy_policy(&bank, &short(500, 1), &flags).unwrap();
            let s = smoothed(&out.losses(), SMOOTHING_WINDOW);
            for w in s.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{flags:?}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn plain_descent_separates_the_bank() {
        let bank = Bank::default_bank();
        let config = short(500, 2);
        let out = train_toy_policy(&bank, &config, &AblationFlags::all_off()).unwrap();
        assert!(choice_accuracy(&out.policy, &bank.scenarios, &config.risk_weights) > 0.9);
    }

    #[test]
    fn divergence_is_reported_with_epoch() {
        let bank = Bank::default_bank();
        let config = TrainingConfig {
            learning_rate: 1e9,
            ..short(50, 1)
        };
        match train_toy_policy(&bank, &config, &AblationFlags::all_on()) {
            Err(Error::Training { epoch, .. }) => assert!(epoch > 0),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn moving_average() {
        assert_eq!(smoothed(&[1.0, 2.0, 3.0, 4.0], 2), vec![1.5, 2.5, 3.5]);
        assert_eq!(smoothed(&[1.0], 10), vec![1.0]);
    }
}
