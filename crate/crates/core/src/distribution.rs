//! Finite discrete distributions over real-valued outcomes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

/// Probability sums may drift this far from 1 (decimal literals in bank files).
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outcome {
    pub value: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Outcome>", into = "Vec<Outcome>")]
pub struct DiscreteDistribution {
    outcomes: Vec<Outcome>,
}

impl DiscreteDistribution {
    pub fn new(outcomes: Vec<Outcome>) -> Result<Self> {
        validate(&outcomes)?;
        Ok(Self { outcomes })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(value, probability)| Outcome { value, probability })
                .collect(),
        )
    }

    pub fn point(value: f64) -> Self {
        Self {
            outcomes: vec![Outcome {
                value,
                probability: 1.0,
            }],
        }
    }

    /// Two-point distribution on {1, 0} with P(1) = p.
    pub fn bernoulli(p: f64) -> Result<Self> {
        Self::from_pairs(&[(1.0, p), (0.0, 1.0 - p)])
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.outcomes.iter().map(|o| o.probability)
    }

    pub fn mean(&self) -> f64 {
        self.outcomes.iter().map(|o| o.value * o.probability).sum()
    }

    pub fn has_negative_outcome(&self) -> bool {
        self.outcomes
            .iter()
            .any(|o| o.value < 0.0 && o.probability > 0.0)
    }

    /// Inverse-CDF draw in declared outcome order. Zero-probability outcomes
    /// are never returned.
    pub fn sample(&self, rng: &mut RngState) -> usize {
        let u = rng.next_unit();
        let mut cumulative = 0.0;
        let mut last_positive = 0;
        for (i, o) in self.outcomes.iter().enumerate() {
            if o.probability <= 0.0 {
                continue;
            }
            last_positive = i;
            cumulative += o.probability;
            if u < cumulative {
                return i;
            }
        }
        // u landed in the round-off gap below 1
        last_positive
    }
}

/// Pure form of [`DiscreteDistribution::sample`].
pub fn sample_discrete(dist: &DiscreteDistribution, state: RngState) -> (RngState, usize) {
    let mut rng = state;
    let index = dist.sample(&mut rng);
    (rng, index)
}

fn validate(outcomes: &[Outcome]) -> Result<()> {
    if outcomes.is_empty() {
        return Err(Error::validation("outcomes", "distribution needs at least one outcome"));
    }
    let mut total = 0.0;
    for (i, o) in outcomes.iter().enumerate() {
        if !o.value.is_finite() {
            return Err(Error::validation(format!("outcomes[{i}].value"), "must be finite"));
        }
        if !(0.0..=1.0).contains(&o.probability) {
            return Err(Error::validation(
                format!("outcomes[{i}].probability"),
                format!("{} is outside [0, 1]", o.probability),
            ));
        }
        total += o.probability;
    }
    if (total - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
        return Err(Error::validation(
            "outcomes",
            format!("probabilities sum to {total}, expected 1"),
        ));
    }
    Ok(())
}

impl TryFrom<Vec<Outcome>> for DiscreteDistribution {
    type Error = Error;

    fn try_from(outcomes: Vec<Outcome>) -> Result<Self> {
        Self::new(outcomes)
    }
}

impl From<DiscreteDistribution> for Vec<Outcome> {
    fn from(d: DiscreteDistribution) -> Self {
        d.outcomes
    }
}
