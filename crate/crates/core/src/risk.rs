//! Quantile risk measures on discrete loss distributions, the weighted
//! response-risk score, and the risk-calibrated confidence head.
//!
//! VaR uses the lower-quantile convention (smallest `l` with `P(L <= l) >= α`).
//! CVaR is the Rockafellar–Uryasev form, which on a discrete support splits
//! the atom at VaR fractionally.

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::optimize::sigmoid;

pub const DEFAULT_RISK_ALPHA: f64 = 0.95;
pub const DEFAULT_RISK_LAMBDA: f64 = 0.5;
const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("confidence level {alpha} must lie in (0, 1)")))
    }
}

pub fn value_at_risk(dist: &DiscreteDistribution, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let mut sorted: Vec<_> = dist.outcomes().to_vec();
    sorted.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut cumulative = 0.0;
    for o in &sorted {
        cumulative += o.probability;
        if cumulative >= alpha {
            return Ok(o.value);
        }
    }
    // only reachable when round-off leaves the total a hair below α
    Ok(sorted.last().map(|o| o.value).unwrap_or(0.0))
}

pub fn conditional_var(dist: &DiscreteDistribution, alpha: f64) -> Result<f64> {
    let var = value_at_risk(dist, alpha)?;
    let excess: f64 = dist
        .outcomes()
        .iter()
        .map(|o| o.probability * (o.value - var).max(0.0))
        .sum();
    Ok(var + excess / (1.0 - alpha))
}

/// `VaR_α + λ·CVaR_α`.
pub fn risk_measure(dist: &DiscreteDistribution, alpha: f64, lambda: f64) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Parameter(format!("lambda {lambda} must be >= 0")));
    }
    let var = value_at_risk(dist, alpha)?;
    if lambda == 0.0 {
        return Ok(var);
    }
    Ok(var + lambda * conditional_var(dist, alpha)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskWeights {
    pub w_factual: f64,
    pub w_controversy: f64,
    pub w_uncertainty: f64,
}

impl Default for RiskWeights {
    fn default() -> Self {
        Self {
            w_factual: 0.5,
            w_controversy: 0.25,
            w_uncertainty: 0.25,
        }
    }
}

impl RiskWeights {
    pub fn validate(&self) -> Result<()> {
        let ws = [self.w_factual, self.w_controversy, self.w_uncertainty];
        if ws.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::validation("risk_weights", "weights must be non-negative"));
        }
        let total: f64 = ws.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::validation("risk_weights", format!("weights sum to {total}, expected 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskComponents {
    pub factual: f64,
    pub controversy: f64,
    pub uncertainty: f64,
}

impl RiskComponents {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("factual", self.factual),
            ("controversy", self.controversy),
            ("uncertainty", self.uncertainty),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(name, format!("{v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

pub fn composite_risk(components: &RiskComponents, weights: &RiskWeights) -> Result<f64> {
    weights.validate()?;
    components.validate()?;
    Ok(weighted_risk(components, weights))
}

/// Composite risk without re-validating inputs already checked at load time.
pub(crate) fn weighted_risk(c: &RiskComponents, w: &RiskWeights) -> f64 {
    (w.w_factual * c.factual + w.w_controversy * c.controversy + w.w_uncertainty * c.uncertainty).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceFeatures {
    pub hidden: Vec<f64>,
    pub u_epistemic: f64,
    pub u_aleatoric: f64,
    pub risk: f64,
}

impl ConfidenceFeatures {
    /// `hidden ++ [u_epi, u_ale, risk]`.
    pub fn concatenated(&self) -> Vec<f64> {
        let mut v = self.hidden.clone();
        v.extend([self.u_epistemic, self.u_aleatoric, self.risk]);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceHead {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ConfidenceHead {
    pub fn zeros(len: usize) -> Self {
        Self {
            weights: vec![0.0; len],
            bias: 0.0,
        }
    }

    pub fn logit(&self, inputs: &[f64]) -> Result<f64> {
        if inputs.len() != self.weights.len() {
            return Err(Error::validation(
                "confidence_head.weights",
                format!("head has {} weights but features have {} entries", self.weights.len(), inputs.len()),
            ));
        }
        Ok(self.weights.iter().zip(inputs).map(|(w, x)| w * x).sum::<f64>() + self.bias)
    }
}

pub fn risk_calibrated_confidence(features: &ConfidenceFeatures, head: &ConfidenceHead) -> Result<f64> {
    Ok(sigmoid(head.logit(&features.concatenated())?))
}
