//! Prospect-theory valuation, a logistic choice rule, and maximum-likelihood
//! recovery of the loss-aversion coefficient from binary gamble choices.
//!
//! Weighting is the one-parameter inverse-S form
//! `w(p) = p^γ / (p^γ + (1-p)^γ)^(1/γ)` and the value function is a power
//! function with separate curvature for gains and losses, scaled by `κ` on
//! the loss side.

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::optimize::{golden_section_min, softplus};

/// Below this the weighting function stops being monotone.
pub const MIN_WEIGHT_GAMMA: f64 = 0.28;
pub const MAX_WEIGHT_GAMMA: f64 = 2.0;

pub const KAPPA_SEARCH_RANGE: (f64, f64) = (1.0, 5.0);
pub const KAPPA_SEARCH_TOL: f64 = 1e-3;
pub const MIN_FIT_RECORDS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProspectParams {
    pub alpha_gain: f64,
    pub beta_loss: f64,
    pub kappa: f64,
    pub gamma_weight: f64,
}

impl Default for ProspectParams {
    fn default() -> Self {
        Self {
            alpha_gain: 0.88,
            beta_loss: 0.88,
            kappa: 2.25,
            gamma_weight: 0.61,
        }
    }
}

impl ProspectParams {
    /// Linear value, identity weighting.
    pub fn linear(kappa: f64) -> Self {
        Self {
            alpha_gain: 1.0,
            beta_loss: 1.0,
            kappa,
            gamma_weight: 1.0,
        }
    }

    pub fn with_kappa(self, kappa: f64) -> Self {
        Self { kappa, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} = {v} must lie in (0, 1]")))
            }
        };
        unit("alpha_gain", self.alpha_gain)?;
        unit("beta_loss", self.beta_loss)?;
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Parameter(format!("kappa = {} must be > 0", self.kappa)));
        }
        check_gamma(self.gamma_weight)
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > MIN_WEIGHT_GAMMA && gamma <= MAX_WEIGHT_GAMMA {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "gamma_weight = {gamma} must lie in ({MIN_WEIGHT_GAMMA}, {MAX_WEIGHT_GAMMA}]"
        )))
    }
}

pub fn decision_weight(p: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Parameter(format!("probability {p} outside [0, 1]")));
    }
    if p == 0.0 || p == 1.0 {
        return Ok(p);
    }
    let a = p.powf(gamma);
    let b = (1.0 - p).powf(gamma);
    Ok(a / (a + b).powf(1.0 / gamma))
}

pub fn value_function(x: f64, params: &ProspectParams) -> f64 {
    if x >= 0.0 {
        x.powf(params.alpha_gain)
    } else {
        -params.kappa * (-x).powf(params.beta_loss)
    }
}

pub fn prospect_value(prospect: &DiscreteDistribution, params: &ProspectParams) -> Result<f64> {
    params.validate()?;
    prospect.outcomes().iter().try_fold(0.0, |acc, o| {
        Ok(acc + decision_weight(o.probability, params.gamma_weight)? * value_function(o.value, params))
    })
}

/// Logistic probability of choosing `a` over `b`.
pub fn choice_prob(value_a: f64, value_b: f64, temperature: f64) -> Result<f64> {
    check_temperature(temperature)?;
    Ok(crate::optimize::sigmoid((value_a - value_b) / temperature))
}

fn check_temperature(temperature: f64) -> Result<()> {
    if temperature > 0.0 && temperature.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("temperature {temperature} must be > 0")))
    }
}

/// One observed binary choice between a risky and a conservative gamble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GambleChoice {
    pub risky: DiscreteDistribution,
    pub conservative: DiscreteDistribution,
    pub chose_risky: bool,
}

impl GambleChoice {
    fn involves_losses(&self) -> bool {
        self.risky.has_negative_outcome() || self.conservative.has_negative_outcome()
    }
}

/// Log-likelihood of the observed choices under prospect values and the
/// logistic rule.
pub fn choice_log_likelihood(records: &[GambleChoice], params: &ProspectParams, temperature: f64) -> Result<f64> {
    check_temperature(temperature)?;
    let mut total = 0.0;
    for r in records {
        let diff = (prospect_value(&r.risky, params)? - prospect_value(&r.conservative, params)?) / temperature;
        // ln σ(d) = -softplus(-d); ln(1 - σ(d)) = -softplus(d)
        total -= if r.chose_risky { softplus(-diff) } else { softplus(diff) };
    }
    Ok(total)
}

/// Maximum-likelihood κ in [1, 5]; every parameter of `fixed` except `kappa`
/// is held constant.
pub fn fit_loss_aversion(records: &[GambleChoice], fixed: &ProspectParams, temperature: f64) -> Result<f64> {
    if records.len() < MIN_FIT_RECORDS {
        return Err(Error::Estimation(format!(
            "loss aversion needs at least {MIN_FIT_RECORDS} choices, got {}",
            records.len()
        )));
    }
    if !records.iter().any(GambleChoice::involves_losses) {
        return Err(Error::Estimation("no choice involves a loss; kappa is unidentifiable".into()));
    }
    check_temperature(temperature)?;
    fixed.with_kappa(1.0).validate()?;

    // Values are affine in κ, so split each prospect into gain and loss parts once.
    let split = |d: &DiscreteDistribution| -> Result<(f64, f64)> {
        let mut gain = 0.0;
        let mut loss = 0.0;
        for o in d.outcomes() {
            let w = decision_weight(o.probability, fixed.gamma_weight)?;
            if o.value >= 0.0 {
                gain += w * o.value.powf(fixed.alpha_gain);
            } else {
                loss += w * (-o.value).powf(fixed.beta_loss);
            }
        }
        Ok((gain, loss))
    };
    let parts = records
        .iter()
        .map(|r| {
            let (rg, rl) = split(&r.risky)?;
            let (cg, cl) = split(&r.conservative)?;
            Ok((rg - cg, rl - cl, r.chose_risky))
        })
        .collect::<Result<Vec<_>>>()?;

    let neg_ll = |kappa: f64| {
        parts
            .iter()
            .map(|&(dg, dl, risky)| {
                let d = (dg - kappa * dl) / temperature;
                if risky {
                    softplus(-d)
                } else {
                    softplus(d)
                }
            })
            .sum::<f64>()
    };
    Ok(golden_section_min(
        neg_ll,
        KAPPA_SEARCH_RANGE.0,
        KAPPA_SEARCH_RANGE.1,
        KAPPA_SEARCH_TOL,
    ))
}
