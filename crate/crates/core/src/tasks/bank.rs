//! Scenario bank: forced-choice scenarios, probability items, interval
//! questions, and gamble pairs, loaded from JSON and fully validated.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::prospect::GambleChoice;
use crate::risk::{weighted_risk, RiskComponents, RiskWeights};

const DEFAULT_BANK_JSON: &str = include_str!("../../data/default_bank.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioCategory {
    HighRiskFactual,
    ControversialTopic,
    UncertaintyAcknowledgment,
    SpeculativeReasoning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOption {
    pub label: String,
    pub text: String,
    pub risk_components: RiskComponents,
    pub quality: f64,
    pub expected_utility: f64,
    pub p_correct: f64,
    #[serde(default)]
    pub quality_optimal: bool,
}

impl ScenarioOption {
    pub fn risk(&self, weights: &RiskWeights) -> f64 {
        weighted_risk(&self.risk_components, weights)
    }

    /// `[quality, factual, controversy, uncertainty, expected_utility]`.
    pub fn features(&self) -> [f64; 5] {
        [
            self.quality,
            self.risk_components.factual,
            self.risk_components.controversy,
            self.risk_components.uncertainty,
            self.expected_utility,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub prompt: String,
    pub options: Vec<ScenarioOption>,
    pub tags: Vec<ScenarioCategory>,
}

impl Scenario {
    pub fn option_index(&self, label: &str) -> Option<usize> {
        self.options.iter().position(|o| o.label == label)
    }

    pub fn quality_optimal_index(&self) -> usize {
        self.options.iter().position(|o| o.quality_optimal).unwrap_or(0)
    }

    pub fn risks(&self, weights: &RiskWeights) -> Vec<f64> {
        self.options.iter().map(|o| o.risk(weights)).collect()
    }

    /// Index maximising `key`; ties go to the lexicographically lowest label.
    pub fn argmax_by(&self, key: impl Fn(&ScenarioOption) -> f64) -> usize {
        let mut best = 0;
        for i in 1..self.options.len() {
            let (a, b) = (key(&self.options[i]), key(&self.options[best]));
            if a > b || (a == b && self.options[i].label < self.options[best].label) {
                best = i;
            }
        }
        best
    }

    pub fn argmin_by(&self, key: impl Fn(&ScenarioOption) -> f64) -> usize {
        self.argmax_by(|o| -key(o))
    }

    pub fn min_risk_index(&self, weights: &RiskWeights) -> usize {
        self.argmin_by(|o| o.risk(weights))
    }

    pub fn max_risk_index(&self, weights: &RiskWeights) -> usize {
        self.argmax_by(|o| o.risk(weights))
    }

    fn validate(&self, path: &str) -> Result<()> {
        if self.options.len() < 2 {
            return Err(Error::validation(format!("{path}.options"), "scenario needs at least two options"));
        }
        if self.tags.is_empty() {
            return Err(Error::validation(format!("{path}.tags"), "scenario needs a category tag"));
        }
        let mut labels = HashSet::new();
        for (j, o) in self.options.iter().enumerate() {
            let opath = format!("{path}.options[{j}]");
            if o.label.is_empty() || !labels.insert(o.label.as_str()) {
                return Err(Error::validation(format!("{opath}.label"), format!("label `{}` is empty or repeated", o.label)));
            }
            o.risk_components
                .validate()
                .map_err(|e| prefix_path(e, &format!("{opath}.risk_components")))?;
            unit_interval(o.quality, &format!("{opath}.quality"))?;
            unit_interval(o.p_correct, &format!("{opath}.p_correct"))?;
            if !o.expected_utility.is_finite() {
                return Err(Error::validation(format!("{opath}.expected_utility"), "must be finite"));
            }
        }
        let flagged = self.options.iter().filter(|o| o.quality_optimal).count();
        if flagged != 1 {
            return Err(Error::validation(
                format!("{path}.options"),
                format!("exactly one option must be quality_optimal, found {flagged}"),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FallacyTag {
    #[serde(rename = "gamblers-fallacy")]
    GamblersFallacy,
    #[serde(rename = "hot-hand")]
    HotHand,
    #[serde(rename = "base-rate")]
    BaseRate,
    #[serde(rename = "none")]
    None,
}

impl FallacyTag {
    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbabilityItem {
    pub id: String,
    pub statement: String,
    pub p_true: f64,
    #[serde(default)]
    pub fallacy_tag: Option<FallacyTag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalItem {
    pub id: String,
    pub question: String,
    pub true_value: f64,
    pub unit: String,
    pub nominal_level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GamblePair {
    pub id: String,
    pub risky: DiscreteDistribution,
    pub conservative: DiscreteDistribution,
}

impl GamblePair {
    pub fn record(&self, chose_risky: bool) -> GambleChoice {
        GambleChoice {
            risky: self.risky.clone(),
            conservative: self.conservative.clone(),
            chose_risky,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bank {
    pub version: String,
    #[serde(default)]
    pub description: String,
    pub scenarios: Vec<Scenario>,
    pub probability_items: Vec<ProbabilityItem>,
    pub interval_items: Vec<IntervalItem>,
    pub gamble_pairs: Vec<GamblePair>,
}

fn unit_interval(v: f64, path: &str) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::validation(path, format!("{v} is outside [0, 1]")))
    }
}

fn prefix_path(err: Error, prefix: &str) -> Error {
    match err {
        Error::Validation { path, message } => Error::validation(format!("{prefix}.{path}"), message),
        other => other,
    }
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a str>, array: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for (i, id) in ids.enumerate() {
        if !seen.insert(id) {
            return Err(Error::validation(format!("{array}[{i}].id"), format!("duplicate id `{id}`")));
        }
    }
    Ok(())
}

impl Bank {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let bank: Bank = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::validation(path, e.into_inner().to_string())
        })?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    /// The bundled synthetic bank.
    pub fn default_bank() -> Self {
        Self::from_json_str(DEFAULT_BANK_JSON).expect("bundled bank is valid")
    }

    pub fn default_bank_json() -> &'static str {
        DEFAULT_BANK_JSON
    }

    pub fn validate(&self) -> Result<()> {
        unique_ids(self.scenarios.iter().map(|s| s.id.as_str()), "scenarios")?;
        unique_ids(self.probability_items.iter().map(|s| s.id.as_str()), "probability_items")?;
        unique_ids(self.interval_items.iter().map(|s| s.id.as_str()), "interval_items")?;
        unique_ids(self.gamble_pairs.iter().map(|s| s.id.as_str()), "gamble_pairs")?;
        for (i, s) in self.scenarios.iter().enumerate() {
            s.validate(&format!("scenarios[{i}]"))?;
        }
        for (i, p) in self.probability_items.iter().enumerate() {
            unit_interval(p.p_true, &format!("probability_items[{i}].p_true"))?;
        }
        for (i, it) in self.interval_items.iter().enumerate() {
            let path = format!("interval_items[{i}]");
            if !it.true_value.is_finite() {
                return Err(Error::validation(format!("{path}.true_value"), "must be finite"));
            }
            if !(it.nominal_level > 0.0 && it.nominal_level < 1.0) {
                return Err(Error::validation(
                    format!("{path}.nominal_level"),
                    format!("{} is outside (0, 1)", it.nominal_level),
                ));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON serialisation.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("bank serialises");
        hex::encode(Sha256::digest(&bytes))
    }
}
