//! Remote LLM subjects over an HTTP chat-completion endpoint.
//!
//! Every task is posed as a forced choice and the reply must contain an
//! `ANSWER:` line. Requests are capped by an in-flight gate shared by all
//! workers and retried with exponential backoff on timeouts, 5xx and 429.

use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::agents::{Agent, Choice, StepContext};
use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::tasks::bank::{GamblePair, IntervalItem, ProbabilityItem, Scenario};
use crate::tasks::iowa::{Deck, IowaObservation};

const DEFAULT_TEMPLATE: &str = include_str!("../../templates/forced_choice.txt");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmClientConfig {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_concurrency")]
    pub max_concurrent: usize,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_backoff")]
    pub backoff_base_secs: f64,
    /// Template with `{prompt}`, `{options}` and `{format_instructions}`.
    #[serde(default)]
    pub template_path: Option<PathBuf>,
}

fn default_timeout() -> f64 {
    30.0
}
fn default_retries() -> u32 {
    3
}
fn default_concurrency() -> usize {
    4
}
fn default_backoff() -> f64 {
    1.0
}

impl LlmClientConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, api_key_env: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key_env: api_key_env.into(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            max_concurrent: default_concurrency(),
            temperature: 0.0,
            backoff_base_secs: default_backoff(),
            template_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timeout_secs > 0.0) {
            return Err(Error::validation("llm.timeout_secs", "must be > 0"));
        }
        if self.max_concurrent < 1 {
            return Err(Error::validation("llm.max_concurrent", "must be >= 1"));
        }
        if !(self.backoff_base_secs >= 0.0) {
            return Err(Error::validation("llm.backoff_base_secs", "must be >= 0"));
        }
        if let Some(p) = &self.template_path {
            if !p.exists() {
                return Err(Error::Config(format!("template file {} does not exist", p.display())));
            }
        }
        Ok(())
    }
}

/// Counting gate that blocks callers while `limit` requests are in flight.
#[derive(Debug)]
struct InFlightGate {
    limit: usize,
    count: Mutex<usize>,
    freed: Condvar,
}

struct GatePass<'a>(&'a InFlightGate);

impl InFlightGate {
    fn new(limit: usize) -> Self {
        Self {
            limit,
            count: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn enter(&self) -> GatePass<'_> {
        let mut n = self.count.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.limit {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        GatePass(self)
    }
}

impl Drop for GatePass<'_> {
    fn drop(&mut self) {
        let mut n = self.0.count.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

enum Attempt {
    Done(String),
    Retry(String),
}

#[derive(Debug)]
pub struct LlmClient {
    config: LlmClientConfig,
    http: ureq::Agent,
    api_key: String,
    gate: InFlightGate,
    template: String,
}

impl LlmClient {
    pub fn new(config: LlmClientConfig) -> Result<Self> {
        config.validate()?;
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| Error::Config(format!("environment variable {} is not set", config.api_key_env)))?;
        let template = match &config.template_path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => DEFAULT_TEMPLATE.to_string(),
        };
        let http: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            gate: InFlightGate::new(config.max_concurrent),
            config,
            http,
            api_key,
            template,
        })
    }

    pub fn config(&self) -> &LlmClientConfig {
        &self.config
    }

    pub fn render(&self, prompt: &str, options: &str, format_instructions: &str) -> String {
        self.template
            .replace("{prompt}", prompt)
            .replace("{options}", options)
            .replace("{format_instructions}", format_instructions)
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<Attempt> {
        let _pass = self.gate.enter();
        let response = self
            .http
            .post(&self.config.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(body);
        let mut response = match response {
            Ok(r) => r,
            Err(ureq::Error::Timeout(t)) => return Ok(Attempt::Retry(format!("timeout: {t}"))),
            Err(e) => return Err(Error::Transport(e.to_string())),
        };
        let status = response.status().as_u16();
        if status == 429 || (500..600).contains(&status) {
            return Ok(Attempt::Retry(format!("status {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Error::Transport(format!("endpoint returned status {status}")));
        }
        let value: serde_json::Value = match response.body_mut().read_json() {
            Ok(v) => v,
            Err(ureq::Error::Timeout(t)) => return Ok(Attempt::Retry(format!("timeout: {t}"))),
            Err(e) => return Err(Error::Transport(format!("unreadable response body: {e}"))),
        };
        let content = value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .unwrap_or_default();
        Ok(Attempt::Done(content.to_string()))
    }

    /// One chat completion, retried on timeouts, 5xx and 429.
    pub fn complete(&self, prompt: &str) -> Result<String> {
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        });
        let mut last = String::new();
        for attempt in 0..=self.config.max_retries {
            if attempt > 0 {
                let wait = self.config.backoff_base_secs * 2f64.powi(attempt as i32 - 1);
                std::thread::sleep(Duration::from_secs_f64(wait));
            }
            match self.attempt(&body)? {
                Attempt::Done(text) => return Ok(text),
                Attempt::Retry(why) => {
                    log::warn!("request attempt {} failed: {why}", attempt + 1);
                    last = why;
                }
            }
        }
        Err(Error::Transport(format!(
            "gave up after {} attempts, last failure: {last}",
            self.config.max_retries + 1
        )))
    }

    /// Asks until the reply parses, re-asking on malformed replies up to the retry budget.
    pub fn ask<T>(&self, item: &str, prompt: &str, parse: impl Fn(&str) -> Option<T>) -> Result<T> {
        let mut last = String::new();
        for _ in 0..=self.config.max_retries {
            let reply = self.complete(prompt)?;
            if let Some(v) = parse(&reply) {
                return Ok(v);
            }
            last = reply;
        }
        Err(Error::MalformedAnswer {
            item: item.to_string(),
            message: format!("no parsable ANSWER line in reply: {:?}", truncate(&last, 120)),
        })
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

fn answer_regex(pattern: &str) -> Regex {
    Regex::new(pattern).expect("static pattern")
}

/// `ANSWER: <label> CONFIDENCE: <0-100>` with the label restricted to `labels`.
pub fn parse_choice(reply: &str, labels: &[&str]) -> Option<(String, f64)> {
    let re = answer_regex(r"(?i)ANSWER:\s*\(?([A-Za-z0-9]+)\)?\s*,?\s*CONFIDENCE:\s*(\d{1,3})\b");
    let caps = re.captures(reply)?;
    let label = caps[1].to_ascii_uppercase();
    let confidence: u32 = caps[2].parse().ok()?;
    (labels.contains(&label.as_str()) && confidence <= 100).then(|| (label, confidence as f64 / 100.0))
}

/// `ANSWER: <0-100>`.
pub fn parse_percent(reply: &str) -> Option<f64> {
    let re = answer_regex(r"(?i)ANSWER:\s*(\d{1,3})\b");
    let v: u32 = re.captures(reply)?[1].parse().ok()?;
    (v <= 100).then(|| v as f64 / 100.0)
}

/// `ANSWER: <lo> TO <hi>`; order is checked by the task.
pub fn parse_interval(reply: &str) -> Option<(f64, f64)> {
    let num = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)";
    let re = answer_regex(&format!(r"(?i)ANSWER:\s*{num}\s*TO\s*{num}"));
    let caps = re.captures(reply)?;
    Some((caps[1].parse().ok()?, caps[2].parse().ok()?))
}

/// `ANSWER: <label>` with the label restricted to `labels`.
pub fn parse_label(reply: &str, labels: &[&str]) -> Option<String> {
    let re = answer_regex(r"(?i)ANSWER:\s*\(?([A-Za-z0-9]+)\)?");
    let label = re.captures(reply)?[1].to_ascii_uppercase();
    labels.contains(&label.as_str()).then_some(label)
}

/// Agent backed by a shared [`LlmClient`].
#[derive(Debug, Clone)]
pub struct LlmAgent {
    client: Arc<LlmClient>,
    name: String,
    last_confidence: Option<(String, f64)>,
}

impl LlmAgent {
    pub fn new(client: Arc<LlmClient>) -> Self {
        let name = format!("llm:{}", client.config().model);
        Self {
            client,
            name,
            last_confidence: None,
        }
    }
}

fn describe_outcomes(d: &crate::distribution::DiscreteDistribution) -> String {
    d.outcomes()
        .iter()
        .map(|o| format!("{:+} with probability {}", o.value, o.probability))
        .collect::<Vec<_>>()
        .join(", ")
}

impl Agent for LlmAgent {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn reset(&mut self) {
        self.last_confidence = None;
    }

    fn choose_option(&mut self, scenario: &Scenario, _ctx: &StepContext, _rng: &mut RngState) -> Result<Choice> {
        let options = scenario
            .options
            .iter()
            .map(|o| format!("{}. {}", o.label, o.text))
            .collect::<Vec<_>>()
            .join("\n");
        let labels: Vec<&str> = scenario.options.iter().map(|o| o.label.as_str()).collect();
        let prompt = self.client.render(
            &scenario.prompt,
            &options,
            "Reply with one line of the form ANSWER: <label> CONFIDENCE: <0-100>, where CONFIDENCE is how likely your chosen response is to be correct.",
        );
        let (label, confidence) = self.client.ask(&scenario.id, &prompt, |r| parse_choice(r, &labels))?;
        self.last_confidence = Some((label.clone(), confidence));
        Ok(Choice::new(label, confidence))
    }

    fn confidence_for(&mut self, scenario: &Scenario, option: usize, _ctx: &StepContext) -> Result<f64> {
        let label = &scenario
            .options
            .get(option)
            .ok_or_else(|| Error::validation("option", format!("index {option} out of range")))?
            .label;
        match &self.last_confidence {
            Some((l, c)) if l == label => Ok(*c),
            Some((_, c)) => Ok(*c),
            None => Err(Error::Estimation("no stated confidence yet".into())),
        }
    }

    fn estimate_probability(&mut self, item: &ProbabilityItem, _rng: &mut RngState) -> Result<f64> {
        let prompt = self.client.render(
            &item.statement,
            "Give a probability between 0 and 100.",
            "Reply with one line of the form ANSWER: <0-100>.",
        );
        self.client.ask(&item.id, &prompt, parse_percent)
    }

    fn give_interval(&mut self, item: &IntervalItem, _rng: &mut RngState) -> Result<(f64, f64)> {
        let prompt = self.client.render(
            &format!("{} (unit: {})", item.question, item.unit),
            &format!("Give a {:.0}% confidence interval.", item.nominal_level * 100.0),
            "Reply with one line of the form ANSWER: <lower> TO <upper>.",
        );
        self.client.ask(&item.id, &prompt, parse_interval)
    }

    fn pick_deck(&mut self, observation: &IowaObservation, _rng: &mut RngState) -> Result<Deck> {
        let options = Deck::ALL
            .iter()
            .map(|d| {
                let s = &observation.decks[d.index()];
                format!(
                    "{d}. drawn {} times, total won {}, total lost {}",
                    s.picks, s.total_reward, s.total_loss
                )
            })
            .collect::<Vec<_>>()
            .join("\n");
        let prompt = self.client.render(
            &format!(
                "Pick a card from one of four decks. Each card wins money and some also lose money. Your bankroll is {}.",
                observation.bankroll
            ),
            &options,
            "Reply with one line of the form ANSWER: <deck letter>.",
        );
        let labels = ["A", "B", "C", "D"];
        let item = format!("pick{}", observation.step);
        let label = self.client.ask(&item, &prompt, |r| parse_label(r, &labels))?;
        Deck::parse(&label).ok_or_else(|| Error::MalformedAnswer {
            item,
            message: format!("unknown deck {label}"),
        })
    }

    fn choose_gamble(&mut self, pair: &GamblePair, _rng: &mut RngState) -> Result<bool> {
        let options = format!(
            "A. {}\nB. {}",
            describe_outcomes(&pair.risky),
            describe_outcomes(&pair.conservative)
        );
        let prompt = self.client.render(
            "Choose one of two gambles.",
            &options,
            "Reply with one line of the form ANSWER: <A or B>.",
        );
        Ok(self.client.ask(&pair.id, &prompt, |r| parse_label(r, &["A", "B"]))? == "A")
    }
}
