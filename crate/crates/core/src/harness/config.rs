//! Run configuration: what to evaluate, on which bank, with which seeds.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{LlmClientConfig, ScriptedProfile};
use crate::error::{Error, Result};
use crate::metrics::{MetricConfig, MetricWeights};
use crate::risk::RiskWeights;
use crate::tasks::bank::Bank;
use crate::tasks::protocols::{IowaConfig, LossChasingConfig, TaskKind};
use crate::training::{AblationFlags, AntiChasingConfig, TrainingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentKind {
    Scripted {
        profile: ScriptedProfile,
    },
    Uniform,
    /// A saved toy policy.
    Toy {
        policy: PathBuf,
    },
    /// A toy policy trained at run start, once per seed, from that seed.
    ToyTrain {
        #[serde(default)]
        training: TrainingConfig,
        #[serde(default)]
        ablation: AblationFlags,
    },
    Llm {
        client: LlmClientConfig,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub agent: AgentKind,
    /// Route scenario answers through the anti-chasing selector.
    #[serde(default)]
    pub anti_chasing: bool,
}

impl AgentSpec {
    pub fn new(agent: AgentKind) -> Self {
        Self {
            name: None,
            agent,
            anti_chasing: false,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let base = match &self.agent {
            AgentKind::Scripted { profile } => profile.name().to_string(),
            AgentKind::Uniform => "uniform".into(),
            AgentKind::Toy { policy } => format!(
                "toy:{}",
                policy.file_stem().and_then(|s| s.to_str()).unwrap_or("policy")
            ),
            AgentKind::ToyTrain { ablation, .. } => {
                if *ablation == AblationFlags::all_on() {
                    "toy:full".into()
                } else if *ablation == AblationFlags::all_off() {
                    "toy:plain".into()
                } else {
                    let mut parts = vec!["toy"];
                    for (on, tag) in [
                        (ablation.loss_aversion, "la"),
                        (ablation.risk_calibration, "cal"),
                        (ablation.anti_chasing, "ac"),
                        (ablation.probability_training, "pt"),
                    ] {
                        if on {
                            parts.push(tag);
                        }
                    }
                    parts.join(":")
                }
            }
            AgentKind::Llm { client } => format!("llm:{}", client.model),
        };
        if self.wraps_anti_chasing() && !matches!(self.agent, AgentKind::ToyTrain { .. }) {
            format!("{base}+anti_chasing")
        } else {
            base
        }
    }

    pub fn wraps_anti_chasing(&self) -> bool {
        self.anti_chasing || matches!(&self.agent, AgentKind::ToyTrain { ablation, .. } if ablation.anti_chasing)
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_tasks() -> Vec<TaskKind> {
    TaskKind::ALL.to_vec()
}

fn default_parallelism() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Bank file; the bundled bank when absent.
    #[serde(default)]
    pub bank: Option<PathBuf>,
    pub agents: Vec<AgentSpec>,
    #[serde(default = "default_tasks")]
    pub tasks: Vec<TaskKind>,
    #[serde(default)]
    pub loss_chasing: LossChasingConfig,
    #[serde(default)]
    pub iowa: IowaConfig,
    #[serde(default)]
    pub metric_weights: MetricWeights,
    #[serde(default)]
    pub risk_weights: RiskWeights,
    #[serde(default)]
    pub metric_config: MetricConfig,
    #[serde(default)]
    pub anti_chasing: AntiChasingConfig,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(agents: Vec<AgentSpec>) -> Self {
        Self {
            seeds: default_seeds(),
            bank: None,
            agents,
            tasks: default_tasks(),
            loss_chasing: LossChasingConfig::default(),
            iowa: IowaConfig::default(),
            metric_weights: MetricWeights::default(),
            risk_weights: RiskWeights::default(),
            metric_config: MetricConfig::default(),
            anti_chasing: AntiChasingConfig::default(),
            parallelism: 1,
            out_dir: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("at `{path}`: {}", e.into_inner()))
        })
    }

    /// Reads a config file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_json_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(b) = &mut self.bank {
            fix(b);
        }
        if let Some(o) = &mut self.out_dir {
            fix(o);
        }
        for spec in &mut self.agents {
            match &mut spec.agent {
                AgentKind::Toy { policy } => fix(policy),
                AgentKind::Llm { client } => {
                    if let Some(t) = &mut client.template_path {
                        fix(t);
                    }
                }
                _ => {}
            }
        }
    }

    /// Checks every invariant and that referenced files exist. Runs before any task.
    pub fn validate(&self) -> Result<()> {
        let config_err = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: at least one seed is required".into()));
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return Err(Error::Config("seeds: duplicate seed".into()));
        }
        if self.agents.is_empty() {
            return Err(Error::Config("agents: at least one agent is required".into()));
        }
        if self.tasks.is_empty() {
            return Err(Error::Config("tasks: at least one task is required".into()));
        }
        if self.parallelism < 1 {
            return Err(Error::Config("parallelism: must be >= 1".into()));
        }
        if let Some(b) = &self.bank {
            if !b.is_file() {
                return Err(Error::Config(format!("bank file {} does not exist", b.display())));
            }
        }
        let mut names = HashSet::new();
        for (i, spec) in self.agents.iter().enumerate() {
            if !names.insert(spec.display_name()) {
                return Err(Error::Config(format!(
                    "agents[{i}]: duplicate agent name `{}`",
                    spec.display_name()
                )));
            }
            match &spec.agent {
                AgentKind::Scripted { profile } => profile.validate().map_err(config_err)?,
                AgentKind::Toy { policy } => {
                    if !policy.is_file() {
                        return Err(Error::Config(format!(
                            "agents[{i}].agent.policy: {} does not exist",
                            policy.display()
                        )));
                    }
                }
                AgentKind::ToyTrain { training, .. } => training.validate().map_err(config_err)?,
                AgentKind::Llm { client } => client.validate().map_err(config_err)?,
                AgentKind::Uniform => {}
            }
        }
        if self.loss_chasing.steps_per_episode == 0 {
            return Err(Error::Config("loss_chasing.steps_per_episode: must be >= 1".into()));
        }
        if self.iowa.picks == 0 {
            return Err(Error::Config("iowa.picks: must be >= 1".into()));
        }
        self.iowa.schedule.validate().map_err(config_err)?;
        self.metric_weights.validate().map_err(config_err)?;
        self.risk_weights.validate().map_err(config_err)?;
        self.metric_config.validate().map_err(config_err)?;
        self.anti_chasing.validate().map_err(config_err)?;
        Ok(())
    }

    pub fn load_bank(&self) -> Result<Bank> {
        match &self.bank {
            Some(p) => {
                if !p.is_file() {
                    return Err(Error::Config(format!("bank file {} does not exist", p.display())));
                }
                Bank::load(p)
            }
            None => Ok(Bank::default_bank()),
        }
    }

    /// Episodes a task runs per agent and seed.
    pub fn episodes(&self, task: TaskKind) -> usize {
        match task {
            TaskKind::LossChasing => self.loss_chasing.episodes,
            TaskKind::Iowa => self.iowa.episodes,
            _ => 1,
        }
    }
}
