use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bandit::RewardMode;
use crate::error::{Error, Result};
use crate::human::{CompletionStrategy, SimulatedHuman, Tier};
use crate::matching::Scores;
use crate::scoregen::GeneratorConfig;

/// Where human decisions come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum HumanSpec {
    Simulated {
        policy: SimulatedHuman,
    },
    Replay {
        tasks: PathBuf,
        records: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tier: Option<Tier>,
        /// Drop participants with more than one unassigned patient in more
        /// than `filter_u` tasks.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        filter_u: Option<usize>,
    },
}

impl Default for HumanSpec {
    fn default() -> Self {
        HumanSpec::Simulated {
            policy: SimulatedHuman::Greedy,
        }
    }
}

pub const MAX_FILTER_U: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default = "default_arms")]
    pub arms: Vec<usize>,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    #[serde(default)]
    pub human: HumanSpec,
    #[serde(default)]
    pub completion: CompletionStrategy,
    #[serde(default)]
    pub reward_mode: RewardMode,
    /// Divide rewards by the pool size before the bandit update.
    #[serde(default)]
    pub normalize_reward: bool,
    #[serde(default = "default_bonus_scale")]
    pub bonus_scale: f64,
    /// Scores the algorithm optimizes. `success_prob` gives the degenerate
    /// setting where the algorithm sees what the human sees.
    #[serde(default = "default_algorithm_scores")]
    pub algorithm_scores: Scores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_arms() -> Vec<usize> {
    (5..=20).collect()
}

fn default_horizon() -> u64 {
    2000
}

fn default_realizations() -> usize {
    100
}

fn default_bonus_scale() -> f64 {
    1.0
}

fn default_algorithm_scores() -> Scores {
    Scores::Confidence
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl ExperimentConfig {
    /// Full-scale settings: T = 2000, 100 realizations.
    pub fn full() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            arms: default_arms(),
            horizon: default_horizon(),
            realizations: default_realizations(),
            human: HumanSpec::default(),
            completion: CompletionStrategy::default(),
            reward_mode: RewardMode::default(),
            normalize_reward: false,
            bonus_scale: default_bonus_scale(),
            algorithm_scores: default_algorithm_scores(),
            output_dir: None,
            seed: 0,
        }
    }

    /// Desk-scale settings for CI: T = 500, 20 realizations.
    pub fn desk() -> Self {
        Self {
            horizon: 500,
            realizations: 20,
            ..Self::full()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text)?;
        // Relative dataset paths are resolved against the config file.
        if let (HumanSpec::Replay { tasks, records, .. }, Some(dir)) = (&mut cfg.human, path.parent()) {
            for p in [tasks, records] {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        if self.arms.is_empty() {
            return Err(Error::Config("arm set must not be empty".into()));
        }
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if (self.horizon as usize) < self.arms.len() {
            return Err(Error::Config(format!(
                "horizon {} is shorter than the {} arms",
                self.horizon,
                self.arms.len()
            )));
        }
        if !(self.bonus_scale >= 0.0 && self.bonus_scale.is_finite()) {
            return Err(Error::Config("bonus_scale must be finite and >= 0".into()));
        }
        match &self.human {
            HumanSpec::Simulated { policy } => {
                policy.validate()?;
                let capacity: usize = self.generator.capacities.iter().map(|&c| c as usize).sum();
                if let Some(&b) = self
                    .arms
                    .iter()
                    .find(|&&b| self.generator.n.saturating_sub(b) > capacity)
                {
                    return Err(Error::Config(format!(
                        "arm b={b} leaves {} patients for {capacity} slots",
                        self.generator.n - b
                    )));
                }
            }
            HumanSpec::Replay { filter_u, .. } => {
                if filter_u.is_some_and(|u| u > MAX_FILTER_U) {
                    return Err(Error::Config(format!(
                        "filter_u must lie in 0..={MAX_FILTER_U}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
