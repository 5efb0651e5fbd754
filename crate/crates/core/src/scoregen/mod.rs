//! Synthetic patient pools.
//!
//! Each patient has an observable feature `x` in `{0, 1, 2}` and a hidden
//! context `d ~ U(0, 1)`. For slot `r` the classifier sees only `x` and
//! reports the Beta mean `α / (α + β)`; the human sees the individual
//! success score `p = Q_{α,β}(d)`, the `d`-quantile of the same Beta.
//! Averaged over `d`, `p` equals the classifier score.

mod beta;
mod table;

pub use beta::{beta_quantile, ln_beta, ln_gamma, regularized_incomplete_beta};
pub use table::{BetaParamTable, DEFAULT_BETA_TABLE, DEFAULT_FEATURE_PROBS};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{MatchInstance, ResourceSet, ScoreMatrix};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatientInfo {
    /// Observable feature, shared with the classifier.
    pub x: usize,
    /// Hidden context, visible to the human only.
    pub d: f64,
}

impl PatientInfo {
    pub fn new(x: usize, d: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&d) {
            return Err(Error::Domain(format!("hidden context {d} outside [0, 1]")));
        }
        Ok(Self { x, d })
    }
}

/// Classifier confidence for feature `x` and slot `r` (0-based).
pub fn confidence_score(table: &BetaParamTable, x: usize, r: usize) -> Result<f64> {
    let (a, b) = table.get(x, r)?;
    Ok(a / (a + b))
}

/// Individual success score `p_ir`.
pub fn success_probability(table: &BetaParamTable, info: PatientInfo, r: usize) -> Result<f64> {
    let (a, b) = table.get(info.x, r)?;
    beta_quantile(a, b, info.d)
}

/// One Bernoulli(p) draw.
pub fn sample_outcome(p: f64, rng: &mut SimRng) -> u8 {
    u8::from(rng.random::<f64>() < p)
}

/// Pool generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "default_feature_probs")]
    pub feature_probs: Vec<f64>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_capacities")]
    pub capacities: Vec<u32>,
    #[serde(default)]
    pub beta: BetaParamTable,
    #[serde(default)]
    pub seed: u64,
}

fn default_feature_probs() -> Vec<f64> {
    DEFAULT_FEATURE_PROBS.to_vec()
}

fn default_n() -> usize {
    20
}

fn default_capacities() -> Vec<u32> {
    vec![2; 10]
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            feature_probs: default_feature_probs(),
            n: default_n(),
            capacities: default_capacities(),
            beta: BetaParamTable::default(),
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.feature_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || self.feature_probs.iter().any(|&q| q.is_nan() || q < 0.0) {
            return Err(Error::Config(format!(
                "feature probabilities must be nonnegative and sum to 1, got {:?}",
                self.feature_probs
            )));
        }
        if self.n == 0 {
            return Err(Error::Config("pool size n must be at least 1".into()));
        }
        if self.capacities.is_empty() {
            return Err(Error::Config("at least one slot required".into()));
        }
        if self.beta.features() < self.feature_probs.len() || self.beta.slots() < self.capacities.len() {
            return Err(Error::Config(format!(
                "Beta table is {}x{} but {} features and {} slots are configured",
                self.beta.features(),
                self.beta.slots(),
                self.feature_probs.len(),
                self.capacities.len()
            )));
        }
        Ok(())
    }

    fn draw_feature(&self, u: f64) -> usize {
        let mut acc = 0.0;
        for (x, &q) in self.feature_probs.iter().enumerate() {
            acc += q;
            if u < acc {
                return x;
            }
        }
        self.feature_probs.len() - 1
    }
}

/// Slot labels for the ten weekday half-days; other slot counts get `r1..rk`.
pub fn slot_names(k: usize) -> Vec<String> {
    const WEEK: [&str; 10] = [
        "mon-am", "mon-pm", "tue-am", "tue-pm", "wed-am", "wed-pm", "thu-am", "thu-pm", "fri-am",
        "fri-pm",
    ];
    if k == WEEK.len() {
        WEEK.iter().map(|s| s.to_string()).collect()
    } else {
        (1..=k).map(|r| format!("r{r}")).collect()
    }
}

/// Draws a pool: for each patient in order, the feature from the
/// categorical distribution and then `d ~ U(0, 1)`.
pub fn sample_instance(config: &GeneratorConfig, rng: &mut SimRng) -> Result<(MatchInstance, Vec<PatientInfo>)> {
    config.validate()?;
    let k = config.capacities.len();
    let mut patients = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let x = config.draw_feature(rng.random::<f64>());
        let d = rng.random::<f64>();
        patients.push(PatientInfo { x, d });
    }
    let mut f = Vec::with_capacity(config.n * k);
    let mut p = Vec::with_capacity(config.n * k);
    for info in &patients {
        for r in 0..k {
            f.push(confidence_score(&config.beta, info.x, r)?);
            p.push(success_probability(&config.beta, *info, r)?);
        }
    }
    let instance = MatchInstance::new(
        ResourceSet::new(slot_names(k), config.capacities.clone())?,
        ScoreMatrix::new(config.n, k, f)?,
        Some(ScoreMatrix::new(config.n, k, p)?),
    )?;
    Ok((instance, patients))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn confidence_examples() {
        let t = BetaParamTable::default();
        assert!((confidence_score(&t, 0, 0).unwrap() - 0.4).abs() < 1e-15);
        assert!((confidence_score(&t, 2, 0).unwrap() - 1.0 / 11.0).abs() < 1e-15);
        assert_eq!(confidence_score(&t, 0, 1).unwrap(), 0.5);
        assert!(matches!(
            confidence_score(&t, 3, 0),
            Err(Error::MissingTableEntry { x: 3, r: 0 })
        ));
    }

    #[test]
    fn success_probability_examples() {
        let t = BetaParamTable::default();
        for x in 0..3 {
            for r in 0..10 {
                let p = success_probability(&t, PatientInfo { x, d: 0.0 }, r).unwrap();
                assert_eq!(p, 0.0);
            }
        }
        let p = success_probability(&t, PatientInfo { x: 0, d: 0.5 }, 1).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let p = success_probability(&t, PatientInfo { x: 2, d: 0.5 }, 0).unwrap();
        assert!((p - (1.0 - 2f64.powf(-0.1))).abs() < 1e-12);
    }

    #[test]
    fn degenerate_outcomes() {
        let mut rng = seeded(3);
        assert!((0..1000).all(|_| sample_outcome(0.0, &mut rng) == 0));
        assert!((0..1000).all(|_| sample_outcome(1.0, &mut rng) == 1));
    }

    #[test]
    fn outcome_frequency_matches_probability() {
        let mut rng = seeded(11);
        let hits: u32 = (0..100_000).map(|_| sample_outcome(0.5, &mut rng) as u32).sum();
        assert!((hits as f64 / 1e5 - 0.5).abs() < 0.01);
    }

    #[test]
    fn sampling_is_deterministic_under_seed() {
        let cfg = GeneratorConfig::default();
        let a = sample_instance(&cfg, &mut seeded(42)).unwrap();
        let b = sample_instance(&cfg, &mut seeded(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.0.n(), 20);
        assert_eq!(a.0.k(), 10);
        assert_eq!(a.0.resources().names()[0], "mon-am");
    }

    #[test]
    fn config_validation() {
        let bad = [
            GeneratorConfig {
                feature_probs: vec![0.5, 0.4],
                ..Default::default()
            },
            GeneratorConfig {
                n: 0,
                ..Default::default()
            },
            GeneratorConfig {
                capacities: vec![1; 11],
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn patient_info_domain() {
        assert!(PatientInfo::new(0, 1.5).is_err());
        assert!(PatientInfo::new(2, 0.3).is_ok());
    }
}
