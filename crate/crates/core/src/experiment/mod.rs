//! Monte Carlo experiments over the deferral count.
//!
//! Each realization runs UCB1 over the configured arms for `T` rounds. At
//! round `t` of realization `r` the environment draws a fresh instance from
//! `stream(seed, [r, t, Instance])` (or, when replaying, a recorded task),
//! so every arm and both baselines (`b = 0` and `b = n`) face the same
//! instance sequence. Human decisions, random fills and sampled outcomes use
//! their own streams at the same `[r, t]`. Realizations run in parallel and
//! are reduced in realization order.

mod config;
mod dataset;
mod output;

pub use config::{ExperimentConfig, HumanSpec, MAX_FILTER_U};
pub use dataset::{analyze_dataset, record_utilities, DatasetAnalysis, ReplayData};
pub use output::{emit_results, read_arms_csv, read_baselines_csv, BaselineRow, Manifest};

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bandit::{reward, run_ucb1, Environment, OutcomeMatrix, RewardMode, RoundLog};
use crate::error::{Error, Result};
use crate::human::{complete_matching, replay_human, SimulatedHuman};
use crate::matching::{residual, solve_imperfect_matching, MatchInstance};
use crate::rng::{stream, Purpose, SimRng};
use crate::scoregen::sample_instance;

/// 97.5% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
}

impl Stat {
    /// `None` for an empty sample. A single sample has a zero-width interval.
    pub fn from_samples(xs: &[f64]) -> Option<Stat> {
        if xs.is_empty() {
            return None;
        }
        let m = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / m;
        let half = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
            Z95 * (var / m).sqrt()
        } else {
            0.0
        };
        Some(Stat {
            mean,
            ci_low: mean - half,
            ci_high: mean + half,
            samples: xs.len(),
        })
    }

    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// One row of the per-arm table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmStat {
    pub arm: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub pulls: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arms: Vec<ArmStat>,
    /// All decisions by the algorithm (`b = 0`).
    pub baseline_algorithm: Stat,
    /// All decisions by the human (`b = n`); absent when replaying without
    /// records for `b = n`.
    pub baseline_human: Option<Stat>,
}

impl ArmSummary {
    pub fn arm(&self, b: usize) -> Option<&ArmStat> {
        self.arms.iter().find(|a| a.arm == b)
    }

    /// Arm with the highest mean, smaller `b` on ties.
    pub fn best_arm(&self) -> Option<usize> {
        self.arms
            .iter()
            .fold(None::<&ArmStat>, |best, a| match best {
                Some(x) if x.mean >= a.mean => best,
                _ => Some(a),
            })
            .map(|a| a.arm)
    }
}

#[derive(Debug, Clone)]
pub struct RealizationResult {
    pub realization: usize,
    /// Per-arm (pulls, empirical mean).
    pub arms: BTreeMap<usize, (u64, Option<f64>)>,
    pub baseline_algorithm: f64,
    pub baseline_human: Option<f64>,
    pub logs: Vec<RoundLog>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub summary: ArmSummary,
    pub realizations: Vec<RealizationResult>,
}

/// Human decisions for the environment.
#[derive(Debug, Clone)]
pub enum HumanSource {
    Simulated(SimulatedHuman),
    Replay(Arc<ReplayData>),
}

impl HumanSource {
    pub fn from_spec(spec: &HumanSpec) -> Result<Self> {
        Ok(match spec {
            HumanSpec::Simulated { policy } => HumanSource::Simulated(policy.clone()),
            HumanSpec::Replay {
                tasks,
                records,
                tier,
                filter_u,
            } => HumanSource::Replay(Arc::new(ReplayData::load(tasks, records, *tier, *filter_u)?)),
        })
    }
}

/// Environment of one realization.
pub struct MatchingEnv<'a> {
    cfg: &'a ExperimentConfig,
    source: &'a HumanSource,
    realization: u64,
}

struct Evaluation<'a> {
    task_id: Option<&'a str>,
    instance: &'a MatchInstance,
    outcomes: Option<&'a OutcomeMatrix>,
}

impl<'a> MatchingEnv<'a> {
    pub fn new(cfg: &'a ExperimentConfig, source: &'a HumanSource, realization: u64) -> Self {
        Self {
            cfg,
            source,
            realization,
        }
    }

    fn rng(&self, round: u64, purpose: Purpose) -> SimRng {
        stream(self.cfg.seed, &[self.realization, round, purpose as u64])
    }

    fn draw_instance(&self, round: u64) -> Result<MatchInstance> {
        let mut rng = self.rng(round, Purpose::Instance);
        Ok(sample_instance(&self.cfg.generator, &mut rng)?.0)
    }

    fn outcomes(&self, round: u64, inst: &MatchInstance) -> Result<Option<OutcomeMatrix>> {
        Ok(match self.cfg.reward_mode {
            RewardMode::Expected => None,
            RewardMode::Sampled => Some(OutcomeMatrix::sample(
                inst.success_prob()?,
                &mut self.rng(round, Purpose::Outcomes),
            )),
        })
    }

    /// Plays `b` on a given instance.
    fn evaluate(&self, round: u64, b: usize, ev: &Evaluation<'_>, baseline: bool) -> Result<RoundLog> {
        let inst = ev.instance;
        let p = inst.success_prob()?;
        let alg = solve_imperfect_matching(inst, self.cfg.algorithm_scores, b)?;
        let res = residual(inst, &alg)?;
        let (human_purpose, completion_purpose) = if baseline {
            (Purpose::BaselineHuman, Purpose::BaselineCompletion)
        } else {
            (Purpose::Human, Purpose::Completion)
        };
        let partial = if res.unmatched.is_empty() {
            crate::matching::Matching::empty()
        } else {
            match self.source {
                HumanSource::Simulated(policy) => {
                    policy.decide(&res, p, &mut self.rng(round, human_purpose))
                }
                HumanSource::Replay(data) => {
                    let task = ev.task_id.expect("replayed rounds carry a task");
                    let m = replay_human(&data.records, task, b, p, &mut self.rng(round, Purpose::Replay))?;
                    res.check_feasible(&m)?;
                    m
                }
            }
        };
        let human = complete_matching(
            &partial,
            &res,
            self.cfg.completion,
            p,
            &mut self.rng(round, completion_purpose),
        )?;
        let normalize = self.cfg.normalize_reward.then_some(inst.n());
        let value = reward(&alg, &human, self.cfg.reward_mode, p, ev.outcomes, normalize)?;
        let outcomes = ev.outcomes.map(|y| {
            alg.pairs
                .iter()
                .chain(&human.pairs)
                .map(|&(i, r)| y.get(i, r))
                .collect()
        });
        Ok(RoundLog {
            round,
            arm: b,
            reward: value,
            task_id: ev.task_id.map(str::to_string),
            alg_pairs: alg.pairs,
            human_pairs: human.pairs,
            outcomes,
        })
    }

    fn pick_task<'d>(&self, candidates: &[&'d str], round: u64, purpose: Purpose) -> Option<&'d str> {
        candidates.choose(&mut self.rng(round, purpose)).copied()
    }

    /// Rewards at `b = 0` and `b = n` for round `round`.
    pub fn baselines(&self, round: u64) -> Result<(f64, Option<f64>)> {
        match self.source {
            HumanSource::Simulated(_) => {
                let inst = self.draw_instance(round)?;
                let outcomes = self.outcomes(round, &inst)?;
                let ev = Evaluation {
                    task_id: None,
                    instance: &inst,
                    outcomes: outcomes.as_ref(),
                };
                let alg = self.evaluate(round, 0, &ev, true)?.reward;
                let human = self.evaluate(round, inst.n(), &ev, true)?.reward;
                Ok((alg, Some(human)))
            }
            HumanSource::Replay(data) => {
                // Prefer tasks with b = n records so both baselines share the instance.
                let full: Vec<&str> = data
                    .tasks
                    .ids()
                    .filter(|&t| {
                        let n = data.tasks.get(t).map_or(0, MatchInstance::n);
                        data.records.for_task(t, n).next().is_some()
                    })
                    .collect();
                let all: Vec<&str> = data.tasks.ids().collect();
                let pool = if full.is_empty() { &all } else { &full };
                let task = self
                    .pick_task(pool, round, Purpose::BaselineHuman)
                    .ok_or(Error::EmptyRecords)?;
                let inst = data.tasks.get(task).expect("task ids come from the store");
                let outcomes = self.outcomes(round, inst)?;
                let ev = Evaluation {
                    task_id: Some(task),
                    instance: inst,
                    outcomes: outcomes.as_ref(),
                };
                let alg = self.evaluate(round, 0, &ev, true)?.reward;
                let human = if full.is_empty() {
                    None
                } else {
                    Some(self.evaluate(round, inst.n(), &ev, true)?.reward)
                };
                Ok((alg, human))
            }
        }
    }
}

impl Environment for MatchingEnv<'_> {
    fn play(&mut self, round: u64, b: usize, _rng: &mut SimRng) -> Result<RoundLog> {
        match self.source {
            HumanSource::Simulated(_) => {
                let inst = self.draw_instance(round)?;
                let outcomes = self.outcomes(round, &inst)?;
                let ev = Evaluation {
                    task_id: None,
                    instance: &inst,
                    outcomes: outcomes.as_ref(),
                };
                self.evaluate(round, b, &ev, false)
            }
            HumanSource::Replay(data) => {
                let candidates = data.records.tasks_with_b(b);
                let task = self
                    .pick_task(&candidates, round, Purpose::Instance)
                    .ok_or_else(|| Error::NoRecord {
                        task_id: "*".into(),
                        b,
                    })?;
                let inst = data.tasks.get(task).expect("records are checked against tasks");
                let outcomes = self.outcomes(round, inst)?;
                let ev = Evaluation {
                    task_id: Some(task),
                    instance: inst,
                    outcomes: outcomes.as_ref(),
                };
                self.evaluate(round, b, &ev, false)
            }
        }
    }
}

fn check_source(cfg: &ExperimentConfig, source: &HumanSource) -> Result<()> {
    if let HumanSource::Replay(data) = source {
        let have = data.records.deferral_values();
        if let Some(&b) = cfg.arms.iter().find(|b| !have.contains(b)) {
            return Err(Error::NoRecord {
                task_id: "*".into(),
                b,
            });
        }
    }
    Ok(())
}

/// Runs one realization.
pub fn run_realization(cfg: &ExperimentConfig, source: &HumanSource, realization: usize) -> Result<RealizationResult> {
    let r = realization as u64;
    let mut env = MatchingEnv::new(cfg, source, r);
    let mut unused = stream(cfg.seed, &[r, u64::MAX]);
    let run = run_ucb1(&mut env, &cfg.arms, cfg.horizon, cfg.bonus_scale, &mut unused)?;
    let mut alg_sum = 0.0;
    let mut human_sum = 0.0;
    let mut human_seen = true;
    for t in 0..cfg.horizon {
        let (a, h) = env.baselines(t)?;
        alg_sum += a;
        match h {
            Some(h) => human_sum += h,
            None => human_seen = false,
        }
    }
    let horizon = cfg.horizon as f64;
    let arms = run
        .state
        .arms()
        .iter()
        .map(|&b| Ok((b, (run.state.pulls(b)?, run.state.mean(b)?))))
        .collect::<Result<_>>()?;
    Ok(RealizationResult {
        realization,
        arms,
        baseline_algorithm: alg_sum / horizon,
        baseline_human: human_seen.then(|| human_sum / horizon),
        logs: run.logs,
    })
}

/// Runs all realizations of `cfg` with the human decisions of `source`.
pub fn run_experiment_with(cfg: &ExperimentConfig, source: &HumanSource) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    check_source(cfg, source)?;
    let realizations = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| run_realization(cfg, source, r))
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&cfg.arms, &realizations)?;
    Ok(ExperimentOutcome {
        summary,
        realizations,
    })
}

/// Loads the configured human source and runs the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let source = HumanSource::from_spec(&cfg.human)?;
    run_experiment_with(cfg, &source)
}

/// Averages per-realization arm means and baselines.
pub fn summarize(arms: &[usize], realizations: &[RealizationResult]) -> Result<ArmSummary> {
    if arms.is_empty() {
        return Err(Error::Config("arm set must not be empty".into()));
    }
    if realizations.is_empty() {
        return Err(Error::Config("no realizations to summarize".into()));
    }
    let mut sorted = arms.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let arm_stats = sorted
        .iter()
        .map(|&b| {
            let means: Vec<f64> = realizations
                .iter()
                .filter_map(|r| r.arms.get(&b).and_then(|&(_, m)| m))
                .collect();
            let pulls = realizations.iter().filter_map(|r| r.arms.get(&b)).map(|&(n, _)| n).sum();
            let s = Stat::from_samples(&means).unwrap_or(Stat {
                mean: f64::NAN,
                ci_low: f64::NAN,
                ci_high: f64::NAN,
                samples: 0,
            });
            ArmStat {
                arm: b,
                mean: s.mean,
                ci_low: s.ci_low,
                ci_high: s.ci_high,
                pulls,
            }
        })
        .collect();
    let alg: Vec<f64> = realizations.iter().map(|r| r.baseline_algorithm).collect();
    let human: Option<Vec<f64>> = realizations.iter().map(|r| r.baseline_human).collect();
    Ok(ArmSummary {
        arms: arm_stats,
        baseline_algorithm: Stat::from_samples(&alg).expect("non-empty"),
        baseline_human: human.as_deref().and_then(Stat::from_samples),
    })
}

/// Rewards of a fixed `b` over `count` rounds of realization 0.
pub fn simulate_fixed_b(
    cfg: &ExperimentConfig,
    source: &HumanSource,
    b: usize,
    count: u64,
) -> Result<(Stat, Vec<RoundLog>)> {
    if count == 0 {
        return Err(Error::Config("rollout count must be at least 1".into()));
    }
    if let HumanSource::Simulated(policy) = source {
        policy.validate()?;
    }
    cfg.generator.validate()?;
    let mut env = MatchingEnv::new(cfg, source, 0);
    let mut unused = stream(cfg.seed, &[0, u64::MAX]);
    let logs = (0..count)
        .map(|t| env.play(t, b, &mut unused))
        .collect::<Result<Vec<_>>>()?;
    let rewards: Vec<f64> = logs.iter().map(|l| l.reward).collect();
    Ok((Stat::from_samples(&rewards).expect("count > 0"), logs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(horizon: u64, realizations: usize) -> ExperimentConfig {
        ExperimentConfig {
            arms: vec![5, 10, 15, 20],
            horizon,
            realizations,
            seed: 11,
            ..ExperimentConfig::desk()
        }
    }

    #[test]
    fn stat_brackets_mean() {
        let s = Stat::from_samples(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((s.mean - 2.5).abs() < 1e-12);
        assert!(s.ci_low <= s.mean && s.mean <= s.ci_high);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((s.half_width() - Z95 * sd / 2.0).abs() < 1e-12);
        let one = Stat::from_samples(&[0.3]).unwrap();
        assert_eq!((one.ci_low, one.ci_high), (0.3, 0.3));
        assert!(Stat::from_samples(&[]).is_none());
    }

    #[test]
    fn single_sweep_means_equal_single_rewards() {
        let cfg = small(4, 1);
        let out = run_experiment(&cfg).unwrap();
        let logs = &out.realizations[0].logs;
        assert_eq!(logs.iter().map(|l| l.arm).collect::<Vec<_>>(), vec![5, 10, 15, 20]);
        for l in logs {
            let a = out.summary.arm(l.arm).unwrap();
            assert_eq!(a.mean, l.reward);
            assert_eq!(a.pulls, 1);
        }
    }

    #[test]
    fn rounds_share_instances_across_arms() {
        let cfg = small(10, 1);
        let src = HumanSource::Simulated(SimulatedHuman::Greedy);
        let mut env = MatchingEnv::new(&cfg, &src, 0);
        let mut rng = stream(0, &[]);
        // b = n at a round equals the human baseline of that round.
        let full = env.play(3, 20, &mut rng).unwrap();
        let (alg, human) = env.baselines(3).unwrap();
        assert_eq!(Some(full.reward), human);
        let zero = env.play(3, 0, &mut rng).unwrap();
        assert_eq!(zero.reward, alg);
    }

    #[test]
    fn deterministic_across_runs() {
        let cfg = small(30, 3);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.summary, b.summary);
        assert_eq!(a.realizations[2].logs, b.realizations[2].logs);
    }

    #[test]
    fn sampled_mode_logs_outcomes() {
        let mut cfg = small(8, 1);
        cfg.reward_mode = RewardMode::Sampled;
        let out = run_experiment(&cfg).unwrap();
        for l in &out.realizations[0].logs {
            let y = l.outcomes.as_ref().unwrap();
            assert_eq!(y.len(), l.alg_pairs.len() + l.human_pairs.len());
            assert_eq!(l.reward, y.iter().map(|&v| f64::from(v)).sum::<f64>());
        }
    }

    #[test]
    fn normalized_rewards_in_unit_interval() {
        let mut cfg = small(12, 1);
        cfg.normalize_reward = true;
        let out = run_experiment(&cfg).unwrap();
        assert!(out.realizations[0].logs.iter().all(|l| (0.0..=1.0).contains(&l.reward)));
    }

    #[test]
    fn fixed_b_rollouts() {
        let cfg = small(4, 1);
        let src = HumanSource::Simulated(SimulatedHuman::Greedy);
        let (s, logs) = simulate_fixed_b(&cfg, &src, 11, 25).unwrap();
        assert_eq!(logs.len(), 25);
        assert!(logs.iter().all(|l| l.alg_pairs.len() == 9 && l.human_pairs.len() == 11));
        assert!(s.mean > 0.0);
    }
}
