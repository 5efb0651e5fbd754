//! UCB1 over the deferral count `b`.
//!
//! Each arm is a value of `b`. After one forced pull per arm (in arm order),
//! the arm maximizing `μ(b) + c·sqrt(2 ln T / ν(b))` is played, where `T` is
//! the horizon, `ν(b)` the pull count, `μ(b)` the mean reward and `c` a
//! bonus multiplier (1 for textbook UCB1). Ties go to the smaller `b`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{Matching, ScoreMatrix};
use crate::rng::SimRng;

/// Per-arm reward sums and pull counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    arms: Vec<usize>,
    cumulative: Vec<f64>,
    pulls: Vec<u64>,
    horizon: u64,
    bonus_scale: f64,
}

impl ArmState {
    /// `arms` are distinct deferral values, kept in ascending order.
    pub fn new(arms: &[usize], horizon: u64) -> Result<Self> {
        Self::with_bonus_scale(arms, horizon, 1.0)
    }

    pub fn with_bonus_scale(arms: &[usize], horizon: u64, bonus_scale: f64) -> Result<Self> {
        if arms.is_empty() {
            return Err(Error::Config("arm set must not be empty".into()));
        }
        if horizon == 0 {
            return Err(Error::Config("horizon must be positive".into()));
        }
        if !(bonus_scale >= 0.0 && bonus_scale.is_finite()) {
            return Err(Error::Config(format!("bonus scale must be >= 0, got {bonus_scale}")));
        }
        let mut sorted = arms.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != arms.len() {
            return Err(Error::Config("arm set contains duplicates".into()));
        }
        Ok(Self {
            cumulative: vec![0.0; sorted.len()],
            pulls: vec![0; sorted.len()],
            arms: sorted,
            horizon,
            bonus_scale,
        })
    }

    pub fn arms(&self) -> &[usize] {
        &self.arms
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    fn index_of(&self, b: usize) -> Result<usize> {
        self.arms.binary_search(&b).map_err(|_| Error::UnknownArm(b))
    }

    pub fn pulls(&self, b: usize) -> Result<u64> {
        Ok(self.pulls[self.index_of(b)?])
    }

    pub fn cumulative_reward(&self, b: usize) -> Result<f64> {
        Ok(self.cumulative[self.index_of(b)?])
    }

    pub fn rounds_played(&self) -> u64 {
        self.pulls.iter().sum()
    }

    /// `γ(b) / ν(b)`, undefined before the first pull.
    pub fn mean(&self, b: usize) -> Result<Option<f64>> {
        let j = self.index_of(b)?;
        Ok((self.pulls[j] > 0).then(|| self.cumulative[j] / self.pulls[j] as f64))
    }

    /// `c·sqrt(2 ln T / ν(b))`, undefined before the first pull.
    pub fn bonus(&self, b: usize) -> Result<Option<f64>> {
        let j = self.index_of(b)?;
        Ok((self.pulls[j] > 0).then(|| self.bonus_at(j)))
    }

    fn bonus_at(&self, j: usize) -> f64 {
        self.bonus_scale * (2.0 * (self.horizon as f64).ln() / self.pulls[j] as f64).sqrt()
    }

    /// The next arm to play.
    pub fn select_arm(&self) -> usize {
        if let Some(j) = self.pulls.iter().position(|&n| n == 0) {
            return self.arms[j];
        }
        let mut best = 0;
        let mut best_index = f64::NEG_INFINITY;
        for j in 0..self.arms.len() {
            let index = self.cumulative[j] / self.pulls[j] as f64 + self.bonus_at(j);
            if index > best_index {
                best_index = index;
                best = j;
            }
        }
        self.arms[best]
    }

    pub fn update(&mut self, b: usize, reward: f64) -> Result<()> {
        let j = self.index_of(b)?;
        self.cumulative[j] += reward;
        self.pulls[j] += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Sum of `p_ir` over the matched pairs.
    #[default]
    Expected,
    /// Sum of realized Bernoulli outcomes `y_i(r)`.
    Sampled,
}

/// Realized outcomes `y_i(r)`, one per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeMatrix {
    cols: usize,
    data: Vec<u8>,
}

impl OutcomeMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != rows * cols || data.iter().any(|&y| y > 1) {
            return Err(Error::InvalidInstance("outcome matrix must be rows x cols of 0/1".into()));
        }
        Ok(Self { cols, data })
    }

    /// Draws `y_ir ~ Bernoulli(p_ir)` for every cell, row-major.
    pub fn sample(p: &ScoreMatrix, rng: &mut SimRng) -> Self {
        let data = p
            .as_slice()
            .iter()
            .map(|&q| u8::from(rng.random::<f64>() < q))
            .collect();
        Self {
            cols: p.cols(),
            data,
        }
    }

    pub fn get(&self, i: usize, r: usize) -> u8 {
        self.data[i * self.cols + r]
    }
}

/// Reward of one round: algorithmic plus human matching, under `mode`.
/// `normalize_by` divides the total (e.g. by `n` for rewards in `[0, 1]`).
pub fn reward(
    alg: &Matching,
    human: &Matching,
    mode: RewardMode,
    success_prob: &ScoreMatrix,
    outcomes: Option<&OutcomeMatrix>,
    normalize_by: Option<usize>,
) -> Result<f64> {
    if let Some(&(i, _)) = human.pairs.iter().find(|&&(i, _)| alg.contains_individual(i)) {
        return Err(Error::OverlappingMatchings(i));
    }
    let pairs = alg.pairs.iter().chain(&human.pairs);
    let total: f64 = match mode {
        RewardMode::Expected => pairs.map(|&(i, r)| success_prob.get(i, r)).sum(),
        RewardMode::Sampled => {
            let y = outcomes.ok_or(Error::MissingOutcomes)?;
            pairs.map(|&(i, r)| f64::from(y.get(i, r))).sum()
        }
    };
    Ok(match normalize_by {
        Some(n) if n > 0 => total / n as f64,
        _ => total,
    })
}

/// One played round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: u64,
    pub arm: usize,
    pub reward: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alg_pairs: Vec<(usize, usize)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub human_pairs: Vec<(usize, usize)>,
    /// Realized outcomes of the alg then human pairs, in sampled mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcomes: Option<Vec<u8>>,
}

impl RoundLog {
    pub fn reward_only(round: u64, arm: usize, reward: f64) -> Self {
        Self {
            round,
            arm,
            reward,
            task_id: None,
            alg_pairs: Vec::new(),
            human_pairs: Vec::new(),
            outcomes: None,
        }
    }
}

/// Something that can be played at arm `b`.
pub trait Environment {
    fn play(&mut self, round: u64, b: usize, rng: &mut SimRng) -> Result<RoundLog>;
}

/// Independent Bernoulli arms.
#[derive(Debug, Clone)]
pub struct BernoulliBandit {
    means: BTreeMap<usize, f64>,
}

impl BernoulliBandit {
    pub fn new(means: BTreeMap<usize, f64>) -> Result<Self> {
        if means.values().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::Config("Bernoulli means must lie in [0, 1]".into()));
        }
        Ok(Self { means })
    }

    /// Arms `0..means.len()`.
    pub fn from_means(means: &[f64]) -> Result<Self> {
        Self::new(means.iter().copied().enumerate().collect())
    }

    pub fn means(&self) -> &BTreeMap<usize, f64> {
        &self.means
    }

    pub fn arms(&self) -> Vec<usize> {
        self.means.keys().copied().collect()
    }
}

impl Environment for BernoulliBandit {
    fn play(&mut self, round: u64, b: usize, rng: &mut SimRng) -> Result<RoundLog> {
        let p = *self.means.get(&b).ok_or(Error::UnknownArm(b))?;
        let y = rng.random::<f64>() < p;
        Ok(RoundLog::reward_only(round, b, f64::from(u8::from(y))))
    }
}

#[derive(Debug, Clone)]
pub struct UcbRun {
    pub state: ArmState,
    pub logs: Vec<RoundLog>,
}

/// Plays UCB1 for `horizon` rounds.
pub fn run_ucb1<E: Environment + ?Sized>(
    env: &mut E,
    arms: &[usize],
    horizon: u64,
    bonus_scale: f64,
    rng: &mut SimRng,
) -> Result<UcbRun> {
    let mut state = ArmState::with_bonus_scale(arms, horizon, bonus_scale)?;
    if (horizon as usize) < arms.len() {
        return Err(Error::Config(format!(
            "horizon {horizon} is shorter than the {} arms",
            arms.len()
        )));
    }
    let mut logs = Vec::with_capacity(horizon as usize);
    for t in 0..horizon {
        let b = state.select_arm();
        let log = env.play(t, b, rng)?;
        state.update(b, log.reward)?;
        logs.push(log);
    }
    Ok(UcbRun { state, logs })
}

/// Cumulative regret `t · max_b m(b) − Σ_{s ≤ t} m(b_s)` after each round.
pub fn empirical_regret(logs: &[RoundLog], true_means: &BTreeMap<usize, f64>) -> Result<Vec<f64>> {
    let best = true_means
        .values()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut acc = 0.0;
    logs.iter()
        .map(|log| {
            let m = true_means.get(&log.arm).ok_or(Error::UnknownArm(log.arm))?;
            acc += best - m;
            Ok(acc)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn initialization_sweep_in_arm_order() {
        let mut s = ArmState::new(&(5..=20).collect::<Vec<_>>(), 100).unwrap();
        for b in 5..=20 {
            assert_eq!(s.select_arm(), b);
            s.update(b, 0.0).unwrap();
        }
        assert!((5..=20).all(|b| s.pulls(b).unwrap() == 1));
    }

    #[test]
    fn equal_bonuses_pick_higher_mean() {
        let mut s = ArmState::new(&[0, 1], 100).unwrap();
        for _ in 0..10 {
            s.update(0, 0.9).unwrap();
            s.update(1, 0.5).unwrap();
        }
        assert_eq!(s.select_arm(), 0);
    }

    #[test]
    fn large_bonus_beats_higher_mean() {
        let mut s = ArmState::new(&[0, 1], 1000).unwrap();
        for _ in 0..100 {
            s.update(0, 0.6).unwrap();
        }
        s.update(1, 0.5).unwrap();
        let bonus = s.bonus(1).unwrap().unwrap();
        assert!((bonus - 3.716_922).abs() < 1e-5, "{bonus}");
        let idx0 = s.mean(0).unwrap().unwrap() + s.bonus(0).unwrap().unwrap();
        let idx1 = 0.5 + bonus;
        assert!(idx1 > idx0);
        assert_eq!(s.select_arm(), 1);
    }

    #[test]
    fn ties_go_to_smaller_arm() {
        let mut s = ArmState::new(&[3, 7], 10).unwrap();
        s.update(7, 1.0).unwrap();
        s.update(3, 1.0).unwrap();
        assert_eq!(s.select_arm(), 3);
    }

    #[test]
    fn unplayed_arm_has_no_mean() {
        let s = ArmState::new(&[1, 2], 10).unwrap();
        assert_eq!(s.mean(1).unwrap(), None);
        assert_eq!(s.cumulative_reward(2).unwrap(), 0.0);
        assert!(matches!(s.mean(9), Err(Error::UnknownArm(9))));
    }

    #[test]
    fn rejects_bad_arm_sets() {
        assert!(ArmState::new(&[], 10).is_err());
        assert!(ArmState::new(&[1, 1], 10).is_err());
        assert!(ArmState::new(&[1], 0).is_err());
    }

    #[test]
    fn reward_modes() {
        let p = ScoreMatrix::filled(4, 2, 1.0).unwrap();
        let empty = Matching::empty();
        assert_eq!(reward(&empty, &empty, RewardMode::Expected, &p, None, None).unwrap(), 0.0);

        let alg = Matching::from_pairs(vec![(0, 0), (1, 1)], &p);
        let human = Matching::from_pairs(vec![(2, 0)], &p);
        let y = OutcomeMatrix::sample(&p, &mut seeded(0));
        assert_eq!(
            reward(&alg, &human, RewardMode::Sampled, &p, Some(&y), None).unwrap(),
            3.0
        );
        assert!(matches!(
            reward(&alg, &human, RewardMode::Sampled, &p, None, None),
            Err(Error::MissingOutcomes)
        ));
        assert_eq!(
            reward(&alg, &human, RewardMode::Expected, &p, None, Some(4)).unwrap(),
            0.75
        );
        assert!(matches!(
            reward(&alg, &alg, RewardMode::Expected, &p, None, None),
            Err(Error::OverlappingMatchings(0))
        ));
    }

    #[test]
    fn expected_reward_is_additive() {
        let p = ScoreMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.3, 0.8]]).unwrap();
        let alg = Matching::from_pairs(vec![(0, 0)], &p);
        let human = Matching::from_pairs(vec![(1, 1)], &p);
        let r = reward(&alg, &human, RewardMode::Expected, &p, None, None).unwrap();
        assert!((r - 1.7).abs() < 1e-12);
    }

    #[test]
    fn horizon_equal_to_arm_count_pulls_each_once() {
        let mut env = BernoulliBandit::from_means(&[0.1, 0.5, 0.9]).unwrap();
        let arms = env.arms();
        let run = run_ucb1(&mut env, &arms, 3, 1.0, &mut seeded(0)).unwrap();
        assert_eq!(run.logs.iter().map(|l| l.arm).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(run_ucb1(&mut env, &[0, 1, 2], 2, 1.0, &mut seeded(0)).is_err());
    }

    #[test]
    fn regret_traces() {
        let means: BTreeMap<usize, f64> = [(0, 0.5), (1, 0.8)].into_iter().collect();
        let best: Vec<RoundLog> = (0..5).map(|t| RoundLog::reward_only(t, 1, 1.0)).collect();
        assert!(empirical_regret(&best, &means).unwrap().iter().all(|&r| r == 0.0));
        let worst: Vec<RoundLog> = (0..5).map(|t| RoundLog::reward_only(t, 0, 0.0)).collect();
        let trace = empirical_regret(&worst, &means).unwrap();
        for (t, r) in trace.iter().enumerate() {
            assert!((r - 0.3 * (t + 1) as f64).abs() < 1e-12);
        }
        let unknown = vec![RoundLog::reward_only(0, 7, 0.0)];
        assert!(matches!(empirical_regret(&unknown, &means), Err(Error::UnknownArm(7))));
    }

    #[test]
    fn single_arm_mean_concentrates() {
        let mut env = BernoulliBandit::from_means(&[0.3]).unwrap();
        let t = 4000;
        let run = run_ucb1(&mut env, &[0], t, 1.0, &mut seeded(8)).unwrap();
        assert_eq!(run.state.pulls(0).unwrap(), t);
        let mu = run.state.mean(0).unwrap().unwrap();
        let sd = (0.3f64 * 0.7).sqrt();
        assert!((mu - 0.3).abs() < 3.0 * sd / (t as f64).sqrt());
    }
}
