//! Human decisions on the residual instance.
//!
//! The human policy is unknown in general; this module provides simulated
//! families (greedy on success scores, greedy on noisy scores, and a
//! time-budgeted variant), replay of recorded decisions, completion of
//! partial matchings, and tier stratification of participants.

mod records;
mod tiers;

pub use records::{
    filter_by_incompleteness, load_records, load_tasks, replay_human, write_record, write_tasks,
    Assignment, HumanDecisionRecord, RecordStore, TaskEntry, TaskStore,
};
pub use tiers::{mean_utility_by_participant, stratify_participants, Tier, TierMap};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{Matching, ResidualInstance, ScoreMatrix};
use crate::rng::SimRng;

/// Greedy on `scores`: repeatedly takes the highest-scoring open
/// (patient, slot) cell, ties to the smaller (patient, slot). Objective is
/// measured on `utility`.
fn greedy_on(
    residual: &ResidualInstance,
    scores: &dyn Fn(usize, usize) -> f64,
    utility: &ScoreMatrix,
) -> Matching {
    let mut remaining = residual.remaining.clone();
    let mut open: Vec<usize> = residual.unmatched.clone();
    let mut pairs = Vec::with_capacity(open.len());
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for (slot, &i) in open.iter().enumerate() {
            for (r, &cap) in remaining.iter().enumerate() {
                if cap == 0 {
                    continue;
                }
                let s = scores(i, r);
                if best.is_none_or(|(v, _, _)| s > v) {
                    best = Some((s, slot, r));
                }
            }
        }
        let Some((_, slot, r)) = best else { break };
        pairs.push((open.remove(slot), r));
        remaining[r] -= 1;
    }
    Matching::from_pairs(pairs, utility)
}

/// Greedy assignment on the true success scores.
pub fn greedy_human(residual: &ResidualInstance, success_prob: &ScoreMatrix) -> Matching {
    greedy_on(residual, &|i, r| success_prob.get(i, r), success_prob)
}

/// Greedy on success scores perturbed once per cell by `N(0, sigma^2)`.
///
/// Noise is drawn in row-major order over (unmatched patient, slot). With
/// `sigma == 0` no randomness is consumed and the result equals
/// [`greedy_human`].
pub fn noisy_greedy_human(
    residual: &ResidualInstance,
    success_prob: &ScoreMatrix,
    sigma: f64,
    rng: &mut SimRng,
) -> Matching {
    if sigma == 0.0 {
        return greedy_human(residual, success_prob);
    }
    let k = success_prob.cols();
    let mut noisy = vec![0.0; success_prob.rows() * k];
    for &i in &residual.unmatched {
        for r in 0..k {
            let z: f64 = rng.sample(StandardNormal);
            noisy[i * k + r] = success_prob.get(i, r) + sigma * z;
        }
    }
    greedy_on(residual, &|i, r| noisy[i * k + r], success_prob)
}

/// The first `budget` decisions of `base`, in decision order. Models a
/// human who runs out of time.
pub fn truncated_human(base: &Matching, budget: usize, success_prob: &ScoreMatrix) -> Matching {
    if budget >= base.len() {
        return base.clone();
    }
    Matching::from_pairs(base.pairs[..budget].to_vec(), success_prob)
}

/// A simulated human decision maker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SimulatedHuman {
    Greedy,
    NoisyGreedy {
        sigma: f64,
    },
    /// Noisy greedy that stops after `floor(time_budget / seconds_per_decision)`
    /// decisions.
    CapacityLimited {
        #[serde(default)]
        sigma: f64,
        seconds_per_decision: f64,
        #[serde(default = "default_time_budget")]
        time_budget: f64,
    },
}

fn default_time_budget() -> f64 {
    120.0
}

impl SimulatedHuman {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SimulatedHuman::Greedy => Ok(()),
            SimulatedHuman::NoisyGreedy { sigma } => check_sigma(sigma),
            SimulatedHuman::CapacityLimited {
                sigma,
                seconds_per_decision,
                time_budget,
            } => {
                check_sigma(sigma)?;
                if !(seconds_per_decision > 0.0 && time_budget > 0.0) {
                    return Err(Error::Config(
                        "capacity-limited human needs positive decision time and budget".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Decisions made before the time budget runs out, if limited.
    pub fn decision_budget(&self) -> Option<usize> {
        match *self {
            SimulatedHuman::CapacityLimited {
                seconds_per_decision,
                time_budget,
                ..
            } => Some((time_budget / seconds_per_decision).floor() as usize),
            _ => None,
        }
    }

    /// Produces a (possibly partial) matching on the residual.
    pub fn decide(&self, residual: &ResidualInstance, success_prob: &ScoreMatrix, rng: &mut SimRng) -> Matching {
        match *self {
            SimulatedHuman::Greedy => greedy_human(residual, success_prob),
            SimulatedHuman::NoisyGreedy { sigma } => {
                noisy_greedy_human(residual, success_prob, sigma, rng)
            }
            SimulatedHuman::CapacityLimited { sigma, .. } => {
                let full = noisy_greedy_human(residual, success_prob, sigma, rng);
                let budget = self.decision_budget().unwrap_or(usize::MAX);
                truncated_human(&full, budget, success_prob)
            }
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("noise scale must be finite and >= 0, got {sigma}")))
    }
}

/// What to do with patients a human left unassigned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionStrategy {
    /// Keep the partial matching; unassigned patients contribute nothing.
    LeaveUnassigned,
    /// Assign each unassigned patient, in index order, to a uniformly random
    /// unit of remaining capacity.
    #[default]
    RandomFill,
}

/// Completes a partial human matching on `residual`.
///
/// Under both strategies, a single unassigned patient facing a single open
/// slot is assigned to it.
pub fn complete_matching(
    partial: &Matching,
    residual: &ResidualInstance,
    strategy: CompletionStrategy,
    success_prob: &ScoreMatrix,
    rng: &mut SimRng,
) -> Result<Matching> {
    let left = residual.after(partial)?;
    let mut pairs = partial.pairs.clone();
    let open: Vec<usize> = (0..left.remaining.len()).filter(|&r| left.remaining[r] > 0).collect();
    match (left.unmatched.as_slice(), open.as_slice()) {
        ([], _) => {}
        (&[i], &[r]) => pairs.push((i, r)),
        (unmatched, _) => {
            if strategy == CompletionStrategy::RandomFill {
                if left.total_remaining() < unmatched.len() {
                    return Err(Error::Infeasible {
                        required: unmatched.len(),
                        capacity: left.total_remaining(),
                    });
                }
                let mut units: Vec<usize> = left
                    .remaining
                    .iter()
                    .enumerate()
                    .flat_map(|(r, &c)| std::iter::repeat_n(r, c as usize))
                    .collect();
                for &i in unmatched {
                    let pick = rng.random_range(0..units.len());
                    pairs.push((i, units.swap_remove(pick)));
                }
            }
        }
    }
    Ok(Matching::from_pairs(pairs, success_prob))
}
