//! Matching instances and the maximum-weight imperfect matching problem.
//!
//! Given `n` individuals, `k` resources with capacities `c_r` and a weight
//! matrix `w`, the algorithmic policy for deferral count `b` picks exactly
//! `max(n - b, 0)` pairs, at most one resource per individual and at most
//! `c_r` individuals per resource, maximizing the summed weight.

mod brute;
mod instance;
mod solver;

pub use brute::{brute_force_matching, BRUTE_FORCE_MAX_K, BRUTE_FORCE_MAX_N};
pub use instance::{MatchInstance, ResourceSet, ScoreMatrix, Scores};
pub use solver::{max_weight_matching, solve_imperfect_matching};

use crate::error::{Error, Result};

/// A feasible set of (individual, resource) pairs.
///
/// Pairs are kept in the order they were decided. For solver output that is
/// ascending individual index; for human matchings it is click order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub objective: f64,
}

impl Matching {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a matching and computes its objective under `weights`.
    pub fn from_pairs(pairs: Vec<(usize, usize)>, weights: &ScoreMatrix) -> Self {
        let objective = pairs.iter().map(|&(i, r)| weights.get(i, r)).sum();
        Self { pairs, objective }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains_individual(&self, i: usize) -> bool {
        self.pairs.iter().any(|&(j, _)| j == i)
    }

    /// Checks the one-resource-per-individual and capacity constraints.
    pub fn check_feasible(&self, n: usize, capacities: &[u32]) -> Result<()> {
        let mut seen = vec![false; n];
        let mut used = vec![0u32; capacities.len()];
        for &(i, r) in &self.pairs {
            if i >= n || r >= capacities.len() {
                return Err(Error::InfeasibleMatching(format!(
                    "pair ({i}, {r}) out of range"
                )));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::InfeasibleMatching(format!(
                    "individual {i} assigned twice"
                )));
            }
            used[r] += 1;
            if used[r] > capacities[r] {
                return Err(Error::InfeasibleMatching(format!(
                    "resource {r} over capacity {}",
                    capacities[r]
                )));
            }
        }
        Ok(())
    }

    /// Concatenates two matchings over disjoint individuals.
    pub fn union(&self, other: &Matching) -> Result<Matching> {
        if let Some(&(i, _)) = other.pairs.iter().find(|&&(i, _)| self.contains_individual(i)) {
            return Err(Error::OverlappingMatchings(i));
        }
        let mut pairs = self.pairs.clone();
        pairs.extend_from_slice(&other.pairs);
        Ok(Matching {
            pairs,
            objective: self.objective + other.objective,
        })
    }
}

/// Individuals left unmatched and capacity left unused by a matching.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidualInstance {
    /// Ascending individual indices of the full instance.
    pub unmatched: Vec<usize>,
    pub remaining: Vec<u32>,
}

impl ResidualInstance {
    pub fn total_remaining(&self) -> usize {
        self.remaining.iter().map(|&c| c as usize).sum()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.unmatched.binary_search(&i).is_ok()
    }

    /// Checks that `m` only uses unmatched individuals and remaining capacity.
    pub fn check_feasible(&self, m: &Matching) -> Result<()> {
        let mut used = vec![0u32; self.remaining.len()];
        let mut seen = Vec::with_capacity(m.len());
        for &(i, r) in &m.pairs {
            if !self.contains(i) {
                return Err(Error::InfeasibleMatching(format!(
                    "individual {i} is not part of the residual"
                )));
            }
            if seen.contains(&i) {
                return Err(Error::InfeasibleMatching(format!(
                    "individual {i} assigned twice"
                )));
            }
            seen.push(i);
            let Some(slot) = used.get_mut(r) else {
                return Err(Error::InfeasibleMatching(format!("unknown resource {r}")));
            };
            *slot += 1;
            if *slot > self.remaining[r] {
                return Err(Error::InfeasibleMatching(format!(
                    "resource {r} over remaining capacity {}",
                    self.remaining[r]
                )));
            }
        }
        Ok(())
    }

    /// Residual left after additionally applying `m`.
    pub fn after(&self, m: &Matching) -> Result<ResidualInstance> {
        self.check_feasible(m)?;
        let mut remaining = self.remaining.clone();
        for &(_, r) in &m.pairs {
            remaining[r] -= 1;
        }
        let unmatched = self
            .unmatched
            .iter()
            .copied()
            .filter(|&i| !m.contains_individual(i))
            .collect();
        Ok(ResidualInstance {
            unmatched,
            remaining,
        })
    }
}

/// Individuals and capacities that `matching` leaves for the human.
pub fn residual(instance: &MatchInstance, matching: &Matching) -> Result<ResidualInstance> {
    let capacities = instance.resources().capacities();
    matching.check_feasible(instance.n(), capacities)?;
    let mut remaining = capacities.to_vec();
    let mut matched = vec![false; instance.n()];
    for &(i, r) in &matching.pairs {
        remaining[r] -= 1;
        matched[i] = true;
    }
    let unmatched = (0..instance.n()).filter(|&i| !matched[i]).collect();
    Ok(ResidualInstance {
        unmatched,
        remaining,
    })
}

/// Expected number of successes: the sum of `p_ir` over the pairs.
pub fn matching_utility(matching: &Matching, instance: &MatchInstance) -> Result<f64> {
    let p = instance.success_prob()?;
    Ok(matching.pairs.iter().map(|&(i, r)| p.get(i, r)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MatchInstance {
        MatchInstance::new(
            ResourceSet::with_capacities(vec![1, 1]).unwrap(),
            ScoreMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.8, 0.7]]).unwrap(),
            Some(ScoreMatrix::from_rows(vec![vec![0.9, 0.1], vec![0.8, 0.7]]).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn residual_of_empty_matching_is_the_full_instance() {
        let inst = toy();
        let res = residual(&inst, &Matching::empty()).unwrap();
        assert_eq!(res.unmatched, vec![0, 1]);
        assert_eq!(res.remaining, vec![1, 1]);
    }

    #[test]
    fn residual_of_full_matching_is_empty() {
        let inst = toy();
        let m = solve_imperfect_matching(&inst, Scores::Confidence, 0).unwrap();
        let res = residual(&inst, &m).unwrap();
        assert!(res.unmatched.is_empty());
        assert_eq!(res.total_remaining(), 0);
    }

    #[test]
    fn residual_rejects_infeasible_matching() {
        let inst = toy();
        let bad = Matching::from_pairs(vec![(0, 0), (1, 0)], inst.confidence());
        assert!(matches!(
            residual(&inst, &bad),
            Err(Error::InfeasibleMatching(_))
        ));
    }

    #[test]
    fn utility_sums_success_probabilities() {
        let inst = toy();
        assert_eq!(matching_utility(&Matching::empty(), &inst).unwrap(), 0.0);
        let m = Matching::from_pairs(vec![(0, 0), (1, 1)], inst.confidence());
        assert!((matching_utility(&m, &inst).unwrap() - 1.6).abs() < 1e-12);
    }

    #[test]
    fn utility_is_additive_over_disjoint_matchings() {
        let inst = toy();
        let a = Matching::from_pairs(vec![(0, 0)], inst.success_prob().unwrap());
        let b = Matching::from_pairs(vec![(1, 1)], inst.success_prob().unwrap());
        let u = matching_utility(&a.union(&b).unwrap(), &inst).unwrap();
        let sum = matching_utility(&a, &inst).unwrap() + matching_utility(&b, &inst).unwrap();
        assert!((u - sum).abs() < 1e-12);
        assert!(matches!(a.union(&a), Err(Error::OverlappingMatchings(0))));
    }

    #[test]
    fn utility_requires_success_probabilities() {
        let inst = MatchInstance::new(
            ResourceSet::with_capacities(vec![1]).unwrap(),
            ScoreMatrix::from_rows(vec![vec![0.5]]).unwrap(),
            None,
        )
        .unwrap();
        assert!(matches!(
            matching_utility(&Matching::empty(), &inst),
            Err(Error::MissingSuccessProb)
        ));
    }
}
