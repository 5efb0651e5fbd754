use super::{MatchInstance, Matching, Scores};
use crate::error::{Error, Result};

pub const BRUTE_FORCE_MAX_N: usize = 8;
pub const BRUTE_FORCE_MAX_K: usize = 4;

/// Exhaustive reference solver for small instances.
///
/// Enumerates every assignment of each individual to a resource or to
/// nothing, keeps those with exactly `max(n - b, 0)` pairs that respect
/// capacities, and returns the best one. Among optimal matchings (within
/// 1e-12) the lexicographically smallest sorted pair list wins.
pub fn brute_force_matching(instance: &MatchInstance, which: Scores, b: usize) -> Result<Matching> {
    let (n, k) = (instance.n(), instance.k());
    if n > BRUTE_FORCE_MAX_N || k > BRUTE_FORCE_MAX_K {
        return Err(Error::SizeLimit {
            n,
            k,
            max_n: BRUTE_FORCE_MAX_N,
            max_k: BRUTE_FORCE_MAX_K,
        });
    }
    let weights = instance.scores(which)?;
    let target = n.saturating_sub(b);
    let capacity = instance.resources().total_capacity();
    if target > capacity {
        return Err(Error::Infeasible {
            required: target,
            capacity,
        });
    }

    struct Search<'a> {
        weights: &'a crate::matching::ScoreMatrix,
        remaining: Vec<u32>,
        current: Vec<(usize, usize)>,
        best: Option<(f64, Vec<(usize, usize)>)>,
        n: usize,
        target: usize,
    }

    impl Search<'_> {
        // Resources are tried in ascending order before "unassigned", so
        // candidates arrive in lexicographic order of their pair lists.
        fn visit(&mut self, i: usize, value: f64) {
            let placed = self.current.len();
            if placed > self.target || placed + (self.n - i) < self.target {
                return;
            }
            if i == self.n {
                if self.best.as_ref().is_none_or(|(v, _)| value > v + 1e-12) {
                    self.best = Some((value, self.current.clone()));
                }
                return;
            }
            for r in 0..self.remaining.len() {
                if self.remaining[r] == 0 {
                    continue;
                }
                self.remaining[r] -= 1;
                self.current.push((i, r));
                self.visit(i + 1, value + self.weights.get(i, r));
                self.current.pop();
                self.remaining[r] += 1;
            }
            self.visit(i + 1, value);
        }
    }

    let mut search = Search {
        weights,
        remaining: instance.resources().capacities().to_vec(),
        current: Vec::with_capacity(target),
        best: None,
        n,
        target,
    };
    search.visit(0, 0.0);
    let (_, pairs) = search.best.ok_or(Error::Infeasible {
        required: target,
        capacity,
    })?;
    Ok(Matching::from_pairs(pairs, weights))
}
