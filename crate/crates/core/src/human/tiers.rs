use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Bottom,
    Mid,
    Top,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TierMap {
    pub tiers: BTreeMap<String, Tier>,
    pub mean_utility: BTreeMap<String, f64>,
}

impl TierMap {
    /// Participant counts as (bottom, mid, top).
    pub fn sizes(&self) -> (usize, usize, usize) {
        let count = |t: Tier| self.tiers.values().filter(|&&x| x == t).count();
        (count(Tier::Bottom), count(Tier::Mid), count(Tier::Top))
    }

    pub fn tier_of(&self, participant: &str) -> Option<Tier> {
        self.tiers.get(participant).copied()
    }
}

/// Mean utility per participant from per-record `(participant, utility)`.
pub fn mean_utility_by_participant(utilities: &[(String, f64)]) -> BTreeMap<String, f64> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for (pid, u) in utilities {
        let e = acc.entry(pid.clone()).or_default();
        e.0 += u;
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(pid, (sum, n))| (pid, sum / n as f64))
        .collect()
}

/// Ranks participants by mean utility and splits them 40/20/40 into
/// bottom, mid and top tiers. The bottom and top groups each take
/// `floor(0.4 N)` participants. Equal means are ordered by participant id,
/// so among tied participants the smaller ids land in the lower tier.
pub fn stratify_participants(utilities: &[(String, f64)]) -> Result<TierMap> {
    if utilities.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let means = mean_utility_by_participant(utilities);
    let mut ranked: Vec<(&String, f64)> = means.iter().map(|(p, &u)| (p, u)).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    let n = ranked.len();
    let outer = 4 * n / 10;
    let tiers = ranked
        .iter()
        .enumerate()
        .map(|(rank, (pid, _))| {
            let tier = if rank < outer {
                Tier::Bottom
            } else if rank >= n - outer {
                Tier::Top
            } else {
                Tier::Mid
            };
            ((*pid).clone(), tier)
        })
        .collect();
    Ok(TierMap {
        tiers,
        mean_utility: means,
    })
}
