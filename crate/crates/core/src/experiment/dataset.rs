use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bandit::{reward, RewardMode};
use crate::error::{Error, Result};
use crate::human::{
    complete_matching, filter_by_incompleteness, load_records, load_tasks, stratify_participants,
    CompletionStrategy, HumanDecisionRecord, RecordStore, TaskStore, Tier, TierMap,
};
use crate::matching::{residual, solve_imperfect_matching, Scores};
use crate::rng::seeded;

use super::Stat;

/// Recorded tasks and decisions, validated against each other.
#[derive(Debug, Clone)]
pub struct ReplayData {
    pub tasks: TaskStore,
    pub records: RecordStore,
}

impl ReplayData {
    pub fn load(tasks: &Path, records: &Path, tier: Option<Tier>, filter_u: Option<usize>) -> Result<Self> {
        let tasks = load_tasks(BufReader::new(File::open(tasks)?))?;
        let records = load_records(BufReader::new(File::open(records)?))?;
        Self::from_parts(tasks, records, tier, filter_u)
    }

    /// Checks every record against its task, then applies the
    /// incompleteness filter and, if requested, keeps a single tier
    /// (tiers are ranked after filtering).
    pub fn from_parts(
        tasks: TaskStore,
        records: Vec<HumanDecisionRecord>,
        tier: Option<Tier>,
        filter_u: Option<usize>,
    ) -> Result<Self> {
        let utilities = record_utilities(&tasks, &records)?;
        let mut kept: Vec<(HumanDecisionRecord, f64)> = records.into_iter().zip(utilities).collect();
        if let Some(u) = filter_u {
            let plain: Vec<HumanDecisionRecord> = kept.iter().map(|(r, _)| r.clone()).collect();
            let survivors: std::collections::BTreeSet<String> = filter_by_incompleteness(&plain, u)
                .into_iter()
                .map(|r| r.participant_id)
                .collect();
            kept.retain(|(r, _)| survivors.contains(&r.participant_id));
        }
        if let Some(tier) = tier {
            let tiers = stratify_participants(&per_participant(&kept))?;
            kept.retain(|(r, _)| tiers.tier_of(&r.participant_id) == Some(tier));
        }
        if kept.is_empty() {
            return Err(Error::EmptyRecords);
        }
        Ok(Self {
            tasks,
            records: RecordStore::new(kept.into_iter().map(|(r, _)| r).collect()),
        })
    }
}

fn per_participant(kept: &[(HumanDecisionRecord, f64)]) -> Vec<(String, f64)> {
    kept.iter().map(|(r, u)| (r.participant_id.clone(), *u)).collect()
}

/// Expected utility of each record: the algorithm's matching on the
/// confidence scores for the other `n - b` patients plus the recorded human
/// matching, unassigned patients left out (except the forced single fill).
pub fn record_utilities(tasks: &TaskStore, records: &[HumanDecisionRecord]) -> Result<Vec<f64>> {
    let mut rng = seeded(0);
    records
        .iter()
        .enumerate()
        .map(|(idx, rec)| {
            let line = idx + 1;
            let wrap = |e: Error| Error::Dataset {
                line,
                message: e.to_string(),
            };
            let inst = tasks.get(&rec.task_id).ok_or_else(|| Error::Dataset {
                line,
                message: format!("unknown task {}", rec.task_id),
            })?;
            if rec.b > inst.n() {
                return Err(Error::Dataset {
                    line,
                    message: format!("b={} exceeds task size {}", rec.b, inst.n()),
                });
            }
            let p = inst.success_prob()?;
            let alg = solve_imperfect_matching(inst, Scores::Confidence, rec.b).map_err(wrap)?;
            let res = residual(inst, &alg)?;
            let human = rec.to_matching(p).map_err(wrap)?;
            res.check_feasible(&human).map_err(wrap)?;
            let done = complete_matching(&human, &res, CompletionStrategy::LeaveUnassigned, p, &mut rng)?;
            reward(&alg, &done, RewardMode::Expected, p, None, None)
        })
        .collect()
}

/// Per-record summary of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetAnalysis {
    pub records_total: usize,
    pub records_kept: usize,
    pub participants: usize,
    /// Tier group sizes (bottom, mid, top).
    pub tier_sizes: (usize, usize, usize),
    /// Mean record utility for each `b`.
    pub per_b: Vec<(usize, Stat)>,
    #[serde(skip)]
    pub tiers: TierMap,
}

impl DatasetAnalysis {
    /// The `b` with the highest mean utility, smaller `b` on ties.
    pub fn best_b(&self) -> Option<usize> {
        self.per_b
            .iter()
            .fold(None::<(usize, f64)>, |best, (b, s)| match best {
                Some((_, m)) if m >= s.mean => best,
                _ => Some((*b, s.mean)),
            })
            .map(|(b, _)| b)
    }
}

/// Filters by incompleteness (if `filter_u` is set), ranks the remaining
/// participants into tiers and averages record utilities per `b`.
pub fn analyze_dataset(
    tasks: &TaskStore,
    records: &[HumanDecisionRecord],
    filter_u: Option<usize>,
) -> Result<DatasetAnalysis> {
    let kept = match filter_u {
        Some(u) => filter_by_incompleteness(records, u),
        None => records.to_vec(),
    };
    if kept.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let utilities = record_utilities(tasks, &kept)?;
    let pairs: Vec<(HumanDecisionRecord, f64)> = kept.into_iter().zip(utilities).collect();
    let tiers = stratify_participants(&per_participant(&pairs))?;
    let mut by_b: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (r, u) in &pairs {
        by_b.entry(r.b).or_default().push(*u);
    }
    Ok(DatasetAnalysis {
        records_total: records.len(),
        records_kept: pairs.len(),
        participants: tiers.tiers.len(),
        tier_sizes: tiers.sizes(),
        per_b: by_b
            .into_iter()
            .filter_map(|(b, v)| Stat::from_samples(&v).map(|s| (b, s)))
            .collect(),
        tiers,
    })
}
