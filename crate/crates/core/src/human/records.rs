//! Recorded human decisions.
//!
//! Records are JSON lines, one per participant-task:
//!
//! ```json
//! {"participant_id":"p0007","task_id":"t12","b":11,
//!  "assignments":[{"individual":4,"resource":2,"elapsed_ms":1530}],
//!  "completed":false}
//! ```
//!
//! `individual` and `resource` index the full task instance. A record is
//! complete exactly when it holds `b` assignments. Task instances live in a
//! separate JSON file, `{"tasks":[{"task_id":"t12","instance":{...}}]}`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{MatchInstance, Matching, ScoreMatrix};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assignment {
    pub individual: usize,
    pub resource: usize,
    /// Milliseconds since the task was shown.
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanDecisionRecord {
    pub participant_id: String,
    pub task_id: String,
    pub b: usize,
    pub assignments: Vec<Assignment>,
    pub completed: bool,
}

impl HumanDecisionRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.participant_id.is_empty() || self.task_id.is_empty() {
            return Err("participant_id and task_id must be non-empty".into());
        }
        if self.assignments.len() > self.b {
            return Err(format!(
                "{} assignments exceed b={}",
                self.assignments.len(),
                self.b
            ));
        }
        let mut seen = BTreeSet::new();
        if let Some(a) = self.assignments.iter().find(|a| !seen.insert(a.individual)) {
            return Err(format!("individual {} assigned twice", a.individual));
        }
        if self.completed != (self.assignments.len() == self.b) {
            return Err(format!(
                "completed={} inconsistent with {} of {} assignments",
                self.completed,
                self.assignments.len(),
                self.b
            ));
        }
        Ok(())
    }

    /// Patients left without a slot.
    pub fn unassigned(&self) -> usize {
        self.b - self.assignments.len()
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        self.assignments.iter().map(|a| (a.individual, a.resource)).collect()
    }

    pub fn to_matching(&self, success_prob: &ScoreMatrix) -> Result<Matching> {
        if let Some(a) = self
            .assignments
            .iter()
            .find(|a| a.individual >= success_prob.rows() || a.resource >= success_prob.cols())
        {
            return Err(Error::InfeasibleMatching(format!(
                "record {}/{} references ({}, {}) outside the task",
                self.participant_id, self.task_id, a.individual, a.resource
            )));
        }
        Ok(Matching::from_pairs(self.pairs(), success_prob))
    }
}

/// Reads JSON-lines records. Blank lines are skipped; any malformed or
/// inconsistent line fails with its 1-based line number.
pub fn load_records<R: BufRead>(reader: R) -> Result<Vec<HumanDecisionRecord>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: HumanDecisionRecord = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            line: line_no,
            message: e.to_string(),
        })?;
        record.validate().map_err(|message| Error::Dataset {
            line: line_no,
            message,
        })?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_record<W: Write>(mut writer: W, record: &HumanDecisionRecord) -> Result<()> {
    serde_json::to_writer(&mut writer, record)?;
    writer.write_all(b"\n")?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEntry {
    pub task_id: String,
    pub instance: MatchInstance,
}

/// Task instances keyed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskStore {
    tasks: BTreeMap<String, MatchInstance>,
}

#[derive(Serialize, Deserialize)]
struct TaskFile {
    tasks: Vec<TaskEntry>,
}

impl TaskStore {
    pub fn new(entries: Vec<TaskEntry>) -> Result<Self> {
        let mut tasks = BTreeMap::new();
        for e in entries {
            if e.instance.success_prob().is_err() {
                return Err(Error::Config(format!(
                    "task {} has no success probabilities",
                    e.task_id
                )));
            }
            if tasks.insert(e.task_id.clone(), e.instance).is_some() {
                return Err(Error::Config(format!("duplicate task id {}", e.task_id)));
            }
        }
        Ok(Self { tasks })
    }

    pub fn get(&self, task_id: &str) -> Option<&MatchInstance> {
        self.tasks.get(task_id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.tasks.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn entries(&self) -> Vec<TaskEntry> {
        self.tasks
            .iter()
            .map(|(id, inst)| TaskEntry {
                task_id: id.clone(),
                instance: inst.clone(),
            })
            .collect()
    }
}

pub fn load_tasks<R: std::io::Read>(reader: R) -> Result<TaskStore> {
    let file: TaskFile = serde_json::from_reader(reader)?;
    TaskStore::new(file.tasks)
}

pub fn write_tasks<W: Write>(writer: W, store: &TaskStore) -> Result<()> {
    serde_json::to_writer_pretty(
        writer,
        &TaskFile {
            tasks: store.entries(),
        },
    )?;
    Ok(())
}

/// Loaded records indexed by (task, b). Read-only after construction.
#[derive(Debug, Clone, Default)]
pub struct RecordStore {
    records: Vec<HumanDecisionRecord>,
    by_task: BTreeMap<(String, usize), Vec<usize>>,
}

impl RecordStore {
    pub fn new(records: Vec<HumanDecisionRecord>) -> Self {
        let mut by_task: BTreeMap<(String, usize), Vec<usize>> = BTreeMap::new();
        for (idx, r) in records.iter().enumerate() {
            by_task.entry((r.task_id.clone(), r.b)).or_default().push(idx);
        }
        Self { records, by_task }
    }

    pub fn records(&self) -> &[HumanDecisionRecord] {
        &self.records
    }

    pub fn for_task(&self, task_id: &str, b: usize) -> impl Iterator<Item = &HumanDecisionRecord> {
        self.by_task
            .get(&(task_id.to_string(), b))
            .into_iter()
            .flatten()
            .map(|&i| &self.records[i])
    }

    /// Task ids with at least one record for `b`, ascending.
    pub fn tasks_with_b(&self, b: usize) -> Vec<&str> {
        self.by_task
            .keys()
            .filter(|(_, kb)| *kb == b)
            .map(|(t, _)| t.as_str())
            .collect()
    }

    pub fn deferral_values(&self) -> BTreeSet<usize> {
        self.by_task.keys().map(|(_, b)| *b).collect()
    }
}

/// One recorded human solution for `(task_id, b)`, chosen uniformly among
/// the participants who solved it.
pub fn replay_human(
    store: &RecordStore,
    task_id: &str,
    b: usize,
    success_prob: &ScoreMatrix,
    rng: &mut SimRng,
) -> Result<Matching> {
    let candidates: Vec<&HumanDecisionRecord> = store.for_task(task_id, b).collect();
    let record = candidates.choose(rng).ok_or_else(|| Error::NoRecord {
        task_id: task_id.to_string(),
        b,
    })?;
    record.to_matching(success_prob)
}

/// Drops every participant (with all of their records) who left more than
/// one patient unassigned in more than `u` tasks. `u = 0` keeps only
/// participants who never did; `u` at or above the task count keeps
/// everyone.
pub fn filter_by_incompleteness(records: &[HumanDecisionRecord], u: usize) -> Vec<HumanDecisionRecord> {
    let mut incomplete: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        let count = incomplete.entry(r.participant_id.as_str()).or_default();
        if r.unassigned() > 1 {
            *count += 1;
        }
    }
    records
        .iter()
        .filter(|r| incomplete[r.participant_id.as_str()] <= u)
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn record(pid: &str, task: &str, b: usize, n_assigned: usize) -> HumanDecisionRecord {
        HumanDecisionRecord {
            participant_id: pid.into(),
            task_id: task.into(),
            b,
            assignments: (0..n_assigned)
                .map(|i| Assignment {
                    individual: i,
                    resource: i % 2,
                    elapsed_ms: 100 * i as u64,
                })
                .collect(),
            completed: n_assigned == b,
        }
    }

    #[test]
    fn loader_reports_line_numbers() {
        let good = serde_json::to_string(&record("p1", "t1", 2, 2)).unwrap();
        let text = format!("{good}\n\n{{\"participant_id\": 3}}\n");
        match load_records(text.as_bytes()) {
            Err(Error::Dataset { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let mut bad = record("p1", "t1", 2, 2);
        bad.completed = false;
        let text = format!("{good}\n{}\n", serde_json::to_string(&bad).unwrap());
        assert!(matches!(load_records(text.as_bytes()), Err(Error::Dataset { line: 2, .. })));
        let too_many = record("p1", "t1", 1, 2);
        let text = serde_json::to_string(&too_many).unwrap();
        assert!(matches!(load_records(text.as_bytes()), Err(Error::Dataset { line: 1, .. })));
    }

    #[test]
    fn write_then_load() {
        let mut buf = Vec::new();
        let a = record("p1", "t1", 3, 1);
        let b = record("p2", "t1", 3, 3);
        write_record(&mut buf, &a).unwrap();
        write_record(&mut buf, &b).unwrap();
        assert_eq!(load_records(buf.as_slice()).unwrap(), vec![a, b]);
    }

    #[test]
    fn replay_single_record() {
        let p = ScoreMatrix::filled(4, 2, 0.25).unwrap();
        let store = RecordStore::new(vec![record("p1", "t1", 3, 3)]);
        let m = replay_human(&store, "t1", 3, &p, &mut seeded(0)).unwrap();
        assert_eq!(m.pairs, vec![(0, 0), (1, 1), (2, 0)]);
        assert!(matches!(
            replay_human(&store, "t1", 4, &p, &mut seeded(0)),
            Err(Error::NoRecord { .. })
        ));
    }

    #[test]
    fn complete_record_has_b_pairs() {
        let r = record("p1", "t1", 4, 4);
        assert!(r.completed);
        assert_eq!(r.pairs().len(), 4);
        assert!(r.validate().is_ok());
    }

    #[test]
    fn replay_picks_uniformly() {
        let p = ScoreMatrix::filled(4, 2, 0.25).unwrap();
        let store = RecordStore::new(vec![record("p1", "t1", 2, 1), record("p2", "t1", 2, 2)]);
        let mut rng = seeded(5);
        let draws = 10_000;
        let first = (0..draws)
            .filter(|_| replay_human(&store, "t1", 2, &p, &mut rng).unwrap().len() == 1)
            .count();
        assert!((first as f64 / draws as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn incompleteness_filter() {
        // Participants with 0, 1, 3 and 8 incomplete tasks out of 8.
        let mut records = Vec::new();
        for (pid, bad) in [("a", 0), ("b", 1), ("c", 3), ("d", 8)] {
            for t in 0..8 {
                let n_assigned = if t < bad { 3 } else { 6 };
                records.push(record(pid, &format!("t{t}"), 6, n_assigned));
            }
        }
        let ids = |rs: &[HumanDecisionRecord]| -> BTreeSet<String> {
            rs.iter().map(|r| r.participant_id.clone()).collect()
        };
        let kept = filter_by_incompleteness(&records, 2);
        assert_eq!(ids(&kept), ["a", "b"].iter().map(|s| s.to_string()).collect());
        assert_eq!(kept.len(), 16);
        assert_eq!(ids(&filter_by_incompleteness(&records, 0)).len(), 1);
        assert_eq!(filter_by_incompleteness(&records, 8).len(), records.len());
        assert_eq!(filter_by_incompleteness(&records, 100).len(), records.len());
        let only_d: Vec<_> = records.iter().filter(|r| r.participant_id == "d").cloned().collect();
        assert!(filter_by_incompleteness(&only_d, 1).is_empty());
    }

    #[test]
    fn one_unassigned_patient_does_not_count_as_incomplete() {
        let records = vec![record("a", "t0", 5, 4)];
        assert_eq!(filter_by_incompleteness(&records, 0).len(), 1);
    }

    #[test]
    fn task_store_round_trip() {
        use crate::matching::ResourceSet;
        let inst = MatchInstance::new(
            ResourceSet::with_capacities(vec![1]).unwrap(),
            ScoreMatrix::filled(1, 1, 0.5).unwrap(),
            Some(ScoreMatrix::filled(1, 1, 0.25).unwrap()),
        )
        .unwrap();
        let store = TaskStore::new(vec![TaskEntry {
            task_id: "t0".into(),
            instance: inst.clone(),
        }])
        .unwrap();
        let mut buf = Vec::new();
        write_tasks(&mut buf, &store).unwrap();
        assert_eq!(load_tasks(buf.as_slice()).unwrap(), store);
        let dup = TaskStore::new(vec![
            TaskEntry { task_id: "t0".into(), instance: inst.clone() },
            TaskEntry { task_id: "t0".into(), instance: inst },
        ]);
        assert!(dup.is_err());
    }
}
