//! Live human matching sessions.
//!
//! A session walks a participant through a [`TaskPlan`] of eight tasks. For
//! each task the algorithm first matches `n - b` patients on the confidence
//! scores; the participant sees only the `b` deferred patients, their
//! success probabilities and the remaining slot capacities. Every
//! assignment is checked here, so a client can never reach an infeasible
//! state. A task ends by a complete submit or by the server-side deadline,
//! and each ending appends one [`HumanDecisionRecord`] to the dataset sink.
//!
//! Patients are addressed by their row in the payload (`0..b`); records
//! store indices into the full task instance.

mod http;

pub use http::{router, serve, ServeOptions};

use std::collections::HashMap;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::human::{write_record, Assignment, HumanDecisionRecord, TaskEntry, TaskStore};
use crate::matching::{residual, solve_imperfect_matching, MatchInstance, Matching, ResidualInstance, Scores};
use crate::rng::{derive_seed, seeded, stream};
use crate::scoregen::{sample_instance, slot_names, GeneratorConfig};

pub const TASKS_PER_PLAN: usize = 8;
pub const MIN_B: usize = 5;
pub const MAX_B: usize = 20;
pub const TIME_LIMIT: Duration = Duration::from_secs(120);
pub const TICK: Duration = Duration::from_millis(100);

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("participant id must be 1-64 characters of [A-Za-z0-9_-]")]
    InvalidParticipant,
    #[error("participant {0} already has an active session")]
    DuplicateSession(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("slot {slot} is full")]
    CapacityExceeded { slot: usize },
    #[error("patient {patient} is already assigned")]
    AlreadyAssigned { patient: usize },
    #[error("patient {patient} is not assigned")]
    NotAssigned { patient: usize },
    #[error("the task deadline has passed")]
    DeadlinePassed,
    #[error("unknown patient {0}")]
    UnknownPatient(usize),
    #[error("unknown slot {0}")]
    UnknownSlot(usize),
    #[error("no task is active")]
    NotActive,
    #[error("the current task has not ended")]
    TaskOpen,
    #[error("{pending} patients are still unassigned")]
    EarlySubmit { pending: usize },
    #[error("all tasks are finished")]
    Finished,
    #[error(transparent)]
    Engine(#[from] Error),
}

impl SessionError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::InvalidParticipant => "invalid_participant",
            SessionError::DuplicateSession(_) => "duplicate_session",
            SessionError::UnknownSession(_) => "unknown_session",
            SessionError::CapacityExceeded { .. } => "capacity_exceeded",
            SessionError::AlreadyAssigned { .. } => "already_assigned",
            SessionError::NotAssigned { .. } => "not_assigned",
            SessionError::DeadlinePassed => "deadline_passed",
            SessionError::UnknownPatient(_) => "unknown_patient",
            SessionError::UnknownSlot(_) => "unknown_slot",
            SessionError::NotActive => "not_active",
            SessionError::TaskOpen => "task_open",
            SessionError::EarlySubmit { .. } => "early_submit_incomplete",
            SessionError::Finished => "finished",
            SessionError::Engine(_) => "internal",
        }
    }
}

pub type SessionResult<T> = std::result::Result<T, SessionError>;

/// Time source; the server's clock is authoritative.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Clock moved by hand, for tests.
#[derive(Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
}

impl ManualClock {
    pub fn advance(&self, by: Duration) {
        *self.now.lock().unwrap() += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedTask {
    pub task_id: String,
    pub b: usize,
    /// Attention checks are not implemented; always false.
    pub attention_check: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub participant_id: String,
    pub parity: Parity,
    pub tasks: Vec<PlannedTask>,
}

impl TaskPlan {
    pub fn b_values(&self) -> Vec<usize> {
        self.tasks.iter().map(|t| t.b).collect()
    }
}

fn participant_key(participant_id: &str) -> u64 {
    let digest = Sha256::digest(participant_id.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn valid_participant_id(id: &str) -> bool {
    (1..=64).contains(&id.len())
        && id.bytes().all(|c| c.is_ascii_alphanumeric() || c == b'_' || c == b'-')
}

/// The plan of `participant_id`: a parity class drawn uniformly, its eight
/// `b` values from `5..=20` in random order, and for each a task drawn
/// from the pool tasks with at least `b` patients, without repeats while
/// possible. Deterministic in `(seed, participant_id)`.
pub fn make_plan(participant_id: &str, pool: &TaskStore, seed: u64) -> SessionResult<TaskPlan> {
    if !valid_participant_id(participant_id) {
        return Err(SessionError::InvalidParticipant);
    }
    let mut rng = stream(seed, &[participant_key(participant_id)]);
    let parity = if rng.random::<bool>() { Parity::Even } else { Parity::Odd };
    let first = match parity {
        Parity::Even => MIN_B + 1,
        Parity::Odd => MIN_B,
    };
    let mut bs: Vec<usize> = (first..=MAX_B).step_by(2).collect();
    bs.shuffle(&mut rng);
    let mut used: Vec<&str> = Vec::new();
    let mut tasks = Vec::with_capacity(bs.len());
    for b in bs {
        let fits: Vec<&str> = pool
            .ids()
            .filter(|t| pool.get(t).is_some_and(|i| i.n() >= b))
            .collect();
        let fresh: Vec<&str> = fits.iter().copied().filter(|t| !used.contains(t)).collect();
        let pick = fresh
            .choose(&mut rng)
            .or_else(|| fits.choose(&mut rng))
            .copied()
            .ok_or_else(|| Error::Config(format!("no pool task has {b} or more patients")))?;
        used.push(pick);
        tasks.push(PlannedTask {
            task_id: pick.to_string(),
            b,
            attention_check: false,
        });
    }
    Ok(TaskPlan {
        participant_id: participant_id.to_string(),
        parity,
        tasks,
    })
}

/// `count` generated tasks named `t0000`, `t0001`, ...
pub fn generate_task_pool(generator: &GeneratorConfig, count: usize, seed: u64) -> crate::Result<TaskStore> {
    let entries = (0..count)
        .map(|i| {
            let mut rng = stream(seed, &[i as u64]);
            Ok(TaskEntry {
                task_id: format!("t{i:04}"),
                instance: sample_instance(generator, &mut rng)?.0,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    TaskStore::new(entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    /// A task is open for assignments.
    Active,
    /// The last task was submitted by the participant.
    Submitted,
    /// The last task was submitted at the deadline.
    TimedOut,
    /// Every planned task has ended.
    Finished,
}

#[derive(Debug, Clone)]
struct OpenTask {
    task_id: String,
    b: usize,
    instance: MatchInstance,
    residual: ResidualInstance,
    /// Deferred patient row -> slot.
    slots: Vec<Option<usize>>,
    /// Assignment order with elapsed milliseconds.
    order: Vec<(usize, u64)>,
    remaining: Vec<u32>,
    score: f64,
    started: Duration,
    deadline: Duration,
}

impl OpenTask {
    fn p(&self, row: usize, slot: usize) -> f64 {
        let p = self.instance.success_prob().expect("pool tasks carry p");
        p.get(self.residual.unmatched[row], slot)
    }

    fn rescore(&mut self) {
        self.score = self
            .slots
            .iter()
            .enumerate()
            .filter_map(|(row, s)| s.map(|slot| self.p(row, slot)))
            .sum();
    }

    fn pending(&self) -> usize {
        self.slots.iter().filter(|s| s.is_none()).count()
    }
}

/// Live state of one session.
#[derive(Debug, Clone)]
pub struct SessionState {
    pub session_id: String,
    pub participant_id: String,
    pub plan: TaskPlan,
    pub task_index: usize,
    pub status: SessionStatus,
    pub records: Vec<HumanDecisionRecord>,
    task: Option<OpenTask>,
}

/// What the client sees of the current task. Only the success
/// probabilities of the deferred patients are exposed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPayload {
    pub session_id: String,
    pub status: SessionStatus,
    pub task_index: usize,
    pub task_count: usize,
    pub b: usize,
    pub slots: Vec<String>,
    /// Remaining capacity per slot.
    pub availability: Vec<u32>,
    /// `b x k` success probabilities of the deferred patients.
    pub p: Vec<Vec<f64>>,
    /// Slot of each deferred patient, if assigned.
    pub assignments: Vec<Option<usize>>,
    pub pending: usize,
    pub score: f64,
    pub remaining_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStart {
    pub session_id: String,
    pub plan: TaskPlan,
    pub task: TaskPayload,
}

type Sink = Box<dyn Write + Send>;

/// All sessions of a running service.
pub struct SessionManager {
    pool: Arc<TaskStore>,
    seed: u64,
    time_limit: Duration,
    clock: Arc<dyn Clock>,
    sessions: RwLock<HashMap<String, Arc<Mutex<SessionState>>>>,
    active: Mutex<HashMap<String, String>>,
    sink: Mutex<Sink>,
    counter: AtomicU64,
}

impl SessionManager {
    pub fn new(pool: TaskStore, seed: u64, clock: Arc<dyn Clock>, sink: Sink) -> Self {
        Self {
            pool: Arc::new(pool),
            seed,
            time_limit: TIME_LIMIT,
            clock,
            sessions: RwLock::new(HashMap::new()),
            active: Mutex::new(HashMap::new()),
            sink: Mutex::new(sink),
            counter: AtomicU64::new(0),
        }
    }

    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = limit;
        self
    }

    pub fn pool(&self) -> &TaskStore {
        &self.pool
    }

    fn session(&self, id: &str) -> SessionResult<Arc<Mutex<SessionState>>> {
        self.sessions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn start_session(&self, participant_id: &str) -> SessionResult<SessionStart> {
        let plan = make_plan(participant_id, &self.pool, self.seed)?;
        let mut active = self.active.lock().unwrap();
        if active.contains_key(participant_id) {
            return Err(SessionError::DuplicateSession(participant_id.to_string()));
        }
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let mut rng = seeded(derive_seed(self.seed, &[u64::MAX, n, participant_key(participant_id)]));
        let session_id = format!("s{:016x}{:016x}", rng.random::<u64>(), n);
        let mut state = SessionState {
            session_id: session_id.clone(),
            participant_id: participant_id.to_string(),
            plan: plan.clone(),
            task_index: 0,
            status: SessionStatus::Active,
            records: Vec::new(),
            task: None,
        };
        self.open_task(&mut state)?;
        let task = self.payload(&state);
        active.insert(participant_id.to_string(), session_id.clone());
        self.sessions
            .write()
            .unwrap()
            .insert(session_id.clone(), Arc::new(Mutex::new(state)));
        Ok(SessionStart {
            session_id,
            plan,
            task,
        })
    }

    fn open_task(&self, state: &mut SessionState) -> SessionResult<()> {
        let planned = &state.plan.tasks[state.task_index];
        let instance = self
            .pool
            .get(&planned.task_id)
            .ok_or_else(|| Error::Config(format!("task {} missing from pool", planned.task_id)))?
            .clone();
        let alg = solve_imperfect_matching(&instance, Scores::Confidence, planned.b)?;
        let residual = residual(&instance, &alg)?;
        let now = self.clock.now();
        state.task = Some(OpenTask {
            task_id: planned.task_id.clone(),
            b: planned.b,
            slots: vec![None; residual.unmatched.len()],
            order: Vec::new(),
            remaining: residual.remaining.clone(),
            residual,
            instance,
            score: 0.0,
            started: now,
            deadline: now + self.time_limit,
        });
        state.status = SessionStatus::Active;
        Ok(())
    }

    fn payload(&self, state: &SessionState) -> TaskPayload {
        let now = self.clock.now();
        let mut out = TaskPayload {
            session_id: state.session_id.clone(),
            status: state.status,
            task_index: state.task_index,
            task_count: state.plan.tasks.len(),
            b: 0,
            slots: Vec::new(),
            availability: Vec::new(),
            p: Vec::new(),
            assignments: Vec::new(),
            pending: 0,
            score: 0.0,
            remaining_ms: 0,
        };
        if let Some(t) = &state.task {
            let p = t.instance.success_prob().expect("pool tasks carry p");
            out.b = t.b;
            out.slots = if t.instance.k() == 10 {
                slot_names(10)
            } else {
                t.instance.resources().names().to_vec()
            };
            out.availability = t.remaining.clone();
            out.p = t.residual.unmatched.iter().map(|&i| p.row(i).to_vec()).collect();
            out.assignments = t.slots.clone();
            out.pending = t.pending();
            out.score = t.score;
            if state.status == SessionStatus::Active {
                out.remaining_ms = t.deadline.saturating_sub(now).as_millis() as u64;
            }
        }
        out
    }

    /// Ends the open task if its deadline has passed. Returns true if so.
    fn expire(&self, state: &mut SessionState) -> SessionResult<bool> {
        if state.status != SessionStatus::Active {
            return Ok(false);
        }
        let due = state.task.as_ref().is_some_and(|t| self.clock.now() >= t.deadline);
        if due {
            self.close_task(state, SessionStatus::TimedOut)?;
        }
        Ok(due)
    }

    fn close_task(&self, state: &mut SessionState, how: SessionStatus) -> SessionResult<HumanDecisionRecord> {
        let t = state.task.as_ref().ok_or(SessionError::NotActive)?;
        let assignments: Vec<Assignment> = t
            .order
            .iter()
            .map(|&(row, elapsed_ms)| Assignment {
                individual: t.residual.unmatched[row],
                resource: t.slots[row].expect("ordered rows are assigned"),
                elapsed_ms,
            })
            .collect();
        let record = HumanDecisionRecord {
            participant_id: state.participant_id.clone(),
            task_id: t.task_id.clone(),
            b: t.b,
            completed: assignments.len() == t.b,
            assignments,
        };
        {
            let mut sink = self.sink.lock().unwrap();
            write_record(&mut *sink, &record)?;
            sink.flush().map_err(Error::from)?;
        }
        state.records.push(record.clone());
        state.status = how;
        if state.task_index + 1 == state.plan.tasks.len() {
            state.status = SessionStatus::Finished;
            self.active.lock().unwrap().remove(&state.participant_id);
        }
        Ok(record)
    }

    pub fn current_task(&self, session_id: &str) -> SessionResult<TaskPayload> {
        let s = self.session(session_id)?;
        let mut state = s.lock().unwrap();
        self.expire(&mut state)?;
        Ok(self.payload(&state))
    }

    /// Assigns deferred patient `patient` to `slot`, or unassigns it when
    /// `slot` is `None`. State is unchanged on error.
    pub fn apply_assignment(&self, session_id: &str, patient: usize, slot: Option<usize>) -> SessionResult<TaskPayload> {
        let s = self.session(session_id)?;
        let mut state = s.lock().unwrap();
        if self.expire(&mut state)? {
            return Err(SessionError::DeadlinePassed);
        }
        if state.status != SessionStatus::Active {
            return Err(SessionError::NotActive);
        }
        let now = self.clock.now();
        let t = state.task.as_mut().ok_or(SessionError::NotActive)?;
        if patient >= t.slots.len() {
            return Err(SessionError::UnknownPatient(patient));
        }
        match slot {
            Some(r) => {
                if r >= t.remaining.len() {
                    return Err(SessionError::UnknownSlot(r));
                }
                if t.slots[patient].is_some() {
                    return Err(SessionError::AlreadyAssigned { patient });
                }
                if t.remaining[r] == 0 {
                    return Err(SessionError::CapacityExceeded { slot: r });
                }
                t.remaining[r] -= 1;
                t.slots[patient] = Some(r);
                t.order.push((patient, (now - t.started).as_millis() as u64));
            }
            None => {
                let r = t.slots[patient].ok_or(SessionError::NotAssigned { patient })?;
                t.remaining[r] += 1;
                t.slots[patient] = None;
                t.order.retain(|&(row, _)| row != patient);
            }
        }
        t.rescore();
        Ok(self.payload(&state))
    }

    /// Submits the open task; every deferred patient must be assigned.
    pub fn submit(&self, session_id: &str) -> SessionResult<HumanDecisionRecord> {
        let s = self.session(session_id)?;
        let mut state = s.lock().unwrap();
        if self.expire(&mut state)? {
            return Err(SessionError::DeadlinePassed);
        }
        if state.status != SessionStatus::Active {
            return Err(SessionError::NotActive);
        }
        let pending = state.task.as_ref().map_or(0, OpenTask::pending);
        if pending > 0 {
            return Err(SessionError::EarlySubmit { pending });
        }
        self.close_task(&mut state, SessionStatus::Submitted)
    }

    /// Opens the next planned task after the previous one ended.
    pub fn next_task(&self, session_id: &str) -> SessionResult<TaskPayload> {
        let s = self.session(session_id)?;
        let mut state = s.lock().unwrap();
        self.expire(&mut state)?;
        match state.status {
            SessionStatus::Active => return Err(SessionError::TaskOpen),
            SessionStatus::Finished => return Err(SessionError::Finished),
            SessionStatus::Submitted | SessionStatus::TimedOut => {}
        }
        state.task_index += 1;
        self.open_task(&mut state)?;
        Ok(self.payload(&state))
    }

    /// Times out every session past its deadline; returns how many.
    pub fn tick(&self) -> usize {
        let sessions: Vec<_> = self.sessions.read().unwrap().values().cloned().collect();
        sessions
            .iter()
            .filter(|s| {
                let mut state = s.lock().unwrap();
                self.expire(&mut state).unwrap_or(false)
            })
            .count()
    }

    pub fn records(&self, session_id: &str) -> SessionResult<Vec<HumanDecisionRecord>> {
        Ok(self.session(session_id)?.lock().unwrap().records.clone())
    }

    /// The algorithm's matching for `(task_id, b)`, as used in sessions.
    pub fn algorithmic_part(&self, task_id: &str, b: usize) -> crate::Result<Matching> {
        let inst = self
            .pool
            .get(task_id)
            .ok_or_else(|| Error::Config(format!("unknown task {task_id}")))?;
        solve_imperfect_matching(inst, Scores::Confidence, b)
    }
}
