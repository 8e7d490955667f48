use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use arc_swap::ArcSwap;
use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use sevbench::coreset::CoresetResult;
use sevbench::model::{EstimatorKind, Interaction, ProportionEstimate, SeverityLabel};
use sevbench::severity::{resolve_disagreement, AnnotationRecord, DecisionTree, ResolutionStatus};

use crate::clock::{Clock, SystemClock};
use crate::error::ServiceError;
use crate::state::{flag_id, task_id, AdversarialFlag, Event, EventLog, ItemStatus, RootCause, State, Task, TaskKind, TaskState};

pub const DEFAULT_LEASE_TTL_MINUTES: i64 = 30;
pub const DEFAULT_ANNOTATORS_PER_ITEM: usize = 2;
pub const SEV0_GATE: f64 = 0.05;
pub const EVENT_LOG_FILE: &str = "events.jsonl";

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: Option<PathBuf>,
    pub lease_ttl: Duration,
    pub annotators_per_item: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            lease_ttl: Duration::minutes(DEFAULT_LEASE_TTL_MINUTES),
            annotators_per_item: DEFAULT_ANNOTATORS_PER_ITEM,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskLease {
    pub task_id: String,
    pub interaction_id: String,
    pub annotator_id: String,
    pub tree_version: String,
    pub lease_expiry: DateTime<Utc>,
    pub state: TaskState,
    pub kind: TaskKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmitOutcome {
    pub task_id: String,
    pub derived_label: SeverityLabel,
    pub item_status: ItemStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardEntry {
    pub reporter_id: String,
    pub confirmed_flags: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stats {
    pub finalized: usize,
    pub pending: usize,
    pub escalated: usize,
    pub estimate: Option<ProportionEstimate>,
    pub sev0_gate: GateStatus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateStatus {
    pub threshold: f64,
    pub sev0: Option<f64>,
    pub passing: Option<bool>,
}

/// Leaderboard time window: a trailing span or everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    All,
    Trailing(Duration),
}

impl std::str::FromStr for Window {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "all" {
            return Ok(Window::All);
        }
        let bad = || ServiceError::BadRequest(format!("window must look like 30d, 12h or all, got {s:?}"));
        let (n, unit) = s.split_at(s.len().checked_sub(1).ok_or_else(bad)?);
        let n: i64 = n.parse().map_err(|_| bad())?;
        if n <= 0 {
            return Err(bad());
        }
        match unit {
            "d" => Ok(Window::Trailing(Duration::days(n))),
            "h" => Ok(Window::Trailing(Duration::hours(n))),
            _ => Err(bad()),
        }
    }
}

struct Writer {
    log: Option<EventLog>,
    state: State,
}

/// The annotation coordinator. Every mutation goes through one writer that
/// appends to the event log and then publishes a fresh snapshot; readers
/// never block on it.
pub struct AnnotationService {
    writer: Mutex<Writer>,
    snapshot: ArcSwap<State>,
    tree: Arc<DecisionTree>,
    clock: Arc<dyn Clock>,
    config: ServiceConfig,
}

impl AnnotationService {
    /// Opens the service, replaying any existing event log in the data dir.
    pub fn open(config: ServiceConfig, tree: DecisionTree, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        if config.annotators_per_item == 0 {
            return Err(ServiceError::BadRequest("annotators_per_item must be at least 1".into()));
        }
        let (log, state) = match &config.data_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let (log, events) = EventLog::open(&dir.join(EVENT_LOG_FILE))?;
                (Some(log), State::replay(&events)?)
            }
            None => (None, State::default()),
        };
        Ok(Self {
            snapshot: ArcSwap::from_pointee(state.clone()),
            writer: Mutex::new(Writer { log, state }),
            tree: Arc::new(tree),
            clock,
            config,
        })
    }

    pub fn in_memory(tree: DecisionTree) -> Self {
        Self::open(ServiceConfig::default(), tree, Arc::new(SystemClock)).expect("in-memory service opens")
    }

    pub fn tree(&self) -> &DecisionTree {
        &self.tree
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn snapshot(&self) -> Arc<State> {
        self.snapshot.load_full()
    }

    pub fn event_log_path(&self) -> Option<PathBuf> {
        self.config.data_dir.as_ref().map(|d| d.join(EVENT_LOG_FILE))
    }

    /// Runs `f` as one atomic transaction. Events it emits are applied and
    /// logged in order; the snapshot is published once at the end, even when
    /// `f` fails after emitting some events.
    fn transact<T>(&self, f: impl FnOnce(&mut Tx<'_>) -> Result<T, ServiceError>) -> Result<T, ServiceError> {
        let mut guard = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        let w = &mut *guard;
        let mut tx = Tx {
            log: &mut w.log,
            state: &mut w.state,
            dirty: false,
            now: self.clock.now(),
        };
        let out = f(&mut tx);
        if tx.dirty {
            self.snapshot.store(Arc::new(w.state.clone()));
        }
        out
    }

    pub fn register(&self, annotator_id: &str, is_expert: bool) -> Result<(), ServiceError> {
        self.transact(|tx| tx.ensure_annotator(annotator_id, is_expert))
    }

    /// Creates `annotators_per_item` tasks for every support member of
    /// `result`. `pool[i]` is the interaction behind coreset index `i`.
    /// Slots that already exist are skipped, so re-enqueueing is a no-op.
    pub fn enqueue_coreset(
        &self,
        result: &CoresetResult,
        pool: &[Interaction],
        annotators_per_item: Option<usize>,
    ) -> Result<usize, ServiceError> {
        let apn = annotators_per_item.unwrap_or(self.config.annotators_per_item);
        if apn == 0 {
            return Err(ServiceError::BadRequest("annotators_per_item must be at least 1".into()));
        }
        let mut members = Vec::with_capacity(result.support.len());
        for &i in &result.support {
            let interaction = pool
                .get(i)
                .ok_or_else(|| ServiceError::not_found("interaction", format!("index {i}")))?;
            interaction.validate().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
            members.push((interaction, result.weights.get(&i).copied()));
        }
        self.transact(|tx| {
            let mut created = 0;
            for (interaction, weight) in members {
                let existing = tx.state.items.get(&interaction.id);
                match existing {
                    Some(item) if item.status != ItemStatus::Collecting => continue,
                    Some(item) if item.interaction != *interaction => {
                        return Err(ServiceError::Conflict(format!(
                            "interaction {} was already enqueued with different content",
                            interaction.id
                        )))
                    }
                    Some(_) => {}
                    None => tx.emit(Event::ItemAdded {
                        interaction: interaction.clone(),
                        weight,
                        annotators_per_item: apn,
                        at: tx.now,
                    })?,
                }
                let apn = tx.state.items[&interaction.id].annotators_per_item;
                for slot in 0..apn {
                    if tx.state.slots.contains(&(interaction.id.clone(), slot)) {
                        continue;
                    }
                    tx.emit(Event::TaskCreated {
                        seq: tx.state.next_task,
                        interaction_id: interaction.id.clone(),
                        slot,
                        kind: TaskKind::Annotation,
                        at: tx.now,
                    })?;
                    created += 1;
                }
            }
            Ok(created)
        })
    }

    /// Leases the oldest task this annotator may work on. Experts get
    /// escalated items first.
    pub fn lease_next(&self, annotator_id: &str, is_expert: bool) -> Result<Option<TaskLease>, ServiceError> {
        let ttl = self.config.lease_ttl;
        let tree_version = self.tree.version.clone();
        self.transact(|tx| {
            tx.ensure_annotator(annotator_id, is_expert)?;
            tx.expire_leases()?;
            let state = &*tx.state;
            let eligible = |t: &&Task| {
                t.is_available()
                    && !state.items[&t.interaction_id].graded_by(annotator_id)
                    && !holds_sibling(state, t, annotator_id)
            };
            let pick = if is_expert {
                state
                    .tasks
                    .values()
                    .filter(|t| t.kind == TaskKind::Adjudication)
                    .find(eligible)
                    .or_else(|| state.tasks.values().filter(|t| t.kind == TaskKind::Annotation).find(eligible))
            } else {
                state.tasks.values().filter(|t| t.kind == TaskKind::Annotation).find(eligible)
            };
            let Some(seq) = pick.map(|t| t.seq) else {
                return Ok(None);
            };
            let expires_at = tx.now + ttl;
            tx.emit(Event::TaskLeased {
                seq,
                annotator_id: annotator_id.to_string(),
                is_expert,
                expires_at,
                at: tx.now,
            })?;
            let t = &tx.state.tasks[&seq];
            Ok(Some(TaskLease {
                task_id: t.task_id.clone(),
                interaction_id: t.interaction_id.clone(),
                annotator_id: annotator_id.to_string(),
                tree_version,
                lease_expiry: expires_at,
                state: t.state,
                kind: t.kind,
            }))
        })
    }

    /// Records one annotator's judgments for a leased task, then finalizes
    /// or escalates the item once every slot has reported.
    pub fn submit_judgments(
        &self,
        task: &str,
        annotator_id: &str,
        judgments: &BTreeMap<String, String>,
    ) -> Result<SubmitOutcome, ServiceError> {
        let seq = crate::state::parse_task_id(task).ok_or_else(|| ServiceError::not_found("task", task))?;
        self.transact(|tx| {
            let t = tx.state.tasks.get(&seq).ok_or_else(|| ServiceError::not_found("task", task))?;
            let lease = match (&t.state, &t.lease) {
                (TaskState::Leased, Some(l)) if l.annotator_id == annotator_id => l.clone(),
                _ if t.lapsed.contains(annotator_id) => return Err(ServiceError::LeaseExpired(task.to_string())),
                _ => return Err(ServiceError::Conflict(format!("{annotator_id} does not hold a lease on {task}"))),
            };
            if lease.expires_at <= tx.now {
                tx.emit(Event::LeaseExpired { seq, at: tx.now })?;
                return Err(ServiceError::LeaseExpired(task.to_string()));
            }
            let kind = t.kind;
            let interaction_id = t.interaction_id.clone();
            let item = &tx.state.items[&interaction_id];
            let record = AnnotationRecord::derive(&self.tree, &item.interaction, annotator_id, lease.is_expert, judgments, tx.now)?;
            let derived_label = record.derived_label;
            tx.emit(Event::JudgmentsSubmitted { seq, record, at: tx.now })?;

            let item = &tx.state.items[&interaction_id];
            match kind {
                TaskKind::Adjudication => tx.emit(Event::ItemFinalized {
                    interaction_id: interaction_id.clone(),
                    label: derived_label,
                    resolution: ResolutionStatus::ExpertResolved,
                    at: tx.now,
                })?,
                TaskKind::Annotation if item.records.len() >= item.annotators_per_item => {
                    let resolution = resolve_disagreement(&item.records)?;
                    match (resolution.status, resolution.label) {
                        (ResolutionStatus::PendingExpert, _) | (_, None) => tx.emit(Event::ItemEscalated {
                            interaction_id: interaction_id.clone(),
                            adjudication_seq: tx.state.next_task,
                            at: tx.now,
                        })?,
                        (status, Some(label)) => tx.emit(Event::ItemFinalized {
                            interaction_id: interaction_id.clone(),
                            label,
                            resolution: status,
                            at: tx.now,
                        })?,
                    }
                }
                TaskKind::Annotation => {}
            }
            Ok(SubmitOutcome {
                task_id: task.to_string(),
                derived_label,
                item_status: tx.state.items[&interaction_id].status,
            })
        })
    }

    pub fn flag_adversarial(
        &self,
        reporter_id: &str,
        interaction_id: &str,
        root_cause: RootCause,
        comment: &str,
    ) -> Result<AdversarialFlag, ServiceError> {
        self.transact(|tx| {
            if !tx.state.items.contains_key(interaction_id) {
                return Err(ServiceError::not_found("interaction", interaction_id));
            }
            tx.ensure_annotator(reporter_id, false)?;
            let flag = AdversarialFlag {
                id: flag_id(tx.state.next_flag),
                interaction_id: interaction_id.to_string(),
                reporter_id: reporter_id.to_string(),
                root_cause,
                comment: comment.to_string(),
                confirmed: false,
                created_at: tx.now,
                confirmed_at: None,
                confirmed_by: None,
                record: None,
            };
            tx.emit(Event::FlagRaised { flag: flag.clone() })?;
            Ok(flag)
        })
    }

    /// Marks a flag confirmed. Only experts may confirm; the optional
    /// judgments become the exported annotation for the flagged interaction.
    pub fn confirm_flag(
        &self,
        flag: &str,
        expert_id: &str,
        is_expert: bool,
        judgments: Option<&BTreeMap<String, String>>,
    ) -> Result<AdversarialFlag, ServiceError> {
        if !is_expert {
            return Err(ServiceError::Forbidden("only experts may confirm flags".into()));
        }
        self.transact(|tx| {
            let f = tx.state.flags.get(flag).ok_or_else(|| ServiceError::not_found("flag", flag))?;
            if f.confirmed {
                return Err(ServiceError::Conflict(format!("{flag} is already confirmed")));
            }
            let record = match judgments {
                Some(j) => {
                    let interaction = &tx.state.items[&f.interaction_id].interaction;
                    Some(AnnotationRecord::derive(&self.tree, interaction, expert_id, true, j, tx.now)?)
                }
                None => None,
            };
            tx.ensure_annotator(expert_id, true)?;
            tx.emit(Event::FlagConfirmed {
                flag_id: flag.to_string(),
                expert_id: expert_id.to_string(),
                record,
                at: tx.now,
            })?;
            Ok(tx.state.flags[flag].clone())
        })
    }

    /// Reporters ranked by confirmed flags inside the window. Ties go to the
    /// reporter who reached that count first, then by id.
    pub fn leaderboard(&self, window: Window) -> Vec<LeaderboardEntry> {
        let state = self.snapshot();
        let cutoff = match window {
            Window::All => None,
            Window::Trailing(d) => Some(self.clock.now() - d),
        };
        let mut times: BTreeMap<&str, Vec<DateTime<Utc>>> = BTreeMap::new();
        for f in state.flags.values() {
            let Some(at) = f.confirmed_at.filter(|_| f.confirmed) else { continue };
            if cutoff.is_some_and(|c| at < c) {
                continue;
            }
            times.entry(f.reporter_id.as_str()).or_default().push(at);
        }
        let mut rows: Vec<(usize, DateTime<Utc>, &str)> = times
            .into_iter()
            .map(|(r, mut ts)| {
                ts.sort();
                (ts.len(), *ts.last().expect("non-empty"), r)
            })
            .collect();
        rows.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(b.2)));
        rows.into_iter()
            .map(|(n, _, r)| LeaderboardEntry {
                reporter_id: r.to_string(),
                confirmed_flags: n,
            })
            .collect()
    }

    /// Expert annotations attached to confirmed flags.
    pub fn confirmed_flag_records(&self) -> Vec<AnnotationRecord> {
        self.snapshot()
            .flags
            .values()
            .filter(|f| f.confirmed)
            .filter_map(|f| f.record.clone())
            .collect()
    }

    pub fn final_labels(&self) -> BTreeMap<String, SeverityLabel> {
        final_labels(&self.snapshot())
    }

    /// Severity estimate over finalized items, weighted by coreset weight
    /// when every finalized item carries one.
    pub fn stats(&self) -> Stats {
        let state = self.snapshot();
        let finalized: Vec<_> = state
            .items
            .values()
            .filter_map(|i| match i.status {
                ItemStatus::Finalized { label, .. } => Some((label, i.weight)),
                _ => None,
            })
            .collect();
        let escalated = state.items.values().filter(|i| i.status == ItemStatus::Escalated).count();
        let weighted = !finalized.is_empty() && finalized.iter().all(|(_, w)| w.is_some_and(|w| w > 0.0));
        let mut mass = BTreeMap::new();
        for (label, w) in &finalized {
            *mass.entry(*label).or_insert(0.0) += if weighted { w.unwrap_or(0.0) } else { 1.0 };
        }
        let kind = if weighted { EstimatorKind::Coreset } else { EstimatorKind::Uniform };
        let estimate = ProportionEstimate::from_masses(&mass, finalized.len(), kind).ok();
        let sev0 = estimate.as_ref().map(|e| e.proportion(SeverityLabel::Sev0));
        Stats {
            finalized: finalized.len(),
            pending: state.items.len() - finalized.len() - escalated,
            escalated,
            estimate,
            sev0_gate: GateStatus {
                threshold: SEV0_GATE,
                sev0,
                passing: sev0.map(sev0_gate_passes),
            },
        }
    }
}

pub fn sev0_gate_passes(sev0: f64) -> bool {
    sev0 <= SEV0_GATE
}

pub fn final_labels(state: &State) -> BTreeMap<String, SeverityLabel> {
    state
        .items
        .iter()
        .filter_map(|(id, i)| match i.status {
            ItemStatus::Finalized { label, .. } => Some((id.clone(), label)),
            _ => None,
        })
        .collect()
}

/// Whether the annotator already holds another slot of the same item.
fn holds_sibling(state: &State, task: &Task, annotator_id: &str) -> bool {
    state.tasks.values().any(|t| {
        t.interaction_id == task.interaction_id && t.lease.as_ref().is_some_and(|l| l.annotator_id == annotator_id)
    })
}

struct Tx<'a> {
    log: &'a mut Option<EventLog>,
    state: &'a mut State,
    dirty: bool,
    now: DateTime<Utc>,
}

impl Tx<'_> {
    fn emit(&mut self, event: Event) -> Result<(), ServiceError> {
        self.state.apply(&event).map_err(ServiceError::Conflict)?;
        self.dirty = true;
        if let Some(log) = self.log.as_mut() {
            log.append(&event)?;
        }
        Ok(())
    }

    fn ensure_annotator(&mut self, annotator_id: &str, is_expert: bool) -> Result<(), ServiceError> {
        if annotator_id.trim().is_empty() {
            return Err(ServiceError::BadRequest("annotator id must not be empty".into()));
        }
        if self.state.annotators.get(annotator_id) == Some(&is_expert) {
            return Ok(());
        }
        self.emit(Event::AnnotatorRegistered {
            annotator_id: annotator_id.to_string(),
            is_expert,
            at: self.now,
        })
    }

    fn expire_leases(&mut self) -> Result<(), ServiceError> {
        let now = self.now;
        let stale: Vec<u64> = self
            .state
            .tasks
            .values()
            .filter(|t| t.state == TaskState::Leased && t.lease.as_ref().is_some_and(|l| l.expires_at <= now))
            .map(|t| t.seq)
            .collect();
        for seq in stale {
            self.emit(Event::LeaseExpired { seq, at: now })?;
        }
        Ok(())
    }
}

pub fn task_lease_view(task: &Task, tree_version: &str) -> serde_json::Value {
    serde_json::json!({
        "task_id": task_id(task.seq),
        "interaction_id": task.interaction_id,
        "annotator_id": task.lease.as_ref().map(|l| l.annotator_id.clone()).or_else(|| task.submitted_by.clone()),
        "tree_version": tree_version,
        "lease_expiry": task.lease.as_ref().map(|l| l.expires_at),
        "state": task.state,
        "kind": task.kind,
        "slot": task.slot,
    })
}
