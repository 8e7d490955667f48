//! Events and the state they fold into. The state is never mutated except
//! by [`State::apply`], so replaying the log rebuilds it exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sevbench::model::{Interaction, SeverityLabel};
use sevbench::severity::{AnnotationRecord, ResolutionStatus};

use crate::error::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Annotation,
    Adjudication,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskState {
    Open,
    Leased,
    Submitted,
    Escalated,
    Finalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootCause {
    RetrievalFailure,
    Hallucination,
    DocumentationGap,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lease {
    pub annotator_id: String,
    pub is_expert: bool,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub task_id: String,
    pub seq: u64,
    pub interaction_id: String,
    pub slot: usize,
    pub kind: TaskKind,
    pub state: TaskState,
    pub lease: Option<Lease>,
    pub submitted_by: Option<String>,
    /// Annotators whose lease on this task ran out.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub lapsed: BTreeSet<String>,
    pub created_at: DateTime<Utc>,
}

impl Task {
    /// State a task falls back to when its lease lapses.
    fn waiting_state(&self) -> TaskState {
        match self.kind {
            TaskKind::Annotation => TaskState::Open,
            TaskKind::Adjudication => TaskState::Escalated,
        }
    }

    pub fn is_available(&self) -> bool {
        self.lease.is_none() && self.state == self.waiting_state()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ItemStatus {
    Collecting,
    Escalated,
    Finalized { label: SeverityLabel, resolution: ResolutionStatus },
}

/// Everything known about one enqueued interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub interaction: Interaction,
    /// Coreset weight, when the item was enqueued from a weighted sample.
    pub weight: Option<f64>,
    pub annotators_per_item: usize,
    pub records: Vec<AnnotationRecord>,
    pub status: ItemStatus,
}

impl Item {
    pub fn graded_by(&self, annotator_id: &str) -> bool {
        self.records.iter().any(|r| r.annotator_id == annotator_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarialFlag {
    pub id: String,
    pub interaction_id: String,
    pub reporter_id: String,
    pub root_cause: RootCause,
    pub comment: String,
    pub confirmed: bool,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confirmed_at: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confirmed_by: Option<String>,
    /// The confirming expert's annotation of the flagged interaction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record: Option<AnnotationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    AnnotatorRegistered {
        annotator_id: String,
        is_expert: bool,
        at: DateTime<Utc>,
    },
    ItemAdded {
        interaction: Interaction,
        weight: Option<f64>,
        annotators_per_item: usize,
        at: DateTime<Utc>,
    },
    TaskCreated {
        seq: u64,
        interaction_id: String,
        slot: usize,
        kind: TaskKind,
        at: DateTime<Utc>,
    },
    TaskLeased {
        seq: u64,
        annotator_id: String,
        is_expert: bool,
        expires_at: DateTime<Utc>,
        at: DateTime<Utc>,
    },
    LeaseExpired {
        seq: u64,
        at: DateTime<Utc>,
    },
    JudgmentsSubmitted {
        seq: u64,
        record: AnnotationRecord,
        at: DateTime<Utc>,
    },
    ItemEscalated {
        interaction_id: String,
        adjudication_seq: u64,
        at: DateTime<Utc>,
    },
    ItemFinalized {
        interaction_id: String,
        label: SeverityLabel,
        resolution: ResolutionStatus,
        at: DateTime<Utc>,
    },
    FlagRaised {
        flag: AdversarialFlag,
    },
    FlagConfirmed {
        flag_id: String,
        expert_id: String,
        record: Option<AnnotationRecord>,
        at: DateTime<Utc>,
    },
}

pub fn task_id(seq: u64) -> String {
    format!("task-{seq}")
}

pub fn parse_task_id(id: &str) -> Option<u64> {
    id.strip_prefix("task-")?.parse().ok()
}

pub fn flag_id(seq: u64) -> String {
    format!("flag-{seq}")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct State {
    pub annotators: BTreeMap<String, bool>,
    pub items: BTreeMap<String, Item>,
    /// Keyed by creation sequence, so iteration order is age order.
    pub tasks: BTreeMap<u64, Task>,
    pub slots: BTreeSet<(String, usize)>,
    pub flags: BTreeMap<String, AdversarialFlag>,
    pub next_task: u64,
    pub next_flag: u64,
    pub events_applied: u64,
}

impl State {
    pub fn task(&self, seq: u64) -> Option<&Task> {
        self.tasks.get(&seq)
    }

    pub fn task_by_id(&self, id: &str) -> Option<&Task> {
        parse_task_id(id).and_then(|s| self.tasks.get(&s))
    }

    /// Folds one event into the state. Fails only on events that could not
    /// have been produced by the service from this state.
    pub fn apply(&mut self, event: &Event) -> Result<(), String> {
        match event {
            Event::AnnotatorRegistered { annotator_id, is_expert, .. } => {
                self.annotators.insert(annotator_id.clone(), *is_expert);
            }
            Event::ItemAdded {
                interaction,
                weight,
                annotators_per_item,
                ..
            } => {
                if self.items.contains_key(&interaction.id) {
                    return Err(format!("item {} added twice", interaction.id));
                }
                self.items.insert(
                    interaction.id.clone(),
                    Item {
                        interaction: interaction.clone(),
                        weight: *weight,
                        annotators_per_item: *annotators_per_item,
                        records: Vec::new(),
                        status: ItemStatus::Collecting,
                    },
                );
            }
            Event::TaskCreated {
                seq,
                interaction_id,
                slot,
                kind,
                at,
            } => {
                if *seq != self.next_task {
                    return Err(format!("task sequence {seq}, expected {}", self.next_task));
                }
                if !self.items.contains_key(interaction_id) {
                    return Err(format!("task for unknown item {interaction_id}"));
                }
                if *kind == TaskKind::Annotation && !self.slots.insert((interaction_id.clone(), *slot)) {
                    return Err(format!("slot {slot} of {interaction_id} created twice"));
                }
                let task = Task {
                    task_id: task_id(*seq),
                    seq: *seq,
                    interaction_id: interaction_id.clone(),
                    slot: *slot,
                    kind: *kind,
                    state: TaskState::Open,
                    lease: None,
                    submitted_by: None,
                    lapsed: BTreeSet::new(),
                    created_at: *at,
                };
                let waiting = task.waiting_state();
                self.tasks.insert(*seq, Task { state: waiting, ..task });
                self.next_task += 1;
            }
            Event::TaskLeased {
                seq,
                annotator_id,
                is_expert,
                expires_at,
                ..
            } => {
                let task = self.tasks.get_mut(seq).ok_or_else(|| format!("lease of unknown task {seq}"))?;
                if !task.is_available() {
                    return Err(format!("task {seq} leased while {:?}", task.state));
                }
                task.state = TaskState::Leased;
                task.lease = Some(Lease {
                    annotator_id: annotator_id.clone(),
                    is_expert: *is_expert,
                    expires_at: *expires_at,
                });
            }
            Event::LeaseExpired { seq, .. } => {
                let task = self.tasks.get_mut(seq).ok_or_else(|| format!("expiry of unknown task {seq}"))?;
                if task.state != TaskState::Leased {
                    return Err(format!("expiry of task {seq} in state {:?}", task.state));
                }
                if let Some(l) = task.lease.take() {
                    task.lapsed.insert(l.annotator_id);
                }
                task.state = task.waiting_state();
            }
            Event::JudgmentsSubmitted { seq, record, .. } => {
                let task = self.tasks.get_mut(seq).ok_or_else(|| format!("submission to unknown task {seq}"))?;
                if task.state != TaskState::Leased {
                    return Err(format!("submission to task {seq} in state {:?}", task.state));
                }
                task.state = TaskState::Submitted;
                task.submitted_by = task.lease.take().map(|l| l.annotator_id);
                let item = self
                    .items
                    .get_mut(&task.interaction_id)
                    .ok_or_else(|| format!("submission for unknown item {}", task.interaction_id))?;
                item.records.push(record.clone());
            }
            Event::ItemEscalated {
                interaction_id,
                adjudication_seq,
                at,
            } => {
                let item = self
                    .items
                    .get_mut(interaction_id)
                    .ok_or_else(|| format!("escalation of unknown item {interaction_id}"))?;
                item.status = ItemStatus::Escalated;
                for t in self.tasks.values_mut() {
                    if &t.interaction_id == interaction_id && t.state == TaskState::Submitted {
                        t.state = TaskState::Escalated;
                    }
                }
                self.apply(&Event::TaskCreated {
                    seq: *adjudication_seq,
                    interaction_id: interaction_id.clone(),
                    slot: 0,
                    kind: TaskKind::Adjudication,
                    at: *at,
                })?;
                // The nested application counted itself.
                self.events_applied -= 1;
            }
            Event::ItemFinalized {
                interaction_id,
                label,
                resolution,
                ..
            } => {
                let item = self
                    .items
                    .get_mut(interaction_id)
                    .ok_or_else(|| format!("finalization of unknown item {interaction_id}"))?;
                item.status = ItemStatus::Finalized {
                    label: *label,
                    resolution: *resolution,
                };
                for t in self.tasks.values_mut() {
                    if &t.interaction_id == interaction_id && matches!(t.state, TaskState::Submitted | TaskState::Escalated) {
                        t.state = TaskState::Finalized;
                    }
                }
            }
            Event::FlagRaised { flag } => {
                if self.flags.contains_key(&flag.id) {
                    return Err(format!("flag {} raised twice", flag.id));
                }
                self.flags.insert(flag.id.clone(), flag.clone());
                self.next_flag += 1;
            }
            Event::FlagConfirmed {
                flag_id,
                expert_id,
                record,
                at,
            } => {
                let flag = self.flags.get_mut(flag_id).ok_or_else(|| format!("confirmation of unknown flag {flag_id}"))?;
                flag.confirmed = true;
                flag.confirmed_at = Some(*at);
                flag.confirmed_by = Some(expert_id.clone());
                flag.record = record.clone();
            }
        }
        self.events_applied += 1;
        Ok(())
    }

    pub fn replay<'a>(events: impl IntoIterator<Item = &'a Event>) -> Result<Self, ServiceError> {
        let mut state = State::default();
        for (i, e) in events.into_iter().enumerate() {
            state
                .apply(e)
                .map_err(|reason| ServiceError::CorruptLog { line: i + 1, reason })?;
        }
        Ok(state)
    }
}

/// Append-only JSONL file of events, one per line.
#[derive(Debug)]
pub struct EventLog {
    file: File,
}

impl EventLog {
    pub fn open(path: &Path) -> Result<(Self, Vec<Event>), ServiceError> {
        let events = if path.exists() { read_events(path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok((Self { file }, events))
    }

    pub fn append(&mut self, event: &Event) -> Result<(), ServiceError> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.flush()?;
        Ok(())
    }
}

pub fn read_events(path: &Path) -> Result<Vec<Event>, ServiceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| ServiceError::CorruptLog {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}
