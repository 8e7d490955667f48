//! Severity labels derived from granular judgments by walking a configurable
//! decision tree, and adjudication of disagreeing annotators.
//!
//! Trees are data (`tree.json`). Judgment nodes ask the annotator a question,
//! system nodes branch on a decision the assistant logged for the
//! interaction, and leaves carry the resulting [`SeverityLabel`].

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::SeverityError;
use crate::model::{Interaction, SeverityLabel};

/// The tree shipped with the toolkit.
pub const DEFAULT_TREE_JSON: &str = include_str!("../assets/default_tree.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    Judgment {
        question_text: String,
        answer_options: Vec<String>,
        edges: BTreeMap<String, String>,
    },
    System {
        decision_key: String,
        edges: BTreeMap<String, String>,
        default_edge: String,
    },
    Leaf {
        label: SeverityLabel,
    },
}

impl Node {
    fn children(&self) -> Vec<(&str, &str)> {
        match self {
            Node::Judgment { edges, .. } => edges.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect(),
            Node::System { edges, default_edge, .. } => edges
                .iter()
                .map(|(k, v)| (k.as_str(), v.as_str()))
                .chain(std::iter::once(("<default>", default_edge.as_str())))
                .collect(),
            Node::Leaf { .. } => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub version: String,
    pub root: String,
    pub nodes: BTreeMap<String, Node>,
}

impl DecisionTree {
    pub fn default_tree() -> Self {
        Self::from_json(DEFAULT_TREE_JSON).expect("shipped tree parses")
    }

    pub fn from_json(text: &str) -> Result<Self, SeverityError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SeverityError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| SeverityError::InvalidTree(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serialization is infallible")
    }

    pub fn node(&self, id: &str) -> Result<&Node, SeverityError> {
        self.nodes.get(id).ok_or_else(|| SeverityError::UnknownNode(id.to_string()))
    }

    /// Every root-to-leaf path as (node ids, leaf label), exploring both
    /// judgment options and system branches (including the default edge).
    pub fn enumerate_paths(&self) -> Vec<(Vec<String>, SeverityLabel)> {
        let mut out = Vec::new();
        let mut stack = vec![vec![self.root.clone()]];
        while let Some(path) = stack.pop() {
            let last = path.last().expect("paths are non-empty");
            match self.nodes.get(last) {
                Some(Node::Leaf { label }) => out.push((path, *label)),
                Some(node) => {
                    for (_, child) in node.children().into_iter().rev() {
                        if path.iter().any(|p| p == child) || path.len() > self.nodes.len() {
                            continue;
                        }
                        let mut next = path.clone();
                        next.push(child.to_string());
                        stack.push(next);
                    }
                }
                None => {}
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub node_id: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.node_id, self.rule)
    }
}

/// Lists every broken tree invariant; empty means the tree is usable.
pub fn validate_tree(tree: &DecisionTree) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |node_id: &str, rule: String| {
        out.push(Violation {
            node_id: node_id.to_string(),
            rule,
        })
    };

    if !tree.nodes.contains_key(&tree.root) {
        push(&tree.root, "root node does not exist".into());
    }

    let mut parents: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (id, node) in &tree.nodes {
        if let Node::Judgment { answer_options, edges, .. } = node {
            if answer_options.len() < 2 {
                push(id, format!("judgment node has {} option(s), needs at least 2", answer_options.len()));
            }
            let distinct: BTreeSet<&String> = answer_options.iter().collect();
            if distinct.len() != answer_options.len() {
                push(id, "duplicate answer option".into());
            }
            for opt in answer_options {
                if !edges.contains_key(opt) {
                    push(id, format!("option {opt:?} has no edge"));
                }
            }
            for opt in edges.keys() {
                if !answer_options.contains(opt) {
                    push(id, format!("edge {opt:?} is not an answer option"));
                }
            }
        }
        if let Node::System { decision_key, .. } = node {
            if decision_key.is_empty() {
                push(id, "system node has an empty decision key".into());
            }
        }
        for (via, child) in node.children() {
            if !tree.nodes.contains_key(child) {
                push(id, format!("dangling edge {via:?} -> missing node {child:?}"));
            } else {
                parents.entry(child).or_default().insert(id.as_str());
            }
        }
    }

    for (child, ps) in &parents {
        if *child == tree.root.as_str() {
            push(child, "root node has a parent".into());
        } else if ps.len() > 1 {
            push(child, format!("node has {} parents {:?}", ps.len(), ps));
        }
    }

    // Reachability and cycle detection from the root.
    let mut reachable = BTreeSet::new();
    if tree.nodes.contains_key(&tree.root) {
        let mut queue = VecDeque::from([tree.root.as_str()]);
        while let Some(id) = queue.pop_front() {
            if !reachable.insert(id) {
                continue;
            }
            for (_, child) in tree.nodes[id].children() {
                if tree.nodes.contains_key(child) && !reachable.contains(child) {
                    queue.push_back(child);
                }
            }
        }
    }
    for id in tree.nodes.keys() {
        if !reachable.contains(id.as_str()) {
            push(id, "node unreachable from root".into());
        }
    }
    if has_cycle(tree) {
        push(&tree.root, "graph contains a cycle".into());
    }

    let labels: BTreeSet<SeverityLabel> = tree
        .nodes
        .iter()
        .filter(|(id, _)| reachable.contains(id.as_str()))
        .filter_map(|(_, n)| match n {
            Node::Leaf { label } => Some(*label),
            _ => None,
        })
        .collect();
    for label in SeverityLabel::ALL {
        if !labels.contains(&label) {
            push(&tree.root, format!("unreachable label {label}"));
        }
    }
    out
}

fn has_cycle(tree: &DecisionTree) -> bool {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    let mut marks: BTreeMap<&str, Mark> = BTreeMap::new();
    for start in tree.nodes.keys() {
        if marks.contains_key(start.as_str()) {
            continue;
        }
        // Iterative DFS: (node, next child index).
        let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
        marks.insert(start, Mark::Active);
        while let Some((id, i)) = stack.pop() {
            let children = tree.nodes[id].children();
            if i < children.len() {
                stack.push((id, i + 1));
                let child = children[i].1;
                match marks.get(child) {
                    Some(Mark::Active) => return true,
                    Some(Mark::Done) => {}
                    None if tree.nodes.contains_key(child) => {
                        marks.insert(child, Mark::Active);
                        stack.push((child, 0));
                    }
                    None => {}
                }
            } else {
                marks.insert(id, Mark::Done);
            }
        }
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSource {
    Judgment,
    System,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub node_id: String,
    pub source: StepSource,
    /// Answer or system decision value taken out of this node.
    pub value: String,
}

/// Result of walking the tree for one interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub label: SeverityLabel,
    pub leaf: String,
    pub steps: Vec<TraceStep>,
}

impl Derivation {
    /// Node ids from root to leaf.
    pub fn path(&self) -> Vec<&str> {
        self.steps
            .iter()
            .map(|s| s.node_id.as_str())
            .chain(std::iter::once(self.leaf.as_str()))
            .collect()
    }

    /// The judgment answers consumed along the path, in order.
    pub fn judgments(&self) -> Vec<(String, String)> {
        self.steps
            .iter()
            .filter(|s| s.source == StepSource::Judgment)
            .map(|s| (s.node_id.clone(), s.value.clone()))
            .collect()
    }
}

/// Walks from the root: judgment nodes consume `judgments[node_id]`, system
/// nodes consume the interaction's logged decision (default edge when the
/// key is absent or unmapped). Judgments for off-path nodes are ignored.
pub fn derive_severity(
    tree: &DecisionTree,
    interaction: &Interaction,
    judgments: &BTreeMap<String, String>,
) -> Result<Derivation, SeverityError> {
    derive_with_decisions(tree, &interaction.system_decisions, judgments)
}

pub fn derive_with_decisions(
    tree: &DecisionTree,
    system_decisions: &BTreeMap<String, String>,
    judgments: &BTreeMap<String, String>,
) -> Result<Derivation, SeverityError> {
    let mut steps = Vec::new();
    let mut current = tree.root.clone();
    for _ in 0..=tree.nodes.len() {
        match tree.node(&current)? {
            Node::Leaf { label } => {
                return Ok(Derivation {
                    label: *label,
                    leaf: current,
                    steps,
                })
            }
            Node::Judgment { answer_options, edges, .. } => {
                let answer = judgments
                    .get(&current)
                    .ok_or_else(|| SeverityError::MissingJudgment(current.clone()))?;
                if !answer_options.contains(answer) {
                    return Err(SeverityError::InvalidOption {
                        node_id: current,
                        option: answer.clone(),
                    });
                }
                let next = edges.get(answer).ok_or_else(|| SeverityError::InvalidOption {
                    node_id: current.clone(),
                    option: answer.clone(),
                })?;
                let next = next.clone();
                steps.push(TraceStep {
                    node_id: std::mem::replace(&mut current, next),
                    source: StepSource::Judgment,
                    value: answer.clone(),
                });
            }
            Node::System {
                decision_key,
                edges,
                default_edge,
            } => {
                let value = system_decisions.get(decision_key);
                let next = value.and_then(|v| edges.get(v)).unwrap_or(default_edge).clone();
                steps.push(TraceStep {
                    node_id: std::mem::replace(&mut current, next),
                    source: StepSource::System,
                    value: value.cloned().unwrap_or_else(|| "<default>".into()),
                });
            }
        }
    }
    Err(SeverityError::NonTerminating(current))
}

/// One annotator's answers for one interaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub annotator_id: String,
    pub derived_label: SeverityLabel,
    pub interaction_id: String,
    pub is_expert: bool,
    pub judgments: Vec<(String, String)>,
    pub timestamp: DateTime<Utc>,
    pub tree_version: String,
}

impl AnnotationRecord {
    /// Derives the label and builds the record from a judgment map; only
    /// on-path judgments are kept.
    pub fn derive(
        tree: &DecisionTree,
        interaction: &Interaction,
        annotator_id: impl Into<String>,
        is_expert: bool,
        judgments: &BTreeMap<String, String>,
        timestamp: DateTime<Utc>,
    ) -> Result<Self, SeverityError> {
        let d = derive_severity(tree, interaction, judgments)?;
        Ok(Self {
            annotator_id: annotator_id.into(),
            derived_label: d.label,
            interaction_id: interaction.id.clone(),
            is_expert,
            judgments: d.judgments(),
            timestamp,
            tree_version: tree.version.clone(),
        })
    }

    pub fn judgment_map(&self) -> BTreeMap<String, String> {
        self.judgments.iter().cloned().collect()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serialization is infallible")
    }
}

pub fn parse_annotations_jsonl(text: &str) -> Result<Vec<AnnotationRecord>, SeverityError> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResolutionStatus {
    Agreed,
    ExpertResolved,
    PendingExpert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub label: Option<SeverityLabel>,
    pub status: ResolutionStatus,
}

/// Final label for one interaction from all of its annotation records.
///
/// Unanimous non-experts settle the label. Otherwise the most recent expert
/// record decides; without one the item waits for an expert.
pub fn resolve_disagreement(records: &[AnnotationRecord]) -> Result<Resolution, SeverityError> {
    if records.is_empty() {
        return Err(SeverityError::NoRecords);
    }
    let versions: BTreeSet<&str> = records.iter().map(|r| r.tree_version.as_str()).collect();
    if versions.len() > 1 {
        return Err(SeverityError::MixedVersions(versions.into_iter().map(String::from).collect()));
    }
    let items: BTreeSet<&str> = records.iter().map(|r| r.interaction_id.as_str()).collect();
    if items.len() > 1 {
        return Err(SeverityError::MixedInteractions(items.into_iter().map(String::from).collect()));
    }

    let non_expert: BTreeSet<SeverityLabel> =
        records.iter().filter(|r| !r.is_expert).map(|r| r.derived_label).collect();
    if non_expert.len() == 1 {
        return Ok(Resolution {
            label: non_expert.into_iter().next(),
            status: ResolutionStatus::Agreed,
        });
    }
    // Latest expert wins; ties on timestamp go to the later record.
    let expert = records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_expert)
        .max_by_key(|(i, r)| (r.timestamp, *i))
        .map(|(_, r)| r.derived_label);
    Ok(match expert {
        Some(label) => Resolution {
            label: Some(label),
            status: ResolutionStatus::ExpertResolved,
        },
        None => Resolution {
            label: None,
            status: ResolutionStatus::PendingExpert,
        },
    })
}

/// Groups records by interaction and resolves each group. Interactions still
/// waiting for an expert are left out.
pub fn resolve_all(records: &[AnnotationRecord]) -> Result<BTreeMap<String, Resolution>, SeverityError> {
    let mut groups: BTreeMap<&str, Vec<AnnotationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(r.interaction_id.as_str()).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|(id, rs)| Ok((id.to_string(), resolve_disagreement(&rs)?)))
        .collect()
}

/// Final labels of every resolved interaction.
pub fn final_labels(records: &[AnnotationRecord]) -> Result<BTreeMap<String, SeverityLabel>, SeverityError> {
    Ok(resolve_all(records)?
        .into_iter()
        .filter_map(|(id, r)| r.label.map(|l| (id, l)))
        .collect())
}
