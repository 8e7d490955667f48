//! Shared domain types: interactions, severity labels, embedding vectors and
//! proportion estimates, plus the JSONL contract for interactions.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ModelError;

/// Which specialised agent produced the answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRoute {
    ConceptualDocs,
    StructuredData,
    Other,
}

/// A production query/answer pair together with the decisions the assistant
/// logged while producing it.
///
/// Fields are declared in lexicographic order so that the derived serializer
/// emits keys sorted, which keeps `interactions.jsonl` byte-deterministic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub agent_route: AgentRoute,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conversation_id: Option<String>,
    pub id: String,
    pub query: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub system_decisions: BTreeMap<String, String>,
    pub timestamp: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn_index: Option<u32>,
}

const REQUIRED_INTERACTION_FIELDS: [&str; 5] = ["agent_route", "answer", "id", "query", "timestamp"];

impl Interaction {
    pub fn new(
        id: impl Into<String>,
        query: impl Into<String>,
        answer: impl Into<String>,
        timestamp: DateTime<Utc>,
        agent_route: AgentRoute,
    ) -> Self {
        Self {
            agent_route,
            answer: answer.into(),
            conversation_id: None,
            id: id.into(),
            query: query.into(),
            system_decisions: BTreeMap::new(),
            timestamp,
            turn_index: None,
        }
    }

    pub fn with_decision(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.system_decisions.insert(key.into(), value.into());
        self
    }

    pub fn in_conversation(mut self, conversation_id: impl Into<String>, turn_index: u32) -> Self {
        self.conversation_id = Some(conversation_id.into());
        self.turn_index = Some(turn_index);
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.id.is_empty() {
            return Err(ModelError::InvalidField {
                field: "id".into(),
                reason: "must be non-empty".into(),
            });
        }
        match (&self.conversation_id, self.turn_index) {
            (None, Some(_)) => Err(ModelError::Invariant(
                "turn_index present without conversation_id".into(),
            )),
            (Some(_), None) => Err(ModelError::Invariant(
                "conversation_id present without turn_index".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Serializes an interaction as one line of JSON with lexicographically
/// ordered keys.
pub fn serialize_interaction(rec: &Interaction) -> String {
    // Struct fields and the BTreeMap are both key-sorted, so the derived
    // serializer is already canonical.
    serde_json::to_string(rec).expect("interaction serialization is infallible")
}

/// Parses one JSONL record, naming the offending field on failure.
pub fn parse_interaction(line: &str) -> Result<Interaction, ModelError> {
    let value: Value =
        serde_json::from_str(line).map_err(|e| ModelError::Malformed(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| ModelError::Malformed("expected a JSON object".into()))?;
    for field in REQUIRED_INTERACTION_FIELDS {
        if !obj.contains_key(field) {
            return Err(ModelError::MissingField(field.into()));
        }
    }
    for (field, v) in obj {
        if let Err(e) = check_field(field, v) {
            return Err(ModelError::InvalidField {
                field: field.clone(),
                reason: e,
            });
        }
    }
    let rec: Interaction =
        serde_json::from_value(value).map_err(|e| ModelError::Malformed(e.to_string()))?;
    rec.validate()?;
    Ok(rec)
}

fn check_field(field: &str, v: &Value) -> Result<(), String> {
    fn de<T: serde::de::DeserializeOwned>(v: &Value) -> Result<(), String> {
        T::deserialize(v).map(|_| ()).map_err(|e| e.to_string())
    }
    match field {
        "agent_route" => de::<AgentRoute>(v),
        "answer" | "id" | "query" => de::<String>(v),
        "conversation_id" => de::<Option<String>>(v),
        "system_decisions" => de::<BTreeMap<String, String>>(v),
        "timestamp" => de::<DateTime<Utc>>(v),
        "turn_index" => de::<Option<u32>>(v),
        _ => Ok(()),
    }
}

/// Reads an `interactions.jsonl` body, rejecting duplicate ids.
pub fn parse_interactions_jsonl(text: &str) -> Result<Vec<Interaction>, ModelError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_interaction(line).map_err(|e| ModelError::AtLine {
            line: lineno + 1,
            source: Box::new(e),
        })?;
        if !seen.insert(rec.id.clone()) {
            return Err(ModelError::DuplicateId(rec.id));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn interactions_to_jsonl(pool: &[Interaction]) -> String {
    let mut s = String::new();
    for rec in pool {
        s.push_str(&serialize_interaction(rec));
        s.push('\n');
    }
    s
}

/// Error-severity outcome of one interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SeverityLabel {
    /// Answer looks right, but is wrong.
    Sev0,
    /// Answer looks wrong and the user cannot recover by rephrasing.
    Sev1,
    /// Answer looks wrong and the user can recover by rephrasing.
    Sev2,
    /// Correct answer.
    NoError,
}

impl SeverityLabel {
    pub const ALL: [SeverityLabel; 4] = [
        SeverityLabel::Sev0,
        SeverityLabel::Sev1,
        SeverityLabel::Sev2,
        SeverityLabel::NoError,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SeverityLabel::Sev0 => "Sev0",
            SeverityLabel::Sev1 => "Sev1",
            SeverityLabel::Sev2 => "Sev2",
            SeverityLabel::NoError => "NoError",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SeverityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SeverityLabel {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SeverityLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| ModelError::InvalidField {
                field: "label".into(),
                reason: format!("unknown severity label {s:?}"),
            })
    }
}

/// Dense covariate representation of one interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub interaction_id: String,
    pub values: Vec<f32>,
}

impl EmbeddingVector {
    pub fn new(interaction_id: impl Into<String>, values: Vec<f32>) -> Self {
        Self {
            interaction_id: interaction_id.into(),
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// Checks that a pool of vectors is usable: non-zero shared dimension,
/// finite entries.
pub fn check_vector_pool(vectors: &[EmbeddingVector]) -> Result<usize, ModelError> {
    let Some(first) = vectors.first() else {
        return Ok(0);
    };
    let dim = first.dim();
    if dim == 0 {
        return Err(ModelError::Invariant("embedding dimension must be >= 1".into()));
    }
    for v in vectors {
        if v.dim() != dim {
            return Err(ModelError::DimensionMismatch {
                id: v.interaction_id.clone(),
                expected: dim,
                found: v.dim(),
            });
        }
        if v.values.iter().any(|x| !x.is_finite()) {
            return Err(ModelError::InvalidField {
                field: "values".into(),
                reason: format!("non-finite entry in vector {}", v.interaction_id),
            });
        }
    }
    Ok(dim)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Uniform,
    Coreset,
}

/// Estimated proportions of the four severity outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionEstimate {
    pub category_proportions: BTreeMap<SeverityLabel, f64>,
    pub sample_size: usize,
    pub estimator: EstimatorKind,
}

impl ProportionEstimate {
    /// Builds an estimate from per-label masses, normalising by their total.
    /// Labels absent from `mass` get proportion zero.
    pub fn from_masses(
        mass: &BTreeMap<SeverityLabel, f64>,
        sample_size: usize,
        estimator: EstimatorKind,
    ) -> Result<Self, ModelError> {
        let total: f64 = SeverityLabel::ALL
            .iter()
            .map(|l| mass.get(l).copied().unwrap_or(0.0))
            .sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(ModelError::Invariant("total mass must be positive".into()));
        }
        let category_proportions = SeverityLabel::ALL
            .iter()
            .map(|&l| (l, mass.get(&l).copied().unwrap_or(0.0) / total))
            .collect();
        let est = Self {
            category_proportions,
            sample_size,
            estimator,
        };
        est.validate()?;
        Ok(est)
    }

    /// Unweighted proportions of a list of labels.
    pub fn from_labels<'a>(
        labels: impl IntoIterator<Item = &'a SeverityLabel>,
        estimator: EstimatorKind,
    ) -> Result<Self, ModelError> {
        let mut mass = BTreeMap::new();
        let mut n = 0usize;
        for l in labels {
            *mass.entry(*l).or_insert(0.0) += 1.0;
            n += 1;
        }
        Self::from_masses(&mass, n, estimator)
    }

    pub fn proportion(&self, label: SeverityLabel) -> f64 {
        self.category_proportions.get(&label).copied().unwrap_or(0.0)
    }

    /// Proportions in `SeverityLabel::ALL` order.
    pub fn as_array(&self) -> [f64; 4] {
        SeverityLabel::ALL.map(|l| self.proportion(l))
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut sum = 0.0;
        for (l, &p) in &self.category_proportions {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::Invariant(format!("proportion for {l} outside [0,1]: {p}")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ModelError::Invariant(format!("proportions sum to {sum}, not 1")));
        }
        Ok(())
    }
}
