#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use sevbench::coreset::CoresetResult;
use sevbench::model::{AgentRoute, Interaction, SeverityLabel};
use sevbench::severity::DecisionTree;
use sevbench_service::{AnnotationService, ManualClock, ServiceConfig};

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 3, 1, 9, 0, 0).unwrap()
}

pub fn pool(n: usize) -> Vec<Interaction> {
    (0..n)
        .map(|i| {
            Interaction::new(format!("i{i}"), format!("query {i}"), format!("answer {i}"), t0(), AgentRoute::ConceptualDocs)
                .with_decision("answered", "yes")
        })
        .collect()
}

/// Uniform-weight coreset over the first `k` pool members.
pub fn support(k: usize, n: usize) -> CoresetResult {
    CoresetResult::from_weights((0..k).map(|i| (i, 1.0)), k, n, None)
}

/// Answers that walk the shipped tree to `label` on an answered interaction.
pub fn judgments_for(label: SeverityLabel) -> BTreeMap<String, String> {
    let (looks, second) = match label {
        SeverityLabel::Sev0 => ("yes", ("factually_correct", "no")),
        SeverityLabel::NoError => ("yes", ("factually_correct", "yes")),
        SeverityLabel::Sev1 => ("no", ("rephrase_recovers", "no")),
        SeverityLabel::Sev2 => ("no", ("rephrase_recovers", "yes")),
    };
    BTreeMap::from([
        ("looks_correct_to_user".to_string(), looks.to_string()),
        (second.0.to_string(), second.1.to_string()),
    ])
}

pub fn manual_service(config: ServiceConfig) -> (AnnotationService, Arc<ManualClock>) {
    let clock = Arc::new(ManualClock::new(t0()));
    let svc = AnnotationService::open(config, DecisionTree::default_tree(), clock.clone()).unwrap();
    (svc, clock)
}
