//! Walks the shipped decision tree for one interaction and resolves a
//! disagreement between two annotators with an expert.
//!
//!     cargo run -p sevbench --example severity_labels

use std::collections::BTreeMap;

use chrono::{Duration, Utc};
use sevbench::model::{AgentRoute, Interaction};
use sevbench::severity::{derive_severity, resolve_disagreement, validate_tree, AnnotationRecord, DecisionTree};

fn answers(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tree = DecisionTree::default_tree();
    assert!(validate_tree(&tree).is_empty());
    for (path, label) in tree.enumerate_paths() {
        println!("{:<60} {label:?}", path.join(" > "));
    }

    let now = Utc::now();
    let item = Interaction::new(
        "q-17",
        "how do i schedule a journey",
        "journeys cannot be scheduled",
        now,
        AgentRoute::ConceptualDocs,
    )
    .with_decision("answered", "yes");

    let plausible_wrong = answers(&[("looks_correct_to_user", "yes"), ("factually_correct", "no")]);
    let d = derive_severity(&tree, &item, &plausible_wrong)?;
    println!("\npath {:?} -> {:?}", d.path(), d.label);

    let correct = answers(&[("looks_correct_to_user", "yes"), ("factually_correct", "yes")]);
    let records = vec![
        AnnotationRecord::derive(&tree, &item, "ann-1", false, &plausible_wrong, now)?,
        AnnotationRecord::derive(&tree, &item, "ann-2", false, &correct, now)?,
    ];
    println!("two annotators: {:?}", resolve_disagreement(&records)?);

    let mut with_expert = records.clone();
    with_expert.push(AnnotationRecord::derive(&tree, &item, "expert", true, &plausible_wrong, now + Duration::hours(1))?);
    println!("with expert:    {:?}", resolve_disagreement(&with_expert)?);
    Ok(())
}
