//! Drives the annotation service in-process: enqueue a coreset, lease and
//! grade tasks, escalate a disagreement to an expert, then read the stats
//! and the adversarial leaderboard.
//!
//!     cargo run -p sevbench-service --example annotation_workflow

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{Duration, Utc};
use sevbench::coreset::CoresetResult;
use sevbench::model::{AgentRoute, Interaction};
use sevbench::severity::DecisionTree;
use sevbench_service::state::RootCause;
use sevbench_service::{AnnotationService, ManualClock, ServiceConfig, Window};

fn answers(looks: &str, key: &str, value: &str) -> BTreeMap<String, String> {
    BTreeMap::from([
        ("looks_correct_to_user".to_string(), looks.to_string()),
        (key.to_string(), value.to_string()),
    ])
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let start = Utc::now();
    let clock = Arc::new(ManualClock::new(start));
    let svc = AnnotationService::open(ServiceConfig::default(), DecisionTree::default_tree(), clock.clone())?;

    let pool: Vec<Interaction> = (0..3)
        .map(|i| {
            Interaction::new(format!("int-{i}"), format!("question {i}"), format!("answer {i}"), start, AgentRoute::ConceptualDocs)
                .with_decision("answered", "yes")
        })
        .collect();
    let coreset = CoresetResult::from_weights([(0, 5.0), (1, 3.0), (2, 2.0)], 3, 3, None);
    println!("created {} tasks", svc.enqueue_coreset(&coreset, &pool, None)?);

    let correct = answers("yes", "factually_correct", "yes");
    let wrong = answers("yes", "factually_correct", "no");
    // alice and bob agree on int-0 and int-1 but split on int-2.
    for (annotator, on_last) in [("alice", &correct), ("bob", &wrong)] {
        while let Some(lease) = svc.lease_next(annotator, false)? {
            let j = if lease.interaction_id == "int-2" { on_last } else { &correct };
            let out = svc.submit_judgments(&lease.task_id, annotator, j)?;
            println!("{annotator} graded {} -> {:?}", lease.interaction_id, out.derived_label);
        }
    }
    let stats = svc.stats();
    println!("finalized {} escalated {}", stats.finalized, stats.escalated);

    let adjudication = svc.lease_next("erin", true)?.expect("an escalated item waits for an expert");
    svc.submit_judgments(&adjudication.task_id, "erin", &wrong)?;
    let stats = svc.stats();
    println!("after expert: finalized {}, sev0 gate {:?}", stats.finalized, stats.sev0_gate);

    clock.advance(Duration::minutes(5));
    let flag = svc.flag_adversarial("mallory", "int-2", RootCause::Hallucination, "invents a setting")?;
    svc.confirm_flag(&flag.id, "erin", true, Some(&wrong))?;
    for entry in svc.leaderboard(Window::Trailing(Duration::days(30))) {
        println!("leaderboard: {} {}", entry.reporter_id, entry.confirmed_flags);
    }
    Ok(())
}

