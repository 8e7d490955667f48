//! Exercises the HTTP API without binding a socket. Run `sevbench serve`
//! for a real listener.
//!
//!     cargo run -p sevbench-service --example http_api

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::Utc;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sevbench::coreset::CoresetResult;
use sevbench::model::{AgentRoute, Interaction};
use sevbench::severity::DecisionTree;
use sevbench_service::{http::router, AnnotationService};
use tower::ServiceExt;

async fn call(app: &axum::Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn post(uri: &str, annotator: &str, body: Value) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .header("x-annotator-id", annotator)
        .body(Body::from(body.to_string()))
        .unwrap()
}

#[tokio::main]
async fn main() {
    let app = router(Arc::new(AnnotationService::in_memory(DecisionTree::default_tree())));

    let item = Interaction::new("int-1", "how do i export a segment", "use the export tab", Utc::now(), AgentRoute::ConceptualDocs)
        .with_decision("answered", "yes");
    let result = CoresetResult::from_weights([(0, 1.0)], 1, 1, None);
    let (status, body) = call(&app, post("/v1/tasks/enqueue", "ops", json!({"result": result, "interactions": [item]}))).await;
    println!("enqueue: {status} {body}");

    let next = Request::get("/v1/tasks/next?annotator=alice").body(Body::empty()).unwrap();
    let (status, lease) = call(&app, next).await;
    println!("next: {status} {lease}");

    let task = lease["task_id"].as_str().unwrap();
    let judgments = json!({"judgments": {"looks_correct_to_user": "no", "rephrase_recovers": "yes"}});
    let (status, body) = call(&app, post(&format!("/v1/tasks/{task}/judgments"), "alice", judgments)).await;
    println!("submit: {status} {body}");

    let (status, body) = call(&app, Request::get("/v1/stats").body(Body::empty()).unwrap()).await;
    println!("stats: {status} {body}");
}
