mod common;

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use common::*;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sevbench::model::SeverityLabel::*;
use sevbench_service::http::router;
use sevbench_service::ServiceConfig;
use tower::ServiceExt;

struct Api(axum::Router);

impl Api {
    fn new() -> Self {
        let (svc, _) = manual_service(ServiceConfig::default());
        Api(router(Arc::new(svc)))
    }

    async fn call(&self, method: &str, uri: &str, who: Option<(&str, bool)>, body: Option<Value>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some((id, expert)) = who {
            req = req.header("x-annotator-id", id).header("x-annotator-expert", expert.to_string());
        }
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.0.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, v)
    }

    async fn enqueue(&self, k: usize) -> (StatusCode, Value) {
        let body = json!({ "result": support(k, k), "interactions": pool(k), "annotators_per_item": 2 });
        self.call("POST", "/v1/tasks/enqueue", None, Some(body)).await
    }
}

#[tokio::test]
async fn annotation_round_trip() {
    let api = Api::new();
    let (s, v) = api.enqueue(3).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["created"], 6);
    assert_eq!(api.enqueue(3).await.1["created"], 0);

    let (s, lease) = api.call("GET", "/v1/tasks/next?annotator=a&expert=false", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(lease["interaction_id"], "i0");
    assert_eq!(lease["tree_version"], "severity-tree-v1");
    let id = lease["task_id"].as_str().unwrap().to_string();

    let (s, task) = api.call("GET", &format!("/v1/tasks/{id}"), None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(task["state"], "leased");
    assert_eq!(task["annotator_id"], "a");

    let (s, out) = api
        .call("POST", &format!("/v1/tasks/{id}/judgments"), Some(("a", false)), Some(json!({ "judgments": judgments_for(Sev0) })))
        .await;
    assert_eq!(s, StatusCode::OK, "{out}");
    assert_eq!(out["derived_label"], "Sev0");

    let (_, lease) = api.call("GET", "/v1/tasks/next", Some(("b", false)), None).await;
    let id = lease["task_id"].as_str().unwrap().to_string();
    let (_, out) = api
        .call("POST", &format!("/v1/tasks/{id}/judgments"), Some(("b", false)), Some(json!({ "judgments": judgments_for(Sev0) })))
        .await;
    assert_eq!(out["item_status"], json!({ "status": "finalized", "label": "Sev0", "resolution": "agreed" }));

    let (_, stats) = api.call("GET", "/v1/stats", None, None).await;
    assert_eq!(stats["finalized"], 1);
    assert_eq!(stats["sev0_gate"]["sev0"], 1.0);
    assert_eq!(stats["sev0_gate"]["passing"], false);
}

#[tokio::test]
async fn error_shapes() {
    let api = Api::new();
    let (s, v) = api.call("GET", "/v1/tasks/task-99", None, None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["kind"], "not_found");

    let body = json!({ "result": support(1, 1), "interactions": pool(1), "annotators_per_item": 0 });
    let (s, v) = api.call("POST", "/v1/tasks/enqueue", None, Some(body)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["kind"], "bad_request");

    let (s, _) = api.call("GET", "/v1/tasks/next", None, None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    let (s, _) = api.call("GET", "/v1/tasks/next?annotator=a", None, None).await;
    assert_eq!(s, StatusCode::NO_CONTENT);

    api.enqueue(1).await;
    let (_, lease) = api.call("GET", "/v1/tasks/next?annotator=a", None, None).await;
    let id = lease["task_id"].as_str().unwrap();
    let bad = json!({ "judgments": { "looks_correct_to_user": "maybe" } });
    let (s, v) = api.call("POST", &format!("/v1/tasks/{id}/judgments"), Some(("a", false)), Some(bad)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["kind"], "invalid_judgments");

    let (s, v) = api.call("GET", "/v1/leaderboard?window=fortnight", None, None).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY, "{v}");
}

#[tokio::test]
async fn tree_and_interactions() {
    let api = Api::new();
    let (s, tree) = api.call("GET", "/v1/tree", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(tree["root"], "answered");
    api.enqueue(2).await;
    let (s, i) = api.call("GET", "/v1/interactions/i1", None, None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(i["query"], "query 1");
    assert_eq!(api.call("GET", "/v1/interactions/zz", None, None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn flags_and_leaderboard() {
    let api = Api::new();
    api.enqueue(2).await;
    let raise = json!({ "interaction_id": "i1", "root_cause": "retrieval_failure", "comment": "wrong doc" });
    let (s, flag) = api.call("POST", "/v1/flags", Some(("r", false)), Some(raise.clone())).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(flag["confirmed"], false);
    let id = flag["id"].as_str().unwrap();

    let (_, board) = api.call("GET", "/v1/leaderboard?window=30d", None, None).await;
    assert_eq!(board, json!([]));

    let uri = format!("/v1/flags/{id}/confirm");
    let (s, _) = api.call("POST", &uri, Some(("r", false)), None).await;
    assert_eq!(s, StatusCode::FORBIDDEN);
    let (s, v) = api
        .call("POST", &uri, Some(("e", true)), Some(json!({ "judgments": judgments_for(Sev0) })))
        .await;
    assert_eq!(s, StatusCode::OK, "{v}");
    assert_eq!(v["confirmed"], true);

    let (_, board) = api.call("GET", "/v1/leaderboard?window=30d", None, None).await;
    assert_eq!(board, json!([{ "reporter_id": "r", "confirmed_flags": 1 }]));
    let (_, records) = api.call("GET", "/v1/flags/records", None, None).await;
    assert_eq!(records[0]["derived_label"], "Sev0");

    let missing = json!({ "interaction_id": "nope", "root_cause": "other" });
    assert_eq!(api.call("POST", "/v1/flags", Some(("r", false)), Some(missing)).await.0, StatusCode::NOT_FOUND);
}
