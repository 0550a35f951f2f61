use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use kgrefine_core::graph::{load_graph, save_graph, Graph, Node, NodeKind};
use kgrefine_review::{
    candidate_id, router, Candidate, CandidateOptions, CandidateSet, ReviewError, ReviewService, CODE_DESCRIPTIONS,
};
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

struct Fixture {
    dir: TempDir,
    app: Router,
    ids: Vec<String>,
}

impl Fixture {
    fn kg_path(&self) -> std::path::PathBuf {
        self.dir.path().join("kg.kgjsonl")
    }

    fn log_lines(&self) -> usize {
        std::fs::read_to_string(self.dir.path().join("ratings.jsonl")).unwrap().lines().count()
    }
}

/// `n` candidates over two diseases, each with its rule and factor in the graph.
fn write_inputs(dir: &Path, n: usize) -> Vec<String> {
    let mut graph = Graph::new();
    let mut candidates = Vec::new();
    for i in 0..n {
        let rule = format!("Rule_{}", i % 2);
        let factor = format!("Param{i}_increased");
        if !graph.contains_node(&rule) {
            graph.add_node(Node::new(&rule, NodeKind::LaboratoryRule)).unwrap();
        }
        graph.add_node(Node::new(&factor, NodeKind::PathologicalReferenceRange)).unwrap();
        candidates.push(Candidate {
            id: candidate_id(&rule, &factor, "fixture-model"),
            rule,
            factor,
            disease: if i % 2 == 0 { "TLS".into() } else { "Hepatitis".into() },
            score: 0.99 - i as f64 / 100.0,
            supporting_patients: 3,
            evaluations: 12,
        });
    }
    let ids = candidates.iter().map(|c| c.id.clone()).collect();
    let set = CandidateSet { model_fingerprint: "fixture-model".into(), options: CandidateOptions::default(), candidates };
    set.save(dir.join("candidates.json")).unwrap();
    save_graph(&graph, dir.join("kg.kgjsonl")).unwrap();
    ids
}

fn open_app(dir: &Path) -> Result<Router, ReviewError> {
    let service =
        ReviewService::open(&dir.join("candidates.json"), &dir.join("kg.kgjsonl"), &dir.join("ratings.jsonl"))?;
    Ok(router(Arc::new(service)))
}

fn fixture(n: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let ids = write_inputs(dir.path(), n);
    let app = open_app(dir.path()).unwrap();
    Fixture { dir, app, ids }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let body = body.map_or_else(Body::empty, |v| Body::from(v.to_string()));
    let response = app.clone().oneshot(request.body(body).unwrap()).await.unwrap();
    let status = response.status();
    let bytes = axum::body::to_bytes(response.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

async fn rate(app: &Router, id: &str, code: i64, reviewer: &str) -> (StatusCode, Value) {
    call(app, Method::POST, "/ratings", Some(json!({"candidate_id": id, "code": code, "reviewer": reviewer}))).await
}

#[tokio::test]
async fn codes_are_served_verbatim() {
    let f = fixture(2);
    let (status, body) = call(&f.app, Method::GET, "/codes", None).await;
    assert_eq!(status, StatusCode::OK);
    let served: Vec<&str> = body.as_array().unwrap().iter().map(|c| c["description"].as_str().unwrap()).collect();
    assert_eq!(served, CODE_DESCRIPTIONS);
    assert_eq!(body[0]["code"], 1);
    let (_, summary) = call(&f.app, Method::GET, "/summary", None).await;
    assert_eq!(summary["codes"], body);
}

#[tokio::test]
async fn listing_filters_by_status_and_disease() {
    let f = fixture(6);
    let (status, all) = call(&f.app, Method::GET, "/candidates", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(all["total"], 6);
    let scores: Vec<f64> = all["candidates"].as_array().unwrap().iter().map(|c| c["score"].as_f64().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));

    assert_eq!(rate(&f.app, &f.ids[0], 1, "expert").await.0, StatusCode::CREATED);
    let (_, unrated) = call(&f.app, Method::GET, "/candidates?status=unrated", None).await;
    assert_eq!(unrated["total"], 5);
    assert!(unrated["candidates"].as_array().unwrap().iter().all(|c| c["status"] == "unrated"));
    let (_, rated) = call(&f.app, Method::GET, "/candidates?status=rated", None).await;
    assert_eq!(rated["candidates"][0]["id"], f.ids[0].as_str());
    assert_eq!(rated["candidates"][0]["ratings"][0]["code"], 1);

    let (_, tls) = call(&f.app, Method::GET, "/candidates?disease=TLS", None).await;
    assert_eq!(tls["total"], 3);
    assert!(tls["candidates"].as_array().unwrap().iter().all(|c| c["disease"] == "TLS"));

    let (status, body) = call(&f.app, Method::GET, "/candidates?status=maybe", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());
}

#[tokio::test]
async fn rating_is_persisted_and_reflected_in_summary() {
    let f = fixture(4);
    for (id, code) in f.ids.iter().zip([1, 1, 2, 5]) {
        let (status, body) = rate(&f.app, id, code, "expert").await;
        assert_eq!(status, StatusCode::CREATED);
        assert_eq!(body["code"], code);
        assert!(body["timestamp"].is_string());
    }
    assert_eq!(f.log_lines(), 4);
    let (_, summary) = call(&f.app, Method::GET, "/summary", None).await;
    assert_eq!(summary["totals"], json!([2, 1, 0, 0, 1]));
    assert_eq!(summary["rated"], 4);
    assert_eq!(summary["diseases"]["TLS"], json!([1, 1, 0, 0, 0]));
    assert_eq!(summary["diseases"]["Hepatitis"], json!([1, 0, 0, 0, 1]));

    // superseding keeps both log lines but only the latest counts
    rate(&f.app, &f.ids[3], 1, "expert").await;
    let (_, summary) = call(&f.app, Method::GET, "/summary", None).await;
    assert_eq!(summary["totals"], json!([3, 1, 0, 0, 0]));
    let (status, detail) = call(&f.app, Method::GET, &format!("/candidates/{}", f.ids[3]), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(detail["history"].as_array().unwrap().len(), 2);
    assert_eq!(detail["candidate"]["ratings"].as_array().unwrap().len(), 1);

    // a restarted service sees the same state
    let reopened = open_app(f.dir.path()).unwrap();
    let (_, again) = call(&reopened, Method::GET, "/summary", None).await;
    assert_eq!(again, summary);
}

#[tokio::test]
async fn bad_ratings_are_rejected() {
    let f = fixture(1);
    let (status, body) = rate(&f.app, &f.ids[0], 6, "expert").await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(body["error"].as_str().unwrap().contains("6"));
    assert_eq!(rate(&f.app, "0000000000000000", 1, "expert").await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&f.app, Method::GET, "/candidates/0000000000000000", None).await.0, StatusCode::NOT_FOUND);
    let unknown_field = json!({"candidate_id": f.ids[0], "code": 1, "reviewer": "x", "extra": true});
    assert_eq!(call(&f.app, Method::POST, "/ratings", Some(unknown_field)).await.0, StatusCode::BAD_REQUEST);
    let missing_reviewer = json!({"candidate_id": f.ids[0], "code": 1});
    assert_eq!(call(&f.app, Method::POST, "/ratings", Some(missing_reviewer)).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&f.app, Method::POST, "/ratings", None).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(f.log_lines(), 0);
}

#[tokio::test]
async fn apply_writes_accepted_edges_once() {
    let f = fixture(5);
    for (id, code) in f.ids.iter().zip([1, 1, 1, 2, 4]) {
        rate(&f.app, id, code, "expert").await;
    }
    let (_, before) = call(&f.app, Method::GET, "/graph/stats", None).await;

    let (status, log) = call(&f.app, Method::POST, "/apply", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(log["accept_codes"], json!([1]));
    assert_eq!(log["added"].as_array().unwrap().len(), 3);
    assert_eq!(log["added"][0]["triple"]["label"], "signals_by");
    assert_eq!(log["added"][0]["reviewer"], "expert");

    let (_, after) = call(&f.app, Method::GET, "/graph/stats", None).await;
    assert_eq!(after["edge_count"].as_u64().unwrap(), before["edge_count"].as_u64().unwrap() + 3);
    assert_eq!(load_graph(f.kg_path()).unwrap().edge_count(), 3);

    let (_, rerun) = call(&f.app, Method::POST, "/apply", Some(json!({}))).await;
    assert!(rerun["added"].as_array().unwrap().is_empty());
    assert_eq!(rerun["skipped"].as_array().unwrap().len(), 3);

    let (_, wider) = call(&f.app, Method::POST, "/apply", Some(json!({"accept_codes": [1, 2]}))).await;
    assert_eq!(wider["added"].as_array().unwrap().len(), 1);
    assert_eq!(load_graph(f.kg_path()).unwrap().edge_count(), 4);

    for bad in [json!({"accept_codes": []}), json!({"accept_codes": [7]}), json!({"codes": [1]})] {
        let (status, _) = call(&f.app, Method::POST, "/apply", Some(bad)).await;
        assert!(status.is_client_error());
    }
}

#[tokio::test]
async fn full_rating_pass_loses_nothing() {
    let f = fixture(20);
    let tasks: Vec<_> = f
        .ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let (app, id) = (f.app.clone(), id.clone());
            tokio::spawn(async move { rate(&app, &id, (i % 5) as i64 + 1, "expert").await.0 })
        })
        .collect();
    for t in tasks {
        assert_eq!(t.await.unwrap(), StatusCode::CREATED);
    }
    assert_eq!(f.log_lines(), 20);
    let (_, summary) = call(&f.app, Method::GET, "/summary", None).await;
    assert_eq!(summary["totals"], json!([4, 4, 4, 4, 4]));
    let (_, unrated) = call(&f.app, Method::GET, "/candidates?status=unrated", None).await;
    assert_eq!(unrated["total"], 0);
}

#[test]
fn corrupt_store_is_refused_at_startup() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), 2);
    std::fs::write(dir.path().join("ratings.jsonl"), "{\"candidate_id\": \n").unwrap();
    assert!(matches!(open_app(dir.path()), Err(ReviewError::CorruptStore { line: 1, .. })));
}

#[tokio::test]
async fn serve_reports_bind_failures() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path(), 1);
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let config = kgrefine_review::ServeConfig {
        addr: taken.local_addr().unwrap(),
        candidates: dir.path().join("candidates.json"),
        kg: dir.path().join("kg.kgjsonl"),
        ratings: dir.path().join("ratings.jsonl"),
    };
    assert!(matches!(kgrefine_review::serve(config).await, Err(ReviewError::Bind { .. })));
}
