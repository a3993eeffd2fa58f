//! Drives the annotation JSON API in-process, the way the browser UI does:
//! open a session, fetch a proposal, decide, read stats and the export.
//!
//! ```text
//! cargo run --example http_api
//! ```
//!
//! `haystack serve --campaign-dir DIR` serves the same routes over TCP.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use haystack::dataset::{CategoryTable, Dataset, ImageRecord, SegmentedObject};
use haystack::proposal::Proposal;
use haystack::service::http::router;
use haystack::service::{Campaign, CampaignSpec, SystemClock, DEFAULT_LEASE_TTL_MS};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn campaign() -> Campaign {
    let mut cats =
        CategoryTable::new(vec!["person".into(), "guitar".into()], vec![], vec!["holding".into(), "playing".into()]);
    cats.display_names.insert(1, "engaged in activity using".into());
    let mut images = Dataset::new(cats);
    images.images.push(
        ImageRecord::new("42", "42.jpg", 800, 600)
            .with_objects(vec![SegmentedObject::new(7, 0), SegmentedObject::new(9, 1)]),
    );
    let queue = vec![Proposal {
        proposal_id: Proposal::make_id("42", 0, 1, 1),
        image_id: "42".into(),
        subject_idx: 0,
        object_idx: 1,
        predicate_id: 1,
        ranking_score: 3.5,
        cluster_id: None,
    }];
    let spec = CampaignSpec::new(images, queue).expect("consistent campaign");
    Campaign::in_memory(spec, Arc::new(SystemClock), DEFAULT_LEASE_TTL_MS)
}

async fn call(app: &axum::Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let builder = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(b) => builder.header("content-type", "application/json").body(Body::from(b.to_string())),
        None => builder.body(Body::empty()),
    }
    .expect("valid request");
    let response = app.clone().oneshot(request).await.expect("infallible");
    let status = response.status();
    let bytes = response.into_body().collect().await.expect("body").to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).expect("json body") };
    (status, value)
}

/// Every exchange as (request line, status, body).
pub fn run_example() -> Vec<(String, StatusCode, Value)> {
    let rt = tokio::runtime::Runtime::new().expect("runtime");
    rt.block_on(async {
        let app = router(Arc::new(campaign()), None);
        let mut log = Vec::new();
        let mut exchange = |line: &str, status, value: Value| {
            log.push((line.to_string(), status, value.clone()));
            value
        };

        let (st, v) = call(&app, Method::POST, "/api/sessions", Some(json!({ "annotator_id": "ada" }))).await;
        let session = exchange("POST /api/sessions", st, v)["session_id"].as_str().expect("id").to_string();

        let (st, v) = call(&app, Method::GET, "/api/predicates", None).await;
        exchange("GET /api/predicates", st, v);

        let uri = format!("/api/next?session_id={session}&predicate=playing");
        let (st, v) = call(&app, Method::GET, &uri, None).await;
        let proposal = exchange("GET /api/next", st, v)["proposal_id"].as_str().expect("proposal").to_string();

        let body = json!({ "session_id": session, "proposal_id": proposal, "decision": "positive" });
        let (st, v) = call(&app, Method::POST, "/api/decisions", Some(body.clone())).await;
        exchange("POST /api/decisions", st, v);
        // A double click submits again and is refused.
        let (st, v) = call(&app, Method::POST, "/api/decisions", Some(body)).await;
        exchange("POST /api/decisions (again)", st, v);

        let (st, v) = call(&app, Method::GET, &uri, None).await;
        exchange("GET /api/next (exhausted)", st, v);
        let (st, v) = call(&app, Method::GET, "/api/stats", None).await;
        exchange("GET /api/stats", st, v);
        let (st, v) = call(&app, Method::GET, "/api/export", None).await;
        exchange("GET /api/export", st, v);
        log
    })
}

#[allow(dead_code)]
fn main() {
    for (line, status, body) in run_example() {
        println!("{line} -> {status}");
        if !body.is_null() {
            println!("  {body}");
        }
    }
}
