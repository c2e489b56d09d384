use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

use tmatch_cli::Workspace;
use tmatch_core::analytics::{
    activity_histogram, heatmap_across, person_channel_counts, person_scatter, spatial_distribution,
    structure_projection,
};
use tmatch_core::generate::{noisy_copy, random_connected, GraphParams, Noise, SyntheticGraph};
use tmatch_core::matcher::rank_candidates;
use tmatch_core::{load_graph, GraphView, NodeId, NodeKind, ViewConfig};

struct Fixture {
    template: SyntheticGraph,
    copy: SyntheticGraph,
    truth: Vec<(NodeId, NodeId)>,
}

fn fixture() -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let template = random_connected(&mut rng, &GraphParams::template());
    let planted = noisy_copy(&mut rng, &template, Noise::exact(), 500);
    Fixture {
        template,
        copy: planted.graph,
        truth: planted.truth.into_iter().collect(),
    }
}

fn app(dir: &Path) -> (Arc<Workspace>, Router) {
    let ws = Arc::new(Workspace::open(dir).unwrap());
    (ws.clone(), tmatch_cli::api::router(ws))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let request = Request::builder().method(method).uri(uri);
    let request = match body {
        Some(v) => request
            .header("content-type", "application/json")
            .body(Body::from(v.to_string())),
        None => request.body(Body::empty()),
    }
    .unwrap();
    let response = app.clone().oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|e| panic!("{uri}: non-JSON body ({e})"))
    };
    (status, value)
}

async fn upload(app: &Router, id: &str, g: &SyntheticGraph) -> Value {
    let (edges, nodes) = g.to_csv();
    let (status, body) = call(
        app,
        Method::POST,
        "/api/graphs",
        Some(json!({ "id": id, "edges": edges, "nodes": nodes })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body
}

fn engine_view(ws: &Workspace, g: &SyntheticGraph, config: ViewConfig) -> GraphView {
    let (edges, nodes) = g.to_csv();
    let loaded = load_graph(edges.as_bytes(), Some(nodes.as_bytes()), ws.registry()).unwrap();
    GraphView::new(Arc::new(loaded.graph), config).unwrap()
}

fn first_person(g: &SyntheticGraph) -> NodeId {
    g.build()
        .node_ids()
        .find(|&n| g.kind(n) == Some(NodeKind::Person))
        .unwrap()
}

#[tokio::test]
async fn analytics_match_the_engine() {
    let dir = tempfile::tempdir().unwrap();
    let (ws, app) = app(dir.path());
    let f = fixture();
    upload(&app, "t", &f.template).await;
    let config = ViewConfig::all().with_channels(&["email", "phone", "sell"]);
    let (status, _) = call(
        &app,
        Method::PUT,
        "/api/graphs/t/view",
        Some(serde_json::to_value(&config).unwrap()),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let view = engine_view(&ws, &f.template, config);
    let person = first_person(&f.template);

    let checks = [
        (
            "/api/graphs/t/histogram?bin_width=86400&origin=5".to_string(),
            serde_json::to_value(activity_histogram(&view, Some(86_400.0), 5.0).unwrap()).unwrap(),
        ),
        (
            "/api/graphs/t/histogram".to_string(),
            serde_json::to_value(activity_histogram(&view, None, 0.0).unwrap()).unwrap(),
        ),
        (
            "/api/graphs/t/scatter".to_string(),
            serde_json::to_value(person_scatter(&view)).unwrap(),
        ),
        (
            "/api/graphs/t/spatial".to_string(),
            serde_json::to_value(spatial_distribution(&view)).unwrap(),
        ),
        (
            "/api/graphs/t/structure".to_string(),
            serde_json::to_value(structure_projection(&view)).unwrap(),
        ),
        (
            "/api/graphs/t/stats".to_string(),
            serde_json::to_value(view.stats()).unwrap(),
        ),
        (
            format!("/api/graphs/t/persons/{}/channels", person.0),
            serde_json::to_value(person_channel_counts(&view, person).unwrap()).unwrap(),
        ),
    ];
    for (uri, want) in checks {
        let (status, got) = call(&app, Method::GET, &uri, None).await;
        assert_eq!(status, StatusCode::OK, "{uri}: {got}");
        assert_eq!(got, want, "{uri}");
    }

    upload(&app, "c", &f.copy).await;
    let copy_view = engine_view(&ws, &f.copy, ViewConfig::all());
    let copy_person = f.truth.iter().find(|(t, _)| *t == person).unwrap().1;
    let want = heatmap_across(
        &[(&view, person), (&copy_view, copy_person)],
        "email",
        Some(7.0 * 86_400.0),
        0.0,
    )
    .unwrap();
    let (status, got) = call(
        &app,
        Method::POST,
        "/api/heatmap",
        Some(json!({
            "entries": [{ "graph": "t", "person": person }, { "graph": "c", "person": copy_person }],
            "channel": "email",
            "bin_width": 604800.0,
            "origin": 0.0
        })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{got}");
    assert_eq!(got, serde_json::to_value(want).unwrap());
}

#[tokio::test]
async fn errors_use_one_shape() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(dir.path());
    let f = fixture();
    upload(&app, "t", &f.template).await;

    let cases: Vec<(Method, &str, Option<Value>, StatusCode)> = vec![
        (Method::GET, "/api/graphs/missing", None, StatusCode::NOT_FOUND),
        (
            Method::GET,
            "/api/graphs/missing/stats",
            None,
            StatusCode::NOT_FOUND,
        ),
        (Method::GET, "/api/sessions/missing", None, StatusCode::NOT_FOUND),
        (Method::GET, "/api/no/such/route", None, StatusCode::NOT_FOUND),
        (
            Method::GET,
            "/api/graphs/t/histogram?bin_width=-1",
            None,
            StatusCode::BAD_REQUEST,
        ),
        (
            Method::GET,
            "/api/graphs/t/histogram?bins=3",
            None,
            StatusCode::BAD_REQUEST,
        ),
        (
            Method::GET,
            "/api/graphs/t/persons/abc/channels",
            None,
            StatusCode::BAD_REQUEST,
        ),
        (
            Method::POST,
            "/api/graphs",
            Some(json!({ "id": "x" })),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            Method::POST,
            "/api/graphs",
            Some(json!({ "id": "../x", "edges": "" })),
            StatusCode::BAD_REQUEST,
        ),
        (
            Method::POST,
            "/api/graphs",
            Some(json!({ "id": "x", "edges": "source,etype\n1,email\n" })),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            Method::PUT,
            "/api/graphs/t/view",
            Some(json!({ "channels": ["fax"] })),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            Method::POST,
            "/api/sessions",
            Some(json!({ "template": "t", "target": "t" })),
            StatusCode::BAD_REQUEST,
        ),
        (
            Method::POST,
            "/api/compare",
            Some(json!({ "template": "t", "candidates": [] })),
            StatusCode::BAD_REQUEST,
        ),
    ];
    for (method, uri, body, want) in cases {
        let (status, got) = call(&app, method.clone(), uri, body).await;
        assert_eq!(status, want, "{method} {uri}: {got}");
        let error = &got["error"];
        assert!(
            error["code"].is_string() && error["message"].is_string(),
            "{uri}: {got}"
        );
    }
    let (status, got) = call(&app, Method::GET, "/api/graphs/missing", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(got["error"]["code"], "not_found");
}

#[tokio::test]
async fn reupload_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (_, app) = app(dir.path());
    let f = fixture();
    let first = upload(&app, "t", &f.template).await;
    let second = upload(&app, "t", &f.template).await;
    assert_eq!(first, second);
    let (_, list) = call(&app, Method::GET, "/api/graphs", None).await;
    assert_eq!(list.as_array().unwrap().len(), 1);
    let (status, _) = call(&app, Method::DELETE, "/api/graphs/t", None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, _) = call(&app, Method::GET, "/api/graphs/t", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_round_trip_and_survive_restart() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture();
    let (ws, app) = app(dir.path());
    upload(&app, "t", &f.template).await;
    upload(&app, "c", &f.copy).await;

    let seed: Vec<_> = f.truth.iter().take(2).map(|(a, b)| json!([a, b])).collect();
    let (status, created) = call(
        &app,
        Method::POST,
        "/api/sessions",
        Some(json!({ "id": "s", "template": "t", "target": "c", "seed": seed })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    assert_eq!(created["matched"].as_array().unwrap().len(), 2);

    let (status, _) = call(&app, Method::DELETE, "/api/graphs/c", None).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (status, proposals) = call(&app, Method::GET, "/api/sessions/s/candidates?k=3", None).await;
    assert_eq!(status, StatusCode::OK);
    let proposals = proposals.as_array().unwrap();
    assert!(!proposals.is_empty() && proposals.len() <= 3);

    // Reject one wrong pair, then accept a true one.
    let (t, x) = f.truth[2];
    let wrong = f.truth[3].1;
    let (status, rejected) = call(
        &app,
        Method::POST,
        "/api/sessions/s/decisions",
        Some(json!({ "template": t, "target": wrong, "verdict": "reject" })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{rejected}");
    assert_eq!(rejected["matched"], 2);
    let (status, accepted) = call(
        &app,
        Method::POST,
        "/api/sessions/s/decisions",
        Some(json!({ "template": t, "target": x, "verdict": "accept" })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{accepted}");
    assert_eq!(accepted["matched"], 3);
    assert_eq!(accepted["unmatched"], 27);
    assert_eq!(accepted["decision"]["actor"], "user");

    let (status, taken) = call(
        &app,
        Method::POST,
        "/api/sessions/s/decisions",
        Some(json!({ "template": f.truth[4].0, "target": x, "verdict": "accept" })),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{taken}");

    let (status, ran) = call(&app, Method::POST, "/api/sessions/s/run-auto", None).await;
    assert_eq!(status, StatusCode::OK, "{ran}");
    assert_eq!(ran["report"]["status"], "complete");
    let truth: Vec<Value> = f.truth.iter().map(|(a, b)| json!([a, b])).collect();
    assert_eq!(ran["session"]["matched"], Value::Array(truth));

    let (_, record) = call(&app, Method::GET, "/api/sessions/s/export", None).await;
    let (status, imported) = call(
        &app,
        Method::POST,
        "/api/sessions/import",
        Some(json!({ "id": "s2", "record": record })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{imported}");
    let (_, original) = call(&app, Method::GET, "/api/sessions/s", None).await;
    let strip = |mut v: Value| {
        v.as_object_mut().unwrap().remove("id");
        v
    };
    assert_eq!(strip(imported), strip(original.clone()));

    drop(app);
    drop(ws);
    let (_, app) = self::app(dir.path());
    let (status, reopened) = call(&app, Method::GET, "/api/sessions/s", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(reopened, original);
    let (_, list) = call(&app, Method::GET, "/api/sessions", None).await;
    assert_eq!(list.as_array().unwrap().len(), 2);
    let (status, _) = call(&app, Method::DELETE, "/api/sessions/s2", None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
}

#[tokio::test]
async fn auto_seeded_sessions_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture();
    let (ws, app) = app(dir.path());
    upload(&app, "t", &f.template).await;
    upload(&app, "exact", &f.copy).await;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let noisy = noisy_copy(&mut rng, &f.template, Noise::noisy(0.2, 86_400.0), 900).graph;
    upload(&app, "noisy", &noisy).await;

    let (status, created) = call(
        &app,
        Method::POST,
        "/api/sessions",
        Some(json!({ "template": "t", "target": "exact", "auto_seed": true })),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{created}");
    assert_eq!(created["id"], "session-1");

    let (status, ranked) = call(
        &app,
        Method::POST,
        "/api/compare",
        Some(json!({ "template": "t", "candidates": ["noisy", "exact"] })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{ranked}");
    let order: Vec<&str> = ranked
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["graph"].as_str().unwrap())
        .collect();
    assert_eq!(order, ["exact", "noisy"]);

    let t = engine_view(&ws, &f.template, ViewConfig::all());
    let views = [
        engine_view(&ws, &noisy, ViewConfig::all()),
        engine_view(&ws, &f.copy, ViewConfig::all()),
    ];
    let engine = rank_candidates(&t, &views, &ws.config().similarity, ws.config().auto);
    for (got, want) in ranked.as_array().unwrap().iter().zip(&engine) {
        assert_eq!(got["score"], json!(want.score));
        assert_eq!(got["mapping"], serde_json::to_value(&want.mapping).unwrap());
    }
}
