use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use prefmpc::core::learner::pref_prob;
use prefmpc::core::trajectory::{max_input_inf_norm, quad_cost, settling_time};
use prefmpc::core::PreferenceOracle;
use prefmpc::experiment::{init_sampler, train_surrogate, ExperimentConfig};
use prefmpc::formats::{DatasetFile, TrajectoryDoc};
use prefmpc::server::{router, AppState};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    router(Arc::new(AppState::new(0, json!({}))))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(match body {
            Some(v) => Body::from(v.to_string()),
            None => Body::empty(),
        })
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn trajectory(v: &Value) -> prefmpc::core::Trajectory {
    serde_json::from_value::<TrajectoryDoc>(v.clone()).unwrap().to_trajectory().unwrap()
}

/// Labels `n` pairs with the configured quadratic oracle.
async fn label(app: &Router, id: u64, n: usize, oracle: &PreferenceOracle) {
    for k in 0..n {
        let (status, pair) = call(app, "GET", &format!("/sessions/{id}/pairs/next"), None).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(pair["status"], "pending");
        let first = oracle.prefer(&trajectory(&pair["a"]), &trajectory(&pair["b"])).unwrap();
        let choice = if first == prefmpc::core::Preference::First { "first" } else { "second" };
        let (status, counts) = call(
            app,
            "POST",
            &format!("/sessions/{id}/preferences"),
            Some(json!({ "pair_id": pair["pair_id"], "choice": choice })),
        )
        .await;
        assert_eq!(status, StatusCode::OK, "{counts}");
        assert_eq!(counts["labels"], k + 1);
    }
}

#[tokio::test]
async fn default_session_has_fifty_trajectories_and_distinct_ids() {
    let app = app();
    let (s1, a) = call(&app, "POST", "/sessions", None).await;
    let (s2, b) = call(&app, "POST", "/sessions", Some(json!({ "seed": 4 }))).await;
    assert_eq!((s1, s2), (StatusCode::OK, StatusCode::OK));
    assert_eq!(a["pool_size"], 50);
    assert_ne!(a["id"], b["id"]);
    let (status, summary) = call(&app, "GET", &format!("/sessions/{}", b["id"]), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(summary["seed"], 4);
    assert_eq!(summary["pairs_total"], 2450);
    assert_eq!(summary["labels"], 0);
}

#[tokio::test]
async fn invalid_requests_are_client_errors() {
    let app = app();
    let (status, body) = call(&app, "POST", "/sessions", Some(json!({ "config": { "n_t": 0 } }))).await;
    assert!(status.is_client_error(), "{status} {body}");
    assert!(body["error"].is_string());
    let (status, _) = call(&app, "POST", "/sessions", Some(json!({ "bogus": 1 }))).await;
    assert!(status.is_client_error());
    let (status, _) = call(&app, "GET", "/sessions/999", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn pairs_are_idempotent_until_labeled_and_run_out() {
    let app = app();
    let (_, created) = call(&app, "POST", "/sessions", Some(json!({ "config": { "n_t": 2 } }))).await;
    let id = created["id"].as_u64().unwrap();
    let uri = format!("/sessions/{id}/pairs/next");
    let (_, a) = call(&app, "GET", &uri, None).await;
    let (_, b) = call(&app, "GET", &uri, None).await;
    assert_eq!(a, b);

    let prefs = format!("/sessions/{id}/preferences");
    let (status, _) = call(&app, "POST", &prefs, Some(json!({ "pair_id": 1, "choice": "first" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "pair not offered yet");
    let (status, _) = call(&app, "POST", &prefs, Some(json!({ "pair_id": 0, "choice": "sideways" }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "POST", &prefs, Some(json!({ "pair_id": 0, "choice": "first" }))).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call(&app, "POST", &prefs, Some(json!({ "pair_id": 0, "choice": "second" }))).await;
    assert_eq!(status, StatusCode::CONFLICT);

    let (_, c) = call(&app, "GET", &uri, None).await;
    assert_eq!(c["pair_id"], 1);
    assert_eq!((c["i"].clone(), c["j"].clone()), (a["j"].clone(), a["i"].clone()));
    call(&app, "POST", &prefs, Some(json!({ "pair_id": 1, "choice": "second" }))).await;
    let (status, done) = call(&app, "GET", &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(done["status"], "exhausted");
    let (_, summary) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(summary["labels"], 2);
    assert_eq!(summary["exhausted"], true);
}

#[tokio::test]
async fn training_needs_two_labels() {
    let app = app();
    let (_, created) = call(&app, "POST", "/sessions", None).await;
    let id = created["id"].as_u64().unwrap();
    let oracle = ExperimentConfig::quadratic(0).oracle();
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/train"), None).await;
    assert!(status.is_client_error());
    label(&app, id, 1, &oracle).await;
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/train"), None).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn api_training_matches_the_library_path() {
    let app = app();
    let (_, created) = call(&app, "POST", "/sessions", Some(json!({ "seed": 7 }))).await;
    let id = created["id"].as_u64().unwrap();
    let config = ExperimentConfig::quadratic(7);
    label(&app, id, 20, &config.oracle()).await;
    let (_, summary) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    assert_eq!(summary["labels"], 20);

    let (status, model) = call(
        &app,
        "POST",
        &format!("/sessions/{id}/train"),
        Some(json!({ "overrides": { "restarts": 4 } })),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{model}");
    assert_eq!(model["train_size"], 16);
    assert_eq!(model["holdout_size"], 4);

    // Same labels, seed and settings through the library.
    let (_, snap) = call(&app, "GET", &format!("/sessions/{id}/snapshot"), None).await;
    let bundle = serde_json::from_value::<DatasetFile>(snap).unwrap().to_bundle().unwrap();
    let mut cfg = config.clone();
    cfg.train.restarts = 4;
    let sampler = init_sampler(&cfg, 6, 2);
    let direct = train_surrogate(&bundle.dataset, None, &cfg.train_config(), &sampler).unwrap();
    let theta: Vec<f64> = serde_json::from_value(model["theta"].clone()).unwrap();
    assert_eq!(theta, direct.theta.as_slice());
    assert_eq!(model["train_acc"], direct.train_accuracy);
    assert_eq!(model["holdout_acc"], direct.test_accuracy.unwrap());

    let pool = bundle.dataset.pool().trajectories();
    for k in 0..10 {
        let (i, j) = (k, (k * 7 + 3) % 50);
        let (status, p) = call(
            &app,
            "POST",
            &format!("/sessions/{id}/prob"),
            Some(json!({ "model_id": model["model_id"], "i": i, "j": j })),
        )
        .await;
        assert_eq!(status, StatusCode::OK);
        let expected = pref_prob(&pool[i], &pool[j], &direct.theta).unwrap();
        assert!((p["p"].as_f64().unwrap() - expected).abs() <= 1e-9);
    }
}

#[tokio::test]
async fn simulation_payload_is_self_consistent() {
    let app = app();
    let (_, created) = call(&app, "POST", "/sessions", None).await;
    let id = created["id"].as_u64().unwrap();
    let uri = format!("/sessions/{id}/simulate");
    let cfg = ExperimentConfig::quadratic(0);

    let (status, rest) = call(&app, "POST", &uri, Some(json!({ "model_id": "oracle", "x0": [0, 0, 0, 0, 0, 0] }))).await;
    assert_eq!(status, StatusCode::OK, "{rest}");
    let t = trajectory(&rest["trajectory"]);
    assert!(t.states().iter().all(|x| x.amax() == 0.0));
    assert_eq!(rest["metrics"]["phi"], 0.0);

    for model in ["oracle", "random", "random"] {
        let (status, run) = call(&app, "POST", &uri, Some(json!({ "model_id": model }))).await;
        assert_eq!(status, StatusCode::OK);
        let t = trajectory(&run["trajectory"]);
        assert_eq!(t.horizon(), 30);
        let m = &run["metrics"];
        assert!(t.inputs().iter().all(|u| u.amax() <= 1.0 + 1e-12));
        let kappa = settling_time(&t, 0.1);
        assert_eq!(m["kappa"], kappa.index);
        assert_eq!(m["settled"], kappa.settled);
        assert!((m["max_input"].as_f64().unwrap() - max_input_inf_norm(&t)).abs() <= 1e-12);
        let (q, r) = cfg.oracle_weights();
        let phi = quad_cost(&t, &q, &r).unwrap();
        assert!((m["phi"].as_f64().unwrap() - phi).abs() <= 1e-9 * phi.max(1.0));
    }

    let (status, _) = call(&app, "POST", &uri, Some(json!({ "model_id": "42" }))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "POST", &uri, Some(json!({ "model_id": "oracle", "x0": [1.0] }))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}
