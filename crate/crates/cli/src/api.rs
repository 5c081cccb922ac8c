//! HTTP front end over a shared simulation.

use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use freezer_core::sim::Simulation;

pub const DEFAULT_EVENTS_LIMIT: usize = 100;
pub const MAX_EVENTS_LIMIT: usize = 1000;

pub type Shared = Arc<Mutex<Simulation>>;

fn lock(sim: &Shared) -> MutexGuard<'_, Simulation> {
    // a panicked writer leaves the log consistent: entries are whole lines
    sim.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

pub fn router(sim: Shared) -> Router {
    Router::new()
        .route("/api/check", post(check))
        .route("/api/inventory/latest", get(latest))
        .route("/api/alerts", get(alerts))
        .route("/api/events", get(events))
        .with_state(sim)
}

async fn check(State(sim): State<Shared>) -> Response {
    match lock(&sim).trigger_check() {
        Ok(id) => Json(json!({ "requestId": id })).into_response(),
        Err(err) => error(StatusCode::SERVICE_UNAVAILABLE, err.to_string()),
    }
}

async fn latest(State(sim): State<Shared>) -> Response {
    match lock(&sim).gateway().query_latest() {
        Some(record) => Json(record).into_response(),
        None => error(StatusCode::NOT_FOUND, "no inventory reported yet"),
    }
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct AlertsQuery {
    #[serde(default)]
    since_id: u64,
}

async fn alerts(State(sim): State<Shared>, Query(q): Query<AlertsQuery>) -> Response {
    Json(lock(&sim).gateway().query_alerts(q.since_id)).into_response()
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct EventsQuery {
    #[serde(default)]
    after_id: u64,
    limit: Option<usize>,
}

async fn events(State(sim): State<Shared>, Query(q): Query<EventsQuery>) -> Response {
    let limit = q.limit.unwrap_or(DEFAULT_EVENTS_LIMIT).min(MAX_EVENTS_LIMIT);
    Json(lock(&sim).gateway().query_events(q.after_id, limit)).into_response()
}

#[cfg(test)]
mod tests {
    use super::*;
    use axum::body::Body;
    use axum::http::Request;
    use freezer_core::gateway::Gateway;
    use freezer_core::scenario::Scenario;
    use freezer_core::sim::SimConfig;
    use http_body_util::BodyExt;
    use serde_json::Value;
    use tower::ServiceExt;

    fn shared(text: &str) -> Shared {
        let cfg = SimConfig::new(1);
        let gw = Gateway::new(cfg.gateway_msisdn.clone(), Some(cfg.device_msisdn.clone()));
        let sim = Simulation::new(cfg, Scenario::parse(text).unwrap(), gw).unwrap();
        Arc::new(Mutex::new(sim))
    }

    async fn call(sim: &Shared, method: &str, uri: &str) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .body(Body::empty())
            .unwrap();
        let resp = router(sim.clone()).oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let body = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        (status, body)
    }

    const QUIET: &str = "t=0 set sigma 0\nt=0 set loss 0\nt=0 set dup 0\n";

    #[tokio::test]
    async fn latest_is_404_before_any_status() {
        let sim = shared(QUIET);
        let (status, body) = call(&sim, "GET", "/api/inventory/latest").await;
        assert_eq!(status, StatusCode::NOT_FOUND);
        assert!(body["error"].is_string());
    }

    #[tokio::test]
    async fn check_then_latest() {
        let sim = shared(&format!("{QUIET}t=0 add main 30\nt=0 add elev 4.91\n"));
        lock(&sim).run_until(2000).unwrap();
        let (status, body) = call(&sim, "POST", "/api/check").await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(body, json!({ "requestId": 1 }));
        lock(&sim).run_until(20_000).unwrap();

        let (status, body) = call(&sim, "GET", "/api/inventory/latest").await;
        assert_eq!(status, StatusCode::OK);
        let keys: Vec<&str> = body.as_object().unwrap().keys().map(String::as_str).collect();
        for key in [
            "deviceMsisdn",
            "seq",
            "receivedAtMs",
            "elevKg",
            "mainKg",
            "cElev",
            "cMain",
            "tempC",
        ] {
            assert!(keys.contains(&key), "missing {key} in {body}");
        }
        assert_eq!(body["mainKg"], json!(30.0));
        assert_eq!(body["cMain"], json!(60));
        assert_eq!(body["cElev"], json!(10));

        let (_, events) = call(&sim, "GET", "/api/events?afterId=0&limit=10").await;
        let kinds: Vec<&str> = events
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["kind"].as_str().unwrap())
            .collect();
        assert_eq!(kinds, ["check_requested", "stat"]);
        assert_eq!(events[0]["id"], json!(1));
        assert!(events[1]["tMs"].as_u64().unwrap() > 2000);
    }

    #[tokio::test]
    async fn alerts_filter_by_id() {
        let sim = shared(&format!(
            "{QUIET}t=0 add main 85\nt=0 add elev 25\nt=5000 remove main 80\nt=6000 add main 80\n"
        ));
        lock(&sim).run_until(30_000).unwrap();
        let (status, all) = call(&sim, "GET", "/api/alerts").await;
        assert_eq!(status, StatusCode::OK);
        let all = all.as_array().unwrap().clone();
        assert_eq!(all.len(), 3);
        let first = all[0]["id"].as_u64().unwrap();
        assert_eq!(all[0]["acknowledged"], json!(false));
        let (_, rest) = call(&sim, "GET", &format!("/api/alerts?sinceId={first}")).await;
        assert_eq!(rest.as_array().unwrap().len(), 2);
        let (_, none) = call(&sim, "GET", "/api/alerts?sinceId=999").await;
        assert_eq!(none, json!([]));
    }

    #[tokio::test]
    async fn events_paging() {
        let sim = shared(QUIET);
        lock(&sim).run_until(1000).unwrap();
        for _ in 0..5 {
            call(&sim, "POST", "/api/check").await;
        }
        let (_, page) = call(&sim, "GET", "/api/events?afterId=2&limit=2").await;
        let ids: Vec<u64> = page
            .as_array()
            .unwrap()
            .iter()
            .map(|e| e["id"].as_u64().unwrap())
            .collect();
        assert_eq!(ids, [3, 4]);
        let (_, beyond) = call(&sim, "GET", "/api/events?afterId=50").await;
        assert_eq!(beyond, json!([]));
    }

    #[tokio::test]
    async fn malformed_query_is_rejected() {
        let sim = shared(QUIET);
        let (status, _) = call(&sim, "GET", "/api/events?afterId=abc").await;
        assert_eq!(status, StatusCode::BAD_REQUEST);
        let (status, _) = call(&sim, "GET", "/api/check").await;
        assert_eq!(status, StatusCode::METHOD_NOT_ALLOWED);
    }

    #[tokio::test]
    async fn unconfigured_gateway_refuses_checks() {
        let cfg = SimConfig::new(1);
        let gw = Gateway::new(cfg.gateway_msisdn.clone(), None);
        let sim = Simulation::new(cfg, Scenario::default(), gw).unwrap();
        let sim = Arc::new(Mutex::new(sim));
        let (status, body) = call(&sim, "POST", "/api/check").await;
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
        assert!(body["error"].as_str().unwrap().contains("not configured"));
        let (_, events) = call(&sim, "GET", "/api/events").await;
        assert_eq!(events, json!([]));
    }
}
