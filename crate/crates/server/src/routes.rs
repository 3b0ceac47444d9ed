use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use hybridsched_core::cloud::Quota;
use hybridsched_core::model::{JobId, JobSpec, JobState, Millis};

use crate::{ApiError, Handle};

pub fn router(handle: Handle) -> Router {
    Router::new()
        .route("/v1/jobs", post(submit))
        .route("/v1/jobs/{id}", get(status).delete(cancel))
        .route("/v1/jobs/{id}/result", get(result))
        .route("/v1/clusters", get(clusters))
        .route("/v1/metrics", get(metrics))
        .route("/v1/users", post(create_user))
        .route("/v1/vclusters", post(provision))
        .route("/v1/vclusters/{id}", delete(release))
        .fallback(|| async { ApiError::new("not_found", "no such endpoint") })
        .with_state(handle)
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid JSON body: {e}")))
}

fn parse_id(raw: &str) -> Result<u64, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::bad_request(format!("`{raw}` is not a numeric id")))
}

fn caller(handle: &Handle, headers: &HeaderMap) -> Result<String, ApiError> {
    headers
        .get(handle.auth_header())
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(str::to_string)
        .ok_or_else(|| {
            ApiError::new(
                "unauthenticated",
                format!("missing `{}` header", handle.auth_header()),
            )
        })
}

fn json<T: Serialize>(status: StatusCode, body: T) -> Response {
    (status, Json(body)).into_response()
}

async fn submit(
    State(h): State<Handle>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let user = caller(&h, &headers)?;
    let mut spec: JobSpec = match serde_json::from_slice(&body) {
        Ok(spec) => spec,
        // Well-formed JSON that does not fit the job schema is a
        // validation failure, not a transport problem.
        Err(e) if e.is_data() => {
            return Err(ApiError::new("validation_failed", e.to_string()).with_detail("Schema"))
        }
        Err(e) => return Err(ApiError::bad_request(format!("invalid JSON body: {e}"))),
    };
    // The identity header is authoritative for ownership.
    spec.user_id = user;
    let submitted = h.call(move |p| p.submit(spec)).await??;
    Ok(json(StatusCode::CREATED, submitted))
}

async fn status(State(h): State<Handle>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = JobId(parse_id(&id)?);
    let rec = h.call(move |p| p.job(id).cloned()).await?;
    let rec = rec.ok_or_else(|| ApiError::new("unknown_job", format!("unknown job {id}")))?;
    Ok(json(StatusCode::OK, rec))
}

async fn result(State(h): State<Handle>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = JobId(parse_id(&id)?);
    let manifest = h.call(move |p| p.result(id)).await??;
    Ok(json(StatusCode::OK, manifest))
}

#[derive(Serialize)]
struct Cancelled {
    job_id: JobId,
    state: JobState,
}

async fn cancel(State(h): State<Handle>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = JobId(parse_id(&id)?);
    let state = h.call(move |p| p.cancel(id)).await??;
    Ok(json(StatusCode::ACCEPTED, Cancelled { job_id: id, state }))
}

async fn clusters(State(h): State<Handle>) -> Result<Response, ApiError> {
    let views = h.call(|p| p.clusters()).await?;
    Ok(json(StatusCode::OK, views))
}

#[derive(Deserialize)]
struct MetricsQuery {
    window_ms: Option<Millis>,
}

async fn metrics(
    State(h): State<Handle>,
    query: Result<Query<MetricsQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Response, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    // Without a window, report everything from time zero.
    let view = h
        .call(move |p| p.metrics(q.window_ms.unwrap_or(p.now())))
        .await?;
    Ok(json(StatusCode::OK, view))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewUser {
    user_id: String,
    #[serde(default)]
    display_name: Option<String>,
    #[serde(default = "Quota::unlimited")]
    quota: Quota,
}

async fn create_user(State(h): State<Handle>, body: Bytes) -> Result<Response, ApiError> {
    let u: NewUser = parse_body(&body)?;
    let account = h
        .call(move |p| p.create_user(&u.user_id, u.display_name.as_deref(), u.quota))
        .await??;
    Ok(json(StatusCode::CREATED, account))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewVCluster {
    node_count: u32,
    #[serde(default = "default_image")]
    image: String,
}

fn default_image() -> String {
    "mapreduce".into()
}

async fn provision(
    State(h): State<Handle>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ApiError> {
    let user = caller(&h, &headers)?;
    let req: NewVCluster = parse_body(&body)?;
    let vc = h
        .call(move |p| p.provision_vcluster(&user, req.node_count, &req.image))
        .await??;
    Ok(json(StatusCode::CREATED, vc))
}

#[derive(Serialize)]
struct Released {
    vcluster_id: u64,
    freed_nodes: Vec<u32>,
}

async fn release(State(h): State<Handle>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let id = parse_id(&id)?;
    let freed = h.call(move |p| p.release_vcluster(id)).await??;
    Ok(json(
        StatusCode::OK,
        Released {
            vcluster_id: id,
            freed_nodes: freed,
        },
    ))
}
