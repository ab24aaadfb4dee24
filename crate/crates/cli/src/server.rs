//! HTTP render service.
//!
//! | route | response |
//! |---|---|
//! | `GET /api/health` | `{"status": "ok", "class", "samples", "cads"}` |
//! | `GET /api/cads` | `[{"id", "name", "face_count"}]` |
//! | `GET /api/samples` | `[{"id", "cad_id", "width", "height", "view"}]` |
//! | `GET /api/samples/{id}/image` | the sample image as PNG |
//! | `POST /api/render` | JSON [`RenderRequest`] in, PNG out |
//!
//! Errors are `{"error": {"kind", "message"}}` with status 400, 404 or 500.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::header;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use tokio::net::TcpListener;

use crate::engine::{encode_png, Engine, RenderRequest};
use crate::error::{CliError, ErrorKind};

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/cads", get(cads))
        .route("/api/samples", get(samples))
        .route("/api/samples/{id}/image", get(sample_image))
        .route("/api/render", post(render))
        .fallback(|| async { CliError::new(ErrorKind::RouteNotFound, "no such route") })
        .with_state(engine)
}

pub async fn serve(listener: TcpListener, engine: Arc<Engine>) -> std::io::Result<()> {
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn health(State(engine): State<Arc<Engine>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "class": engine.dataset.class(),
        "samples": engine.dataset.samples.len(),
        "cads": engine.dataset.catalog.len(),
    }))
}

async fn cads(State(engine): State<Arc<Engine>>) -> Json<Value> {
    let list: Vec<Value> = engine
        .dataset
        .catalog
        .iter()
        .map(|c| json!({"id": c.id, "name": c.name, "face_count": c.mesh.face_count()}))
        .collect();
    Json(Value::Array(list))
}

async fn samples(State(engine): State<Arc<Engine>>) -> Json<Value> {
    let list: Vec<Value> = engine
        .dataset
        .samples
        .iter()
        .map(|s| {
            json!({
                "id": s.id,
                "cad_id": s.cad_id,
                "width": s.image.width(),
                "height": s.image.height(),
                "view": s.view.spherical().ok(),
            })
        })
        .collect();
    Json(Value::Array(list))
}

fn png(body: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], body).into_response()
}

async fn sample_image(State(engine): State<Arc<Engine>>, Path(id): Path<String>) -> Result<Response, CliError> {
    let sample = engine
        .dataset
        .sample(&id)
        .ok_or_else(|| CliError::new(ErrorKind::SampleNotFound, format!("no sample {id:?}")))?;
    Ok(png(encode_png(&sample.image.clone().into())?))
}

async fn render(State(engine): State<Arc<Engine>>, body: Bytes) -> Result<Response, CliError> {
    let req: RenderRequest = serde_json::from_slice(&body).map_err(|e| CliError::invalid(format!("bad render request: {e}")))?;
    let bytes = tokio::task::spawn_blocking(move || {
        let out = engine.render(&req)?;
        encode_png(&out.layer(req.output))
    })
    .await
    .map_err(|e| CliError::new(ErrorKind::Render, e.to_string()))??;
    Ok(png(bytes))
}
