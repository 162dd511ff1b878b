//! Routes: `GET /api/next`, `POST /api/answer`, `GET /api/progress`,
//! `GET /api/labels` and `GET /images/{image_id}`. Every route takes an
//! optional `campaign` query parameter, needed only when several campaigns
//! are served.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pointillism_core::wire::{AnswerAck, AnswerBody, ErrorBody, NextResponse, Progress};

use crate::service::{ApiError, CampaignService};

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Conflict(_) => StatusCode::CONFLICT,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (status, Json(ErrorBody { error: self.to_string() })).into_response()
    }
}

#[derive(Default)]
pub struct Registry {
    campaigns: BTreeMap<String, Arc<CampaignService>>,
}

impl Registry {
    pub fn new(services: impl IntoIterator<Item = Arc<CampaignService>>) -> Self {
        Registry { campaigns: services.into_iter().map(|s| (s.name().to_string(), s)).collect() }
    }

    fn resolve(&self, params: &HashMap<String, String>) -> Result<&Arc<CampaignService>, ApiError> {
        match params.get("campaign") {
            Some(name) => self.campaigns.get(name).ok_or_else(|| ApiError::NotFound(format!("unknown campaign {name}"))),
            None if self.campaigns.len() == 1 => Ok(self.campaigns.values().next().expect("one campaign")),
            None if self.campaigns.is_empty() => Err(ApiError::NotFound("no campaign loaded".into())),
            None => Err(ApiError::BadRequest("several campaigns are served; pass ?campaign=".into())),
        }
    }
}

type AppState = Arc<Registry>;
type Params = Query<HashMap<String, String>>;

pub fn router(registry: Registry) -> Router {
    Router::new()
        .route("/api/next", get(next))
        .route("/api/answer", post(answer))
        .route("/api/progress", get(progress))
        .route("/api/labels", get(labels))
        .route("/images/{image_id}", get(image))
        .with_state(Arc::new(registry))
}

async fn next(State(reg): State<AppState>, Query(params): Params) -> Result<Json<NextResponse>, ApiError> {
    let service = reg.resolve(&params)?;
    let annotator = params.get("annotator").ok_or_else(|| ApiError::BadRequest("missing annotator".into()))?;
    service.next(annotator).map(Json)
}

async fn answer(
    State(reg): State<AppState>,
    Query(params): Params,
    body: Result<Json<AnswerBody>, JsonRejection>,
) -> Result<Json<AnswerAck>, ApiError> {
    let service = reg.resolve(&params)?;
    let Json(body) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    service.answer(&body).map(Json)
}

async fn progress(State(reg): State<AppState>, Query(params): Params) -> Result<Json<Progress>, ApiError> {
    Ok(Json(reg.resolve(&params)?.progress()))
}

async fn labels(State(reg): State<AppState>, Query(params): Params) -> Result<Response, ApiError> {
    let csv = reg.resolve(&params)?.labels_csv()?;
    Ok(([(header::CONTENT_TYPE, "text/csv")], csv).into_response())
}

async fn image(
    State(reg): State<AppState>,
    Path(image_id): Path<String>,
    Query(params): Params,
) -> Result<Response, ApiError> {
    let (content_type, bytes) = reg.resolve(&params)?.image(&image_id)?;
    Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
}
