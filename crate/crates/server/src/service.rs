//! One live campaign: state machine, dispatcher and answer log behind a
//! single writer lock.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::RwLock;
use pointillism_core::campaign::{Campaign, CampaignError};
use pointillism_core::domain::{check_id, DomainError};
use pointillism_core::formats::{write_point_labels_to, AnswerLog, AnswerRecord, ClassDictionary, FormatError};
use pointillism_core::layout::{load_campaign, replay_log, CampaignLayout, LayoutError};
use pointillism_core::wire::{AnswerAck, AnswerBody, NextResponse, Progress, QuestionView};
use pointillism_core::{Answer, Verdict};
use thiserror::Error;

use crate::dispatch::{Clock, Dispatcher, LeaseError, MonotonicClock};

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("invalid campaign name {0:?}")]
    InvalidName(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Request-level failures, each mapped to one HTTP status.
#[derive(Debug, Error, PartialEq)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Internal(String),
}

#[derive(Clone)]
pub struct ServiceOptions {
    /// fsync the answer log after every append.
    pub fsync: bool,
    pub clock: Arc<dyn Clock>,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        ServiceOptions { fsync: false, clock: Arc::new(MonotonicClock::default()) }
    }
}

struct Inner {
    campaign: Campaign,
    dispatcher: Dispatcher,
    log: AnswerLog,
}

pub struct CampaignService {
    name: String,
    layout: CampaignLayout,
    dictionary: ClassDictionary,
    clock: Arc<dyn Clock>,
    inner: RwLock<Inner>,
}

impl CampaignService {
    /// Loads the campaign directory and replays its answer log. A torn final
    /// log record (crash mid-write) is cut off before new appends.
    pub fn open(name: &str, dir: impl Into<PathBuf>, opts: ServiceOptions) -> Result<Self, ServerError> {
        check_id(name).map_err(|_| ServerError::InvalidName(name.to_string()))?;
        let mut loaded = load_campaign(dir)?;
        let torn = replay_log(&mut loaded)?;
        if let Some(t) = &torn {
            tracing::warn!(campaign = name, record = t.index, "dropping torn answer-log tail");
        }
        let log = AnswerLog::open(loaded.layout.log(), torn.map(|t| t.valid_len))?.with_sync(opts.fsync);
        let lease_ms = loaded.campaign.config().lease_secs * 1000;
        let dispatcher = Dispatcher::new(&loaded.campaign, lease_ms);
        tracing::info!(
            campaign = name,
            images = loaded.records.len(),
            answers = loaded.campaign.answers_received(),
            "campaign loaded"
        );
        Ok(CampaignService {
            name: name.to_string(),
            layout: loaded.layout,
            dictionary: loaded.dictionary,
            clock: opts.clock,
            inner: RwLock::new(Inner { campaign: loaded.campaign, dispatcher, log }),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn root(&self) -> &Path {
        self.layout.root()
    }

    pub fn layout(&self) -> &CampaignLayout {
        &self.layout
    }

    pub fn next(&self, annotator: &str) -> Result<NextResponse, ApiError> {
        check_id(annotator).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let now = self.clock.now_ms();
        let mut inner = self.inner.write();
        let Some(lease) = inner.dispatcher.next(annotator, now) else {
            return Ok(NextResponse::NoWork);
        };
        let q = &inner.campaign.questions()[lease.question].question;
        let class_name = self.dictionary.name(q.class_id).unwrap_or_default();
        Ok(NextResponse::Assignment {
            question: QuestionView::new(q, class_name),
            image_url: format!("/images/{}", q.image_id),
            lease_expiry_ms: lease.expires_ms.saturating_sub(now),
        })
    }

    /// Validates, logs, then applies one answer. Nothing is acknowledged
    /// before it is in the log.
    pub fn answer(&self, body: &AnswerBody) -> Result<AnswerAck, ApiError> {
        check_id(&body.annotator).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let verdict: Verdict = body.verdict.parse().map_err(|e: DomainError| ApiError::BadRequest(e.to_string()))?;
        let now = self.clock.now_ms();
        let mut guard = self.inner.write();
        let inner = &mut *guard;
        let k = inner.campaign.replication();
        let index = inner
            .campaign
            .question_index(&body.question_id)
            .ok_or_else(|| ApiError::NotFound(format!("unknown question {}", body.question_id)))?;
        let state = &inner.campaign.questions()[index];
        if state.answered_by(&body.annotator) {
            return Err(ApiError::Conflict(format!("{} already answered {}", body.annotator, body.question_id)));
        }
        if state.answers.len() >= k {
            return Err(ApiError::Conflict(format!("{} has all its answers", body.question_id)));
        }
        match inner.dispatcher.check(&body.annotator, index, now) {
            Ok(()) => {}
            Err(LeaseError::Expired) => return Err(ApiError::Conflict("lease expired".into())),
            Err(LeaseError::NotLeased) => {
                return Err(ApiError::Conflict(format!("{} holds no lease on {}", body.annotator, body.question_id)))
            }
        }
        let answer = Answer {
            question_id: body.question_id.clone(),
            annotator_id: body.annotator.clone(),
            verdict,
            latency_ms: body.latency_ms,
        };
        inner.log.append(&AnswerRecord::now(&answer)).map_err(|e| ApiError::Internal(e.to_string()))?;
        let outcome = inner.campaign.apply(&answer).map_err(|e| match e {
            CampaignError::DuplicateAnswer { .. } | CampaignError::QuestionClosed(_) => ApiError::Conflict(e.to_string()),
            other => ApiError::Internal(other.to_string()),
        })?;
        inner.dispatcher.complete(&body.annotator, index);
        if let Some(q) = &outcome.follow_up {
            let i = inner.campaign.questions().len() - 1;
            inner.dispatcher.add_question(i, q.class_id);
        }
        Ok(AnswerAck {
            question_id: body.question_id.clone(),
            resolution: outcome.resolution,
            follow_up: outcome.follow_up.map(|q| q.question_id),
        })
    }

    pub fn progress(&self) -> Progress {
        self.inner.read().campaign.progress()
    }

    /// Point-label CSV of everything resolved so far.
    pub fn labels_csv(&self) -> Result<Vec<u8>, ApiError> {
        let rows = self.inner.read().campaign.aggregate();
        let mut out = Vec::new();
        write_point_labels_to(&rows, &mut out).map_err(|e| ApiError::Internal(e.to_string()))?;
        Ok(out)
    }

    pub fn image(&self, image_id: &str) -> Result<(&'static str, Vec<u8>), ApiError> {
        check_id(image_id).map_err(|e| ApiError::BadRequest(e.to_string()))?;
        let path = self
            .layout
            .find_image(image_id)
            .ok_or_else(|| ApiError::NotFound(format!("no image {image_id}")))?;
        let bytes = std::fs::read(&path).map_err(|e| ApiError::Internal(e.to_string()))?;
        Ok((content_type(&path), bytes))
    }
}

pub fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        Some("bmp") => "image/bmp",
        Some("pgm") => "image/x-portable-graymap",
        Some("ppm") => "image/x-portable-pixmap",
        _ => "application/octet-stream",
    }
}
