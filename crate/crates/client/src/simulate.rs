use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use pointillism_core::campaign::{AnnotatorModel, Question};
use pointillism_core::seed::{derive_seed, rng};
use pointillism_core::wire::{AnswerBody, NextResponse, Progress};
use pointillism_core::LabelMap;

use crate::{Client, ClientError};

/// Consecutive empty polls after which an annotator gives up while other
/// replicas are still outstanding.
const MAX_IDLE_POLLS: u32 = 2000;
const IDLE_POLL: Duration = Duration::from_millis(2);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub annotator: String,
    pub question_id: String,
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    /// Every assignment handed out, in per-annotator order.
    pub assignments: Vec<Assignment>,
    /// Answers the server acknowledged.
    pub acked: Vec<Assignment>,
    /// Answers rejected with 409 (lapsed or released leases).
    pub conflicts: u64,
    pub progress: Progress,
}

/// Runs `annotators` simulated annotators (`sim00`, `sim01`, ...) until the
/// server has no work left. Verdicts come from `model` and the ground truth.
pub async fn run_annotators(
    client: &Client,
    annotators: usize,
    ground_truth: Arc<HashMap<String, LabelMap>>,
    model: AnnotatorModel,
    seed: u64,
) -> Result<SimulationReport, ClientError> {
    let mut tasks = Vec::with_capacity(annotators);
    for i in 0..annotators {
        let client = client.clone();
        let gts = ground_truth.clone();
        tasks.push(tokio::spawn(async move {
            annotate(client, format!("sim{i:02}"), gts, model, derive_seed(seed, i as u64)).await
        }));
    }
    let mut report = SimulationReport {
        assignments: Vec::new(),
        acked: Vec::new(),
        conflicts: 0,
        progress: client.progress().await?,
    };
    for t in tasks {
        let (assigned, acked, conflicts) = t.await.expect("annotator task panicked")?;
        report.assignments.extend(assigned);
        report.acked.extend(acked);
        report.conflicts += conflicts;
    }
    report.progress = client.progress().await?;
    Ok(report)
}

type AnnotatorTrace = (Vec<Assignment>, Vec<Assignment>, u64);

async fn annotate(
    client: Client,
    annotator: String,
    gts: Arc<HashMap<String, LabelMap>>,
    model: AnnotatorModel,
    seed: u64,
) -> Result<AnnotatorTrace, ClientError> {
    let mut rng = rng(seed);
    let (mut assigned, mut acked, mut conflicts, mut idle) = (Vec::new(), Vec::new(), 0u64, 0u32);
    loop {
        let question = match client.next(&annotator).await? {
            NextResponse::Assignment { question, .. } => question,
            NextResponse::NoWork => {
                let p = client.progress().await?;
                if p.answered >= p.questions_total || idle >= MAX_IDLE_POLLS {
                    break;
                }
                idle += 1;
                tokio::time::sleep(IDLE_POLL).await;
                continue;
            }
        };
        idle = 0;
        let record = Assignment { annotator: annotator.clone(), question_id: question.question_id.clone() };
        assigned.push(record.clone());
        let Some(gt) = gts.get(&question.image_id) else {
            continue;
        };
        let q = Question {
            question_id: question.question_id.clone(),
            image_id: question.image_id.clone(),
            point: question.point,
            class_id: question.class_id,
            round: question.round,
        };
        let (verdict, latency_ms) = model.answer(&q, gt, &mut rng);
        let body = AnswerBody {
            question_id: q.question_id,
            annotator: annotator.clone(),
            verdict: verdict.as_str().to_string(),
            latency_ms,
        };
        match client.answer(&body).await {
            Ok(_) => acked.push(record),
            Err(e) if e.status() == Some(409) => conflicts += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((assigned, acked, conflicts))
}
