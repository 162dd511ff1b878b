//! JSON bodies of the campaign HTTP API, shared by server and client.

use serde::{Deserialize, Serialize};

use crate::campaign::Question;
use crate::domain::{ClassId, Point, PointVerdict};

pub use crate::campaign::{Progress, VerdictCounts};

/// A question as shown to an annotator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionView {
    pub question_id: String,
    pub image_id: String,
    pub point: Point,
    pub class_id: ClassId,
    pub class_name: String,
    pub round: u32,
}

impl QuestionView {
    pub fn new(q: &Question, class_name: impl Into<String>) -> Self {
        QuestionView {
            question_id: q.question_id.clone(),
            image_id: q.image_id.clone(),
            point: q.point,
            class_id: q.class_id,
            class_name: class_name.into(),
            round: q.round,
        }
    }
}

/// `GET /api/next` response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum NextResponse {
    Assignment {
        question: QuestionView,
        image_url: String,
        /// Milliseconds until the lease lapses and the replica returns to
        /// the pool.
        lease_expiry_ms: u64,
    },
    NoWork,
}

/// `POST /api/answer` body. The verdict stays a raw token so that a bad
/// token can be reported as a client error rather than a parse failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerBody {
    pub question_id: String,
    pub annotator: String,
    pub verdict: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerAck {
    pub question_id: String,
    /// Set when this answer completed the question's replicas.
    pub resolution: Option<PointVerdict>,
    /// Id of the next-round question it opened, if any.
    pub follow_up: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn next_response_shapes() {
        assert_eq!(serde_json::to_value(NextResponse::NoWork).unwrap(), json!({"status": "no_work"}));
        let q = QuestionView {
            question_id: "img-p0-r1".into(),
            image_id: "img".into(),
            point: Point::new(0.25, 0.5).unwrap(),
            class_id: ClassId(3),
            class_name: "dog".into(),
            round: 1,
        };
        let v = serde_json::to_value(NextResponse::Assignment {
            question: q.clone(),
            image_url: "/images/img".into(),
            lease_expiry_ms: 120_000,
        })
        .unwrap();
        assert_eq!(
            v,
            json!({
                "status": "assignment",
                "question": {"question_id": "img-p0-r1", "image_id": "img", "point": {"x": 0.25, "y": 0.5},
                             "class_id": 3, "class_name": "dog", "round": 1},
                "image_url": "/images/img",
                "lease_expiry_ms": 120000
            })
        );
        let back: NextResponse = serde_json::from_value(v).unwrap();
        assert!(matches!(back, NextResponse::Assignment { question, .. } if question == q));
    }

    #[test]
    fn out_of_range_point_is_rejected() {
        let bad = json!({"question_id": "q", "image_id": "i", "point": {"x": 1.5, "y": 0.0},
                         "class_id": 0, "class_name": "a", "round": 1});
        assert!(serde_json::from_value::<QuestionView>(bad).is_err());
    }

    #[test]
    fn progress_field_names() {
        let p = Progress {
            questions_total: 4,
            answered: 3,
            points_resolved: VerdictCounts { yes: 1, no: 0, unresolved: 0 },
            mean_latency_ms: Some(800.0),
        };
        assert_eq!(
            serde_json::to_value(p).unwrap(),
            json!({"questions_total": 4, "answered": 3, "points_resolved": {"yes": 1, "no": 0, "unresolved": 0},
                   "mean_latency_ms": 800.0})
        );
    }
}
