//! Point-wise yes/no annotation for semantic segmentation.
//!
//! Points are sampled from weak model score maps, turned into
//! (image, point, class) questions, answered by replicated annotators,
//! aggregated into point labels, and used to rank segmentation methods with
//! sparse point IoU. Synthetic scenes and degraded score maps stand in for
//! real datasets and models.

pub mod campaign;
pub mod domain;
pub mod eval;
pub mod experiments;
pub mod formats;
pub mod layout;
pub mod sampling;
pub mod seed;
pub mod stats;
pub mod synth;
pub mod wire;

pub use domain::{Answer, ClassId, ImageRecord, LabelMap, Point, PointVerdict, ScoreMap, Verdict};
