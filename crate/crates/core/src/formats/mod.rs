//! On-disk formats: PGM label maps, SCM1 score maps, point-label CSV tables,
//! class dictionaries and the append-only answer log.

mod dictionary;
mod log;
mod pgm;
mod points;
mod scm;

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::domain::DomainError;

pub use dictionary::{
    read_class_dictionary, read_image_labels, write_class_dictionary, write_image_labels,
    ClassDictionary,
};
pub use log::{
    append_answer_log, read_answer_log, AnswerLog, AnswerRecord, LogReplay, TruncatedTail,
};
pub use pgm::{decode_label_map, encode_label_map, read_label_map, write_label_map};
pub use points::{
    read_point_labels, sort_point_labels, write_point_labels, write_point_labels_to,
    PointLabelRow, POINT_LABEL_HEADER,
};
pub use scm::{decode_score_map, encode_score_map, read_score_map, write_score_map};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed header at byte {offset}: {reason}")]
    Header { offset: usize, reason: String },
    #[error("truncated payload at byte {offset}: expected {expected} bytes, found {found}")]
    Truncated { offset: usize, expected: usize, found: usize },
    #[error("value {value} at byte {offset} is not a class index below {classes}")]
    ClassOutOfRange { offset: usize, value: u32, classes: usize },
    #[error("non-finite score at byte {offset}")]
    NonFinite { offset: usize },
    #[error("negative score {value} at byte {offset}")]
    NegativeScore { offset: usize, value: f32 },
    #[error("score vector at pixel {pixel} sums to {sum}, outside 1 +/- 1e-3")]
    NotNormalized { pixel: usize, sum: f64 },
    #[error("line {line}: {reason}")]
    Csv { line: u64, reason: String },
    #[error("answer log record {index}: {reason}")]
    LogRecord { index: usize, reason: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl FormatError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        FormatError::Io { path: path.into(), source }
    }

    pub fn is_io(&self) -> bool {
        matches!(self, FormatError::Io { .. })
    }
}
