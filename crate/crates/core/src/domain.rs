//! Shared domain types: class ids, normalized points, label and score grids,
//! and the verdict vocabulary used by campaigns.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the per-pixel probability sum of a [`ScoreMap`].
pub const SCORE_SUM_TOLERANCE: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("point ({x}, {y}) outside [0,1)x[0,1)")]
    PointOutOfRange { x: f64, y: f64 },
    #[error("grid dimensions must be at least 1x1, got {width}x{height}")]
    EmptyGrid { width: usize, height: usize },
    #[error("class count {0} is not representable (max {max})", max = ClassId::MAX_CLASSES)]
    TooManyClasses(usize),
    #[error("grid has {got} cells, expected {expected}")]
    GridSize { expected: usize, got: usize },
    #[error("cell {index} holds class {class}, but the map has {classes} classes")]
    ClassOutOfRange { index: usize, class: u16, classes: usize },
    #[error("score at pixel {pixel} class {class} is {value}")]
    InvalidScore { pixel: usize, class: usize, value: f32 },
    #[error("score vector at pixel {pixel} sums to {sum}")]
    NotNormalized { pixel: usize, sum: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid identifier {0:?}: only [A-Za-z0-9_-] allowed")]
    InvalidId(String),
    #[error("unknown verdict token {0:?}")]
    UnknownVerdict(String),
}

/// Dense class index. `ClassId::VOID` marks unlabeled or ignored pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u16);

impl ClassId {
    pub const VOID: ClassId = ClassId(u16::MAX);
    /// Largest usable class count; the last representable id is reserved.
    pub const MAX_CLASSES: usize = u16::MAX as usize;

    pub fn is_void(self) -> bool {
        self == Self::VOID
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<u16> for ClassId {
    fn from(v: u16) -> Self {
        ClassId(v)
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_void() {
            f.write_str("VOID")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Returns true when `s` is a non-empty identifier made of `[A-Za-z0-9_-]`.
pub fn is_valid_id(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

pub fn check_id(s: &str) -> Result<(), DomainError> {
    if is_valid_id(s) {
        Ok(())
    } else {
        Err(DomainError::InvalidId(s.to_string()))
    }
}

/// A location in normalized image coordinates, `0 <= x, y < 1`.
///
/// Normalized coordinates survive image rescaling; pixel lookups use
/// `col = floor(x * W)`, `row = floor(y * H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint")]
pub struct Point {
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct RawPoint {
    x: f64,
    y: f64,
}

impl TryFrom<RawPoint> for Point {
    type Error = DomainError;

    fn try_from(raw: RawPoint) -> Result<Self, Self::Error> {
        Point::new(raw.x, raw.y)
    }
}

impl Point {
    pub fn new(x: f64, y: f64) -> Result<Self, DomainError> {
        if (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y) {
            Ok(Point { x, y })
        } else {
            Err(DomainError::PointOutOfRange { x, y })
        }
    }

    /// Center of pixel `(row, col)` in a `width x height` grid.
    pub fn pixel_center(row: usize, col: usize, width: usize, height: usize) -> Self {
        debug_assert!(row < height && col < width);
        Point {
            x: (col as f64 + 0.5) / width as f64,
            y: (row as f64 + 0.5) / height as f64,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn to_pixel(self, width: usize, height: usize) -> (usize, usize) {
        point_to_pixel(self, width, height)
    }
}

/// Maps a point to the `(row, col)` of the pixel containing it.
pub fn point_to_pixel(p: Point, width: usize, height: usize) -> (usize, usize) {
    let col = ((p.x * width as f64).floor() as usize).min(width - 1);
    let row = ((p.y * height as f64).floor() as usize).min(height - 1);
    (row, col)
}

fn check_dims(width: usize, height: usize, classes: usize) -> Result<(), DomainError> {
    if width == 0 || height == 0 {
        return Err(DomainError::EmptyGrid { width, height });
    }
    if classes == 0 || classes > ClassId::MAX_CLASSES {
        return Err(DomainError::TooManyClasses(classes));
    }
    Ok(())
}

/// Dense per-pixel class grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    classes: usize,
    grid: Vec<ClassId>,
}

impl LabelMap {
    pub fn new(
        width: usize,
        height: usize,
        classes: usize,
        grid: Vec<ClassId>,
    ) -> Result<Self, DomainError> {
        check_dims(width, height, classes)?;
        if grid.len() != width * height {
            return Err(DomainError::GridSize { expected: width * height, got: grid.len() });
        }
        if let Some((index, c)) =
            grid.iter().enumerate().find(|(_, c)| !c.is_void() && c.index() >= classes)
        {
            return Err(DomainError::ClassOutOfRange { index, class: c.0, classes });
        }
        Ok(LabelMap { width, height, classes, grid })
    }

    pub fn filled(width: usize, height: usize, classes: usize, class: ClassId) -> Result<Self, DomainError> {
        Self::new(width, height, classes, vec![class; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn as_slice(&self) -> &[ClassId] {
        &self.grid
    }

    pub fn get(&self, row: usize, col: usize) -> ClassId {
        self.grid[row * self.width + col]
    }

    pub fn at(&self, p: Point) -> ClassId {
        let (row, col) = p.to_pixel(self.width, self.height);
        self.get(row, col)
    }

    /// Set of non-VOID classes occurring in the grid.
    pub fn present_classes(&self) -> BTreeSet<ClassId> {
        let mut seen = vec![false; self.classes];
        for c in &self.grid {
            if !c.is_void() {
                seen[c.index()] = true;
            }
        }
        seen.iter()
            .enumerate()
            .filter(|(_, s)| **s)
            .map(|(i, _)| ClassId(i as u16))
            .collect()
    }

    pub fn same_shape(&self, other: &LabelMap) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Per-pixel class distributions standing in for a weak segmentation model.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    width: usize,
    height: usize,
    classes: usize,
    scores: Vec<f32>,
}

impl ScoreMap {
    /// Builds a score map, rejecting negative, non-finite or unnormalized vectors.
    pub fn new(
        width: usize,
        height: usize,
        classes: usize,
        scores: Vec<f32>,
    ) -> Result<Self, DomainError> {
        check_dims(width, height, classes)?;
        let expected = width * height * classes;
        if scores.len() != expected {
            return Err(DomainError::GridSize { expected, got: scores.len() });
        }
        for (pixel, v) in scores.chunks_exact(classes).enumerate() {
            let mut sum = 0.0f64;
            for (class, &s) in v.iter().enumerate() {
                if !s.is_finite() || s < 0.0 {
                    return Err(DomainError::InvalidScore { pixel, class, value: s });
                }
                sum += s as f64;
            }
            if (sum - 1.0).abs() > SCORE_SUM_TOLERANCE {
                return Err(DomainError::NotNormalized { pixel, sum });
            }
        }
        Ok(ScoreMap { width, height, classes, scores })
    }

    /// Exact one-hot encoding of a label map. VOID pixels get a uniform vector.
    pub fn one_hot(labels: &LabelMap) -> Self {
        let c = labels.classes;
        let mut scores = vec![0f32; labels.len() * c];
        for (v, l) in scores.chunks_exact_mut(c).zip(&labels.grid) {
            if l.is_void() {
                v.fill(1.0 / c as f32);
            } else {
                v[l.index()] = 1.0;
            }
        }
        ScoreMap { width: labels.width, height: labels.height, classes: c, scores }
    }

    /// Element-wise mean of several maps of identical shape.
    pub fn mean(maps: &[ScoreMap]) -> Result<Self, DomainError> {
        let first = maps
            .first()
            .ok_or_else(|| DomainError::DimensionMismatch("no score maps".into()))?;
        if maps.iter().any(|m| !m.same_shape(first)) {
            return Err(DomainError::DimensionMismatch("ensemble members differ in shape".into()));
        }
        let n = maps.len() as f64;
        let mut scores = Vec::with_capacity(first.scores.len());
        for i in 0..first.scores.len() {
            let s: f64 = maps.iter().map(|m| m.scores[i] as f64).sum();
            scores.push((s / n) as f32);
        }
        Ok(ScoreMap { scores, ..*first })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.scores
    }

    /// Distribution at flat pixel index `idx`.
    pub fn pixel(&self, idx: usize) -> &[f32] {
        &self.scores[idx * self.classes..(idx + 1) * self.classes]
    }

    pub fn at(&self, p: Point) -> &[f32] {
        let (row, col) = p.to_pixel(self.width, self.height);
        self.pixel(row * self.width + col)
    }

    /// Highest-scoring class at a pixel; ties go to the lowest id.
    pub fn argmax(&self, idx: usize) -> ClassId {
        ClassId(argmax(self.pixel(idx)) as u16)
    }

    /// Argmax label map (the pseudo-labels).
    pub fn pseudo_labels(&self) -> LabelMap {
        let grid = (0..self.pixels()).map(|i| self.argmax(i)).collect();
        LabelMap { width: self.width, height: self.height, classes: self.classes, grid }
    }

    pub fn same_shape(&self, other: &ScoreMap) -> bool {
        self.width == other.width && self.height == other.height && self.classes == other.classes
    }

    pub fn matches_labels(&self, labels: &LabelMap) -> bool {
        self.width == labels.width && self.height == labels.height
    }
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(v: &[f32]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate().skip(1) {
        if s > v[best] {
            best = i;
        }
    }
    best
}

/// Dataset-level description of one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub image_id: String,
    pub label_map_path: Option<PathBuf>,
    pub score_map_paths: Vec<PathBuf>,
    pub image_level_labels: BTreeSet<ClassId>,
}

/// A single annotator's response to a yes/no question.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Yes,
    No,
    Unsure,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Yes => "YES",
            Verdict::No => "NO",
            Verdict::Unsure => "UNSURE",
        }
    }
}

impl FromStr for Verdict {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "YES" | "yes" => Ok(Verdict::Yes),
            "NO" | "no" => Ok(Verdict::No),
            "UNSURE" | "unsure" => Ok(Verdict::Unsure),
            other => Err(DomainError::UnknownVerdict(other.to_string())),
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Aggregated outcome for one (point, class) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PointVerdict {
    Yes,
    No,
    Unresolved,
}

impl PointVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            PointVerdict::Yes => "YES",
            PointVerdict::No => "NO",
            PointVerdict::Unresolved => "UNRESOLVED",
        }
    }

    /// Unanimity rule applied to vote tallies: YES or NO only when every vote
    /// agrees, UNRESOLVED otherwise (including any UNSURE vote).
    pub fn from_votes(yes: u32, no: u32, unsure: u32) -> Self {
        match (yes, no, unsure) {
            (y, 0, 0) if y > 0 => PointVerdict::Yes,
            (0, n, 0) if n > 0 => PointVerdict::No,
            _ => PointVerdict::Unresolved,
        }
    }
}

impl FromStr for PointVerdict {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "YES" => Ok(PointVerdict::Yes),
            "NO" => Ok(PointVerdict::No),
            "UNRESOLVED" => Ok(PointVerdict::Unresolved),
            other => Err(DomainError::UnknownVerdict(other.to_string())),
        }
    }
}

impl fmt::Display for PointVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One annotator verdict on one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub question_id: String,
    pub annotator_id: String,
    pub verdict: Verdict,
    pub latency_ms: u64,
}
