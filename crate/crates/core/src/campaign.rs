//! Question generation and answer aggregation for yes/no point campaigns.
//!
//! Each sampled point walks the image-level classes in descending order of
//! its model score. A round asks one class, replicated `k` times; the round
//! resolves YES/NO only when every replica agrees. A YES ends the point, any
//! other outcome moves on to the next class until `max_rounds`.
//!
//! [`Campaign`] is a pure state machine over an ordered answer stream, so
//! replaying the answer log rebuilds it exactly.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{check_id, Answer, ClassId, DomainError, ImageRecord, LabelMap, Point, PointVerdict, ScoreMap, Verdict};
use crate::formats::{sort_point_labels, PointLabelRow};
use crate::sampling::{select_points, SamplingError, Selection, StrategyKind, StrategySpec};
use crate::seed::{derive_seed, rng};

/// Seconds per yes/no answer measured on PASCAL-style images.
pub const SECONDS_PER_ANSWER: f64 = 0.8;
/// Seconds per answer measured on the Open Images campaign.
pub const SECONDS_PER_ANSWER_OPEN_IMAGES: f64 = 1.1;
/// Average objects per image in the polygon-drawing baseline.
pub const POLYGON_OBJECTS_PER_IMAGE: f64 = 2.7;
/// Seconds to draw one object polygon.
pub const SECONDS_PER_POLYGON: f64 = 80.0;
pub const DEFAULT_LEASE_SECS: u64 = 120;

#[derive(Debug, Error, PartialEq)]
pub enum CampaignError {
    #[error("invalid campaign config: {0}")]
    InvalidConfig(String),
    #[error("image {0} has no image-level labels")]
    EmptyImageLabels(String),
    #[error("image {0} is already part of the campaign")]
    DuplicateImage(String),
    #[error("unknown question {0}")]
    UnknownQuestion(String),
    #[error("annotator {annotator_id} already answered {question_id}")]
    DuplicateAnswer { question_id: String, annotator_id: String },
    #[error("question {0} already has all its replicas")]
    QuestionClosed(String),
    #[error("expected {expected} verdicts, got {got}")]
    WrongReplicaCount { expected: usize, got: usize },
    #[error("invalid annotator rates: epsilon {epsilon}, unsure {unsure}")]
    InvalidRates { epsilon: f64, unsure: f64 },
    #[error("no ground truth for image {0}")]
    MissingGroundTruth(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// A (image, point, class) yes/no question for one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub question_id: String,
    pub image_id: String,
    pub point: Point,
    pub class_id: ClassId,
    /// 1-based.
    pub round: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignConfig {
    pub ppi: usize,
    /// Replicas per question (k).
    pub replication: u32,
    pub max_rounds: u32,
    pub strategy: StrategySpec,
    /// Written to the `source` column of point-label rows.
    pub source: String,
    pub seconds_per_answer: f64,
    pub lease_secs: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            ppi: 50,
            replication: 3,
            max_rounds: 3,
            strategy: StrategySpec::new(StrategyKind::Uniform, 0),
            source: "pointillism".into(),
            seconds_per_answer: SECONDS_PER_ANSWER,
            lease_secs: DEFAULT_LEASE_SECS,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::InvalidConfig(m));
        if self.ppi == 0 {
            return bad("ppi must be at least 1".into());
        }
        if !(1..=3).contains(&self.replication) {
            return bad(format!("replication must be 1, 2 or 3, got {}", self.replication));
        }
        if self.max_rounds == 0 {
            return bad("max_rounds must be at least 1".into());
        }
        if !(self.seconds_per_answer.is_finite() && self.seconds_per_answer > 0.0) {
            return bad(format!("seconds_per_answer {}", self.seconds_per_answer));
        }
        if self.lease_secs == 0 {
            return bad("lease_secs must be at least 1".into());
        }
        check_id(&self.source).map_err(|e| CampaignError::InvalidConfig(format!("source: {e}")))?;
        self.strategy.validate()?;
        Ok(())
    }

    /// Parses a flat `key = value` file. Blank lines and `#` comments are
    /// ignored; unset keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self, CampaignError> {
        let mut cfg = CampaignConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| CampaignError::InvalidConfig(format!("line {}: expected key = value", n + 1)))?;
            let err = |what: &str| CampaignError::InvalidConfig(format!("line {}: bad {what} {value:?}", n + 1));
            match key {
                "ppi" => cfg.ppi = value.parse().map_err(|_| err(key))?,
                "replication" => cfg.replication = value.parse().map_err(|_| err(key))?,
                "max_rounds" => cfg.max_rounds = value.parse().map_err(|_| err(key))?,
                "strategy" => cfg.strategy.kind = value.parse().map_err(|_| err(key))?,
                "seed" => cfg.strategy.seed = value.parse().map_err(|_| err(key))?,
                "top_fraction" => cfg.strategy.top_fraction = value.parse().map_err(|_| err(key))?,
                "band" => {
                    let (lo, hi) = value.split_once(',').ok_or_else(|| err(key))?;
                    cfg.strategy.band = (
                        lo.trim().parse().map_err(|_| err(key))?,
                        hi.trim().parse().map_err(|_| err(key))?,
                    );
                }
                "source" => cfg.source = value.to_string(),
                "seconds_per_answer" => cfg.seconds_per_answer = value.parse().map_err(|_| err(key))?,
                "lease_secs" => cfg.lease_secs = value.parse().map_err(|_| err(key))?,
                other => {
                    return Err(CampaignError::InvalidConfig(format!("line {}: unknown key {other:?}", n + 1)));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, CampaignError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| CampaignError::InvalidConfig(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

impl fmt::Display for CampaignConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ppi = {}", self.ppi)?;
        writeln!(f, "replication = {}", self.replication)?;
        writeln!(f, "max_rounds = {}", self.max_rounds)?;
        writeln!(f, "strategy = {}", self.strategy.kind)?;
        writeln!(f, "seed = {}", self.strategy.seed)?;
        writeln!(f, "top_fraction = {}", self.strategy.top_fraction)?;
        writeln!(f, "band = {},{}", self.strategy.band.0, self.strategy.band.1)?;
        writeln!(f, "source = {}", self.source)?;
        writeln!(f, "seconds_per_answer = {}", self.seconds_per_answer)?;
        writeln!(f, "lease_secs = {}", self.lease_secs)
    }
}

/// Image-level classes ordered by descending score at one pixel; equal
/// scores fall back to ascending class id.
pub fn rank_classes(scores: &[f32], labels: &BTreeSet<ClassId>) -> Result<Vec<ClassId>, CampaignError> {
    if let Some(bad) = labels.iter().find(|c| c.index() >= scores.len()) {
        return Err(DomainError::ClassOutOfRange { index: 0, class: bad.0, classes: scores.len() }.into());
    }
    let mut ranked: Vec<ClassId> = labels.iter().copied().collect();
    ranked.sort_by(|a, b| scores[b.index()].total_cmp(&scores[a.index()]).then(a.cmp(b)));
    Ok(ranked)
}

fn question_id(image_id: &str, point_index: usize, round: u32) -> String {
    format!("{image_id}-p{point_index}-r{round}")
}

fn id_hash(id: &str) -> u64 {
    // FNV-1a, only used to key per-image seed streams.
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Round-1 questions for one image, one per selected point. Each question is
/// later answered by `replication` annotators (its replica slots).
pub fn generate_questions(
    image: &ImageRecord,
    maps: &[ScoreMap],
    config: &CampaignConfig,
) -> Result<Vec<Question>, CampaignError> {
    Ok(plan_image(image, maps, config)?
        .into_iter()
        .enumerate()
        .map(|(i, (point, ranking))| Question {
            question_id: question_id(&image.image_id, i, 1),
            image_id: image.image_id.clone(),
            point,
            class_id: ranking[0],
            round: 1,
        })
        .collect())
}

/// The points a campaign with `config` asks about on one image. The
/// strategy seed is keyed by the image id, so the choice does not depend on
/// the order images are added in.
pub fn select_image_points(image_id: &str, maps: &[ScoreMap], config: &CampaignConfig) -> Result<Selection, CampaignError> {
    let spec = config.strategy.with_seed(derive_seed(config.strategy.seed, id_hash(image_id)));
    Ok(select_points(&spec, maps, config.ppi)?)
}

fn plan_image(
    image: &ImageRecord,
    maps: &[ScoreMap],
    config: &CampaignConfig,
) -> Result<Vec<(Point, Vec<ClassId>)>, CampaignError> {
    check_id(&image.image_id)?;
    if image.image_level_labels.is_empty() {
        return Err(CampaignError::EmptyImageLabels(image.image_id.clone()));
    }
    let selection = select_image_points(&image.image_id, maps, config)?;
    let m = &maps[0];
    selection
        .points
        .iter()
        .zip(&selection.pixels)
        .map(|(&p, &i)| Ok((p, rank_classes(m.pixel(i), &image.image_level_labels)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Asking,
    Yes,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointState {
    pub image_id: String,
    pub point: Point,
    /// Candidate classes in asking order.
    pub ranking: Vec<ClassId>,
    /// Rounds asked so far.
    pub rounds: u32,
    pub status: PointStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NextRound {
    Ask { class_id: ClassId, round: u32 },
    Exhausted,
}

/// The class for the round after `point.rounds`, or EXHAUSTED when the
/// ranking or the round budget runs out.
pub fn next_round(point: &PointState, max_rounds: u32) -> NextRound {
    let asked = point.rounds as usize;
    if point.rounds >= max_rounds || asked >= point.ranking.len() {
        NextRound::Exhausted
    } else {
        NextRound::Ask { class_id: point.ranking[asked], round: point.rounds + 1 }
    }
}

/// Unanimity rule over exactly `k` verdicts.
pub fn resolve(verdicts: &[Verdict], k: usize) -> Result<PointVerdict, CampaignError> {
    if verdicts.len() != k || k == 0 {
        return Err(CampaignError::WrongReplicaCount { expected: k, got: verdicts.len() });
    }
    let tally = |v| verdicts.iter().filter(|&&x| x == v).count() as u32;
    Ok(PointVerdict::from_votes(tally(Verdict::Yes), tally(Verdict::No), tally(Verdict::Unsure)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedAnswer {
    pub annotator_id: String,
    pub verdict: Verdict,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuestionState {
    pub question: Question,
    pub point_index: usize,
    pub answers: Vec<ReceivedAnswer>,
    pub resolution: Option<PointVerdict>,
}

impl QuestionState {
    pub fn answered_by(&self, annotator_id: &str) -> bool {
        self.answers.iter().any(|a| a.annotator_id == annotator_id)
    }

    fn votes(&self) -> (u32, u32, u32) {
        let count = |v| self.answers.iter().filter(|a| a.verdict == v).count() as u32;
        (count(Verdict::Yes), count(Verdict::No), count(Verdict::Unsure))
    }
}

/// Result of applying one answer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ApplyOutcome {
    /// Set when this answer was the last replica.
    pub resolution: Option<PointVerdict>,
    /// Next-round question opened by the resolution.
    pub follow_up: Option<Question>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub yes: u64,
    pub no: u64,
    pub unresolved: u64,
}

impl VerdictCounts {
    fn bump(&mut self, v: PointVerdict) {
        match v {
            PointVerdict::Yes => self.yes += 1,
            PointVerdict::No => self.no += 1,
            PointVerdict::Unresolved => self.unresolved += 1,
        }
    }
}

/// Campaign counters, consistent with [`Campaign::aggregate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    /// Replica slots of every question opened so far.
    pub questions_total: u64,
    /// Answers received.
    pub answered: u64,
    /// Resolved labels by verdict.
    pub points_resolved: VerdictCounts,
    /// `None` before the first answer.
    pub mean_latency_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    config: CampaignConfig,
    points: Vec<PointState>,
    questions: Vec<QuestionState>,
    by_id: HashMap<String, usize>,
    images: Vec<String>,
    answered: u64,
    latency_sum: u64,
    resolved: VerdictCounts,
}

impl Campaign {
    pub fn new(config: CampaignConfig) -> Result<Self, CampaignError> {
        config.validate()?;
        Ok(Campaign {
            config,
            points: Vec::new(),
            questions: Vec::new(),
            by_id: HashMap::new(),
            images: Vec::new(),
            answered: 0,
            latency_sum: 0,
            resolved: VerdictCounts::default(),
        })
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn points(&self) -> &[PointState] {
        &self.points
    }

    pub fn questions(&self) -> &[QuestionState] {
        &self.questions
    }

    pub fn images(&self) -> &[String] {
        &self.images
    }

    pub fn question(&self, question_id: &str) -> Option<&QuestionState> {
        self.by_id.get(question_id).map(|&i| &self.questions[i])
    }

    /// Position of a question in [`Campaign::questions`].
    pub fn question_index(&self, question_id: &str) -> Option<usize> {
        self.by_id.get(question_id).copied()
    }

    pub fn replication(&self) -> usize {
        self.config.replication as usize
    }

    /// Samples points on `image` and opens their round-1 questions.
    pub fn add_image(&mut self, image: &ImageRecord, maps: &[ScoreMap]) -> Result<Vec<Question>, CampaignError> {
        if self.images.contains(&image.image_id) {
            return Err(CampaignError::DuplicateImage(image.image_id.clone()));
        }
        let plan = plan_image(image, maps, &self.config)?;
        self.images.push(image.image_id.clone());
        let mut opened = Vec::with_capacity(plan.len());
        for (i, (point, ranking)) in plan.into_iter().enumerate() {
            let point_index = self.points.len();
            let class_id = ranking[0];
            self.points.push(PointState {
                image_id: image.image_id.clone(),
                point,
                ranking,
                rounds: 1,
                status: PointStatus::Asking,
            });
            let q = Question {
                question_id: question_id(&image.image_id, i, 1),
                image_id: image.image_id.clone(),
                point,
                class_id,
                round: 1,
            };
            self.open(q.clone(), point_index);
            opened.push(q);
        }
        Ok(opened)
    }

    fn open(&mut self, question: Question, point_index: usize) {
        self.by_id.insert(question.question_id.clone(), self.questions.len());
        self.questions.push(QuestionState { question, point_index, answers: Vec::new(), resolution: None });
    }

    /// Questions that still have free replica slots, in creation order.
    pub fn open_questions(&self) -> impl Iterator<Item = &QuestionState> {
        let k = self.replication();
        self.questions.iter().filter(move |q| q.answers.len() < k)
    }

    pub fn is_finished(&self) -> bool {
        self.open_questions().next().is_none()
    }

    /// Records one answer; the k-th replica resolves the round and may open
    /// the next one.
    pub fn apply(&mut self, answer: &Answer) -> Result<ApplyOutcome, CampaignError> {
        let k = self.replication();
        let &qi = self
            .by_id
            .get(&answer.question_id)
            .ok_or_else(|| CampaignError::UnknownQuestion(answer.question_id.clone()))?;
        let state = &mut self.questions[qi];
        if state.answered_by(&answer.annotator_id) {
            return Err(CampaignError::DuplicateAnswer {
                question_id: answer.question_id.clone(),
                annotator_id: answer.annotator_id.clone(),
            });
        }
        if state.answers.len() >= k {
            return Err(CampaignError::QuestionClosed(answer.question_id.clone()));
        }
        state.answers.push(ReceivedAnswer {
            annotator_id: answer.annotator_id.clone(),
            verdict: answer.verdict,
            latency_ms: answer.latency_ms,
        });
        self.answered += 1;
        self.latency_sum += answer.latency_ms;
        if state.answers.len() < k {
            return Ok(ApplyOutcome::default());
        }

        let verdicts: Vec<Verdict> = state.answers.iter().map(|a| a.verdict).collect();
        let verdict = resolve(&verdicts, k)?;
        state.resolution = Some(verdict);
        self.resolved.bump(verdict);
        let pi = state.point_index;
        let mut outcome = ApplyOutcome { resolution: Some(verdict), follow_up: None };
        if verdict == PointVerdict::Yes {
            self.points[pi].status = PointStatus::Yes;
            return Ok(outcome);
        }
        match next_round(&self.points[pi], self.config.max_rounds) {
            NextRound::Exhausted => self.points[pi].status = PointStatus::Exhausted,
            NextRound::Ask { class_id, round } => {
                let point = &mut self.points[pi];
                point.rounds = round;
                let local = state_local_index(&self.questions[qi].question.question_id);
                let q = Question {
                    question_id: question_id(&point.image_id, local, round),
                    image_id: point.image_id.clone(),
                    point: point.point,
                    class_id,
                    round,
                };
                self.open(q.clone(), pi);
                outcome.follow_up = Some(q);
            }
        }
        Ok(outcome)
    }

    /// One row per resolved (point, class) round, sorted.
    pub fn aggregate(&self) -> Vec<PointLabelRow> {
        let mut rows: Vec<PointLabelRow> = self
            .questions
            .iter()
            .filter_map(|q| {
                let verdict = q.resolution?;
                let (yes_votes, no_votes, unsure_votes) = q.votes();
                Some(PointLabelRow {
                    image_id: q.question.image_id.clone(),
                    class_id: q.question.class_id,
                    point: q.question.point,
                    verdict,
                    yes_votes,
                    no_votes,
                    unsure_votes,
                    source: self.config.source.clone(),
                })
            })
            .collect();
        sort_point_labels(&mut rows);
        rows
    }

    pub fn progress(&self) -> Progress {
        Progress {
            questions_total: self.questions.len() as u64 * self.config.replication as u64,
            answered: self.answered,
            points_resolved: self.resolved,
            mean_latency_ms: (self.answered > 0).then(|| self.latency_sum as f64 / self.answered as f64),
        }
    }

    pub fn answers_received(&self) -> u64 {
        self.answered
    }
}

/// Per-image point index encoded in a question id (`{image}-p{i}-r{round}`).
fn state_local_index(question_id: &str) -> usize {
    let body = &question_id[..question_id.rfind("-r").expect("question id has a round suffix")];
    body[body.rfind("-p").expect("question id has a point index") + 2..]
        .parse()
        .expect("question id point index is numeric")
}

/// Noise model of a simulated annotator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnotatorModel {
    /// Probability of the wrong yes/no verdict.
    pub epsilon: f64,
    /// Probability of UNSURE.
    pub unsure: f64,
    pub latency_median_s: f64,
    /// Log-space standard deviation of the latency distribution.
    pub latency_sigma: f64,
}

impl AnnotatorModel {
    pub fn new(epsilon: f64, unsure: f64) -> Result<Self, CampaignError> {
        let ok = |r: f64| (0.0..=1.0).contains(&r);
        if !ok(epsilon) || !ok(unsure) || epsilon + unsure > 1.0 {
            return Err(CampaignError::InvalidRates { epsilon, unsure });
        }
        Ok(AnnotatorModel { epsilon, unsure, latency_median_s: SECONDS_PER_ANSWER, latency_sigma: 0.5 })
    }

    pub fn oracle() -> Self {
        Self::new(0.0, 0.0).expect("zero rates are valid")
    }

    pub fn with_latency_median(self, seconds: f64) -> Self {
        AnnotatorModel { latency_median_s: seconds, ..self }
    }

    /// Truthful verdict, flipped with probability epsilon or UNSURE with
    /// probability `unsure`, plus a log-normal latency.
    pub fn answer<R: Rng>(&self, question: &Question, gt: &LabelMap, rng: &mut R) -> (Verdict, u64) {
        let truth = gt.at(question.point) == question.class_id;
        let u: f64 = rng.random();
        let verdict = if u < self.unsure {
            Verdict::Unsure
        } else if (u < self.unsure + self.epsilon) == truth {
            Verdict::No
        } else {
            Verdict::Yes
        };
        let latency = LogNormal::new(self.latency_median_s.ln(), self.latency_sigma)
            .expect("finite latency parameters")
            .sample(rng);
        (verdict, ((latency * 1000.0).round() as u64).max(1))
    }
}

/// One simulated answer with its own seed.
pub fn simulate_annotator(
    question: &Question,
    gt: &LabelMap,
    epsilon: f64,
    unsure: f64,
    seed: u64,
) -> Result<Answer, CampaignError> {
    let model = AnnotatorModel::new(epsilon, unsure)?;
    let (verdict, latency_ms) = model.answer(question, gt, &mut rng(seed));
    Ok(Answer { question_id: question.question_id.clone(), annotator_id: "sim".into(), verdict, latency_ms })
}

/// Answers every open replica with simulated annotators `sim0..sim{k-1}`
/// until the campaign finishes. Returns the answers in application order,
/// ready to be written to an answer log.
pub fn run_simulated(
    campaign: &mut Campaign,
    gts: &HashMap<String, LabelMap>,
    model: &AnnotatorModel,
    seed: u64,
) -> Result<Vec<Answer>, CampaignError> {
    let mut rng = rng(seed);
    let mut log = Vec::new();
    let mut cursor = 0;
    while cursor < campaign.questions.len() {
        let state = &campaign.questions[cursor];
        let question = state.question.clone();
        let gt = gts
            .get(&question.image_id)
            .ok_or_else(|| CampaignError::MissingGroundTruth(question.image_id.clone()))?;
        for slot in state.answers.len()..campaign.replication() {
            let annotator_id = format!("sim{slot}");
            if campaign.questions[cursor].answered_by(&annotator_id) {
                continue;
            }
            let (verdict, latency_ms) = model.answer(&question, gt, &mut rng);
            let answer = Answer { question_id: question.question_id.clone(), annotator_id, verdict, latency_ms };
            campaign.apply(&answer)?;
            log.push(answer);
        }
        cursor += 1;
    }
    Ok(log)
}

/// Rebuilds a campaign state by applying logged answers in order.
pub fn replay<'a>(campaign: &mut Campaign, answers: impl IntoIterator<Item = &'a Answer>) -> Result<(), CampaignError> {
    for a in answers {
        campaign.apply(a)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostReport {
    pub images: usize,
    /// Answers given (every replica counts).
    pub questions_asked: u64,
    pub total_seconds: f64,
    pub seconds_per_image: f64,
    pub polygon_seconds: f64,
    /// Polygon time over point time; `None` when no question was asked.
    pub speedup: Option<f64>,
}

/// Time accounting from raw counts against the polygon-drawing baseline.
pub fn cost_from_counts(questions_asked: u64, images: usize, seconds_per_answer: f64) -> CostReport {
    let total_seconds = questions_asked as f64 * seconds_per_answer;
    let polygon_seconds = images as f64 * POLYGON_OBJECTS_PER_IMAGE * SECONDS_PER_POLYGON;
    CostReport {
        images,
        questions_asked,
        total_seconds,
        seconds_per_image: if images == 0 { 0.0 } else { total_seconds / images as f64 },
        polygon_seconds,
        speedup: (total_seconds > 0.0).then(|| polygon_seconds / total_seconds),
    }
}

pub fn campaign_cost(campaign: &Campaign, seconds_per_answer: f64) -> CostReport {
    cost_from_counts(campaign.answered, campaign.images.len(), seconds_per_answer)
}
