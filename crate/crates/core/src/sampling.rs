//! Point-selection strategies.
//!
//! Every strategy defines a candidate subset of the image's pixels and then
//! samples uniformly (without replacement) within it. Candidates that fall
//! short of the requested count are padded with uniform picks from the rest
//! of the image, and the padding is reported.

use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use thiserror::Error;

use crate::domain::{ClassId, DomainError, LabelMap, Point, ScoreMap};
use crate::seed::rng;

/// Disagreement at or below this counts as none.
const NO_SIGNAL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("invalid strategy: {0}")]
    InvalidSpec(String),
    #[error("unknown strategy token {0:?}")]
    UnknownStrategy(String),
    #[error("requested {requested} points but only {available} eligible pixels")]
    NotEnoughPixels { requested: usize, available: usize },
    #[error("{kind} needs at least 2 score maps, got {got}")]
    EnsembleRequired { kind: StrategyKind, got: usize },
    #[error("no border pixels: the pseudo-labels hold a single class")]
    EmptyBorder,
    #[error("all points fall on VOID pixels")]
    AllVoid,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Uniform,
    UniformClassBalanced,
    HighEntropy,
    ScoreBand,
    Border,
    L2Norm3m,
    Qbc3m,
    HighEntropy3m,
    Border3m,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 9] = [
        StrategyKind::Uniform,
        StrategyKind::UniformClassBalanced,
        StrategyKind::HighEntropy,
        StrategyKind::ScoreBand,
        StrategyKind::Border,
        StrategyKind::L2Norm3m,
        StrategyKind::Qbc3m,
        StrategyKind::HighEntropy3m,
        StrategyKind::Border3m,
    ];

    /// Stable command-line token.
    pub fn token(self) -> &'static str {
        match self {
            StrategyKind::Uniform => "uniform",
            StrategyKind::UniformClassBalanced => "class_balanced",
            StrategyKind::HighEntropy => "entropy",
            StrategyKind::ScoreBand => "score_band",
            StrategyKind::Border => "border",
            StrategyKind::L2Norm3m => "l2norm3m",
            StrategyKind::Qbc3m => "qbc3m",
            StrategyKind::HighEntropy3m => "entropy3m",
            StrategyKind::Border3m => "border3m",
        }
    }

    pub fn is_ensemble(self) -> bool {
        matches!(
            self,
            StrategyKind::L2Norm3m | StrategyKind::Qbc3m | StrategyKind::HighEntropy3m | StrategyKind::Border3m
        )
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for StrategyKind {
    type Err = SamplingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.token() == s)
            .ok_or_else(|| SamplingError::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategySpec {
    pub kind: StrategyKind,
    /// Share of pixels kept by the top-k strategies.
    pub top_fraction: f64,
    /// Inclusive top-1 score band for `score_band`.
    pub band: (f64, f64),
    pub seed: u64,
}

impl StrategySpec {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        StrategySpec { kind, top_fraction: 0.01, band: (0.8, 0.9), seed }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        StrategySpec { seed, ..self }
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        if !(self.top_fraction > 0.0 && self.top_fraction <= 1.0) {
            return Err(SamplingError::InvalidSpec(format!("top_fraction {}", self.top_fraction)));
        }
        let (lo, hi) = self.band;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return Err(SamplingError::InvalidSpec(format!("band [{lo}, {hi}]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Pixel-center points in scan order.
    pub points: Vec<Point>,
    /// Flat pixel indices matching `points`.
    pub pixels: Vec<usize>,
    /// How many points were padded in from uniform sampling.
    pub padded: usize,
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn pixel_entropy(p: &[f32]) -> f64 {
    entropy64(p.iter().map(|&v| v as f64))
}

fn entropy64(p: impl Iterator<Item = f64>) -> f64 {
    -p.filter(|&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Jensen-Shannon divergence of several distributions:
/// entropy of their mean minus their mean entropy.
pub fn js_divergence(members: &[&[f32]]) -> f64 {
    let n = members.len() as f64;
    let classes = members.first().map_or(0, |m| m.len());
    let mean = (0..classes).map(|c| members.iter().map(|m| m[c] as f64).sum::<f64>() / n);
    let mean_entropy = members.iter().map(|m| pixel_entropy(m)).sum::<f64>() / n;
    (entropy64(mean) - mean_entropy).max(0.0)
}

/// Sum over member pairs of the Euclidean distance between score vectors.
pub fn pairwise_l2(members: &[&[f32]]) -> f64 {
    let mut total = 0.0;
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            let d2: f64 = members[i]
                .iter()
                .zip(members[j])
                .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
                .sum();
            total += d2.sqrt();
        }
    }
    total
}

/// Eligibility mask that excludes VOID pixels of a label map.
pub fn non_void_mask(labels: &LabelMap) -> Vec<bool> {
    labels.as_slice().iter().map(|c| !c.is_void()).collect()
}

/// Pixels with a 4-neighbour of different class.
pub fn border_pixels(labels: &LabelMap) -> Vec<bool> {
    let (w, h) = (labels.width(), labels.height());
    let g = labels.as_slice();
    let mut out = vec![false; w * h];
    for row in 0..h {
        for col in 0..w {
            let i = row * w + col;
            let l = g[i];
            out[i] = (col > 0 && g[i - 1] != l)
                || (col + 1 < w && g[i + 1] != l)
                || (row > 0 && g[i - w] != l)
                || (row + 1 < h && g[i + w] != l);
        }
    }
    out
}

fn check_maps(kind: StrategyKind, maps: &[ScoreMap]) -> Result<(), SamplingError> {
    let first = maps
        .first()
        .ok_or(SamplingError::EnsembleRequired { kind, got: 0 })?;
    if kind.is_ensemble() && maps.len() < 2 {
        return Err(SamplingError::EnsembleRequired { kind, got: maps.len() });
    }
    if maps.iter().any(|m| !m.same_shape(first)) {
        return Err(DomainError::DimensionMismatch("score maps differ in shape".into()).into());
    }
    Ok(())
}

fn top_fraction(scores: &[f64], eligible: &[usize], fraction: f64) -> Vec<usize> {
    let count = ((fraction * eligible.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let mut order = eligible.to_vec();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(count.min(order.len()));
    order.sort_unstable();
    order
}

fn members_at(maps: &[ScoreMap], i: usize) -> Vec<&[f32]> {
    maps.iter().map(|m| m.pixel(i)).collect()
}

/// Candidate pixel set (ascending flat indices) of a strategy. For
/// `class_balanced` this is every eligible pixel; the balancing happens when
/// drawing.
pub fn candidate_pixels(
    spec: &StrategySpec,
    maps: &[ScoreMap],
    eligible: Option<&[bool]>,
) -> Result<Vec<usize>, SamplingError> {
    spec.validate()?;
    check_maps(spec.kind, maps)?;
    let m = &maps[0];
    let all: Vec<usize> = (0..m.pixels()).filter(|&i| eligible.is_none_or(|e| e[i])).collect();
    let ensemble_mean = || ScoreMap::mean(maps);
    let cands = match spec.kind {
        StrategyKind::Uniform | StrategyKind::UniformClassBalanced => all,
        StrategyKind::HighEntropy => {
            let h: Vec<f64> = (0..m.pixels()).map(|i| pixel_entropy(m.pixel(i))).collect();
            top_fraction(&h, &all, spec.top_fraction)
        }
        StrategyKind::HighEntropy3m => {
            let mean = ensemble_mean()?;
            let h: Vec<f64> = (0..mean.pixels()).map(|i| pixel_entropy(mean.pixel(i))).collect();
            top_fraction(&h, &all, spec.top_fraction)
        }
        StrategyKind::ScoreBand => {
            let (lo, hi) = spec.band;
            all.into_iter()
                .filter(|&i| {
                    let top = m.pixel(i).iter().copied().fold(0f32, f32::max) as f64;
                    top >= lo && top <= hi
                })
                .collect()
        }
        StrategyKind::Border | StrategyKind::Border3m => {
            let labels = if spec.kind == StrategyKind::Border {
                m.pseudo_labels()
            } else {
                ensemble_mean()?.pseudo_labels()
            };
            let border = border_pixels(&labels);
            let c: Vec<usize> = all.into_iter().filter(|&i| border[i]).collect();
            if c.is_empty() {
                return Err(SamplingError::EmptyBorder);
            }
            c
        }
        StrategyKind::L2Norm3m | StrategyKind::Qbc3m => {
            let stat: Vec<f64> = (0..m.pixels())
                .map(|i| {
                    let members = members_at(maps, i);
                    if spec.kind == StrategyKind::Qbc3m {
                        js_divergence(&members)
                    } else {
                        pairwise_l2(&members)
                    }
                })
                .collect();
            if all.iter().all(|&i| stat[i] <= NO_SIGNAL) {
                all
            } else {
                top_fraction(&stat, &all, spec.top_fraction)
            }
        }
    };
    Ok(cands)
}

fn to_selection(mut pixels: Vec<usize>, padded: usize, m: &ScoreMap) -> Selection {
    pixels.sort_unstable();
    let (w, h) = (m.width(), m.height());
    let points = pixels.iter().map(|&i| Point::pixel_center(i / w, i % w, w, h)).collect();
    Selection { points, pixels, padded }
}

pub fn select_points(spec: &StrategySpec, maps: &[ScoreMap], n: usize) -> Result<Selection, SamplingError> {
    select_points_masked(spec, maps, n, None)
}

/// Like [`select_points`], restricted to pixels where `eligible` is true.
pub fn select_points_masked(
    spec: &StrategySpec,
    maps: &[ScoreMap],
    n: usize,
    eligible: Option<&[bool]>,
) -> Result<Selection, SamplingError> {
    let cands = candidate_pixels(spec, maps, eligible)?;
    let m = &maps[0];
    let mut rng = rng(spec.seed);
    if spec.kind == StrategyKind::UniformClassBalanced {
        if cands.len() < n {
            return Err(SamplingError::NotEnoughPixels { requested: n, available: cands.len() });
        }
        let labels = m.pseudo_labels();
        let mut pools: Vec<Vec<usize>> = vec![Vec::new(); m.classes()];
        for &i in &cands {
            pools[labels.as_slice()[i].index()].push(i);
        }
        let present: Vec<usize> = (0..pools.len()).filter(|&c| !pools[c].is_empty()).collect();
        let caps: Vec<usize> = present.iter().map(|&c| pools[c].len()).collect();
        let quotas = water_fill(n, &caps, &mut rng);
        let mut picked = Vec::with_capacity(n);
        for (&c, &q) in present.iter().zip(&quotas) {
            let pool = &pools[c];
            picked.extend(index::sample(&mut rng, pool.len(), q).into_iter().map(|j| pool[j]));
        }
        return Ok(to_selection(picked, 0, m));
    }
    if cands.len() >= n {
        let picked = index::sample(&mut rng, cands.len(), n).into_iter().map(|j| cands[j]).collect();
        return Ok(to_selection(picked, 0, m));
    }
    // Candidate subset too small: take it whole and pad uniformly.
    let mut in_cands = vec![false; m.pixels()];
    cands.iter().for_each(|&i| in_cands[i] = true);
    let rest: Vec<usize> = (0..m.pixels())
        .filter(|&i| !in_cands[i] && eligible.is_none_or(|e| e[i]))
        .collect();
    let missing = n - cands.len();
    if rest.len() < missing {
        return Err(SamplingError::NotEnoughPixels { requested: n, available: cands.len() + rest.len() });
    }
    let mut picked = cands;
    picked.extend(index::sample(&mut rng, rest.len(), missing).into_iter().map(|j| rest[j]));
    Ok(to_selection(picked, missing, m))
}

/// Splits `n` as evenly as possible over pools of capacity `caps`; a pool
/// smaller than its share is exhausted and the shortfall is spread over the
/// others. Remainders go to randomly chosen pools.
pub(crate) fn water_fill(n: usize, caps: &[usize], rng: &mut impl rand::Rng) -> Vec<usize> {
    let mut quota = vec![0usize; caps.len()];
    let mut remaining = n;
    let mut active: Vec<usize> = (0..caps.len()).filter(|&i| caps[i] > 0).collect();
    while remaining > 0 && !active.is_empty() {
        let share = remaining / active.len();
        let extra = remaining % active.len();
        active.shuffle(rng);
        for (j, &i) in active.iter().enumerate() {
            let want = share + usize::from(j < extra);
            let give = want.min(caps[i] - quota[i]);
            quota[i] += give;
            remaining -= give;
        }
        active.retain(|&i| quota[i] < caps[i]);
        active.sort_unstable();
    }
    quota
}

/// Share of points whose ground-truth class differs from the model's top-1.
/// VOID points are skipped.
pub fn complementarity_fraction(points: &[Point], gt: &LabelMap, m: &ScoreMap) -> Result<f64, SamplingError> {
    if !m.matches_labels(gt) {
        return Err(DomainError::DimensionMismatch("score map and label map differ".into()).into());
    }
    let (mut hits, mut total) = (0usize, 0usize);
    for &p in points {
        let truth = gt.at(p);
        if truth.is_void() {
            continue;
        }
        total += 1;
        let (row, col) = p.to_pixel(m.width(), m.height());
        hits += (m.argmax(row * m.width() + col) != truth) as usize;
    }
    if total == 0 {
        return Err(SamplingError::AllVoid);
    }
    Ok(hits as f64 / total as f64)
}

/// Counts of each pseudo-class among a selection (for balance checks).
pub fn class_counts(selection: &Selection, m: &ScoreMap) -> Vec<usize> {
    let mut counts = vec![0; m.classes()];
    for &i in &selection.pixels {
        counts[m.argmax(i).index()] += 1;
    }
    counts
}

#[allow(dead_code)]
fn _assert_classid_copy(_: ClassId) {}
