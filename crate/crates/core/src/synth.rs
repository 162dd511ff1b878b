//! Synthetic ground truth, degraded "weak model" score maps and families of
//! segmentation methods with a known quality ranking.
//!
//! A degraded prediction is built in four steps: boundaries are displaced by
//! a smooth jitter field, the jittered one-hot labels are box-smoothed,
//! random pixels are flipped to a confusable class (the true class keeps the
//! runner-up score), and the resulting evidence is softened by a temperature
//! softmax. Argmax and ranking properties only depend on the evidence, so the
//! label-only route skips the softmax.

use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{ClassId, DomainError, LabelMap, ScoreMap};
use crate::eval::{dense_miou, MethodPrediction};
use crate::seed::{derive_seed, rng};

/// Logit gain applied to the smoothed evidence before the temperature.
pub const LOGIT_SCALE: f64 = 4.0;
/// Evidence kept by the true class on a flipped pixel, relative to the winner.
pub const FLIP_RUNNER_UP: f32 = 0.6;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("degenerate scene: {0}")]
    Degenerate(String),
    #[error("method {method} could not be ordered below its predecessor after {attempts} reseeds")]
    OrderingFailed { method: usize, attempts: usize },
    #[error("invalid degradation: {0}")]
    InvalidDegradation(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Voronoi,
    Blobs,
}

impl FromStr for Generator {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "voronoi" => Ok(Generator::Voronoi),
            "blobs" => Ok(Generator::Blobs),
            other => Err(SynthError::Degenerate(format!("unknown generator {other:?}"))),
        }
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::Voronoi => "voronoi",
            Generator::Blobs => "blobs",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub classes: usize,
    pub region_count: usize,
    pub seed: u64,
    pub generator: Generator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub labels: LabelMap,
    /// Exactly the classes present in `labels`.
    pub image_level_labels: BTreeSet<ClassId>,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<Scene, SynthError> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 || spec.classes == 0 || spec.region_count == 0 {
        return Err(SynthError::Degenerate(format!("{spec:?}")));
    }
    if w * h < spec.region_count {
        return Err(SynthError::Degenerate(format!(
            "{} regions do not fit in {w}x{h} pixels",
            spec.region_count
        )));
    }
    let mut rng = rng(spec.seed);
    let classes = spec.classes as u16;
    let grid = match spec.generator {
        Generator::Voronoi => {
            let sites: Vec<(i64, i64, ClassId)> = index::sample(&mut rng, w * h, spec.region_count)
                .into_iter()
                .map(|i| ((i / w) as i64, (i % w) as i64, ClassId(rng.random_range(0..classes))))
                .collect();
            let mut grid = Vec::with_capacity(w * h);
            for row in 0..h as i64 {
                for col in 0..w as i64 {
                    let mut best = (i64::MAX, ClassId(0));
                    for &(r, c, class) in &sites {
                        let d = (r - row).pow(2) + (c - col).pow(2);
                        if d < best.0 {
                            best = (d, class);
                        }
                    }
                    grid.push(best.1);
                }
            }
            grid
        }
        Generator::Blobs => {
            let mut grid = vec![ClassId(rng.random_range(0..classes)); w * h];
            for _ in 1..spec.region_count {
                let class = ClassId(rng.random_range(0..classes));
                let cy = rng.random_range(0.0..h as f64);
                let cx = rng.random_range(0.0..w as f64);
                let ry = rng.random_range(h as f64 / 10.0..h as f64 / 3.0).max(0.75);
                let rx = rng.random_range(w as f64 / 10.0..w as f64 / 3.0).max(0.75);
                let theta = rng.random_range(0.0..std::f64::consts::PI);
                let (s, c) = theta.sin_cos();
                for row in 0..h {
                    for col in 0..w {
                        let dy = row as f64 + 0.5 - cy;
                        let dx = col as f64 + 0.5 - cx;
                        let u = (dx * c + dy * s) / rx;
                        let v = (-dx * s + dy * c) / ry;
                        if u * u + v * v <= 1.0 {
                            grid[row * w + col] = class;
                        }
                    }
                }
            }
            grid
        }
    };
    let labels = LabelMap::new(w, h, spec.classes, grid)?;
    let image_level_labels = labels.present_classes();
    Ok(Scene { labels, image_level_labels })
}

/// `n` scenes sharing a spec, each with its own derived seed.
pub fn generate_scenes(spec: &SceneSpec, n: usize) -> Result<Vec<Scene>, SynthError> {
    (0..n)
        .map(|i| generate_scene(&SceneSpec { seed: derive_seed(spec.seed, i as u64), ..spec.clone() }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegradationSpec {
    pub boundary_jitter_px: f64,
    pub flip_rate: f64,
    pub smoothing_radius_px: usize,
    pub temperature: f64,
    pub seed: u64,
}

impl DegradationSpec {
    /// No jitter, no flips, no smoothing and a vanishing temperature: an exact
    /// one-hot encoding of the ground truth.
    pub fn identity(seed: u64) -> Self {
        DegradationSpec {
            boundary_jitter_px: 0.0,
            flip_rate: 0.0,
            smoothing_radius_px: 0,
            temperature: 1e-6,
            seed,
        }
    }

    /// Weak model whose top-1 pick is right on roughly 90% of pixels and whose
    /// runner-up classes almost always contain the truth.
    pub fn top3_faithful(seed: u64) -> Self {
        DegradationSpec {
            boundary_jitter_px: 3.0,
            flip_rate: 0.03,
            smoothing_radius_px: 4,
            temperature: 1.0,
            seed,
        }
    }

    /// Weak model at roughly 85% pixel accuracy with errors concentrated along
    /// region boundaries.
    pub fn boundary_confused(seed: u64) -> Self {
        DegradationSpec {
            boundary_jitter_px: 4.5,
            flip_rate: 0.05,
            smoothing_radius_px: 3,
            temperature: 1.0,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        DegradationSpec { seed, ..self }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..=1.0).contains(&self.flip_rate) {
            return Err(SynthError::InvalidDegradation(format!("flip_rate {}", self.flip_rate)));
        }
        if !(self.boundary_jitter_px >= 0.0 && self.boundary_jitter_px.is_finite()) {
            return Err(SynthError::InvalidDegradation(format!("jitter {}", self.boundary_jitter_px)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(SynthError::InvalidDegradation(format!("temperature {}", self.temperature)));
        }
        Ok(())
    }
}

/// Smooth per-row / per-column displacement profile with amplitude `amp`.
fn displacement_profile(len: usize, amp: f64, rng: &mut impl Rng) -> Vec<i64> {
    if amp == 0.0 {
        return vec![0; len];
    }
    let l1 = rng.random_range(24.0..72.0);
    let l2 = rng.random_range(8.0..24.0);
    let (p1, p2) = (rng.random_range(0.0..TAU), rng.random_range(0.0..TAU));
    (0..len)
        .map(|i| {
            let t = i as f64;
            let d = amp * (0.7 * (TAU * t / l1 + p1).sin() + 0.3 * (TAU * t / l2 + p2).sin());
            d.round() as i64
        })
        .collect()
}

/// Per-pixel, per-class evidence in [0, 1] prior to the softmax. Pixels whose
/// jittered label is VOID carry `None`.
struct Evidence {
    classes: usize,
    values: Vec<f32>,
    void: Vec<bool>,
}

fn evidence(gt: &LabelMap, spec: &DegradationSpec) -> Evidence {
    let (w, h, c) = (gt.width(), gt.height(), gt.classes());
    let mut rng = rng(spec.seed);

    // Boundary jitter: column offset varies along rows, row offset along columns.
    let dx = displacement_profile(h, spec.boundary_jitter_px, &mut rng);
    let dy = displacement_profile(w, spec.boundary_jitter_px, &mut rng);
    let mut jittered = Vec::with_capacity(w * h);
    for (row, &ox) in dx.iter().enumerate() {
        for (col, &oy) in dy.iter().enumerate() {
            let r = (row as i64 + oy).clamp(0, h as i64 - 1) as usize;
            let cc = (col as i64 + ox).clamp(0, w as i64 - 1) as usize;
            jittered.push(gt.get(r, cc));
        }
    }
    let void: Vec<bool> = jittered.iter().map(|l| l.is_void()).collect();

    let mut values = vec![0f32; w * h * c];
    let rad = spec.smoothing_radius_px;
    if rad == 0 {
        for (i, l) in jittered.iter().enumerate() {
            if !l.is_void() {
                values[i * c + l.index()] = 1.0;
            }
        }
    } else {
        // Box filter through one integral image per class present.
        let stride = w + 1;
        let mut integral = vec![0u32; stride * (h + 1)];
        for class in gt.present_classes() {
            for row in 0..h {
                let mut run = 0u32;
                for col in 0..w {
                    run += (jittered[row * w + col] == class) as u32;
                    integral[(row + 1) * stride + col + 1] = integral[row * stride + col + 1] + run;
                }
            }
            for row in 0..h {
                let (r0, r1) = (row.saturating_sub(rad), (row + rad + 1).min(h));
                for col in 0..w {
                    let (c0, c1) = (col.saturating_sub(rad), (col + rad + 1).min(w));
                    let count = integral[r1 * stride + c1] + integral[r0 * stride + c0]
                        - integral[r0 * stride + c1]
                        - integral[r1 * stride + c0];
                    let area = ((r1 - r0) * (c1 - c0)) as f32;
                    values[(row * w + col) * c + class.index()] = count as f32 / area;
                }
            }
        }
    }

    if spec.flip_rate > 0.0 && c > 1 {
        let present: Vec<ClassId> = gt.present_classes().into_iter().collect();
        for i in 0..w * h {
            if !rng.random_bool(spec.flip_rate) || void[i] {
                continue;
            }
            let v = &mut values[i * c..(i + 1) * c];
            let truth = crate::domain::argmax(v);
            let confusable: Vec<usize> =
                present.iter().map(|p| p.index()).filter(|&p| p != truth).collect();
            let wrong = if confusable.is_empty() {
                let k = rng.random_range(0..c - 1);
                if k >= truth { k + 1 } else { k }
            } else {
                confusable[rng.random_range(0..confusable.len())]
            };
            let top = v[truth];
            v[wrong] = top;
            v[truth] = FLIP_RUNNER_UP * top;
        }
    }
    Evidence { classes: c, values, void }
}

/// Degrades ground truth into a weak model's score map.
pub fn degrade_to_scoremap(gt: &LabelMap, spec: &DegradationSpec) -> Result<ScoreMap, SynthError> {
    spec.validate()?;
    let ev = evidence(gt, spec);
    let c = ev.classes;
    let mut scores = vec![0f32; ev.values.len()];
    let inv_t = LOGIT_SCALE / spec.temperature;
    let mut exps = vec![0f64; c];
    for (i, (out, v)) in scores.chunks_exact_mut(c).zip(ev.values.chunks_exact(c)).enumerate() {
        if ev.void[i] {
            out.fill(1.0 / c as f32);
            continue;
        }
        let max = v.iter().copied().fold(f32::MIN, f32::max) as f64;
        let mut sum = 0.0;
        for (e, &x) in exps.iter_mut().zip(v) {
            *e = ((x as f64 - max) * inv_t).exp();
            sum += *e;
        }
        for (o, e) in out.iter_mut().zip(&exps) {
            *o = (e / sum) as f32;
        }
    }
    Ok(ScoreMap::new(gt.width(), gt.height(), c, scores)?)
}

/// Argmax of [`degrade_to_scoremap`] without materializing probabilities.
pub fn degrade_to_labels(gt: &LabelMap, spec: &DegradationSpec) -> Result<LabelMap, SynthError> {
    spec.validate()?;
    let ev = evidence(gt, spec);
    let c = ev.classes;
    let grid = ev
        .values
        .chunks_exact(c)
        .zip(&ev.void)
        .map(|(v, &void)| ClassId(if void { 0 } else { crate::domain::argmax(v) as u16 }))
        .collect();
    Ok(LabelMap::new(gt.width(), gt.height(), c, grid)?)
}

/// `k` degradations of increasing severity: flip rate and jitter grow linearly
/// from `best` to `worst`.
pub fn quality_ladder(k: usize, best: (f64, f64), worst: (f64, f64), seed: u64) -> Vec<DegradationSpec> {
    (0..k)
        .map(|i| {
            let t = if k > 1 { i as f64 / (k - 1) as f64 } else { 0.0 };
            DegradationSpec {
                flip_rate: best.0 + t * (worst.0 - best.0),
                boundary_jitter_px: best.1 + t * (worst.1 - best.1),
                smoothing_radius_px: 0,
                temperature: 1.0,
                seed: derive_seed(seed, i as u64),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct FamilyOptions {
    /// Required dense-mIoU margin between consecutive methods.
    pub min_gap: f64,
    pub max_reseeds: usize,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        FamilyOptions { min_gap: 0.0, max_reseeds: 8 }
    }
}

fn predict_frames(gts: &[LabelMap], spec: &DegradationSpec) -> Result<Vec<LabelMap>, SynthError> {
    gts.par_iter()
        .enumerate()
        .map(|(i, gt)| degrade_to_labels(gt, &spec.with_seed(derive_seed(spec.seed, i as u64))))
        .collect()
}

/// One prediction set per ladder rung, with dense mIoU strictly decreasing
/// along the ladder by at least `opts.min_gap`.
pub fn make_method_family(
    gts: &[LabelMap],
    ladder: &[DegradationSpec],
    opts: FamilyOptions,
) -> Result<Vec<MethodPrediction>, SynthError> {
    let mut methods: Vec<MethodPrediction> = Vec::with_capacity(ladder.len());
    let mut prev_miou = f64::INFINITY;
    for (i, spec) in ladder.iter().enumerate() {
        let mut attempt = 0;
        loop {
            let seeded = spec.with_seed(if attempt == 0 {
                spec.seed
            } else {
                derive_seed(spec.seed, 1_000_000 + attempt as u64)
            });
            let frames = predict_frames(gts, &seeded)?;
            let miou = dense_miou(&frames, gts)
                .map_err(|e| SynthError::Degenerate(e.to_string()))?
                .miou
                .unwrap_or(0.0);
            if miou < prev_miou - opts.min_gap || i == 0 {
                prev_miou = miou;
                methods.push(MethodPrediction { method_id: format!("method_{i:02}"), frames });
                break;
            }
            attempt += 1;
            if attempt > opts.max_reseeds {
                return Err(SynthError::OrderingFailed { method: i, attempts: opts.max_reseeds });
            }
        }
    }
    Ok(methods)
}
