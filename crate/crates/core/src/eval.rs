//! Segmentation evaluation: dense IoU, sparse point IoU, Kendall rank
//! correlation between method rankings, nearest-point reconstruction and
//! point-label dataset statistics.
//!
//! IoU is a set statistic, so evaluating it on a uniformly sampled subset of
//! labeled pixels estimates the dense value. Images are treated as if
//! concatenated: counts are summed over frames before taking ratios. VOID
//! ground-truth pixels never contribute to either term.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::index;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{ClassId, LabelMap, Point, PointVerdict};
use crate::formats::PointLabelRow;
use crate::seed::{derive_seed, rng};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("class {0} has an empty union")]
    EmptyUnion(ClassId),
    #[error("rankings differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 items to rank, got {0}")]
    TooShort(usize),
    #[error("every item is tied in one ranking; tau is undefined")]
    AllTied,
    #[error("no labeled points")]
    NoPoints,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Predictions of one method, one label map per evaluation frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodPrediction {
    pub method_id: String,
    pub frames: Vec<LabelMap>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IouCounts {
    pub intersection: u64,
    pub union: u64,
}

impl IouCounts {
    /// `None` when the union is empty.
    pub fn ratio(&self) -> Option<f64> {
        (self.union > 0).then(|| self.intersection as f64 / self.union as f64)
    }

    fn add(&mut self, pred_hit: bool, gt_hit: bool) {
        self.intersection += (pred_hit && gt_hit) as u64;
        self.union += (pred_hit || gt_hit) as u64;
    }
}

/// Per-class counts and their mean over classes with a non-empty union.
#[derive(Debug, Clone, PartialEq)]
pub struct MiouSummary {
    pub per_class: Vec<IouCounts>,
    pub miou: Option<f64>,
    /// Classes left out of the mean because their union is empty.
    pub excluded: usize,
}

impl MiouSummary {
    fn from_counts(per_class: Vec<IouCounts>) -> Self {
        let ratios: Vec<f64> = per_class.iter().filter_map(IouCounts::ratio).collect();
        let excluded = per_class.len() - ratios.len();
        let miou = (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64);
        MiouSummary { per_class, miou, excluded }
    }
}

fn check_frames(preds: &[LabelMap], gts: &[LabelMap]) -> Result<(), EvalError> {
    if preds.len() != gts.len() {
        return Err(EvalError::DimensionMismatch(format!("{} predictions for {} frames", preds.len(), gts.len())));
    }
    for (i, (p, g)) in preds.iter().zip(gts).enumerate() {
        if !p.same_shape(g) {
            return Err(EvalError::DimensionMismatch(format!(
                "frame {i}: prediction {}x{} vs ground truth {}x{}",
                p.width(),
                p.height(),
                g.width(),
                g.height()
            )));
        }
    }
    Ok(())
}

fn class_count(gts: &[LabelMap]) -> usize {
    gts.iter().map(LabelMap::classes).max().unwrap_or(0)
}

/// Dense per-class intersection/union counts over all frames.
pub fn dense_counts(preds: &[LabelMap], gts: &[LabelMap]) -> Result<Vec<IouCounts>, EvalError> {
    check_frames(preds, gts)?;
    let classes = class_count(gts);
    let mut counts = vec![IouCounts::default(); classes];
    for (p, g) in preds.iter().zip(gts) {
        for (&pc, &gc) in p.as_slice().iter().zip(g.as_slice()) {
            if gc.is_void() {
                continue;
            }
            if pc == gc {
                counts[gc.index()].intersection += 1;
                counts[gc.index()].union += 1;
            } else {
                counts[gc.index()].union += 1;
                if !pc.is_void() {
                    counts[pc.index()].union += 1;
                }
            }
        }
    }
    Ok(counts)
}

pub fn dense_miou(preds: &[LabelMap], gts: &[LabelMap]) -> Result<MiouSummary, EvalError> {
    Ok(MiouSummary::from_counts(dense_counts(preds, gts)?))
}

/// Dense IoU of one class. A zero union is reported as [`EvalError::EmptyUnion`].
pub fn dense_iou(pred: &MethodPrediction, gts: &[LabelMap], class: ClassId) -> Result<IouCounts, EvalError> {
    check_frames(&pred.frames, gts)?;
    let mut counts = IouCounts::default();
    for (p, g) in pred.frames.iter().zip(gts) {
        for (&pc, &gc) in p.as_slice().iter().zip(g.as_slice()) {
            if !gc.is_void() {
                counts.add(pc == class, gc == class);
            }
        }
    }
    if counts.union == 0 {
        return Err(EvalError::EmptyUnion(class));
    }
    Ok(counts)
}

/// A sparse ground-truth label: frame index, location and (single) class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub frame: usize,
    pub point: Point,
    pub class: ClassId,
}

fn predicted_at(preds: &[LabelMap], lp: &LabeledPoint) -> Result<ClassId, EvalError> {
    preds
        .get(lp.frame)
        .map(|f| f.at(lp.point))
        .ok_or_else(|| EvalError::DimensionMismatch(format!("no prediction for frame {}", lp.frame)))
}

pub fn point_counts(preds: &[LabelMap], points: &[LabeledPoint], classes: usize) -> Result<Vec<IouCounts>, EvalError> {
    let mut counts = vec![IouCounts::default(); classes];
    for lp in points {
        if lp.class.is_void() {
            continue;
        }
        let pc = predicted_at(preds, lp)?;
        if pc == lp.class {
            counts[pc.index()].intersection += 1;
            counts[pc.index()].union += 1;
        } else {
            counts[lp.class.index()].union += 1;
            if !pc.is_void() && pc.index() < classes {
                counts[pc.index()].union += 1;
            }
        }
    }
    Ok(counts)
}

pub fn point_miou(preds: &[LabelMap], points: &[LabeledPoint], classes: usize) -> Result<MiouSummary, EvalError> {
    Ok(MiouSummary::from_counts(point_counts(preds, points, classes)?))
}

/// Point IoU of one class over a labeled point set.
pub fn point_iou(pred: &MethodPrediction, points: &[LabeledPoint], class: ClassId) -> Result<IouCounts, EvalError> {
    let mut counts = IouCounts::default();
    for lp in points.iter().filter(|lp| !lp.class.is_void()) {
        counts.add(predicted_at(&pred.frames, lp)? == class, lp.class == class);
    }
    if counts.union == 0 {
        return Err(EvalError::EmptyUnion(class));
    }
    Ok(counts)
}

/// Kendall's tau-b: `(C - D) / sqrt((C + D + T_a)(C + D + T_b))`, where
/// `T_a`/`T_b` count pairs tied only in `a`/`b`.
pub fn kendall_tau(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(EvalError::TooShort(a.len()));
    }
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let sa = a[i].total_cmp(&a[j]) as i8;
            let sb = b[i].total_cmp(&b[j]) as i8;
            match (sa, sb) {
                (0, 0) => {}
                (0, _) => ties_a += 1,
                (_, 0) => ties_b += 1,
                _ if sa == sb => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let denom = (((concordant + discordant + ties_a) * (concordant + discordant + ties_b)) as f64).sqrt();
    if denom == 0.0 {
        return Err(EvalError::AllTied);
    }
    Ok((concordant - discordant) as f64 / denom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DrawResult {
    pub points: usize,
    /// Point mIoU summary per method, in method order.
    pub methods: Vec<MiouSummary>,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method_ids: Vec<String>,
    pub frames: usize,
    pub ppi: usize,
    pub dense: Vec<MiouSummary>,
    pub draws: Vec<DrawResult>,
    pub mean_tau: f64,
}

impl EvalReport {
    pub fn dense_mious(&self) -> Vec<f64> {
        self.dense.iter().map(|s| s.miou.unwrap_or(0.0)).collect()
    }
}

/// Uniformly samples up to `ppi` non-VOID pixels per frame and labels them
/// from the ground truth (simulated "yes" answers).
pub fn sample_labeled_points(gts: &[LabelMap], ppi: usize, seed: u64) -> Vec<LabeledPoint> {
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(gts.len() * ppi);
    for (frame, gt) in gts.iter().enumerate() {
        let eligible: Vec<usize> = (0..gt.len()).filter(|&i| !gt.as_slice()[i].is_void()).collect();
        let k = ppi.min(eligible.len());
        let mut picked: Vec<usize> = index::sample(&mut rng, eligible.len(), k).into_iter().map(|j| eligible[j]).collect();
        picked.sort_unstable();
        let w = gt.width();
        out.extend(picked.into_iter().map(|i| LabeledPoint {
            frame,
            point: Point::pixel_center(i / w, i % w, w, gt.height()),
            class: gt.as_slice()[i],
        }));
    }
    out
}

/// Ranks methods by dense mIoU and by point mIoU over `draws` independent
/// uniform draws of `ppi` points per frame; reports tau per draw and its mean.
pub fn rank_study(
    methods: &[MethodPrediction],
    gts: &[LabelMap],
    ppi: usize,
    draws: usize,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if ppi == 0 || draws == 0 {
        return Err(EvalError::InvalidParameter(format!("ppi {ppi}, draws {draws}")));
    }
    let classes = class_count(gts);
    let dense: Vec<MiouSummary> = methods
        .par_iter()
        .map(|m| dense_miou(&m.frames, gts))
        .collect::<Result<_, _>>()?;
    let dense_scores: Vec<f64> = dense.iter().map(|s| s.miou.unwrap_or(0.0)).collect();
    let mut results = Vec::with_capacity(draws);
    for d in 0..draws {
        let points = sample_labeled_points(gts, ppi, derive_seed(seed, d as u64));
        let per_method: Vec<MiouSummary> = methods
            .par_iter()
            .map(|m| point_miou(&m.frames, &points, classes))
            .collect::<Result<_, _>>()?;
        let scores: Vec<f64> = per_method.iter().map(|s| s.miou.unwrap_or(0.0)).collect();
        let tau = kendall_tau(&dense_scores, &scores)?;
        results.push(DrawResult { points: points.len(), methods: per_method, tau });
    }
    let mean_tau = results.iter().map(|d| d.tau).sum::<f64>() / draws as f64;
    Ok(EvalReport {
        method_ids: methods.iter().map(|m| m.method_id.clone()).collect(),
        frames: gts.len(),
        ppi,
        dense,
        draws: results,
        mean_tau,
    })
}

/// Writes `dense_iou.csv`, `point_iou.csv`, `tau.csv` and `summary.txt`.
pub fn write_eval_report(report: &EvalReport, dir: impl AsRef<Path>) -> std::io::Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut dense = String::from("method_id,class_id,intersection,union,iou\n");
    for (id, s) in report.method_ids.iter().zip(&report.dense) {
        for (c, counts) in s.per_class.iter().enumerate() {
            dense.push_str(&format!("{id},{c},{},{},{}\n", counts.intersection, counts.union, fmt_opt(counts.ratio())));
        }
    }
    fs::write(dir.join("dense_iou.csv"), dense)?;

    let mut point = String::from("draw,method_id,class_id,intersection,union,iou\n");
    let mut tau = String::from("draw,points,tau\n");
    for (d, draw) in report.draws.iter().enumerate() {
        for (id, s) in report.method_ids.iter().zip(&draw.methods) {
            for (c, counts) in s.per_class.iter().enumerate() {
                point.push_str(&format!(
                    "{d},{id},{c},{},{},{}\n",
                    counts.intersection,
                    counts.union,
                    fmt_opt(counts.ratio())
                ));
            }
        }
        tau.push_str(&format!("{d},{},{:.6}\n", draw.points, draw.tau));
    }
    fs::write(dir.join("point_iou.csv"), point)?;
    fs::write(dir.join("tau.csv"), tau)?;

    let mut summary = fs::File::create(dir.join("summary.txt"))?;
    writeln!(
        summary,
        "methods={} frames={} ppi={} draws={} mean_tau={:.6}",
        report.method_ids.len(),
        report.frames,
        report.ppi,
        report.draws.len(),
        report.mean_tau
    )
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

/// Assigns each pixel the class of its nearest labeled point (squared pixel
/// distance between pixel centers). Ties go to the labeled point with the
/// smaller (row, col), then to the earlier one in the list.
pub fn reconstruct_dense(
    points: &[(Point, ClassId)],
    width: usize,
    height: usize,
    classes: usize,
) -> Result<LabelMap, EvalError> {
    if points.is_empty() {
        return Err(EvalError::NoPoints);
    }
    let mut seeds: Vec<(i64, i64, usize, ClassId)> = points
        .iter()
        .enumerate()
        .map(|(i, (p, c))| {
            let (r, col) = p.to_pixel(width, height);
            (r as i64, col as i64, i, *c)
        })
        .collect();
    seeds.sort_by_key(|s| (s.0, s.1, s.2));
    let mut grid = Vec::with_capacity(width * height);
    for row in 0..height as i64 {
        for col in 0..width as i64 {
            let mut best = (i64::MAX, ClassId::VOID);
            for &(r, c, _, class) in &seeds {
                let d = (r - row).pow(2) + (c - col).pow(2);
                if d < best.0 {
                    best = (d, class);
                }
            }
            grid.push(best.1);
        }
    }
    LabelMap::new(width, height, classes, grid).map_err(|e| EvalError::DimensionMismatch(e.to_string()))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DatasetStats {
    pub yes: usize,
    pub no: usize,
    pub unresolved: usize,
    pub points: usize,
    pub labels_per_point: f64,
    pub answers_per_label: f64,
    /// (class, yes-count) sorted by count descending, then class id.
    pub zipf: Vec<(ClassId, usize)>,
    pub classes_with_yes: usize,
    pub classes_with_3_yes: usize,
}

impl DatasetStats {
    pub fn labels(&self) -> usize {
        self.yes + self.no + self.unresolved
    }
}

pub fn dataset_stats(rows: &[PointLabelRow]) -> DatasetStats {
    if rows.is_empty() {
        return DatasetStats::default();
    }
    let mut stats = DatasetStats::default();
    let mut per_point: HashMap<(&str, u64, u64), usize> = HashMap::new();
    let mut yes_per_class: BTreeMap<ClassId, usize> = BTreeMap::new();
    let mut answers = 0u64;
    for r in rows {
        match r.verdict {
            PointVerdict::Yes => stats.yes += 1,
            PointVerdict::No => stats.no += 1,
            PointVerdict::Unresolved => stats.unresolved += 1,
        }
        *per_point.entry((r.image_id.as_str(), r.point.x().to_bits(), r.point.y().to_bits())).or_default() += 1;
        *yes_per_class.entry(r.class_id).or_default() += (r.verdict == PointVerdict::Yes) as usize;
        answers += r.answers() as u64;
    }
    stats.points = per_point.len();
    stats.labels_per_point = rows.len() as f64 / stats.points as f64;
    stats.answers_per_label = answers as f64 / rows.len() as f64;
    let mut zipf: Vec<(ClassId, usize)> = yes_per_class.into_iter().collect();
    zipf.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    stats.classes_with_yes = zipf.iter().filter(|z| z.1 >= 1).count();
    stats.classes_with_3_yes = zipf.iter().filter(|z| z.1 >= 3).count();
    stats.zipf = zipf;
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate_scene, Generator, SceneSpec};
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn lm(w: usize, h: usize, classes: usize, v: &[u16]) -> LabelMap {
        LabelMap::new(w, h, classes, v.iter().map(|&c| ClassId(c)).collect()).unwrap()
    }

    fn method(frames: Vec<LabelMap>) -> MethodPrediction {
        MethodPrediction { method_id: "m".into(), frames }
    }

    fn all_pixels(gts: &[LabelMap]) -> Vec<LabeledPoint> {
        gts.iter()
            .enumerate()
            .flat_map(|(frame, g)| {
                (0..g.len()).map(move |i| LabeledPoint {
                    frame,
                    point: Point::pixel_center(i / g.width(), i % g.width(), g.width(), g.height()),
                    class: g.as_slice()[i],
                })
            })
            .collect()
    }

    /// Independent O(n^2) tau-a oracle for tie-free inputs.
    fn tau_a(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len();
        let mut s = 0i64;
        for i in 0..n {
            for j in i + 1..n {
                s += ((a[i] - a[j]).signum() * (b[i] - b[j]).signum()) as i64;
            }
        }
        s as f64 / (n * (n - 1) / 2) as f64
    }

    #[test]
    fn identity_prediction_scores_one() {
        let g = lm(3, 2, 3, &[0, 1, 2, 2, 1, 0]);
        for c in 0..3 {
            assert_eq!(dense_iou(&method(vec![g.clone()]), std::slice::from_ref(&g), ClassId(c)).unwrap().ratio(), Some(1.0));
        }
    }

    #[test]
    fn disjoint_masks_score_zero() {
        let g = lm(4, 1, 2, &[1, 1, 0, 0]);
        let p = lm(4, 1, 2, &[0, 0, 1, 1]);
        assert_eq!(dense_iou(&method(vec![p]), &[g], ClassId(1)).unwrap().ratio(), Some(0.0));
    }

    #[test]
    fn hand_counted_toy() {
        // pred c on 6 cells, gt c on 4 cells, overlap 3 -> 3/7
        #[rustfmt::skip]
        let p = lm(4, 4, 2, &[1,1,1,0, 1,1,1,0, 0,0,0,0, 0,0,0,0]);
        #[rustfmt::skip]
        let g = lm(4, 4, 2, &[1,1,1,0, 0,0,0,1, 0,0,0,0, 0,0,0,0]);
        let iou = dense_iou(&method(vec![p]), &[g], ClassId(1)).unwrap();
        assert_eq!(iou, IouCounts { intersection: 3, union: 7 });
        assert!((iou.ratio().unwrap() - 0.428571).abs() < 1e-6);
    }

    #[test]
    fn void_excluded_and_empty_union_reported() {
        let g = lm(3, 1, 3, &[0, u16::MAX, 0]);
        let p = lm(3, 1, 3, &[0, 1, 0]);
        let m = method(vec![p.clone()]);
        assert_eq!(dense_iou(&m, std::slice::from_ref(&g), ClassId(1)), Err(EvalError::EmptyUnion(ClassId(1))));
        let s = dense_miou(&[p], &[g]).unwrap();
        assert_eq!(s.miou, Some(1.0));
        assert_eq!(s.excluded, 2);
    }

    #[test]
    fn dimension_mismatch() {
        let g = lm(2, 1, 2, &[0, 1]);
        let p = lm(1, 2, 2, &[0, 1]);
        assert!(matches!(dense_iou(&method(vec![p]), &[g], ClassId(0)), Err(EvalError::DimensionMismatch(_))));
    }

    #[test]
    fn exhaustion_identity_on_scenes() {
        for seed in 0..20 {
            let gt = generate_scene(&SceneSpec { width: 24, height: 17, classes: 4, region_count: 6, seed, generator: Generator::Voronoi }).unwrap().labels;
            let pred = generate_scene(&SceneSpec { width: 24, height: 17, classes: 4, region_count: 6, seed: seed + 50, generator: Generator::Blobs }).unwrap().labels;
            let pts = all_pixels(std::slice::from_ref(&gt));
            assert_eq!(
                point_counts(std::slice::from_ref(&pred), &pts, 4).unwrap(),
                dense_counts(std::slice::from_ref(&pred), std::slice::from_ref(&gt)).unwrap()
            );
            for c in 0..4 {
                let d = dense_iou(&method(vec![pred.clone()]), std::slice::from_ref(&gt), ClassId(c));
                let p = point_iou(&method(vec![pred.clone()]), &pts, ClassId(c));
                assert_eq!(d, p);
            }
        }
    }

    proptest! {
        #[test]
        fn point_iou_is_permutation_invariant(seed in any::<u64>()) {
            let mut r = rng(seed);
            let gt = lm(8, 8, 3, &(0..64).map(|_| r.random_range(0..3)).collect::<Vec<_>>());
            let pred = lm(8, 8, 3, &(0..64).map(|_| r.random_range(0..3)).collect::<Vec<_>>());
            let mut pts: Vec<LabeledPoint> = all_pixels(std::slice::from_ref(&gt)).into_iter().take(30).collect();
            let before = point_counts(std::slice::from_ref(&pred), &pts, 3).unwrap();
            pts.shuffle(&mut r);
            prop_assert_eq!(before, point_counts(std::slice::from_ref(&pred), &pts, 3).unwrap());
        }

        #[test]
        fn tau_b_equals_tau_a_without_ties(seed in any::<u64>(), n in 2usize..30) {
            let mut r = rng(seed);
            let a: Vec<f64> = (0..n).map(|i| i as f64 + r.random::<f64>() * 0.5).collect();
            let mut b = a.clone();
            b.shuffle(&mut r);
            let tb = kendall_tau(&a, &b).unwrap();
            prop_assert!((tb - tau_a(&a, &b)).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&tb));
        }
    }

    #[test]
    fn tau_examples() {
        let a: Vec<f64> = (0..15).map(|i| i as f64 * 0.1).collect();
        let rev: Vec<f64> = a.iter().rev().copied().collect();
        assert_eq!(kendall_tau(&a, &a).unwrap(), 1.0);
        assert_eq!(kendall_tau(&a, &rev).unwrap(), -1.0);
        let swapped = kendall_tau(&[1.0, 2.0, 3.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((swapped - 0.666667).abs() < 1e-6);
        assert!((swapped - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn tau_errors_and_ties() {
        assert_eq!(kendall_tau(&[1.0], &[1.0]), Err(EvalError::TooShort(1)));
        assert_eq!(kendall_tau(&[1.0, 2.0], &[1.0]), Err(EvalError::LengthMismatch(2, 1)));
        assert_eq!(kendall_tau(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]), Err(EvalError::AllTied));
        // One tie in b: C=2, D=0, T_b=1 -> 2 / sqrt(3 * 2)
        let t = kendall_tau(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0]).unwrap();
        assert!((t - 2.0 / 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rank_study_exhaustive_points_give_tau_one() {
        let gts: Vec<LabelMap> = (0..4)
            .map(|s| generate_scene(&SceneSpec { width: 12, height: 10, classes: 3, region_count: 5, seed: s, generator: Generator::Voronoi }).unwrap().labels)
            .collect();
        let methods: Vec<MethodPrediction> = [0.0, 0.15, 0.3, 0.45]
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let spec = crate::synth::DegradationSpec { flip_rate: f, ..crate::synth::DegradationSpec::identity(i as u64) };
                MethodPrediction {
                    method_id: format!("m{i}"),
                    frames: gts.iter().map(|g| crate::synth::degrade_to_labels(g, &spec).unwrap()).collect(),
                }
            })
            .collect();
        let report = rank_study(&methods, &gts, 120, 3, 1).unwrap();
        assert_eq!(report.draws.len(), 3);
        for d in &report.draws {
            assert_eq!(d.tau, 1.0);
            assert_eq!(d.points, 4 * 120);
            for (pm, dm) in d.methods.iter().zip(&report.dense) {
                assert_eq!(pm, dm);
            }
        }
        assert_eq!(report.mean_tau, 1.0);
        let dir = tempfile::tempdir().unwrap();
        write_eval_report(&report, dir.path()).unwrap();
        let tau = fs::read_to_string(dir.path().join("tau.csv")).unwrap();
        assert_eq!(tau.lines().count(), 4);
        assert!(fs::read_to_string(dir.path().join("summary.txt")).unwrap().contains("mean_tau=1.000000"));
        assert!(rank_study(&methods, &gts, 0, 3, 1).is_err());
    }

    #[test]
    fn reconstruct_single_point_is_constant() {
        let m = reconstruct_dense(&[(Point::new(0.3, 0.6).unwrap(), ClassId(2))], 7, 5, 3).unwrap();
        assert!(m.as_slice().iter().all(|&c| c == ClassId(2)));
        assert_eq!(reconstruct_dense(&[], 3, 3, 2), Err(EvalError::NoPoints));
    }

    #[test]
    fn reconstruct_strip_splits_at_midpoint() {
        let pts = [
            (Point::pixel_center(0, 0, 10, 1), ClassId(0)),
            (Point::pixel_center(0, 9, 10, 1), ClassId(1)),
        ];
        let m = reconstruct_dense(&pts, 10, 1, 2).unwrap();
        assert_eq!(m.as_slice(), lm(10, 1, 2, &[0, 0, 0, 0, 0, 1, 1, 1, 1, 1]).as_slice());
    }

    #[test]
    fn reconstruct_tie_prefers_smaller_row_col() {
        // Pixel 1 is equidistant from pixels 0 and 2; the labeled point at 0 wins
        // even when listed second.
        let pts = [
            (Point::pixel_center(0, 2, 3, 1), ClassId(1)),
            (Point::pixel_center(0, 0, 3, 1), ClassId(0)),
        ];
        let m = reconstruct_dense(&pts, 3, 1, 2).unwrap();
        assert_eq!(m.get(0, 1), ClassId(0));
    }

    fn row(img: &str, class: u16, x: f64, v: PointVerdict, votes: (u32, u32, u32)) -> PointLabelRow {
        PointLabelRow {
            image_id: img.into(),
            class_id: ClassId(class),
            point: Point::new(x, 0.5).unwrap(),
            verdict: v,
            yes_votes: votes.0,
            no_votes: votes.1,
            unsure_votes: votes.2,
            source: "t".into(),
        }
    }

    #[test]
    fn stats_of_empty_input() {
        assert_eq!(dataset_stats(&[]), DatasetStats::default());
    }

    #[test]
    fn stats_echo_scaled_totals() {
        // 42 Yes, 161 No, 23 Unresolved: the release ratios scaled down.
        let mut rows = Vec::new();
        let mut x = 0.0;
        let mut push = |n: usize, v: PointVerdict, votes| {
            for i in 0..n {
                x += 1e-3;
                rows.push(row("img", (i % 7) as u16, x, v, votes));
            }
        };
        push(42, PointVerdict::Yes, (3, 0, 0));
        push(161, PointVerdict::No, (0, 3, 0));
        push(23, PointVerdict::Unresolved, (2, 1, 0));
        let s = dataset_stats(&rows);
        assert_eq!((s.yes, s.no, s.unresolved), (42, 161, 23));
        assert_eq!(s.answers_per_label, 3.0);
        assert_eq!(s.labels_per_point, 1.0);
        assert!(s.zipf.windows(2).all(|w| w[0].1 >= w[1].1));
        assert_eq!(s.zipf.iter().map(|z| z.1).sum::<usize>(), 42);
        assert_eq!(s.classes_with_yes, 7);
    }

    #[test]
    fn stats_labels_per_point() {
        let rows = vec![
            row("a", 0, 0.1, PointVerdict::No, (0, 2, 0)),
            row("a", 1, 0.1, PointVerdict::Yes, (2, 0, 0)),
            row("a", 1, 0.2, PointVerdict::Yes, (2, 0, 0)),
            row("a", 1, 0.3, PointVerdict::Yes, (1, 0, 0)),
        ];
        let s = dataset_stats(&rows);
        assert_eq!(s.points, 3);
        assert!((s.labels_per_point - 4.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.answers_per_label, 7.0 / 4.0);
        assert_eq!(s.zipf, vec![(ClassId(1), 3), (ClassId(0), 0)]);
        assert_eq!((s.classes_with_yes, s.classes_with_3_yes), (1, 1));
    }

    proptest! {
        #[test]
        fn zipf_is_non_increasing(classes in proptest::collection::vec((0u16..20, any::<bool>()), 0..200)) {
            let rows: Vec<PointLabelRow> = classes.iter().enumerate().map(|(i, &(c, y))| {
                let v = if y { PointVerdict::Yes } else { PointVerdict::No };
                row("img", c, (i as f64 + 0.5) / 1000.0, v, if y { (1, 0, 0) } else { (0, 1, 0) })
            }).collect();
            let s = dataset_stats(&rows);
            prop_assert!(s.zipf.windows(2).all(|w| w[0].1 >= w[1].1));
        }
    }
}
