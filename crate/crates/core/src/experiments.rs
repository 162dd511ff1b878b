//! Desk-scale Monte-Carlo experiments built from the other modules:
//! question efficiency of the class walk, strategy complementarity, rank
//! preservation of point IoU and the nearest-point reconstruction curve.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::campaign::{run_simulated, AnnotatorModel, Campaign, CampaignConfig, CampaignError, PointStatus};
use crate::domain::{ImageRecord, LabelMap, ScoreMap};
use crate::formats::encode_label_map;
use crate::layout::ImageEntry;
use crate::eval::{dense_miou, rank_study, reconstruct_dense, sample_labeled_points, EvalError, EvalReport, MethodPrediction};
use crate::sampling::{complementarity_fraction, select_points, SamplingError, StrategyKind, StrategySpec};
use crate::seed::derive_seed;
use crate::stats::{mean_ci95, paired_t_greater, ratio_ci95, Estimate};
use crate::synth::{
    degrade_to_scoremap, generate_scene, make_method_family, quality_ladder, DegradationSpec, FamilyOptions, Generator,
    Scene, SceneSpec, SynthError,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Campaign(#[from] CampaignError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid experiment setup: {0}")]
    Invalid(String),
}

/// Shape of the synthetic scenes an experiment draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSetup {
    pub scenes: usize,
    pub width: usize,
    pub height: usize,
    pub classes: usize,
    pub region_count: usize,
    pub generator: Generator,
    pub seed: u64,
}

impl SceneSetup {
    fn scene(&self, i: usize) -> Result<Scene, SynthError> {
        generate_scene(&SceneSpec {
            width: self.width,
            height: self.height,
            classes: self.classes,
            region_count: self.region_count,
            seed: derive_seed(self.seed, i as u64),
            generator: self.generator,
        })
    }

    fn stream(&self, i: usize, salt: u64) -> u64 {
        derive_seed(derive_seed(self.seed, i as u64), salt)
    }
}

/// Campaign images for `setup`: ids `scene0000`, `scene0001`, ..., the
/// ground truth rendered as a PGM image, one score map per member spec
/// (reseeded per scene) and the present classes as image-level labels.
pub fn synthetic_campaign(setup: &SceneSetup, members: &[DegradationSpec]) -> Result<Vec<ImageEntry>, ExperimentError> {
    if members.is_empty() {
        return Err(ExperimentError::Invalid("at least one score-map member is required".into()));
    }
    (0..setup.scenes)
        .into_par_iter()
        .map(|i| {
            let scene = setup.scene(i)?;
            let score_maps = members
                .iter()
                .enumerate()
                .map(|(k, m)| degrade_to_scoremap(&scene.labels, &m.with_seed(setup.stream(i, 1000 + k as u64))))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ImageEntry {
                image_id: format!("scene{i:04}"),
                image: Some((encode_label_map(&scene.labels), "pgm".into())),
                ground_truth: Some(scene.labels),
                score_maps,
                image_level_labels: Some(scene.image_level_labels),
            })
        })
        .collect()
}

/// Fraction of non-VOID pixels whose top-1 class is the ground truth.
pub fn pixel_accuracy(m: &ScoreMap, gt: &LabelMap) -> f64 {
    let (mut hit, mut n) = (0usize, 0usize);
    for (i, &g) in gt.as_slice().iter().enumerate() {
        if !g.is_void() {
            n += 1;
            hit += (m.argmax(i) == g) as usize;
        }
    }
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EfficiencyReport {
    pub scenes: usize,
    pub points: usize,
    pub yes_points: usize,
    pub questions: u64,
    pub questions_per_yes: Estimate,
    /// Share of points that reach YES within `max_rounds`.
    pub yes_within_rounds: Estimate,
    pub max_rounds: u32,
    /// `rank_histogram[r]` counts points whose true class is ranked `r + 1`
    /// among the image-level classes.
    pub rank_histogram: Vec<usize>,
    pub pixel_accuracy: f64,
}

/// Class-balanced points on every scene, oracle annotators with k = 1, and
/// the class walk capped at `max_rounds`.
pub fn question_efficiency(
    setup: &SceneSetup,
    model: DegradationSpec,
    ppi: usize,
    max_rounds: u32,
) -> Result<EfficiencyReport, ExperimentError> {
    struct PerScene {
        points: usize,
        yes: usize,
        questions: u64,
        ranks: Vec<usize>,
        accuracy: f64,
    }
    let per_scene: Vec<PerScene> = (0..setup.scenes)
        .into_par_iter()
        .map(|i| -> Result<PerScene, ExperimentError> {
            let scene = setup.scene(i)?;
            let m = degrade_to_scoremap(&scene.labels, &model.with_seed(setup.stream(i, 1)))?;
            let image_id = format!("scene{i}");
            let cfg = CampaignConfig {
                ppi,
                replication: 1,
                max_rounds,
                strategy: StrategySpec::new(StrategyKind::UniformClassBalanced, setup.stream(i, 2)),
                ..CampaignConfig::default()
            };
            let mut campaign = Campaign::new(cfg)?;
            let image = ImageRecord {
                image_id: image_id.clone(),
                label_map_path: None,
                score_map_paths: Vec::new(),
                image_level_labels: scene.image_level_labels.clone(),
            };
            campaign.add_image(&image, std::slice::from_ref(&m))?;
            let gts = HashMap::from([(image_id, scene.labels.clone())]);
            run_simulated(&mut campaign, &gts, &AnnotatorModel::oracle(), setup.stream(i, 3))?;
            let ranks = campaign
                .points()
                .iter()
                .filter_map(|p| p.ranking.iter().position(|&c| c == scene.labels.at(p.point)))
                .collect();
            Ok(PerScene {
                points: campaign.points().len(),
                yes: campaign.points().iter().filter(|p| p.status == PointStatus::Yes).count(),
                questions: campaign.answers_received(),
                ranks,
                accuracy: pixel_accuracy(&m, &scene.labels),
            })
        })
        .collect::<Result<_, _>>()?;

    let mut rank_histogram = Vec::new();
    for r in per_scene.iter().flat_map(|s| &s.ranks) {
        if rank_histogram.len() <= *r {
            rank_histogram.resize(r + 1, 0);
        }
        rank_histogram[*r] += 1;
    }
    let q: Vec<f64> = per_scene.iter().map(|s| s.questions as f64).collect();
    let y: Vec<f64> = per_scene.iter().map(|s| s.yes as f64).collect();
    let p: Vec<f64> = per_scene.iter().map(|s| s.points as f64).collect();
    Ok(EfficiencyReport {
        scenes: setup.scenes,
        points: per_scene.iter().map(|s| s.points).sum(),
        yes_points: per_scene.iter().map(|s| s.yes).sum(),
        questions: per_scene.iter().map(|s| s.questions).sum(),
        questions_per_yes: ratio_ci95(&q, &y),
        yes_within_rounds: ratio_ci95(&y, &p),
        max_rounds,
        rank_histogram,
        pixel_accuracy: per_scene.iter().map(|s| s.accuracy).sum::<f64>() / setup.scenes.max(1) as f64,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyScore {
    pub strategy: String,
    /// Mean complementarity fraction over scenes.
    pub complementarity: Estimate,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplementarityReport {
    pub scenes: usize,
    pub ppi: usize,
    pub pixel_accuracy: f64,
    pub strategies: Vec<StrategyScore>,
}

impl ComplementarityReport {
    pub fn get(&self, kind: StrategyKind) -> Option<f64> {
        self.strategies.iter().find(|s| s.strategy == kind.token()).map(|s| s.complementarity.value)
    }
}

/// Complementarity of every strategy at `ppi` points per scene. Each scene
/// gets an ensemble of three independently degraded score maps; single-model
/// strategies see the first member, ensemble strategies see all three and
/// are scored against their average.
pub fn strategy_complementarity(
    setup: &SceneSetup,
    model: DegradationSpec,
    ppi: usize,
) -> Result<ComplementarityReport, ExperimentError> {
    let kinds = StrategyKind::ALL;
    let per_scene: Vec<(Vec<f64>, f64)> = (0..setup.scenes)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, f64), ExperimentError> {
            let scene = setup.scene(i)?;
            let maps: Vec<ScoreMap> = (0..3)
                .map(|j| degrade_to_scoremap(&scene.labels, &model.with_seed(setup.stream(i, 10 + j))))
                .collect::<Result<_, _>>()?;
            let mean = ScoreMap::mean(&maps).map_err(SamplingError::from)?;
            let fractions = kinds
                .iter()
                .map(|&kind| {
                    let spec = StrategySpec::new(kind, setup.stream(i, 100 + kind as u64));
                    let (pool, reference) = if kind.is_ensemble() { (&maps[..], &mean) } else { (&maps[..1], &maps[0]) };
                    let sel = select_points(&spec, pool, ppi)?;
                    complementarity_fraction(&sel.points, &scene.labels, reference).map_err(ExperimentError::from)
                })
                .collect::<Result<_, _>>()?;
            Ok((fractions, pixel_accuracy(&maps[0], &scene.labels)))
        })
        .collect::<Result<_, _>>()?;
    let strategies = kinds
        .iter()
        .enumerate()
        .map(|(k, kind)| StrategyScore {
            strategy: kind.token().to_string(),
            complementarity: mean_ci95(&per_scene.iter().map(|s| s.0[k]).collect::<Vec<_>>()),
        })
        .collect();
    Ok(ComplementarityReport {
        scenes: setup.scenes,
        ppi,
        pixel_accuracy: per_scene.iter().map(|s| s.1).sum::<f64>() / setup.scenes.max(1) as f64,
        strategies,
    })
}

/// Ground truth frames plus a family of methods with strictly decreasing
/// dense mIoU, standing in for a benchmark of competing segmenters.
#[derive(Debug, Clone)]
pub struct MethodFixture {
    pub gts: Vec<LabelMap>,
    pub methods: Vec<MethodPrediction>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixtureSpec {
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub classes: usize,
    pub methods: usize,
    /// (flip rate, jitter px) of the best and the worst method.
    pub best: (f64, f64),
    pub worst: (f64, f64),
    pub seed: u64,
}

impl FixtureSpec {
    /// 15 methods on 500 frames of 128x128 two-class blob scenes.
    pub fn benchmark(seed: u64) -> Self {
        FixtureSpec {
            frames: 500,
            width: 128,
            height: 128,
            classes: 2,
            methods: 15,
            best: (0.05, 2.0),
            worst: (0.12, 4.0),
            seed,
        }
    }
}

pub fn method_fixture(spec: &FixtureSpec) -> Result<MethodFixture, ExperimentError> {
    let setup = SceneSetup {
        scenes: spec.frames,
        width: spec.width,
        height: spec.height,
        classes: spec.classes,
        region_count: 6,
        generator: Generator::Blobs,
        seed: spec.seed,
    };
    let gts: Vec<LabelMap> = (0..spec.frames)
        .into_par_iter()
        .map(|i| setup.scene(i).map(|s| s.labels))
        .collect::<Result<_, _>>()?;
    let ladder = quality_ladder(spec.methods, spec.best, spec.worst, derive_seed(spec.seed, u64::MAX));
    let methods = make_method_family(&gts, &ladder, FamilyOptions { min_gap: 1e-4, max_reseeds: 8 })?;
    Ok(MethodFixture { gts, methods })
}

#[derive(Debug, Clone)]
pub struct TauPoint {
    pub ppi: usize,
    pub report: EvalReport,
}

/// Rank study at each `ppi`.
pub fn tau_vs_ppi(fixture: &MethodFixture, ppis: &[usize], draws: usize, seed: u64) -> Result<Vec<TauPoint>, ExperimentError> {
    ppis.iter()
        .map(|&ppi| {
            Ok(TauPoint { ppi, report: rank_study(&fixture.methods, &fixture.gts, ppi, draws, derive_seed(seed, ppi as u64))? })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ReconstructionReport {
    pub ppis: Vec<usize>,
    /// `miou[k][s]`: mIoU of scene `s` reconstructed from `ppis[k]` points.
    pub miou: Vec<Vec<f64>>,
    pub mean: Vec<Estimate>,
    /// One-sided paired p-value that level `k + 1` beats level `k`.
    pub p_values: Vec<f64>,
}

/// Nearest-point reconstruction of each scene from uniformly drawn true
/// labels at each point budget, scored by dense mIoU against the scene.
pub fn reconstruction_curve(setup: &SceneSetup, ppis: &[usize]) -> Result<ReconstructionReport, ExperimentError> {
    if ppis.is_empty() || ppis.contains(&0) {
        return Err(ExperimentError::Invalid(format!("point budgets {ppis:?}")));
    }
    let per_scene: Vec<Vec<f64>> = (0..setup.scenes)
        .into_par_iter()
        .map(|i| -> Result<Vec<f64>, ExperimentError> {
            let gt = setup.scene(i)?.labels;
            ppis.iter()
                .enumerate()
                .map(|(k, &ppi)| {
                    let pts = sample_labeled_points(std::slice::from_ref(&gt), ppi, setup.stream(i, 200 + k as u64));
                    let seeds: Vec<_> = pts.iter().map(|p| (p.point, p.class)).collect();
                    let rec = reconstruct_dense(&seeds, gt.width(), gt.height(), gt.classes())?;
                    Ok(dense_miou(std::slice::from_ref(&rec), std::slice::from_ref(&gt))?.miou.unwrap_or(0.0))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let miou: Vec<Vec<f64>> = (0..ppis.len()).map(|k| per_scene.iter().map(|s| s[k]).collect()).collect();
    let mean = miou.iter().map(|v| mean_ci95(v)).collect();
    let p_values = miou
        .windows(2)
        .map(|w| paired_t_greater(&w[1].iter().zip(&w[0]).map(|(b, a)| b - a).collect::<Vec<_>>()))
        .collect();
    Ok(ReconstructionReport { ppis: ppis.to_vec(), miou, mean, p_values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(scenes: usize) -> SceneSetup {
        SceneSetup { scenes, width: 32, height: 32, classes: 8, region_count: 6, generator: Generator::Voronoi, seed: 5 }
    }

    fn preset_accuracy(model: DegradationSpec) -> f64 {
        let s = SceneSetup { scenes: 60, width: 64, height: 64, classes: 20, region_count: 8, generator: Generator::Voronoi, seed: 11 };
        let acc: Vec<f64> = (0..s.scenes)
            .map(|i| {
                let gt = s.scene(i).unwrap().labels;
                pixel_accuracy(&degrade_to_scoremap(&gt, &model.with_seed(s.stream(i, 1))).unwrap(), &gt)
            })
            .collect();
        acc.iter().sum::<f64>() / acc.len() as f64
    }

    #[test]
    fn presets_hit_their_accuracy_targets() {
        let top3 = preset_accuracy(DegradationSpec::top3_faithful(0));
        assert!((0.88..=0.92).contains(&top3), "{top3}");
        let boundary = preset_accuracy(DegradationSpec::boundary_confused(0));
        assert!((0.83..=0.87).contains(&boundary), "{boundary}");
    }

    #[test]
    fn efficiency_with_exact_model_needs_one_question_per_point() {
        let r = question_efficiency(&setup(6), DegradationSpec::identity(0), 10, 3).unwrap();
        assert_eq!(r.questions, r.points as u64);
        assert_eq!(r.yes_points, r.points);
        assert_eq!(r.questions_per_yes.value, 1.0);
        assert_eq!(r.rank_histogram, vec![r.points]);
        assert_eq!(r.pixel_accuracy, 1.0);
    }

    #[test]
    fn complementarity_is_zero_for_exact_model() {
        let r = strategy_complementarity(&setup(4), DegradationSpec::identity(0), 10).unwrap();
        assert_eq!(r.strategies.len(), StrategyKind::ALL.len());
        assert!(r.strategies.iter().all(|s| s.complementarity.value == 0.0));
    }

    #[test]
    fn experiments_are_deterministic() {
        let a = strategy_complementarity(&setup(3), DegradationSpec::boundary_confused(0), 10).unwrap();
        let b = strategy_complementarity(&setup(3), DegradationSpec::boundary_confused(0), 10).unwrap();
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn reconstruction_with_every_pixel_is_exact() {
        let s = setup(3);
        let r = reconstruction_curve(&s, &[1, 32 * 32]).unwrap();
        assert!(r.miou[1].iter().all(|&m| m == 1.0));
        assert!(reconstruction_curve(&s, &[]).is_err());
    }

    #[test]
    fn small_fixture_is_ordered() {
        let spec = FixtureSpec { frames: 6, width: 32, height: 32, methods: 4, ..FixtureSpec::benchmark(1) };
        let f = method_fixture(&spec).unwrap();
        assert_eq!(f.methods.len(), 4);
        let mious: Vec<f64> = f.methods.iter().map(|m| dense_miou(&m.frames, &f.gts).unwrap().miou.unwrap()).collect();
        assert!(mious.windows(2).all(|w| w[0] > w[1]), "{mious:?}");
        let taus = tau_vs_ppi(&f, &[32 * 32], 2, 3).unwrap();
        assert_eq!(taus[0].report.mean_tau, 1.0);
    }
}
