mod figdata;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use pointillism_client::{run_annotators, Client};
use pointillism_core::campaign::{
    campaign_cost, cost_from_counts, run_simulated, select_image_points, AnnotatorModel, CampaignConfig,
};
use pointillism_core::eval::{dataset_stats, rank_study, write_eval_report, MethodPrediction};
use pointillism_core::experiments::{method_fixture, synthetic_campaign, FixtureSpec, SceneSetup};
use pointillism_core::formats::{
    read_label_map, read_point_labels, read_score_map, write_point_labels, ClassDictionary,
};
use pointillism_core::layout::{load_campaign_with, load_ground_truth, write_campaign_dir, LoadedCampaign, CONFIG_FILE};
use pointillism_core::sampling::StrategySpec;
use pointillism_core::seed::derive_seed;
use pointillism_core::{LabelMap, ScoreMap};
use pointillism_server::{router, serve as serve_http, CampaignService, Registry, ServiceOptions};
use clap::ValueEnum;
use serde::Serialize;

use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::{
    CampaignArgs, ConfigOverrides, EvalArgs, SampleArgs, SceneArgs, ServeArgs, StatsArgs, SynthArgs,
};

pub use figdata::figdata;

pub(crate) fn scene_setup(scene: &SceneArgs, scenes: usize, seed: u64) -> SceneSetup {
    SceneSetup {
        scenes,
        width: scene.width,
        height: scene.height,
        classes: scene.classes,
        region_count: scene.regions,
        generator: scene.generator,
        seed,
    }
}

pub(crate) fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub(crate) fn write_file(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

pub(crate) fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Invalid(e.to_string()))?;
    text.push('\n');
    write_file(dir, name, text)
}

/// `NA` for undefined values, as in the evaluation tables.
pub(crate) fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn require_campaign_dir(dir: &Path) -> Result<(), CliError> {
    let cfg = dir.join(CONFIG_FILE);
    if cfg.is_file() {
        Ok(())
    } else {
        Err(CliError::Io(format!("{}: no campaign here ({CONFIG_FILE} missing)", dir.display())))
    }
}

fn read_maps(paths: &[PathBuf]) -> Result<Vec<ScoreMap>, CliError> {
    Ok(paths.iter().map(read_score_map).collect::<Result<_, _>>()?)
}

pub fn synth(a: SynthArgs) -> Result<(), CliError> {
    let setup = scene_setup(&a.scene, a.scenes, a.seed);
    let entries = synthetic_campaign(&setup, &vec![a.preset.spec(0); a.members])?;
    let config = CampaignConfig {
        ppi: a.ppi,
        replication: a.k,
        max_rounds: a.max_rounds,
        strategy: StrategySpec::new(a.strategy, derive_seed(a.seed, 1)),
        ..CampaignConfig::default()
    };
    config.validate()?;
    let names = (0..a.scene.classes).map(|c| format!("class{c:02}")).collect();
    let dictionary = ClassDictionary::new(names)?;
    create_dir(&a.out_dir)?;
    write_campaign_dir(&a.out_dir, &config, &dictionary, &entries)?;
    RunManifest::new("synth", a.seed)
        .param("scenes", a.scenes)
        .param("width", a.scene.width)
        .param("height", a.scene.height)
        .param("classes", a.scene.classes)
        .param("regions", a.scene.regions)
        .param("generator", a.scene.generator)
        .param("preset", a.preset.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default())
        .param("members", a.members)
        .outputs(&[CONFIG_FILE, "classes.csv", "image_labels.csv", "images/", "labelmaps/", "scoremaps/"])
        .write(&a.out_dir)?;
    tracing::info!(scenes = a.scenes, out = %a.out_dir.display(), "synthetic campaign written");
    Ok(())
}

pub fn sample(a: SampleArgs) -> Result<(), CliError> {
    require_campaign_dir(&a.campaign)?;
    let loaded = load_campaign_with(&a.campaign, |c| {
        if let Some(p) = a.ppi {
            c.ppi = p;
        }
        if let Some(k) = a.strategy {
            c.strategy.kind = k;
        }
        if let Some(s) = a.seed {
            c.strategy.seed = s;
        }
    })?;
    let config = loaded.campaign.config();
    let mut out = String::from("image_id,point_index,x,y,top1_class\n");
    for record in &loaded.records {
        let maps = read_maps(&record.score_map_paths)?;
        let selection = select_image_points(&record.image_id, &maps, config)?;
        for (i, (p, &pixel)) in selection.points.iter().zip(&selection.pixels).enumerate() {
            let _ = writeln!(out, "{},{i},{},{},{}", record.image_id, p.x(), p.y(), maps[0].argmax(pixel).0);
        }
    }
    create_dir(&a.out_dir)?;
    write_file(&a.out_dir, "points.csv", out)?;
    RunManifest::new("sample", config.strategy.seed)
        .input("campaign", a.campaign.display())
        .set("ppi", a.ppi)
        .set("strategy", a.strategy.map(|k| k.token()))
        .outputs(&["points.csv"])
        .write(&a.out_dir)
}

fn load_with_overrides(dir: &Path, o: &ConfigOverrides) -> Result<LoadedCampaign, CliError> {
    require_campaign_dir(dir)?;
    Ok(load_campaign_with(dir, |c| {
        if let Some(p) = o.ppi {
            c.ppi = p;
        }
        if let Some(k) = o.strategy {
            c.strategy.kind = k;
        }
        if let Some(k) = o.k {
            c.replication = k;
        }
        if let Some(r) = o.max_rounds {
            c.max_rounds = r;
        }
    })?)
}

fn ground_truth_for_all(loaded: &LoadedCampaign) -> Result<HashMap<String, LabelMap>, CliError> {
    let gts = load_ground_truth(loaded)?;
    if let Some(missing) = loaded.records.iter().find(|r| !gts.contains_key(&r.image_id)) {
        return Err(CliError::Invalid(format!("simulated annotators need ground truth; {} has none", missing.image_id)));
    }
    Ok(gts)
}

fn manifest_overrides(m: RunManifest, o: &ConfigOverrides) -> RunManifest {
    m.set("ppi", o.ppi).set("strategy", o.strategy.map(|k| k.token())).set("k", o.k).set("max_rounds", o.max_rounds)
}

pub fn campaign(a: CampaignArgs) -> Result<(), CliError> {
    let model = AnnotatorModel::new(a.epsilon, a.unsure)?;
    let loaded = load_with_overrides(&a.campaign, &a.overrides)?;
    let gts = ground_truth_for_all(&loaded)?;
    let manifest = RunManifest::new("campaign", a.seed)
        .input("campaign", a.campaign.display())
        .param("epsilon", a.epsilon)
        .param("unsure", a.unsure);
    let manifest = manifest_overrides(manifest, &a.overrides);
    create_dir(&a.out_dir)?;
    match &a.server {
        None => simulate_local(loaded, &gts, &model, a.seed, &a.out_dir, manifest),
        Some(url) => {
            let o = &a.overrides;
            if o.ppi.is_some() || o.strategy.is_some() || o.k.is_some() || o.max_rounds.is_some() {
                return Err(CliError::Usage("config overrides apply only with --simulate".into()));
            }
            let mut client = Client::new(url.clone());
            if let Some(name) = &a.name {
                client = client.with_campaign(name.clone());
            }
            let manifest = manifest.input("server", url).param("annotators", a.annotators);
            run_remote(&client, &loaded, gts, model, &a, manifest)
        }
    }
}

fn simulate_local(
    mut loaded: LoadedCampaign,
    gts: &HashMap<String, LabelMap>,
    model: &AnnotatorModel,
    seed: u64,
    out_dir: &Path,
    manifest: RunManifest,
) -> Result<(), CliError> {
    let answers = run_simulated(&mut loaded.campaign, gts, model, seed)?;
    let mut log = String::from("question_id,annotator_id,verdict,latency_ms\n");
    for a in &answers {
        let _ = writeln!(log, "{},{},{},{}", a.question_id, a.annotator_id, a.verdict.as_str(), a.latency_ms);
    }
    write_file(out_dir, "answers.csv", log)?;
    write_point_labels(&loaded.campaign.aggregate(), out_dir.join("point_labels.csv"))?;
    write_json(out_dir, "progress.json", &loaded.campaign.progress())?;
    let spa = loaded.campaign.config().seconds_per_answer;
    write_json(out_dir, "cost.json", &campaign_cost(&loaded.campaign, spa))?;
    manifest
        .param("mode", "simulate")
        .outputs(&["answers.csv", "point_labels.csv", "progress.json", "cost.json"])
        .write(out_dir)
}

fn runtime() -> Result<tokio::runtime::Runtime, CliError> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| CliError::Io(e.to_string()))
}

fn run_remote(
    client: &Client,
    loaded: &LoadedCampaign,
    gts: HashMap<String, LabelMap>,
    model: AnnotatorModel,
    a: &CampaignArgs,
    manifest: RunManifest,
) -> Result<(), CliError> {
    let (report, labels) = runtime()?.block_on(async {
        let report = run_annotators(client, a.annotators, Arc::new(gts), model, a.seed).await?;
        let labels = client.labels_csv().await?;
        Ok::<_, CliError>((report, labels))
    })?;
    tracing::info!(acked = report.acked.len(), conflicts = report.conflicts, "annotators finished");
    write_file(&a.out_dir, "point_labels.csv", labels)?;
    write_json(&a.out_dir, "progress.json", &report.progress)?;
    let spa = loaded.campaign.config().seconds_per_answer;
    write_json(&a.out_dir, "cost.json", &cost_from_counts(report.progress.answered, loaded.records.len(), spa))?;
    manifest.param("mode", "server").outputs(&["point_labels.csv", "progress.json", "cost.json"]).write(&a.out_dir)
}

/// Sorted `*.pgm` file names in `dir`.
fn pgm_names(dir: &Path) -> Result<Vec<String>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".pgm") {
            names.push(name);
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(CliError::Invalid(format!("{}: no .pgm label maps", dir.display())));
    }
    Ok(names)
}

fn read_frames(dir: &Path, names: &[String], classes: usize) -> Result<Vec<LabelMap>, CliError> {
    Ok(names.iter().map(|n| read_label_map(dir.join(n), classes)).collect::<Result<_, _>>()?)
}

pub fn eval(a: EvalArgs) -> Result<(), CliError> {
    let mut manifest = RunManifest::new("eval", a.seed).param("ppi", a.ppi).param("draws", a.draws);
    let (methods, gts) = match &a.gt {
        Some(gt_dir) => {
            let classes = a.classes.ok_or_else(|| CliError::Usage("--gt needs --classes".into()))?;
            let names = pgm_names(gt_dir)?;
            let gts = read_frames(gt_dir, &names, classes)?;
            let mut methods = Vec::new();
            for m in &a.method {
                let (id, dir) = m
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("--method expects ID=DIR, got {m:?}")))?;
                methods.push(MethodPrediction { method_id: id.to_string(), frames: read_frames(Path::new(dir), &names, classes)? });
                manifest = manifest.input(&format!("method.{id}"), dir);
            }
            manifest = manifest.input("gt", gt_dir.display()).param("classes", classes);
            (methods, gts)
        }
        None => {
            let spec = FixtureSpec {
                frames: a.frames,
                width: a.frame_size,
                height: a.frame_size,
                methods: a.methods,
                ..FixtureSpec::benchmark(a.seed)
            };
            manifest = manifest.param("frames", a.frames).param("frame_size", a.frame_size).param("methods", a.methods);
            let f = method_fixture(&spec)?;
            (f.methods, f.gts)
        }
    };
    let report = rank_study(&methods, &gts, a.ppi, a.draws, derive_seed(a.seed, a.ppi as u64))?;
    create_dir(&a.out_dir)?;
    write_eval_report(&report, &a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    tracing::info!(mean_tau = report.mean_tau, "evaluation finished");
    manifest.outputs(&["dense_iou.csv", "point_iou.csv", "tau.csv", "summary.txt"]).write(&a.out_dir)
}

pub fn stats(a: StatsArgs) -> Result<(), CliError> {
    let rows = read_point_labels(&a.labels)?;
    let stats = dataset_stats(&rows);
    create_dir(&a.out_dir)?;
    write_json(&a.out_dir, "stats.json", &stats)?;
    let mut zipf = String::from("rank,class_id,yes_points\n");
    for (i, (class, n)) in stats.zipf.iter().enumerate() {
        let _ = writeln!(zipf, "{},{},{n}", i + 1, class.0);
    }
    write_file(&a.out_dir, "zipf.csv", zipf)?;
    RunManifest::new("stats", 0)
        .input("labels", a.labels.display())
        .outputs(&["stats.json", "zipf.csv"])
        .write(&a.out_dir)
}

/// `NAME=DIR`, or a bare directory named after its last component.
fn campaign_spec(s: &str) -> Result<(String, PathBuf), CliError> {
    if let Some((name, dir)) = s.split_once('=') {
        return Ok((name.to_string(), PathBuf::from(dir)));
    }
    let dir = PathBuf::from(s);
    let name = dir
        .canonicalize()
        .map_err(|e| CliError::io(&dir, e))?
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .ok_or_else(|| CliError::Usage(format!("cannot name campaign {s:?}; use NAME=DIR")))?;
    Ok((name, dir))
}

pub fn serve(a: ServeArgs) -> Result<(), CliError> {
    let opts = ServiceOptions { fsync: a.fsync, ..ServiceOptions::default() };
    let mut services = Vec::new();
    for spec in &a.campaign {
        let (name, dir) = campaign_spec(spec)?;
        if services.iter().any(|s: &Arc<CampaignService>| s.name() == name) {
            return Err(CliError::Usage(format!("campaign name {name:?} given twice")));
        }
        require_campaign_dir(&dir)?;
        services.push(Arc::new(CampaignService::open(&name, dir, opts.clone())?));
    }
    let app = router(Registry::new(services));
    let addr = format!("{}:{}", a.host, a.port);
    runtime()?.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| CliError::Io(format!("{addr}: {e}")))?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        };
        serve_http(listener, app, shutdown).await.map_err(|e| CliError::Io(e.to_string()))
    })
}
