//! Acceptance gate. Runs every primary criterion at its stated tolerance,
//! prints one `[PASS]` or `[FAIL]` line each and exits non-zero on any
//! failure.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use pointillism_client::{run_annotators, Client};
use pointillism_core::campaign::{
    cost_from_counts, resolve, AnnotatorModel, CampaignConfig, Question, POLYGON_OBJECTS_PER_IMAGE,
    SECONDS_PER_ANSWER, SECONDS_PER_POLYGON,
};
use pointillism_core::eval::{dense_counts, point_counts, rank_study, LabeledPoint};
use pointillism_core::experiments::{
    method_fixture, question_efficiency, reconstruction_curve, strategy_complementarity, synthetic_campaign,
    FixtureSpec, SceneSetup,
};
use pointillism_core::formats::{read_answer_log, ClassDictionary};
use pointillism_core::layout::{load_campaign, load_ground_truth, write_campaign_dir, CampaignLayout};
use pointillism_core::sampling::{StrategyKind, StrategySpec};
use pointillism_core::seed::{derive_seed, rng};
use pointillism_core::synth::{degrade_to_labels, generate_scene, DegradationSpec, Generator, SceneSpec};
use pointillism_core::{ClassId, Point, PointVerdict, Verdict};
use pointillism_server::{router, serve, CampaignService, Registry, ServiceOptions};
use rand::Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// The scene shape shared by the efficiency and strategy experiments.
fn scenes(n: usize, seed: u64) -> SceneSetup {
    SceneSetup { scenes: n, width: 64, height: 64, classes: 20, region_count: 8, generator: Generator::Voronoi, seed }
}

fn exhaustion_identity() -> Outcome {
    let start = Instant::now();
    let mut r = rng(17);
    let mut mismatches = 0;
    for i in 0..200u64 {
        let (w, h) = (r.random_range(1..=64), r.random_range(1..=64));
        let classes = r.random_range(1..=6);
        let regions = r.random_range(1..=(w * h).min(10));
        let generator = if i % 2 == 0 { Generator::Voronoi } else { Generator::Blobs };
        let gt = generate_scene(&SceneSpec { width: w, height: h, classes, region_count: regions, seed: i, generator })
            .map_err(|e| e.to_string())?
            .labels;
        let spec = DegradationSpec { flip_rate: 0.2, boundary_jitter_px: 1.5, ..DegradationSpec::identity(i) };
        let pred = degrade_to_labels(&gt, &spec).map_err(|e| e.to_string())?;
        let points: Vec<LabeledPoint> = (0..h)
            .flat_map(|row| (0..w).map(move |col| (row, col)))
            .map(|(row, col)| LabeledPoint { frame: 0, point: Point::pixel_center(row, col, w, h), class: gt.get(row, col) })
            .collect();
        let preds = std::slice::from_ref(&pred);
        let dense = dense_counts(preds, std::slice::from_ref(&gt)).map_err(|e| e.to_string())?;
        let point = point_counts(preds, &points, classes).map_err(|e| e.to_string())?;
        let same_ratios = dense.iter().zip(&point).all(|(d, p)| d.ratio().map(f64::to_bits) == p.ratio().map(f64::to_bits));
        if dense != point || !same_ratios {
            mismatches += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(mismatches == 0 && secs < 10.0, format!("200 scenes, {mismatches} mismatches, {secs:.2} s (< 10 s)"))
}

fn rank_preservation() -> Outcome {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let (tau50, tau10) = pool.install(|| -> Result<(f64, f64), String> {
        let f = method_fixture(&FixtureSpec::benchmark(0)).map_err(|e| e.to_string())?;
        let at = |ppi: usize| {
            rank_study(&f.methods, &f.gts, ppi, 5, derive_seed(0, ppi as u64)).map(|r| r.mean_tau).map_err(|e| e.to_string())
        };
        Ok((at(50)?, at(10)?))
    })?;
    let secs = start.elapsed().as_secs_f64();
    check(
        tau50 >= 0.90 && tau10 >= 0.85 && secs < 120.0,
        format!(
            "15 methods x 500 frames 128x128, 5 draws: tau@50 = {tau50:.4} (>= 0.90), tau@10 = {tau10:.4} (>= 0.85), {secs:.1} s single-threaded (< 120 s)"
        ),
    )
}

fn question_efficiency_criterion() -> Outcome {
    let r = question_efficiency(&scenes(200, 1), DegradationSpec::top3_faithful(0), 20, 3).map_err(|e| e.to_string())?;
    let (q, y) = (r.questions_per_yes, r.yes_within_rounds);
    check(
        q.value <= 1.5 && y.value >= 0.97,
        format!(
            "{} scenes, top-1 accuracy {:.3}: questions per YES {:.3} [95% CI {:.3}, {:.3}] (<= 1.5), YES within 3 rounds {:.4} [95% CI {:.4}, {:.4}] (>= 0.97)",
            r.scenes, r.pixel_accuracy, q.value, q.lo, q.hi, y.value, y.lo, y.hi
        ),
    )
}

fn strategy_ordering() -> Outcome {
    let r = strategy_complementarity(&scenes(400, 2), DegradationSpec::boundary_confused(0), 10).map_err(|e| e.to_string())?;
    let get = |k| r.get(k).ok_or_else(|| format!("no score for {k:?}"));
    let (uniform, border, entropy) = (get(StrategyKind::Uniform)?, get(StrategyKind::Border)?, get(StrategyKind::HighEntropy)?);
    let accuracy_ok = (0.83..=0.87).contains(&r.pixel_accuracy);
    check(
        accuracy_ok && border >= 2.0 * uniform && entropy >= 2.0 * uniform,
        format!(
            "{} scenes at 10 ppi, M accuracy {:.3}: uniform {uniform:.3}, border {border:.3} ({:.2}x), entropy {entropy:.3} ({:.2}x) (>= 2x)",
            r.scenes,
            r.pixel_accuracy,
            border / uniform,
            entropy / uniform
        ),
    )
}

fn resolution_rule() -> Outcome {
    let all = [Verdict::Yes, Verdict::No, Verdict::Unsure];
    let (mut cases, mut wrong) = (0, 0);
    for k in 1..=3usize {
        for code in 0..3usize.pow(k as u32) {
            let tuple: Vec<Verdict> = (0..k).map(|i| all[code / 3usize.pow(i as u32) % 3]).collect();
            let expected = if tuple.iter().all(|v| *v == Verdict::Yes) {
                PointVerdict::Yes
            } else if tuple.iter().all(|v| *v == Verdict::No) {
                PointVerdict::No
            } else {
                PointVerdict::Unresolved
            };
            cases += 1;
            if resolve(&tuple, k).ok() != Some(expected) {
                wrong += 1;
            }
        }
    }
    check(cases == 39 && wrong == 0, format!("{cases} verdict tuples for k in 1..=3, {wrong} disagree with unanimity"))
}

fn cost_model() -> Outcome {
    let c = cost_from_counts(75, 1, SECONDS_PER_ANSWER);
    let speedup = c.speedup.unwrap_or(f64::NAN);
    let exact = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b;
    check(
        exact(c.total_seconds, 60.0) && exact(c.polygon_seconds, 216.0) && exact(speedup, 3.6),
        format!(
            "75 x {SECONDS_PER_ANSWER} s = {} s, polygons {POLYGON_OBJECTS_PER_IMAGE} x {SECONDS_PER_POLYGON} s = {} s, speedup {speedup}",
            c.total_seconds, c.polygon_seconds
        ),
    )
}

fn reconstruction_trend() -> Outcome {
    let r = reconstruction_curve(&scenes(120, 3), &[1, 5, 10, 50]).map_err(|e| e.to_string())?;
    let means: Vec<f64> = r.mean.iter().map(|e| e.value).collect();
    let increasing = means.windows(2).all(|w| w[1] > w[0]);
    let significant = r.p_values.iter().all(|&p| p < 0.01);
    let means_text: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
    let p_text: Vec<String> = r.p_values.iter().map(|p| format!("{p:.1e}")).collect();
    check(
        increasing && significant,
        format!(
            "120 scenes, ppi 1/5/10/50: mean mIoU {}, paired one-sided p {} (< 0.01)",
            means_text.join(" < "),
            p_text.join(", ")
        ),
    )
}

fn annotator_calibration() -> Outcome {
    let gt = generate_scene(&SceneSpec { width: 64, height: 64, classes: 10, region_count: 12, seed: 5, generator: Generator::Voronoi })
        .map_err(|e| e.to_string())?
        .labels;
    let model = AnnotatorModel::new(0.05, 0.0).map_err(|e| e.to_string())?;
    let mut r = rng(23);
    let n = 100_000;
    let mut correct = 0;
    for i in 0..n {
        let (row, col) = (r.random_range(0..64), r.random_range(0..64));
        let truth = gt.get(row, col);
        // Half the questions ask about the true class.
        let class_id = if r.random_bool(0.5) { truth } else { ClassId((truth.0 + r.random_range(1..10)) % 10) };
        let q = Question {
            question_id: format!("q{i}"),
            image_id: "calib".into(),
            point: Point::pixel_center(row, col, 64, 64),
            class_id,
            round: 1,
        };
        let (verdict, _) = model.answer(&q, &gt, &mut r);
        let right = if class_id == truth { Verdict::Yes } else { Verdict::No };
        correct += (verdict == right) as usize;
    }
    let acc = correct as f64 / n as f64;
    check((acc - 0.95).abs() <= 0.005, format!("epsilon 0.05 over {n} questions: accuracy {acc:.4} (0.95 +/- 0.005)"))
}

/// Campaign directory sized for a little over 10k answers.
fn write_stress_campaign(dir: &Path) -> Result<(), String> {
    let setup = SceneSetup { scenes: 70, width: 48, height: 48, classes: 12, region_count: 8, generator: Generator::Voronoi, seed: 31 };
    let entries = synthetic_campaign(&setup, &[DegradationSpec::top3_faithful(0)]).map_err(|e| e.to_string())?;
    let cfg = CampaignConfig { ppi: 50, strategy: StrategySpec::new(StrategyKind::Uniform, 4), ..CampaignConfig::default() };
    let names = (0..12).map(|c| format!("class{c:02}")).collect();
    let dict = ClassDictionary::new(names).map_err(|e| e.to_string())?;
    write_campaign_dir(dir, &cfg, &dict, &entries).map_err(|e| e.to_string())?;
    Ok(())
}

fn service_exactly_once() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    write_stress_campaign(root)?;
    let gts = Arc::new(load_ground_truth(&load_campaign(root).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let (report, live) = runtime.block_on(async {
        let service = Arc::new(CampaignService::open("stress", root, ServiceOptions::default()).map_err(|e| e.to_string())?);
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
        let client = Client::new(format!("http://{}", listener.local_addr().map_err(|e| e.to_string())?));
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let server = tokio::spawn(serve(listener, router(Registry::new([service.clone()])), async {
            let _ = rx.await;
        }));
        let model = AnnotatorModel::new(0.05, 0.02).map_err(|e| e.to_string())?;
        let report = run_annotators(&client, 16, gts, model, 99).await.map_err(|e| e.to_string())?;
        let live = service.progress();
        let _ = tx.send(());
        server.await.map_err(|e| e.to_string())?.map_err(|e| e.to_string())?;
        Ok::<_, String>((report, live))
    })?;
    let secs = start.elapsed().as_secs_f64();

    let log = read_answer_log(CampaignLayout::new(root).log()).map_err(|e| e.to_string())?;
    let logged: Vec<(String, String)> = log.records.iter().map(|r| (r.question_id.clone(), r.annotator_id.clone())).collect();
    let logged_set: HashSet<_> = logged.iter().cloned().collect();
    let acked: HashSet<(String, String)> = report.acked.iter().map(|a| (a.question_id.clone(), a.annotator.clone())).collect();
    let assigned: HashSet<(String, String)> =
        report.assignments.iter().map(|a| (a.question_id.clone(), a.annotator.clone())).collect();
    let answered = live.answered;
    let mut problems = Vec::new();
    if answered < 10_000 {
        problems.push(format!("only {answered} answers"));
    }
    if answered != live.questions_total {
        problems.push(format!("{answered} of {} replicas answered", live.questions_total));
    }
    if logged.len() as u64 != answered || report.acked.len() as u64 != answered {
        problems.push(format!("log {} / acked {} / progress {answered}", logged.len(), report.acked.len()));
    }
    if logged_set.len() != logged.len() {
        problems.push("duplicate (question, annotator) in the log".into());
    }
    if logged_set != acked {
        problems.push("acknowledged answers and log differ".into());
    }
    if assigned.len() != report.assignments.len() {
        problems.push("an annotator was handed the same question twice".into());
    }

    // Crash-replay: a fresh process replays the log, including after a torn
    // final write and from any prefix of it.
    let reopened = CampaignService::open("stress", root, ServiceOptions::default()).map_err(|e| e.to_string())?.progress();
    if reopened != live {
        problems.push(format!("replayed progress {reopened:?} != live {live:?}"));
    }
    drop_torn_tail_and_reopen(root, &live, &mut problems)?;
    prefix_replay(root, &log.records.len(), &mut problems)?;

    let detail = format!(
        "16 annotators, {answered} answers in {secs:.1} s, {} lease conflicts, log = acks = progress, replay identical: {}",
        report.conflicts,
        if problems.is_empty() { "yes".to_string() } else { problems.join("; ") }
    );
    check(problems.is_empty(), detail)
}

fn drop_torn_tail_and_reopen(
    root: &Path,
    live: &pointillism_core::wire::Progress,
    problems: &mut Vec<String>,
) -> Result<(), String> {
    let log_path = CampaignLayout::new(root).log();
    let mut f = fs::OpenOptions::new().append(true).open(&log_path).map_err(|e| e.to_string())?;
    f.write_all(b"{\"question_id\":\"scene0000-p0-r9\",\"annot").map_err(|e| e.to_string())?;
    drop(f);
    let after = CampaignService::open("stress", root, ServiceOptions::default()).map_err(|e| e.to_string())?.progress();
    if &after != live {
        problems.push(format!("progress after torn tail {after:?} != live {live:?}"));
    }
    Ok(())
}

fn prefix_replay(root: &Path, records: &usize, problems: &mut Vec<String>) -> Result<(), String> {
    let text = fs::read_to_string(CampaignLayout::new(root).log()).map_err(|e| e.to_string())?;
    let lines: Vec<&str> = text.lines().collect();
    for cut in [1, records / 3, records / 2] {
        let copy = tempfile::tempdir().map_err(|e| e.to_string())?;
        write_stress_campaign(copy.path())?;
        let mut prefix = lines[..cut].join("\n");
        prefix.push('\n');
        fs::write(CampaignLayout::new(copy.path()).log(), prefix).map_err(|e| e.to_string())?;
        let p = CampaignService::open("stress", copy.path(), ServiceOptions::default()).map_err(|e| e.to_string())?.progress();
        if p.answered != cut as u64 {
            problems.push(format!("replaying {cut} records gave answered {}", p.answered));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("point-IoU exhaustion identity", exhaustion_identity),
        ("rank preservation", rank_preservation),
        ("question efficiency", question_efficiency_criterion),
        ("strategy ordering", strategy_ordering),
        ("resolution rule", resolution_rule),
        ("cost model", cost_model),
        ("reconstruction trend", reconstruction_trend),
        ("simulated-annotator calibration", annotator_calibration),
        ("service exactly-once", service_exactly_once),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail} ({took:.1?})"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail} ({took:.1?})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
