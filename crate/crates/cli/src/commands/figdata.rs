use std::fmt::Write as _;

use pointillism_core::experiments::{
    method_fixture, question_efficiency, reconstruction_curve, strategy_complementarity, tau_vs_ppi, FixtureSpec,
    SceneSetup,
};
use pointillism_core::seed::derive_seed;
use pointillism_core::stats::mean_ci95;
use pointillism_core::synth::DegradationSpec;

use super::{create_dir, opt, scene_setup, write_file};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::FigdataArgs;

pub const RANK_HISTOGRAM: &str = "rank_histogram.csv";
pub const DENSE_VS_POINT: &str = "dense_vs_point.csv";
pub const STRATEGY_COMPLEMENTARITY: &str = "strategy_complementarity.csv";
pub const TAU_VS_PPI: &str = "tau_vs_ppi.csv";
pub const RECONSTRUCTION_CURVE: &str = "reconstruction_curve.csv";

pub fn figdata(a: FigdataArgs) -> Result<(), CliError> {
    create_dir(&a.out_dir)?;
    let setup = scene_setup(&a.scene, a.scenes, a.seed);

    let eff = question_efficiency(&setup, DegradationSpec::top3_faithful(0), a.efficiency_ppi, a.max_rounds)?;
    let mut out = String::from("rank,points,share\n");
    for (r, &n) in eff.rank_histogram.iter().enumerate() {
        let _ = writeln!(out, "{},{n},{}", r + 1, n as f64 / eff.points.max(1) as f64);
    }
    write_file(&a.out_dir, RANK_HISTOGRAM, out)?;

    let comp = strategy_complementarity(
        &SceneSetup { seed: derive_seed(a.seed, 1), ..setup },
        DegradationSpec::boundary_confused(0),
        a.strategy_ppi,
    )?;
    let mut out = String::from("strategy,complementarity,ci_lo,ci_hi\n");
    for s in &comp.strategies {
        let c = s.complementarity;
        let _ = writeln!(out, "{},{},{},{}", s.strategy, c.value, c.lo, c.hi);
    }
    write_file(&a.out_dir, STRATEGY_COMPLEMENTARITY, out)?;

    let fixture = method_fixture(&FixtureSpec {
        frames: a.frames,
        width: a.frame_size,
        height: a.frame_size,
        methods: a.methods,
        ..FixtureSpec::benchmark(derive_seed(a.seed, 2))
    })?;
    let taus = tau_vs_ppi(&fixture, &a.eval_ppis, a.draws, derive_seed(a.seed, 3))?;
    let mut tau_out = String::from("ppi,draws,mean_tau,ci_lo,ci_hi\n");
    let mut scatter = String::from("ppi,draw,method_id,dense_miou,point_miou\n");
    for t in &taus {
        let per_draw: Vec<f64> = t.report.draws.iter().map(|d| d.tau).collect();
        let ci = mean_ci95(&per_draw);
        let _ = writeln!(tau_out, "{},{},{},{},{}", t.ppi, per_draw.len(), t.report.mean_tau, ci.lo, ci.hi);
        for (d, draw) in t.report.draws.iter().enumerate() {
            for (m, id) in t.report.method_ids.iter().enumerate() {
                let _ = writeln!(
                    scatter,
                    "{},{d},{id},{},{}",
                    t.ppi,
                    opt(t.report.dense[m].miou),
                    opt(draw.methods[m].miou)
                );
            }
        }
    }
    write_file(&a.out_dir, TAU_VS_PPI, tau_out)?;
    write_file(&a.out_dir, DENSE_VS_POINT, scatter)?;

    let recon = reconstruction_curve(&SceneSetup { seed: derive_seed(a.seed, 4), ..setup }, &a.reconstruction_ppis)?;
    let mut out = String::from("ppi,mean_miou,ci_lo,ci_hi,p_value\n");
    for (k, (&ppi, m)) in recon.ppis.iter().zip(&recon.mean).enumerate() {
        let p = k.checked_sub(1).map(|j| recon.p_values[j]);
        let _ = writeln!(out, "{ppi},{},{},{},{}", m.value, m.lo, m.hi, opt(p));
    }
    write_file(&a.out_dir, RECONSTRUCTION_CURVE, out)?;

    let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
    RunManifest::new("figdata", a.seed)
        .param("scenes", a.scenes)
        .param("width", a.scene.width)
        .param("height", a.scene.height)
        .param("classes", a.scene.classes)
        .param("regions", a.scene.regions)
        .param("generator", a.scene.generator)
        .param("efficiency_ppi", a.efficiency_ppi)
        .param("max_rounds", a.max_rounds)
        .param("strategy_ppi", a.strategy_ppi)
        .param("eval_ppis", join(&a.eval_ppis))
        .param("reconstruction_ppis", join(&a.reconstruction_ppis))
        .param("frames", a.frames)
        .param("frame_size", a.frame_size)
        .param("methods", a.methods)
        .param("draws", a.draws)
        .outputs(&[RANK_HISTOGRAM, STRATEGY_COMPLEMENTARITY, TAU_VS_PPI, DENSE_VS_POINT, RECONSTRUCTION_CURVE])
        .write(&a.out_dir)
}
