use std::path::PathBuf;

use clap::Args;
use panoptic::fusion::{parse_timed, StageTimings};
use panoptic::synth::{self, SceneConfig};
use serde::Serialize;

use crate::config::{AlgoArgs, SceneArgs};
use crate::error::{CliError, CliResult};
use crate::files::{manifest_path_for, write_json, RunManifest};

/// Times the fusion pipeline on a synthetic scene with ideal predictions.
#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub algo: AlgoArgs,
    /// Timed runs after one warm-up run.
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    /// JSON report path.
    #[arg(long, default_value = "bench.json")]
    pub report: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub height: usize,
    pub width: usize,
    pub instances: usize,
    pub repeats: usize,
    pub threads: usize,
    /// Per-stage median over the timed runs.
    pub median_ms: StageTimings,
    pub runs: Vec<StageTimings>,
}

const STAGES: [&str; 9] = ["semantic", "refine", "hough", "localize", "detect", "nms", "assign", "merge", "total"];

fn stages(t: &StageTimings) -> [f64; 9] {
    [
        t.semantic_ms,
        t.refine_ms,
        t.hough_ms,
        t.localize_ms,
        t.detect_ms,
        t.nms_ms,
        t.assign_ms,
        t.merge_ms,
        t.total_ms,
    ]
}

fn median_of(runs: &[StageTimings]) -> StageTimings {
    let med = |k: usize| {
        let mut v: Vec<f64> = runs.iter().map(|t| stages(t)[k]).collect();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    StageTimings {
        semantic_ms: med(0),
        refine_ms: med(1),
        hough_ms: med(2),
        localize_ms: med(3),
        detect_ms: med(4),
        nms_ms: med(5),
        assign_ms: med(6),
        merge_ms: med(7),
        total_ms: med(8),
    }
}

pub fn run(args: &BenchArgs) -> CliResult<()> {
    let mut cfg = args.algo.resolve()?;
    let base = cfg.file.scene.take().unwrap_or_else(|| {
        // Instance extents scale with the image unless configured.
        let (h, w) = args.scene.size.unwrap_or((721, 721));
        SceneConfig {
            height: h,
            width: w,
            num_instances: 20,
            min_extent: (h.min(w) / 40).max(1),
            max_extent: (h.min(w) / 8).max(1),
            ..SceneConfig::default()
        }
    });
    let scene = args.scene.apply(base)?;
    let repeats = args.repeats.max(1);
    let gt = synth::generate_scene(&scene).map_err(|e| CliError::from_lib("scene generation", e))?;
    let (semantic, maps) =
        synth::ideal_predictions(&gt, &scene.spec, &cfg.keypoint).map_err(|e| CliError::from_lib("ideal predictions", e))?;

    let mut runs = Vec::with_capacity(repeats);
    for i in 0..=repeats {
        let (_, t) = parse_timed(&semantic, &maps, &scene.spec, &cfg.keypoint, &cfg.fusion).map_err(|e| CliError::from_lib("fusion", e))?;
        if i > 0 {
            runs.push(t);
        }
    }
    let median = median_of(&runs);
    let report = BenchReport {
        height: scene.height,
        width: scene.width,
        instances: gt.instance_pixels().len(),
        repeats,
        threads: rayon::current_num_threads(),
        median_ms: median.clone(),
        runs,
    };

    println!(
        "{}x{}, {} instances, {} threads, median of {repeats} runs",
        report.height, report.width, report.instances, report.threads
    );
    let mut manifest = RunManifest::new("bench");
    for (name, ms) in STAGES.iter().zip(stages(&median)) {
        println!("{name:<10}{ms:>10.2} ms");
        manifest.time(name, ms);
    }
    write_json(&args.report, &report)?;
    manifest.output("report", &args.report);
    manifest.keypoint = Some(cfg.keypoint);
    manifest.fusion = Some(cfg.fusion);
    manifest.scene = Some(scene);
    manifest.write(&manifest_path_for(&args.report))?;
    Ok(())
}
