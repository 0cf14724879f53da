use std::path::{Path, PathBuf};

use clap::Args;
use panoptic::fusion::{InstancePredictionMaps, SemanticInput};
use panoptic::synth::{self, NoiseConfig};

use crate::config::{parse_noise, AlgoArgs, SceneArgs};
use crate::error::{CliError, CliResult};
use crate::files::{create_dir, save, timed, write_json, RunManifest};

/// Writes a synthetic ground truth and its ideal predictions.
#[derive(Args, Debug)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[command(flatten)]
    pub algo: AlgoArgs,
    /// Also write perturbed predictions to `<out>/noisy/`, e.g.
    /// `offset=0.5,logit=1,flip=0.01`.
    #[arg(long)]
    pub noise: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// File names used for prediction sets, shared with `fuse`.
pub const SEMANTIC: &str = "semantic.rten";
pub const HEATMAP: &str = "heatmap.rten";
pub const SHORT: &str = "short.rten";
pub const MIDDLE: &str = "middle.rten";
pub const LONG: &str = "long.rten";

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let mut cfg = args.algo.resolve()?;
    let scene = args.scene.apply(cfg.file.scene.take().unwrap_or_default())?;
    let noise = match &args.noise {
        Some(s) => Some(parse_noise(
            s,
            cfg.file.noise.take().unwrap_or(NoiseConfig {
                seed: scene.seed,
                ..NoiseConfig::default()
            }),
        )?),
        None => None,
    };
    let mut manifest = RunManifest::new("synth");

    let (gt, ms) = timed(|| synth::generate_scene(&scene));
    let gt = gt.map_err(|e| CliError::from_lib("scene generation", e))?;
    manifest.time("generate", ms);
    let (ideal, ms) = timed(|| synth::ideal_predictions(&gt, &scene.spec, &cfg.keypoint));
    let (semantic, maps) = ideal.map_err(|e| CliError::from_lib("ideal predictions", e))?;
    manifest.time("ideal_predictions", ms);

    create_dir(&args.out)?;
    let gt_path = args.out.join("gt.rten");
    save(&gt_path, &gt.to_tensor())?;
    manifest.output("gt", &gt_path);
    let spec_path = args.out.join("spec.json");
    write_json(&spec_path, &scene.spec)?;
    manifest.output("spec", &spec_path);
    write_predictions(&args.out, &semantic, &maps, "", &mut manifest)?;

    if let Some(noise) = &noise {
        let (noisy, ms) = timed(|| synth::perturb(&maps, &semantic, &scene.spec, noise));
        let (maps, semantic) = noisy.map_err(|e| CliError::from_lib("noise", e))?;
        manifest.time("perturb", ms);
        let dir = args.out.join("noisy");
        create_dir(&dir)?;
        write_predictions(&dir, &semantic, &maps, "noisy_", &mut manifest)?;
    }

    manifest.keypoint = Some(cfg.keypoint);
    manifest.scene = Some(scene);
    manifest.noise = noise;
    manifest.write(&args.out.join("manifest.json"))?;
    println!("wrote {} instances to {}", gt.instance_pixels().len(), args.out.display());
    Ok(())
}

fn write_predictions(
    dir: &Path,
    semantic: &SemanticInput,
    maps: &InstancePredictionMaps,
    prefix: &str,
    manifest: &mut RunManifest,
) -> CliResult<()> {
    let path = dir.join(SEMANTIC);
    match semantic {
        SemanticInput::Probabilities(t) => save(&path, t)?,
        SemanticInput::Labels(t) => save(&path, t)?,
    }
    manifest.output(&format!("{prefix}semantic"), &path);
    for (name, file, t) in [
        ("heatmap", HEATMAP, &maps.heatmap_logits),
        ("short", SHORT, &maps.short),
        ("middle", MIDDLE, &maps.middle),
        ("long", LONG, &maps.long),
    ] {
        let path = dir.join(file);
        save(&path, t)?;
        manifest.output(&format!("{prefix}{name}"), &path);
    }
    Ok(())
}
