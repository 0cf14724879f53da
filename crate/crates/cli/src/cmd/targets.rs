use std::path::PathBuf;

use clap::Args;
use panoptic::targets::{generate_targets, semantic_loss_weights};

use crate::config::AlgoArgs;
use crate::error::{CliError, CliResult};
use crate::files::{create_dir, load_panoptic, load_spec, save, timed, RunManifest};

/// Writes training targets for a ground-truth panoptic map.
#[derive(Args, Debug)]
pub struct TargetsArgs {
    /// Ground-truth panoptic map (`.rten`, 2 int32 channels).
    #[arg(long)]
    pub gt: PathBuf,
    /// Dataset spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    #[command(flatten)]
    pub algo: AlgoArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &TargetsArgs) -> CliResult<()> {
    let cfg = args.algo.resolve()?;
    let spec = load_spec(&args.spec)?;
    let gt = load_panoptic("ground truth", &args.gt)?;
    let mut manifest = RunManifest::new("targets");
    manifest.input("gt", &args.gt);
    manifest.input("spec", &args.spec);

    let (targets, ms) = timed(|| generate_targets(&gt, &spec, &cfg.keypoint));
    let targets = targets.map_err(|e| CliError::from_lib("target generation", e))?;
    manifest.time("targets", ms);
    let weights = semantic_loss_weights(&gt, &cfg.keypoint);

    create_dir(&args.out)?;
    let mut write_f32 = |name: &str, t| -> CliResult<()> {
        let path = args.out.join(format!("{name}.rten"));
        save(&path, t)?;
        manifest.output(name, &path);
        Ok(())
    };
    write_f32("heatmap", &targets.heatmap)?;
    write_f32("short", &targets.short)?;
    write_f32("middle", &targets.middle)?;
    write_f32("long", &targets.long)?;
    write_f32("semantic_weights", &weights)?;
    for (name, t) in [
        ("disk_mask", &targets.disk_mask),
        ("middle_mask", &targets.middle_mask()),
        ("instance_mask", &targets.instance_mask),
    ] {
        let path = args.out.join(format!("{name}.rten"));
        save(&path, t)?;
        manifest.output(name, &path);
    }
    manifest.keypoint = Some(cfg.keypoint);
    manifest.write(&args.out.join("manifest.json"))?;
    println!("wrote targets for {} instances to {}", gt.instance_pixels().len(), args.out.display());
    Ok(())
}
