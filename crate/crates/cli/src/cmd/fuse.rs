use std::path::{Path, PathBuf};

use clap::Args;
use panoptic::fusion::{parse_timed, InstancePredictionMaps, SemanticInput};
use panoptic::tensor::AnyTensor;
use panoptic::TensorMap;

use super::synth::{HEATMAP, LONG, MIDDLE, SEMANTIC, SHORT};
use crate::config::AlgoArgs;
use crate::error::{CliError, CliResult};
use crate::files::{load_f32, load_spec, load_tensor, manifest_path_for, save, RunManifest};

/// Fuses semantic and instance predictions into a panoptic map.
#[derive(Args, Debug)]
pub struct FuseArgs {
    /// Directory holding `semantic.rten`, `heatmap.rten`, `short.rten`,
    /// `middle.rten` and `long.rten`, as written by `synth`.
    #[arg(long)]
    pub inputs: Option<PathBuf>,
    /// Semantic prediction: `(C, H, W)` float32 scores or `(1, H, W)` int32
    /// labels. Overrides the file in `--inputs`.
    #[arg(long)]
    pub semantic: Option<PathBuf>,
    /// `(P, H, W)` heatmap logits.
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    /// `(2P, H, W)` short-range offsets.
    #[arg(long)]
    pub short: Option<PathBuf>,
    /// `(2E, H, W)` middle-range offsets.
    #[arg(long)]
    pub middle: Option<PathBuf>,
    /// `(2P, H, W)` long-range offsets.
    #[arg(long)]
    pub long: Option<PathBuf>,
    /// Dataset spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    #[command(flatten)]
    pub algo: AlgoArgs,
    /// Output panoptic map (`.rten`).
    #[arg(long)]
    pub out: PathBuf,
}

impl FuseArgs {
    fn path(&self, given: &Option<PathBuf>, file: &str, flag: &str) -> CliResult<PathBuf> {
        given
            .clone()
            .or_else(|| self.inputs.as_ref().map(|d| d.join(file)))
            .ok_or_else(|| CliError::Missing(format!("no --{flag} given and no --inputs directory")))
    }
}

pub fn run(args: &FuseArgs) -> CliResult<()> {
    let cfg = args.algo.resolve()?;
    let spec = load_spec(&args.spec)?;
    let mut manifest = RunManifest::new("fuse");
    manifest.input("spec", &args.spec);

    let mut load = |role: &str, given: &Option<PathBuf>, file: &str, flag: &str| -> CliResult<PathBuf> {
        let path = args.path(given, file, flag)?;
        manifest.input(role, &path);
        Ok(path)
    };
    let semantic_path = load("semantic", &args.semantic, SEMANTIC, "semantic")?;
    let heatmap_path = load("heatmap", &args.heatmap, HEATMAP, "heatmap")?;
    let short_path = load("short", &args.short, SHORT, "short")?;
    let middle_path = load("middle", &args.middle, MIDDLE, "middle")?;
    let long_path = load("long", &args.long, LONG, "long")?;

    let semantic = load_semantic(&semantic_path)?;
    let size = (semantic.height(), semantic.width());
    // Every map must share the semantic prediction's spatial size.
    let load_map = |role: &str, path: &Path| -> CliResult<TensorMap<f32>> {
        let t = load_f32(role, path)?;
        if (t.height(), t.width()) != size {
            return Err(CliError::Malformed(format!(
                "{role} ({}): spatial size {}x{} differs from the semantic prediction's {}x{}",
                path.display(),
                t.height(),
                t.width(),
                size.0,
                size.1
            )));
        }
        Ok(t)
    };
    let maps = InstancePredictionMaps {
        heatmap_logits: load_map("heatmap logits", &heatmap_path)?,
        short: load_map("short-range offsets", &short_path)?,
        middle: load_map("middle-range offsets", &middle_path)?,
        long: load_map("long-range offsets", &long_path)?,
    };

    let (parsed, t) = parse_timed(&semantic, &maps, &spec, &cfg.keypoint, &cfg.fusion).map_err(|e| CliError::from_lib("fusion", e))?;
    for (stage, ms) in [
        ("semantic", t.semantic_ms),
        ("refine", t.refine_ms),
        ("hough", t.hough_ms),
        ("localize", t.localize_ms),
        ("detect", t.detect_ms),
        ("nms", t.nms_ms),
        ("assign", t.assign_ms),
        ("merge", t.merge_ms),
        ("total", t.total_ms),
    ] {
        manifest.time(stage, ms);
    }
    parsed
        .validate(&spec)
        .map_err(|e| CliError::Internal(format!("fused map violates the spec: {e}")))?;

    save(&args.out, &parsed.to_tensor())?;
    manifest.output("panoptic", &args.out);
    manifest.keypoint = Some(cfg.keypoint);
    manifest.fusion = Some(cfg.fusion);
    manifest.write(&manifest_path_for(&args.out))?;
    println!(
        "{} instances, {:.1} ms, wrote {}",
        parsed.instance_pixels().len(),
        t.total_ms,
        args.out.display()
    );
    Ok(())
}

fn load_semantic(path: &Path) -> CliResult<SemanticInput> {
    match load_tensor("semantic prediction", path)? {
        AnyTensor::F32(t) => Ok(SemanticInput::Probabilities(t)),
        AnyTensor::I32(t) => Ok(SemanticInput::Labels(t)),
        AnyTensor::U8(_) => Err(CliError::Malformed(format!(
            "semantic prediction ({}): expected float32 scores or int32 labels, found uint8",
            path.display()
        ))),
    }
}
