use std::path::PathBuf;

use clap::{Args, ValueEnum};
use panoptic::fusion::FusionConfig;
use panoptic::synth::{NoiseConfig, SceneConfig, ShapeKind};
use panoptic::targets::{GraphKind, KeypointConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Contents of a `--config` file. Every section is optional; a missing
/// section takes its defaults, and command-line flags override both.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub keypoint: Option<KeypointConfig>,
    /// Defaults to [`FusionConfig::for_radius`] of the keypoint radius.
    pub fusion: Option<FusionConfig>,
    pub scene: Option<SceneConfig>,
    pub noise: Option<NoiseConfig>,
}

impl ConfigFile {
    pub fn load(path: Option<&PathBuf>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let what = format!("config file {}", path.display());
        let text = std::fs::read_to_string(path).map_err(|e| CliError::from_io(&what, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Malformed(format!("{what}: {e}")))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GraphArg {
    Star,
    Rectangle,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ShapeArg {
    Rectangles,
    Ellipses,
    Mixed,
}

/// Keypoint and fusion parameters shared by several commands.
#[derive(Args, Debug, Default)]
pub struct AlgoArgs {
    /// JSON file with `keypoint`, `fusion`, `scene` and `noise` sections.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Keypoint disk radius in pixels.
    #[arg(long)]
    pub radius: Option<f32>,
    #[arg(long, value_enum)]
    pub graph: Option<GraphArg>,
    #[arg(long)]
    pub refine_iterations: Option<usize>,
    #[arg(long)]
    pub short_weight: Option<f32>,
    #[arg(long)]
    pub long_weight: Option<f32>,
    #[arg(long)]
    pub localmax_threshold: Option<f32>,
    #[arg(long)]
    pub nms_iou: Option<f64>,
    #[arg(long)]
    pub max_instances: Option<usize>,
}

/// Resolved configuration for one command.
pub struct Resolved {
    pub keypoint: KeypointConfig,
    pub fusion: FusionConfig,
    pub file: ConfigFile,
}

impl AlgoArgs {
    pub fn resolve(&self) -> CliResult<Resolved> {
        let mut file = ConfigFile::load(self.config.as_ref())?;
        let mut keypoint = file.keypoint.take().unwrap_or_default();
        if let Some(r) = self.radius {
            keypoint.radius = r;
        }
        if let Some(g) = self.graph {
            keypoint.graph = match g {
                GraphArg::Star => GraphKind::Star,
                GraphArg::Rectangle => GraphKind::Rectangle,
            };
        }
        let mut fusion = file.fusion.take().unwrap_or_else(|| FusionConfig::for_radius(keypoint.radius));
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field {
                    fusion.$field = v;
                })*
            };
        }
        set!(refine_iterations, short_weight, long_weight, localmax_threshold, nms_iou, max_instances);
        keypoint.validate().map_err(|e| CliError::from_lib("keypoint config", e))?;
        fusion.validate().map_err(|e| CliError::from_lib("fusion config", e))?;
        Ok(Resolved { keypoint, fusion, file })
    }
}

/// Scene parameters for `synth` and `bench`.
#[derive(Args, Debug, Default)]
pub struct SceneArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Image size as `HxW`, or a single number for a square.
    #[arg(long, value_parser = parse_size)]
    pub size: Option<(usize, usize)>,
    /// Number of instances to place.
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long, value_enum)]
    pub shape: Option<ShapeArg>,
    /// Minimum gap in pixels between instance bounding boxes.
    #[arg(long)]
    pub min_separation: Option<f64>,
}

impl SceneArgs {
    pub fn apply(&self, mut scene: SceneConfig) -> CliResult<SceneConfig> {
        if let Some(seed) = self.seed {
            scene.seed = seed;
        }
        if let Some((h, w)) = self.size {
            (scene.height, scene.width) = (h, w);
        }
        if let Some(n) = self.instances {
            scene.num_instances = n;
        }
        if let Some(s) = self.shape {
            scene.shape_kind = match s {
                ShapeArg::Rectangles => ShapeKind::Rectangles,
                ShapeArg::Ellipses => ShapeKind::Ellipses,
                ShapeArg::Mixed => ShapeKind::Mixed,
            };
        }
        if self.min_separation.is_some() {
            scene.min_separation = self.min_separation;
        }
        scene.validate().map_err(|e| CliError::from_lib("scene config", e))?;
        Ok(scene)
    }
}

pub fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("bad size {s:?}: {e}"));
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok((parse(h)?, parse(w)?)),
        None => parse(s).map(|n| (n, n)),
    }
}

/// Parses `offset=σ,logit=σ,flip=p`; omitted keys keep the values of `base`.
pub fn parse_noise(s: &str, mut base: NoiseConfig) -> CliResult<NoiseConfig> {
    let bad = |why: String| CliError::Malformed(format!("--noise {s:?}: {why}"));
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| bad(format!("expected key=value, got {part:?}")))?;
        let value = value.trim();
        let num = |v: &str| v.parse::<f64>().map_err(|e| bad(format!("{key}: {e}")));
        match key.trim() {
            "offset" => base.offset_sigma = num(value)? as f32,
            "logit" => base.logit_sigma = num(value)? as f32,
            "flip" => base.semantic_flip_prob = num(value)?,
            "seed" => base.seed = value.parse().map_err(|e| bad(format!("seed: {e}")))?,
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    base.validate().map_err(|e| CliError::from_lib("noise config", e))?;
    Ok(base)
}
