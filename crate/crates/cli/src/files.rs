use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use panoptic::fusion::FusionConfig;
use panoptic::synth::{NoiseConfig, SceneConfig};
use panoptic::targets::KeypointConfig;
use panoptic::tensor::{load_rten, save_rten, AnyTensor, Element};
use panoptic::{DatasetSpec, PanopticMap, TensorMap};
use serde::Serialize;

use crate::error::{CliError, CliResult};

/// Loads a tensor; errors name `role` and the path.
pub fn load_tensor(role: &str, path: &Path) -> CliResult<AnyTensor> {
    load_rten(path).map_err(|e| CliError::from_lib(&format!("{role} ({})", path.display()), e))
}

pub fn load_f32(role: &str, path: &Path) -> CliResult<TensorMap<f32>> {
    load_tensor(role, path)?
        .into_f32()
        .map_err(|e| CliError::from_lib(&format!("{role} ({})", path.display()), e))
}

/// Loads a 2-channel `int32` panoptic map.
pub fn load_panoptic(role: &str, path: &Path) -> CliResult<PanopticMap> {
    let what = format!("{role} ({})", path.display());
    let t = load_tensor(role, path)?.into_i32().map_err(|e| CliError::from_lib(&what, e))?;
    PanopticMap::from_tensor(t).map_err(|e| CliError::from_lib(&what, e))
}

pub fn load_spec(path: &Path) -> CliResult<DatasetSpec> {
    let what = format!("dataset spec ({})", path.display());
    let text = std::fs::read_to_string(path).map_err(|e| CliError::from_io(&what, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Malformed(format!("{what}: {e}")))
}

pub fn save<T: Element>(path: &Path, t: &TensorMap<T>) -> CliResult<()> {
    save_rten(path, t).map_err(|e| CliError::output(path, e))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::output(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::output(path, e))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::output(path, e))
}

/// `pred.rten` → `pred.rten.manifest.json`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Default, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keypoint: Option<KeypointConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fusion: Option<FusionConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseConfig>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    /// Wall-clock milliseconds per stage.
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        Self {
            tool: env!("CARGO_BIN_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) {
        self.inputs.insert(role.to_string(), path.display().to_string());
    }

    pub fn output(&mut self, role: &str, path: &Path) {
        self.outputs.insert(role.to_string(), path.display().to_string());
    }

    pub fn time(&mut self, stage: &str, ms: f64) {
        self.timings_ms.insert(stage.to_string(), ms.max(0.0));
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        write_json(path, self)
    }
}

/// Runs `f` and returns its result with the elapsed milliseconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = std::time::Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64() * 1e3)
}
