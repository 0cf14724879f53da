use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::rng_stream;
use crate::dataset::DatasetSpec;
use crate::error::{Error, Result};
use crate::fusion::{InstancePredictionMaps, SemanticInput};
use crate::tensor::TensorMap;

/// Degradation applied by [`perturb`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Standard deviation in pixels of Gaussian noise on every offset value.
    pub offset_sigma: f32,
    /// Standard deviation of Gaussian noise on the heatmap logits.
    pub logit_sigma: f32,
    /// Probability of replacing a pixel's semantic class by a uniformly
    /// drawn one.
    pub semantic_flip_prob: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.offset_sigma >= 0.0 && self.offset_sigma.is_finite()) || !(self.logit_sigma >= 0.0 && self.logit_sigma.is_finite()) {
            return Err(Error::InvalidConfig("noise sigmas must be finite and >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.semantic_flip_prob) {
            return Err(Error::InvalidConfig(format!(
                "semantic_flip_prob must be in [0, 1], got {}",
                self.semantic_flip_prob
            )));
        }
        Ok(())
    }
}

/// Seeded noisy copies of instance and semantic predictions.
///
/// Each head draws from its own random stream, so the noise on one does not
/// depend on the settings of another. A flipped probability pixel becomes
/// one-hot on the drawn class; classes are drawn from `[0, C)` of `spec`.
pub fn perturb(
    maps: &InstancePredictionMaps,
    semantic: &SemanticInput,
    spec: &DatasetSpec,
    noise: &NoiseConfig,
) -> Result<(InstancePredictionMaps, SemanticInput)> {
    noise.validate()?;
    let classes = spec.num_classes();
    let jitter = |t: &TensorMap<f32>, sigma: f32, stream: u64| {
        let mut out = t.clone();
        if sigma > 0.0 {
            let mut rng = rng_stream(noise.seed, stream);
            for v in out.data_mut() {
                let z: f32 = StandardNormal.sample(&mut rng);
                *v += sigma * z;
            }
        }
        out
    };
    let maps = InstancePredictionMaps {
        heatmap_logits: jitter(&maps.heatmap_logits, noise.logit_sigma, 10),
        short: jitter(&maps.short, noise.offset_sigma, 11),
        middle: jitter(&maps.middle, noise.offset_sigma, 12),
        long: jitter(&maps.long, noise.offset_sigma, 13),
    };

    let p = noise.semantic_flip_prob;
    let mut rng = rng_stream(noise.seed, 14);
    let semantic = match semantic {
        _ if p == 0.0 => semantic.clone(),
        SemanticInput::Labels(t) => {
            let mut out = t.clone();
            for v in out.data_mut() {
                if rng.random_bool(p) {
                    *v = rng.random_range(0..classes) as i32;
                }
            }
            SemanticInput::Labels(out)
        }
        SemanticInput::Probabilities(t) => {
            if t.channels() != classes {
                return Err(Error::DimensionMismatch(format!(
                    "semantic probabilities have {} channels for {classes} classes",
                    t.channels()
                )));
            }
            let (c, n) = (classes, t.height() * t.width());
            let mut out = t.clone();
            let data = out.data_mut();
            for i in 0..n {
                if rng.random_bool(p) {
                    let k = rng.random_range(0..c);
                    for j in 0..c {
                        data[j * n + i] = if j == k { 1.0 } else { 0.0 };
                    }
                }
            }
            SemanticInput::Probabilities(out)
        }
    };
    Ok((maps, semantic))
}
