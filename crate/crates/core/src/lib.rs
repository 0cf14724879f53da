//! Keypoint-based panoptic image parsing.
//!
//! The crate covers everything around a single-shot panoptic network except
//! the network itself:
//!
//! * [`tensor`]: dense `C×H×W` maps, space-to-depth rearrangement and the
//!   `.rten` file format.
//! * [`targets`]: per-instance keypoints (mass center plus four box corners),
//!   heatmap and offset-field training targets, and the matching losses.
//! * [`fusion`]: turns semantic and instance predictions into a
//!   [`PanopticMap`] (offset refinement, Hough voting, keypoint grouping,
//!   pixel assignment, semantic/instance merge).
//! * [`metrics`]: panoptic quality and parsing covering.
//! * [`synth`]: seeded synthetic scenes and the ideal predictions that a
//!   perfect network would produce for them.
//!
//! A guide with worked examples lives in the `book/` directory of the
//! repository; its code blocks are compiled and run as doc-tests.
//!
//! ```
//! use panoptic::{fusion, metrics, synth};
//!
//! let scene = synth::SceneConfig { seed: 3, num_instances: 2, ..synth::SceneConfig::default() };
//! let gt = synth::generate_scene(&scene).unwrap();
//! let kcfg = panoptic::targets::KeypointConfig::with_radius(8.0);
//! let (semantic, maps) = synth::ideal_predictions(&gt, &scene.spec, &kcfg).unwrap();
//! let fcfg = fusion::FusionConfig::for_radius(8.0);
//! let parsed = fusion::parse(&semantic, &maps, &scene.spec, &kcfg, &fcfg).unwrap();
//! let pq = metrics::panoptic_quality(&gt, &parsed, &scene.spec).unwrap();
//! assert_eq!(pq.all.pq, 1.0);
//! ```

pub mod dataset;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod metrics;
pub mod synth;
pub mod targets;
pub mod tensor;

pub use dataset::{DatasetSpec, PanopticMap};
pub use error::{Error, Result};
pub use geometry::{BBox, Point};
pub use tensor::{Shape, TensorMap};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/keypoints.md")]
    mod keypoints {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/fusion.md")]
    mod fusion {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
    #[doc = include_str!("../../../book/src/synthetic.md")]
    mod synthetic {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
