//! Class taxonomy and the panoptic label format.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Shape, TensorMap};

#[derive(Serialize, Deserialize)]
struct RawDatasetSpec {
    num_classes: usize,
    thing_ids: Vec<u32>,
    names: Vec<String>,
    ignore_label: Option<i32>,
}

/// Class count, thing/stuff partition and optional ignore label.
///
/// Serialized as
/// `{"num_classes":N,"thing_ids":[...],"names":[...],"ignore_label":null}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDatasetSpec", into = "RawDatasetSpec")]
pub struct DatasetSpec {
    num_classes: usize,
    thing_ids: Vec<u32>,
    names: Vec<String>,
    ignore_label: Option<i32>,
    is_thing: Vec<bool>,
}

impl TryFrom<RawDatasetSpec> for DatasetSpec {
    type Error = Error;

    fn try_from(raw: RawDatasetSpec) -> Result<Self> {
        DatasetSpec::new(raw.num_classes, raw.thing_ids, raw.names, raw.ignore_label)
    }
}

impl From<DatasetSpec> for RawDatasetSpec {
    fn from(s: DatasetSpec) -> Self {
        RawDatasetSpec {
            num_classes: s.num_classes,
            thing_ids: s.thing_ids,
            names: s.names,
            ignore_label: s.ignore_label,
        }
    }
}

impl DatasetSpec {
    /// `names` may be empty, in which case classes are named by id.
    pub fn new(num_classes: usize, mut thing_ids: Vec<u32>, names: Vec<String>, ignore_label: Option<i32>) -> Result<Self> {
        if num_classes == 0 || num_classes > i32::MAX as usize {
            return Err(Error::InvalidConfig(format!("num_classes must be in 1..=i32::MAX, got {num_classes}")));
        }
        thing_ids.sort_unstable();
        thing_ids.dedup();
        if let Some(&bad) = thing_ids.iter().find(|&&t| t as usize >= num_classes) {
            return Err(Error::InvalidConfig(format!("thing id {bad} outside [0, {num_classes})")));
        }
        if !names.is_empty() && names.len() != num_classes {
            return Err(Error::InvalidConfig(format!(
                "{} class names given for {num_classes} classes",
                names.len()
            )));
        }
        if let Some(ig) = ignore_label {
            if ig >= 0 && (ig as usize) < num_classes {
                return Err(Error::InvalidConfig(format!("ignore label {ig} collides with a class id")));
            }
        }
        let mut is_thing = vec![false; num_classes];
        for &t in &thing_ids {
            is_thing[t as usize] = true;
        }
        let names = if names.is_empty() {
            (0..num_classes).map(|c| format!("class_{c}")).collect()
        } else {
            names
        };
        Ok(Self {
            num_classes,
            thing_ids,
            names,
            ignore_label,
            is_thing,
        })
    }

    /// Eight-class taxonomy used by the synthetic scene generator:
    /// four stuff classes (ids 0–3) and four thing classes (ids 4–7).
    pub fn synthetic() -> Self {
        let names = ["road", "sky", "vegetation", "building", "car", "person", "bicycle", "truck"];
        Self::new(8, vec![4, 5, 6, 7], names.iter().map(|s| s.to_string()).collect(), Some(255))
            .expect("static taxonomy is valid")
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn thing_ids(&self) -> &[u32] {
        &self.thing_ids
    }

    pub fn stuff_ids(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.num_classes as u32).filter(|&c| !self.is_thing[c as usize])
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, class: i32) -> &str {
        self.names.get(class as usize).map(String::as_str).unwrap_or("?")
    }

    pub fn ignore_label(&self) -> Option<i32> {
        self.ignore_label
    }

    pub fn is_class(&self, label: i32) -> bool {
        label >= 0 && (label as usize) < self.num_classes
    }

    pub fn is_thing(&self, label: i32) -> bool {
        self.is_class(label) && self.is_thing[label as usize]
    }

    pub fn is_stuff(&self, label: i32) -> bool {
        self.is_class(label) && !self.is_thing[label as usize]
    }

    pub fn is_ignore(&self, label: i32) -> bool {
        self.ignore_label == Some(label)
    }
}

/// Paired semantic-class and instance-id planes, each `(1, H, W)` int32.
///
/// Instance id 0 means "no instance"; stuff pixels carry 0 and thing pixels a
/// positive id. On disk it is a 2-channel int32 `.rten` (semantic first).
#[derive(Clone, Debug, PartialEq)]
pub struct PanopticMap {
    semantic: TensorMap<i32>,
    instance: TensorMap<i32>,
}

impl PanopticMap {
    pub fn new(semantic: TensorMap<i32>, instance: TensorMap<i32>) -> Result<Self> {
        if semantic.channels() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "semantic plane must have 1 channel, got {}",
                semantic.channels()
            )));
        }
        instance.expect_shape(semantic.shape(), "instance plane")?;
        Ok(Self { semantic, instance })
    }

    pub fn from_planes(height: usize, width: usize, semantic: Vec<i32>, instance: Vec<i32>) -> Result<Self> {
        let shape = Shape::new(1, height, width);
        Self::new(TensorMap::new(shape, semantic)?, TensorMap::new(shape, instance)?)
    }

    /// Splits a `(2, H, W)` tensor into semantic and instance planes.
    pub fn from_tensor(t: TensorMap<i32>) -> Result<Self> {
        if t.channels() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "panoptic tensor must have 2 channels, got {}",
                t.channels()
            )));
        }
        let (h, w) = (t.height(), t.width());
        let mut data = t.into_data();
        let instance = data.split_off(h * w);
        Self::from_planes(h, w, data, instance)
    }

    pub fn to_tensor(&self) -> TensorMap<i32> {
        let mut data = Vec::with_capacity(2 * self.len());
        data.extend_from_slice(self.semantic.data());
        data.extend_from_slice(self.instance.data());
        TensorMap::new(Shape::new(2, self.height(), self.width()), data).expect("two equal planes")
    }

    pub fn height(&self) -> usize {
        self.semantic.height()
    }

    pub fn width(&self) -> usize {
        self.semantic.width()
    }

    pub fn len(&self) -> usize {
        self.semantic.shape().plane_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn semantic(&self) -> &TensorMap<i32> {
        &self.semantic
    }

    pub fn instance(&self) -> &TensorMap<i32> {
        &self.instance
    }

    pub fn semantic_plane(&self) -> &[i32] {
        self.semantic.data()
    }

    pub fn instance_plane(&self) -> &[i32] {
        self.instance.data()
    }

    /// Checks the label invariants against `spec`.
    pub fn validate(&self, spec: &DatasetSpec) -> Result<()> {
        let mut owner: HashMap<i32, i32> = HashMap::new();
        for (i, (&c, &id)) in self.semantic_plane().iter().zip(self.instance_plane()).enumerate() {
            let (y, x) = (i / self.width(), i % self.width());
            if id < 0 {
                return Err(Error::InvalidAnnotation(format!("negative instance id {id} at ({y}, {x})")));
            }
            if spec.is_ignore(c) {
                if id != 0 {
                    return Err(Error::InvalidAnnotation(format!("ignore pixel ({y}, {x}) carries instance {id}")));
                }
                continue;
            }
            if !spec.is_class(c) {
                return Err(Error::InvalidAnnotation(format!("class {c} at ({y}, {x}) outside [0, {})", spec.num_classes())));
            }
            if spec.is_thing(c) {
                if id == 0 {
                    return Err(Error::InvalidAnnotation(format!("thing pixel ({y}, {x}) of class {c} has no instance")));
                }
                let first = *owner.entry(id).or_insert(c);
                if first != c {
                    return Err(Error::InvalidAnnotation(format!("instance {id} spans classes {first} and {c}")));
                }
            } else if id != 0 {
                return Err(Error::InvalidAnnotation(format!("stuff pixel ({y}, {x}) of class {c} carries instance {id}")));
            }
        }
        Ok(())
    }

    /// Pixel indices of every instance, keyed by id (ascending).
    pub fn instance_pixels(&self) -> std::collections::BTreeMap<i32, Vec<usize>> {
        let mut out: std::collections::BTreeMap<i32, Vec<usize>> = Default::default();
        for (i, &id) in self.instance_plane().iter().enumerate() {
            if id > 0 {
                out.entry(id).or_default().push(i);
            }
        }
        out
    }

    /// True when both maps carry the same semantic plane and their instance
    /// planes agree up to a bijective relabeling of ids (0 maps to 0).
    pub fn same_up_to_relabeling(&self, other: &PanopticMap) -> bool {
        if self.semantic.shape() != other.semantic.shape() || self.semantic != other.semantic {
            return false;
        }
        let mut fwd: HashMap<i32, i32> = HashMap::new();
        let mut bwd: HashMap<i32, i32> = HashMap::new();
        for (&a, &b) in self.instance_plane().iter().zip(other.instance_plane()) {
            if (a == 0) != (b == 0) {
                return false;
            }
            if *fwd.entry(a).or_insert(b) != b || *bwd.entry(b).or_insert(a) != a {
                return false;
            }
        }
        true
    }
}
