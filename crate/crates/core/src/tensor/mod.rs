//! Dense `C×H×W` maps.
//!
//! Every per-pixel quantity in the pipeline (probabilities, logits, offset
//! fields, label planes) is carried by a [`TensorMap`]. Storage is row-major
//! with the channel outermost, so element `(c, y, x)` lives at
//! `c·H·W + y·W + x` and each channel is a contiguous slice.

mod rearrange;
mod rten;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use rearrange::{depth_to_space, space_to_depth};
pub use rten::{load_rten, read_rten, save_rten, write_rten, AnyTensor};

/// Scalar types a map may hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DType {
    #[serde(rename = "float32")]
    F32,
    #[serde(rename = "int32")]
    I32,
    #[serde(rename = "uint8")]
    U8,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F32 | DType::I32 => 4,
            DType::U8 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::F32 => "float32",
            DType::I32 => "int32",
            DType::U8 => "uint8",
        }
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A scalar that can live in a [`TensorMap`].
pub trait Element: Copy + Default + PartialEq + fmt::Debug + Send + Sync + 'static {
    const DTYPE: DType;

    fn extend_le(self, out: &mut Vec<u8>);

    /// Decodes one value from exactly `DTYPE.size()` little-endian bytes.
    fn from_le(bytes: &[u8]) -> Self;
}

impl Element for f32 {
    const DTYPE: DType = DType::F32;

    fn extend_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn from_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

impl Element for i32 {
    const DTYPE: DType = DType::I32;

    fn extend_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn from_le(bytes: &[u8]) -> Self {
        i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]])
    }
}

impl Element for u8 {
    const DTYPE: DType = DType::U8;

    fn extend_le(self, out: &mut Vec<u8>) {
        out.push(self);
    }

    fn from_le(bytes: &[u8]) -> Self {
        bytes[0]
    }
}

/// `(channels, height, width)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
        }
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_array(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.channels, self.height, self.width)
    }
}

/// Dense channel-major map of scalars.
#[derive(Clone, PartialEq)]
pub struct TensorMap<T> {
    shape: Shape,
    data: Vec<T>,
}

impl<T: Element> TensorMap<T> {
    /// Wraps `data`, which must hold exactly `C·H·W` values.
    pub fn new(shape: Shape, data: Vec<T>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape} needs {} values, got {}",
                shape.len(),
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, T::default())
    }

    pub fn filled(shape: Shape, value: T) -> Self {
        Self {
            shape,
            data: vec![value; shape.len()],
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for y in 0..shape.height {
                for x in 0..shape.width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn dtype(&self) -> DType {
        T::DTYPE
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    fn offset(&self, c: usize, y: usize, x: usize) -> Result<usize> {
        let s = self.shape;
        if c >= s.channels || y >= s.height || x >= s.width {
            return Err(Error::OutOfRange {
                c,
                y,
                x,
                shape: s.as_array(),
            });
        }
        Ok((c * s.height + y) * s.width + x)
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> Result<T> {
        self.offset(c, y, x).map(|i| self.data[i])
    }

    pub fn set(&mut self, c: usize, y: usize, x: usize, value: T) -> Result<()> {
        let i = self.offset(c, y, x)?;
        self.data[i] = value;
        Ok(())
    }

    /// Contiguous `H·W` slice of channel `c`.
    ///
    /// Panics if `c` is out of range.
    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.shape.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.shape.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn map<U: Element>(&self, f: impl Fn(T) -> U) -> TensorMap<U> {
        TensorMap {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Errors unless `self` has the given spatial size.
    pub fn expect_spatial(&self, height: usize, width: usize, what: &str) -> Result<()> {
        if self.shape.height != height || self.shape.width != width {
            return Err(Error::DimensionMismatch(format!(
                "{what}: expected spatial size {height}x{width}, got {}x{}",
                self.shape.height, self.shape.width
            )));
        }
        Ok(())
    }

    /// Errors unless `self` has exactly the given shape.
    pub fn expect_shape(&self, shape: Shape, what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::DimensionMismatch(format!(
                "{what}: expected shape {shape}, got {}",
                self.shape
            )));
        }
        Ok(())
    }
}

impl<T: Element> fmt::Debug for TensorMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TensorMap")
            .field("dtype", &T::DTYPE)
            .field("shape", &self.shape)
            .finish_non_exhaustive()
    }
}
