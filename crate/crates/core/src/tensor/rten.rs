//! The `.rten` raw tensor format.
//!
//! A file is one UTF-8 JSON header line followed by the raw buffer:
//!
//! ```text
//! {"dtype":"float32","shape":[C,H,W]}\n
//! <C·H·W little-endian scalars>
//! ```

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DType, Element, Shape, TensorMap};
use crate::error::{Error, Result};

const MAX_HEADER_LEN: usize = 4096;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dtype: DType,
    shape: [usize; 3],
}

/// A map whose scalar type is only known at runtime.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyTensor {
    F32(TensorMap<f32>),
    I32(TensorMap<i32>),
    U8(TensorMap<u8>),
}

impl AnyTensor {
    pub fn dtype(&self) -> DType {
        match self {
            AnyTensor::F32(_) => DType::F32,
            AnyTensor::I32(_) => DType::I32,
            AnyTensor::U8(_) => DType::U8,
        }
    }

    pub fn shape(&self) -> Shape {
        match self {
            AnyTensor::F32(t) => t.shape(),
            AnyTensor::I32(t) => t.shape(),
            AnyTensor::U8(t) => t.shape(),
        }
    }

    pub fn into_f32(self) -> Result<TensorMap<f32>> {
        match self {
            AnyTensor::F32(t) => Ok(t),
            other => Err(Error::Format(format!("expected float32 tensor, found {}", other.dtype()))),
        }
    }

    pub fn into_i32(self) -> Result<TensorMap<i32>> {
        match self {
            AnyTensor::I32(t) => Ok(t),
            other => Err(Error::Format(format!("expected int32 tensor, found {}", other.dtype()))),
        }
    }

    pub fn into_u8(self) -> Result<TensorMap<u8>> {
        match self {
            AnyTensor::U8(t) => Ok(t),
            other => Err(Error::Format(format!("expected uint8 tensor, found {}", other.dtype()))),
        }
    }
}

impl From<TensorMap<f32>> for AnyTensor {
    fn from(t: TensorMap<f32>) -> Self {
        AnyTensor::F32(t)
    }
}

impl From<TensorMap<i32>> for AnyTensor {
    fn from(t: TensorMap<i32>) -> Self {
        AnyTensor::I32(t)
    }
}

impl From<TensorMap<u8>> for AnyTensor {
    fn from(t: TensorMap<u8>) -> Self {
        AnyTensor::U8(t)
    }
}

pub fn write_rten<T: Element, W: Write>(mut w: W, t: &TensorMap<T>) -> Result<()> {
    let header = Header {
        dtype: T::DTYPE,
        shape: t.shape().as_array(),
    };
    let mut buf = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
    buf.push(b'\n');
    buf.reserve(t.shape().len() * T::DTYPE.size());
    for &v in t.data() {
        v.extend_le(&mut buf);
    }
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Reads one tensor and requires the stream to end right after its buffer.
pub fn read_rten<R: Read>(r: R) -> Result<AnyTensor> {
    let mut r = BufReader::new(r);
    let mut line = Vec::new();
    (&mut r)
        .take(MAX_HEADER_LEN as u64)
        .read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(Error::Format("missing or oversized header line".into()));
    }
    line.pop();
    let header: Header =
        serde_json::from_slice(&line).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let [c, h, w] = header.shape;
    let shape = Shape::new(c, h, w);
    let len = c
        .checked_mul(h)
        .and_then(|n| n.checked_mul(w))
        .and_then(|n| n.checked_mul(header.dtype.size()))
        .ok_or_else(|| Error::Format("shape overflows".into()))?;

    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != len {
        return Err(Error::Format(format!(
            "{} tensor of shape {shape} needs {len} data bytes, found {}",
            header.dtype,
            bytes.len()
        )));
    }
    Ok(match header.dtype {
        DType::F32 => AnyTensor::F32(decode(shape, &bytes)?),
        DType::I32 => AnyTensor::I32(decode(shape, &bytes)?),
        DType::U8 => AnyTensor::U8(decode(shape, &bytes)?),
    })
}

fn decode<T: Element>(shape: Shape, bytes: &[u8]) -> Result<TensorMap<T>> {
    let data = bytes.chunks_exact(T::DTYPE.size()).map(T::from_le).collect();
    TensorMap::new(shape, data)
}

pub fn save_rten<T: Element>(path: impl AsRef<Path>, t: &TensorMap<T>) -> Result<()> {
    write_rten(BufWriter::new(File::create(path)?), t)
}

pub fn load_rten(path: impl AsRef<Path>) -> Result<AnyTensor> {
    read_rten(File::open(path)?)
}
