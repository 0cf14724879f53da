//! Lossless moves between spatial resolution and channel depth.

use super::{Element, Shape, TensorMap};
use crate::error::{Error, Result};

/// Folds each `block×block` spatial tile into `block²` channels.
///
/// Output element `(c·b² + by·b + bx, y, x)` is input element
/// `(c, y·b + by, x·b + bx)`.
pub fn space_to_depth<T: Element>(t: &TensorMap<T>, block: usize) -> Result<TensorMap<T>> {
    if block == 0 {
        return Err(Error::InvalidInput("block size must be positive".into()));
    }
    let s = t.shape();
    if s.height % block != 0 || s.width % block != 0 {
        return Err(Error::DimensionMismatch(format!(
            "space_to_depth: spatial size {}x{} not divisible by block {block}",
            s.height, s.width
        )));
    }
    let (oh, ow) = (s.height / block, s.width / block);
    let out_shape = Shape::new(s.channels * block * block, oh, ow);
    let src = t.data();
    let mut data = Vec::with_capacity(out_shape.len());
    for c in 0..s.channels {
        let plane = &src[c * s.plane_len()..(c + 1) * s.plane_len()];
        for by in 0..block {
            for bx in 0..block {
                for y in 0..oh {
                    let row = &plane[(y * block + by) * s.width..][..s.width];
                    data.extend(row.iter().skip(bx).step_by(block).copied());
                }
            }
        }
    }
    TensorMap::new(out_shape, data)
}

/// Inverse of [`space_to_depth`] for the same `block`.
pub fn depth_to_space<T: Element>(t: &TensorMap<T>, block: usize) -> Result<TensorMap<T>> {
    if block == 0 {
        return Err(Error::InvalidInput("block size must be positive".into()));
    }
    let s = t.shape();
    let bb = block * block;
    if s.channels % bb != 0 {
        return Err(Error::DimensionMismatch(format!(
            "depth_to_space: {} channels not divisible by block² = {bb}",
            s.channels
        )));
    }
    let out_shape = Shape::new(s.channels / bb, s.height * block, s.width * block);
    let mut out = TensorMap::zeros(out_shape);
    let src = t.data();
    let ow = out_shape.width;
    for oc in 0..out_shape.channels {
        let dst = out.channel_mut(oc);
        for by in 0..block {
            for bx in 0..block {
                let ic = oc * bb + by * block + bx;
                let plane = &src[ic * s.plane_len()..(ic + 1) * s.plane_len()];
                for y in 0..s.height {
                    let row = &mut dst[(y * block + by) * ow..][..ow];
                    for (x, &v) in plane[y * s.width..(y + 1) * s.width].iter().enumerate() {
                        row[x * block + bx] = v;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_folds_into_four_channels() {
        let t = TensorMap::new(Shape::new(1, 2, 2), vec![1i32, 2, 3, 4]).unwrap();
        let s = space_to_depth(&t, 2).unwrap();
        assert_eq!(s.shape(), Shape::new(4, 1, 1));
        assert_eq!(s.data(), &[1, 2, 3, 4]);
        let back = depth_to_space(&s, 2).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn block_one_is_identity() {
        let t = TensorMap::from_fn(Shape::new(3, 5, 7), |c, y, x| (c * 35 + y * 7 + x) as f32);
        assert_eq!(space_to_depth(&t, 1).unwrap(), t);
        assert_eq!(depth_to_space(&t, 1).unwrap(), t);
    }

    #[test]
    fn indivisible_dims_are_rejected() {
        let t = TensorMap::<u8>::zeros(Shape::new(1, 6, 4));
        assert!(matches!(space_to_depth(&t, 4), Err(Error::DimensionMismatch(_))));
        let t = TensorMap::<u8>::zeros(Shape::new(6, 2, 2));
        assert!(matches!(depth_to_space(&t, 2), Err(Error::DimensionMismatch(_))));
        assert!(space_to_depth(&t, 0).is_err());
    }

    #[test]
    fn matches_index_oracle() {
        let t = TensorMap::from_fn(Shape::new(3, 8, 8), |c, y, x| (c * 64 + y * 8 + x) as i32);
        let s = space_to_depth(&t, 4).unwrap();
        assert_eq!(s.shape(), Shape::new(48, 2, 2));
        let oracle = panoptic_oracle::space_to_depth_naive(t.data(), [3, 8, 8], 4);
        assert_eq!(s.data(), oracle.as_slice());
        let d = depth_to_space(&s, 4).unwrap();
        let oracle = panoptic_oracle::depth_to_space_naive(s.data(), [48, 2, 2], 4);
        assert_eq!(d.data(), oracle.as_slice());
    }

    proptest! {
        #[test]
        fn round_trip_preserves_values(
            c in 1usize..4, hb in 1usize..4, wb in 1usize..4, block in 1usize..4, seed in any::<u32>()
        ) {
            let shape = Shape::new(c, hb * block, wb * block);
            let t = TensorMap::from_fn(shape, |c, y, x| {
                (seed as f32) * 1e-3 + (c * 1000 + y * 37 + x * 11) as f32
            });
            let s = space_to_depth(&t, block).unwrap();
            prop_assert_eq!(s.shape().len(), t.shape().len());
            let mut a: Vec<u32> = t.data().iter().map(|v| v.to_bits()).collect();
            let mut b: Vec<u32> = s.data().iter().map(|v| v.to_bits()).collect();
            a.sort_unstable();
            b.sort_unstable();
            prop_assert_eq!(a, b);
            prop_assert_eq!(depth_to_space(&s, block).unwrap(), t);
        }
    }
}
