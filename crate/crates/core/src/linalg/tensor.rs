use crate::{Error, Result};

/// Dense real 3-tensor stored with the last dimension fastest:
/// element `(i, j, k)` lives at `(i * d1 + j) * d2 + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct RealTensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl RealTensor3 {
    pub fn zeros(d0: usize, d1: usize, d2: usize) -> Self {
        RealTensor3 {
            dims: [d0, d1, d2],
            data: vec![0.0; d0 * d1 * d2],
        }
    }

    pub fn from_vec(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let expected = dims.iter().product::<usize>();
        if data.len() != expected {
            return Err(Error::shape(format!(
                "{:?} needs {expected} entries, got {}",
                dims,
                data.len()
            )));
        }
        Ok(RealTensor3 { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    data.push(f(i, j, k));
                }
            }
        }
        RealTensor3 { dims, data }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// Appends one constant channel, `(d0, d1, d2) -> (d0, d1, d2 + 1)`.
    pub fn with_constant_channel(&self, value: f64) -> RealTensor3 {
        let [d0, d1, d2] = self.dims;
        let mut data = Vec::with_capacity(d0 * d1 * (d2 + 1));
        for pixel in 0..d0 * d1 {
            data.extend_from_slice(&self.data[pixel * d2..(pixel + 1) * d2]);
            data.push(value);
        }
        RealTensor3 {
            dims: [d0, d1, d2 + 1],
            data,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Space-to-channel permutation with factor 2:
/// `out[i, j, 4c + 2a + b] = in[2i + a, 2j + b, c]`.
pub fn pixel_unshuffle(t: &RealTensor3) -> Result<RealTensor3> {
    let [d0, d1, d2] = t.dims;
    if d0 % 2 != 0 || d1 % 2 != 0 {
        return Err(Error::shape(format!(
            "pixel unshuffle needs even spatial dims, got {d0}x{d1}"
        )));
    }
    let mut out = RealTensor3::zeros(d0 / 2, d1 / 2, 4 * d2);
    for i in 0..d0 / 2 {
        for j in 0..d1 / 2 {
            for c in 0..d2 {
                for a in 0..2 {
                    for b in 0..2 {
                        out.set(i, j, 4 * c + 2 * a + b, t.get(2 * i + a, 2 * j + b, c));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Inverse of [`pixel_unshuffle`].
pub fn pixel_shuffle(t: &RealTensor3) -> Result<RealTensor3> {
    let [d0, d1, d2] = t.dims;
    if d2 % 4 != 0 {
        return Err(Error::shape(format!(
            "pixel shuffle needs a channel count divisible by 4, got {d2}"
        )));
    }
    let channels = d2 / 4;
    let mut out = RealTensor3::zeros(2 * d0, 2 * d1, channels);
    for i in 0..d0 {
        for j in 0..d1 {
            for c in 0..channels {
                for a in 0..2 {
                    for b in 0..2 {
                        out.set(2 * i + a, 2 * j + b, c, t.get(i, j, 4 * c + 2 * a + b));
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
    use crate::linalg::SeededRng;
    use proptest::prelude::*;

    fn random_tensor(seed: u64, dims: [usize; 3]) -> RealTensor3 {
        let mut rng = SeededRng::new(seed);
        RealTensor3::from_fn(dims, |_, _, _| rng.next_gaussian())
    }

    #[test]
    fn single_block_unshuffle() {
        let t = RealTensor3::from_vec([2, 2, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let u = pixel_unshuffle(&t).unwrap();
        assert_eq!(u.dims(), [1, 1, 4]);
        assert_eq!(u.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn single_block_shuffle() {
        let t = RealTensor3::from_vec([1, 1, 4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let s = pixel_shuffle(&t).unwrap();
        assert_eq!(s.dims(), [2, 2, 1]);
        assert_eq!(s.get(0, 0, 0), 1.0);
        assert_eq!(s.get(0, 1, 0), 2.0);
        assert_eq!(s.get(1, 0, 0), 3.0);
        assert_eq!(s.get(1, 1, 0), 4.0);
    }

    #[test]
    fn index_map_on_4x4x2() {
        // Encode the source coordinate in the value so the map can be read back.
        let t = RealTensor3::from_fn([4, 4, 2], |i, j, c| (100 * i + 10 * j + c) as f64);
        let u = pixel_unshuffle(&t).unwrap();
        assert_eq!(u.dims(), [2, 2, 8]);
        for i in 0..2 {
            for j in 0..2 {
                for ch in 0..8 {
                    let (c, a, b) = (ch / 4, (ch % 4) / 2, ch % 2);
                    let expected = (100 * (2 * i + a) + 10 * (2 * j + b) + c) as f64;
                    assert_eq!(u.get(i, j, ch), expected);
                }
            }
        }
    }

    #[test]
    fn round_trips_are_exact() {
        let t = random_tensor(1, [32, 32, 2]);
        assert_eq!(pixel_shuffle(&pixel_unshuffle(&t).unwrap()).unwrap(), t);
        let s = random_tensor(2, [16, 16, 8]);
        assert_eq!(pixel_unshuffle(&pixel_shuffle(&s).unwrap()).unwrap(), s);
    }

    #[test]
    fn constant_tensor_stays_constant() {
        let t = RealTensor3::from_fn([3, 5, 8], |_, _, _| 0.25);
        let s = pixel_shuffle(&t).unwrap();
        assert!(s.as_slice().iter().all(|&x| x == 0.25));
    }

    #[test]
    fn bad_shapes_rejected() {
        assert!(matches!(
            pixel_unshuffle(&RealTensor3::zeros(3, 4, 1)),
            Err(Error::InvalidShape(_))
        ));
        assert!(matches!(
            pixel_unshuffle(&RealTensor3::zeros(4, 5, 1)),
            Err(Error::InvalidShape(_))
        ));
        assert!(matches!(
            pixel_shuffle(&RealTensor3::zeros(2, 2, 6)),
            Err(Error::InvalidShape(_))
        ));
    }

    #[test]
    fn constant_channel_appended_per_pixel() {
        let t = RealTensor3::from_fn([2, 3, 2], |i, j, k| (i * 6 + j * 2 + k) as f64);
        let w = t.with_constant_channel(-1.5);
        assert_eq!(w.dims(), [2, 3, 3]);
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(w.get(i, j, 0), t.get(i, j, 0));
                assert_eq!(w.get(i, j, 1), t.get(i, j, 1));
                assert_eq!(w.get(i, j, 2), -1.5);
            }
        }
    }

    proptest! {
        #[test]
        fn shuffle_inverts_unshuffle(h in 1usize..6, w in 1usize..6, c in 1usize..4, seed in any::<u64>()) {
            let t = random_tensor(seed, [2 * h, 2 * w, c]);
            let back = pixel_shuffle(&pixel_unshuffle(&t).unwrap()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
