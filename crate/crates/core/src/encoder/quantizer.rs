use crate::{Error, Result};

pub const DEFAULT_MU: f64 = 200.0;

/// Mu-law companding followed by a uniform midrise quantizer.
///
/// Encoding, for clip level `C` and `L = 2^B` levels:
///
/// ```text
/// x' = clamp(x, -C, C)
/// c  = sign(x') ln(1 + mu |x'| / C) / ln(1 + mu)        in [-1, 1]
/// k  = min(floor((c + 1) L / 2), L - 1)                 in [0, L - 1]
/// ```
///
/// Decoding takes the cell midpoint `c^ = -1 + (k + 1/2) 2 / L` and inverts
/// the companding law, `x^ = sign(c^) C ((1 + mu)^|c^| - 1) / mu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantizerConfig {
    mu: f64,
    bits: u8,
    clip: f64,
}

impl QuantizerConfig {
    pub fn new(mu: f64, bits: u8, clip: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::invalid(format!("mu must be positive, got {mu}")));
        }
        if !(2..=16).contains(&bits) {
            return Err(Error::invalid(format!("bits must be in 2..=16, got {bits}")));
        }
        if !(clip > 0.0 && clip.is_finite()) {
            return Err(Error::invalid(format!("clip must be positive, got {clip}")));
        }
        Ok(QuantizerConfig { mu, bits, clip })
    }

    /// Clip level set to the largest magnitude seen in `calibration`.
    pub fn calibrated<'a>(mu: f64, bits: u8, calibration: impl IntoIterator<Item = &'a f64>) -> Result<Self> {
        let clip = calibration.into_iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if clip == 0.0 {
            return Err(Error::invalid("calibration data is all zero"));
        }
        QuantizerConfig::new(mu, bits, clip)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn bits(&self) -> u8 {
        self.bits
    }

    pub fn clip(&self) -> f64 {
        self.clip
    }

    pub fn levels(&self) -> u32 {
        1u32 << self.bits
    }

    /// Width of one quantizer cell in the companded domain.
    pub fn step(&self) -> f64 {
        2.0 / self.levels() as f64
    }

    pub fn compand(&self, x: f64) -> f64 {
        let x = x.clamp(-self.clip, self.clip);
        x.signum() * (self.mu * x.abs() / self.clip).ln_1p() / self.mu.ln_1p()
    }

    pub fn expand(&self, c: f64) -> f64 {
        let c = c.clamp(-1.0, 1.0);
        c.signum() * self.clip * (c.abs() * self.mu.ln_1p()).exp_m1() / self.mu
    }

    pub fn encode(&self, x: f64) -> u16 {
        let levels = self.levels() as f64;
        let cell = ((self.compand(x) + 1.0) * 0.5 * levels).floor();
        cell.clamp(0.0, levels - 1.0) as u16
    }

    pub fn decode(&self, code: u16) -> Result<f64> {
        if u32::from(code) >= self.levels() {
            return Err(Error::invalid(format!(
                "code {code} out of range for {} bits",
                self.bits
            )));
        }
        let mid = -1.0 + (f64::from(code) + 0.5) * self.step();
        Ok(self.expand(mid))
    }

    pub fn quantize(&self, values: &[f64]) -> Vec<u16> {
        values.iter().map(|&x| self.encode(x)).collect()
    }

    pub fn dequantize(&self, codes: &[u16]) -> Result<Vec<f64>> {
        codes.iter().map(|&k| self.decode(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SeededRng;
    use proptest::prelude::*;

    fn q(bits: u8) -> QuantizerConfig {
        QuantizerConfig::new(DEFAULT_MU, bits, 1.0).unwrap()
    }

    #[test]
    fn zero_lands_just_above_midpoint() {
        let q3 = q(3);
        assert_eq!(q3.encode(0.0), 4);
        let back = q3.decode(4).unwrap();
        assert!(back > 0.0);
        // Error bounded by the width of the cell containing zero.
        let upper = q3.expand(q3.step());
        assert!(back.abs() <= upper);
    }

    #[test]
    fn clip_saturates_to_top_code() {
        for bits in 2..=16 {
            let qq = q(bits);
            assert_eq!(u32::from(qq.encode(1.0)), qq.levels() - 1);
            assert_eq!(u32::from(qq.encode(50.0)), qq.levels() - 1);
            assert_eq!(qq.encode(-50.0), 0);
        }
    }

    #[test]
    fn companded_error_within_half_step() {
        let mut rng = SeededRng::new(17);
        for bits in [3u8, 4, 5, 6] {
            let qq = QuantizerConfig::new(DEFAULT_MU, bits, 2.5).unwrap();
            let bound = 0.5f64.powi(bits as i32);
            for _ in 0..20_000 {
                let x = (rng.next_f64() * 2.0 - 1.0) * 2.5;
                let xh = qq.decode(qq.encode(x)).unwrap();
                let err = (qq.compand(x) - qq.compand(xh)).abs();
                assert!(err <= bound + 1e-12, "B={bits} x={x} err={err}");
            }
        }
    }

    #[test]
    fn every_code_is_a_fixed_point() {
        for bits in [3u8, 4, 5, 6] {
            let qq = q(bits);
            for k in 0..qq.levels() as u16 {
                assert_eq!(qq.encode(qq.decode(k).unwrap()), k);
            }
        }
    }

    #[test]
    fn decode_strictly_increasing() {
        for bits in [3u8, 6, 10] {
            let qq = q(bits);
            let vals = qq.dequantize(&(0..qq.levels() as u16).collect::<Vec<_>>()).unwrap();
            assert!(vals.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn sixteen_bits_is_nearly_lossless() {
        let qq = QuantizerConfig::new(DEFAULT_MU, 16, 3.0).unwrap();
        let mut worst = 0.0f64;
        for i in 0..=60_000 {
            let x = -3.0 + 6.0 * i as f64 / 60_000.0;
            worst = worst.max((x - qq.decode(qq.encode(x)).unwrap()).abs());
        }
        assert!(worst < 1e-3 * 3.0, "{worst}");
    }

    #[test]
    fn out_of_range_code_rejected() {
        assert!(matches!(q(3).decode(8), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn config_validation() {
        assert!(QuantizerConfig::new(0.0, 3, 1.0).is_err());
        assert!(QuantizerConfig::new(200.0, 1, 1.0).is_err());
        assert!(QuantizerConfig::new(200.0, 17, 1.0).is_err());
        assert!(QuantizerConfig::new(200.0, 3, 0.0).is_err());
        let c = QuantizerConfig::calibrated(200.0, 4, &[0.5, -2.0, 1.0]).unwrap();
        assert_eq!(c.clip(), 2.0);
        assert!(QuantizerConfig::calibrated(200.0, 4, &[0.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn encode_is_monotone(a in -3.0f64..3.0, b in -3.0f64..3.0, bits in 2u8..=16) {
            let qq = QuantizerConfig::new(DEFAULT_MU, bits, 2.0).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(qq.encode(lo) <= qq.encode(hi));
        }
    }
}
