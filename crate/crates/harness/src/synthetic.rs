//! Synthetic channels that are sparse in the angular-delay domain.
//!
//! Each tap sits on a random (delay, angle) grid point. Delays follow a
//! truncated exponential law with rate `decay` per row, and tap power decays
//! as `exp(-decay * delay)`, so energy concentrates in the early delay rows.
//! Every sample is scaled to total energy `subcarriers`, i.e. unit mean
//! power per subcarrier.

use csi_ppp_core::linalg::{Complex64, ComplexMatrix, SeededRng};
use csi_ppp_core::transform::{AngularDelayTransform, ChannelSample};
use csi_ppp_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub count: usize,
    pub subcarriers: usize,
    pub antennas: usize,
    pub taps: usize,
    pub decay: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            count: 500,
            subcarriers: 256,
            antennas: 32,
            taps: 48,
            decay: 0.15,
            seed: 1,
        }
    }
}

impl SyntheticConfig {
    pub fn generate(&self) -> Result<Vec<ChannelSample>> {
        let mut rng = SeededRng::new(self.seed);
        generate_synthetic(&mut rng, self.count, self.subcarriers, self.antennas, self.taps, self.decay)
    }
}

const RETRIES: usize = 16;

fn draw_delay(rng: &mut SeededRng, rows: usize, decay: f64) -> usize {
    if decay == 0.0 {
        return rng.next_below(rows as u64) as usize;
    }
    // Inverse CDF of the exponential law truncated to [0, rows).
    let mass = -(-decay * rows as f64).exp_m1();
    let u = rng.next_f64();
    let d = -(-u * mass).ln_1p() / decay;
    (d as usize).min(rows - 1)
}

/// Angular-delay tap pattern before the transform, normalized as above.
pub fn synthetic_angular_delay(rng: &mut SeededRng, rows: usize, cols: usize, taps: usize, decay: f64) -> ComplexMatrix {
    let mut h = ComplexMatrix::zeros(rows, cols);
    let mut taken = vec![false; rows * cols];
    for _ in 0..taps {
        let mut pos = None;
        for _ in 0..RETRIES {
            let p = draw_delay(rng, rows, decay) * cols + rng.next_below(cols as u64) as usize;
            if !taken[p] {
                pos = Some(p);
                break;
            }
        }
        let p = pos.unwrap_or_else(|| {
            let start = draw_delay(rng, rows, decay) * cols;
            (0..rows * cols).map(|k| (start + k) % (rows * cols)).find(|&q| !taken[q]).expect("taps <= grid size")
        });
        taken[p] = true;
        let (d, a) = (p / cols, p % cols);
        let amp = (-decay * d as f64 / 2.0).exp() * std::f64::consts::FRAC_1_SQRT_2;
        h[(d, a)] = Complex64::new(rng.next_gaussian() * amp, rng.next_gaussian() * amp);
    }
    let energy = h.norm_squared();
    if energy > 0.0 {
        h *= Complex64::new((rows as f64 / energy).sqrt(), 0.0);
    }
    h
}

pub fn generate_synthetic(
    rng: &mut SeededRng,
    count: usize,
    subcarriers: usize,
    antennas: usize,
    taps: usize,
    decay: f64,
) -> Result<Vec<ChannelSample>> {
    if subcarriers == 0 || antennas == 0 {
        return Err(Error::InvalidShape(format!("{subcarriers}x{antennas} channel")));
    }
    if taps == 0 || taps > subcarriers * antennas {
        return Err(Error::InvalidArgument(format!(
            "taps must be in 1..={}, got {taps}",
            subcarriers * antennas
        )));
    }
    if !(decay >= 0.0 && decay.is_finite()) {
        return Err(Error::InvalidArgument(format!("decay must be >= 0, got {decay}")));
    }
    let transform = AngularDelayTransform::new(subcarriers, antennas)?;
    (0..count)
        .map(|_| {
            let ad = synthetic_angular_delay(rng, subcarriers, antennas, taps, decay);
            ChannelSample::new(transform.to_spatial_freq(&ad)?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use csi_ppp_core::transform::to_angular_delay;

    #[test]
    fn single_tap_single_coefficient() {
        let mut rng = SeededRng::new(3);
        for s in generate_synthetic(&mut rng, 10, 16, 8, 1, 0.2).unwrap() {
            let ad = to_angular_delay(&s).unwrap();
            let big = ad.iter().filter(|z| z.norm() > 1e-9).count();
            assert_eq!(big, 1);
        }
    }

    #[test]
    fn tap_count_and_energy() {
        let mut rng = SeededRng::new(4);
        for taps in [1, 7, 128] {
            let h = synthetic_angular_delay(&mut rng, 16, 8, taps, 0.1);
            assert_eq!(h.iter().filter(|z| z.norm() > 0.0).count(), taps);
            assert!((h.norm_squared() - 16.0).abs() < 1e-9);
        }
    }

    #[test]
    fn early_rows_hold_the_energy() {
        let mut rng = SeededRng::new(5);
        let (mut head, mut total) = (0.0, 0.0);
        for _ in 0..50 {
            let h = synthetic_angular_delay(&mut rng, 256, 32, 48, 0.15);
            total += h.norm_squared();
            head += h.rows(0, 32).norm_squared();
        }
        assert!(head / total >= 0.99, "{}", head / total);
    }

    #[test]
    fn deterministic_under_seed() {
        let cfg = SyntheticConfig { count: 3, subcarriers: 16, antennas: 8, ..Default::default() };
        let a = cfg.generate().unwrap();
        let b = cfg.generate().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.spatial_freq, y.spatial_freq);
        }
        let c = SyntheticConfig { seed: 2, ..cfg }.generate().unwrap();
        assert_ne!(a[0].spatial_freq, c[0].spatial_freq);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = SeededRng::new(6);
        assert!(generate_synthetic(&mut rng, 1, 4, 4, 17, 0.1).is_err());
        assert!(generate_synthetic(&mut rng, 1, 4, 4, 0, 0.1).is_err());
        assert!(generate_synthetic(&mut rng, 1, 4, 4, 2, -1.0).is_err());
        assert!(generate_synthetic(&mut rng, 1, 0, 4, 2, 0.1).is_err());
    }

    #[test]
    fn full_grid_fills_every_cell() {
        let mut rng = SeededRng::new(7);
        let h = synthetic_angular_delay(&mut rng, 4, 4, 16, 2.0);
        assert!(h.iter().all(|z| z.norm() > 0.0));
    }
}
