//! Reconstruction quality: NMSE, per-subcarrier cosine similarity and the
//! matched-filter downlink rate.

use crate::linalg::{Complex64, ComplexMatrix};
use crate::{Error, Result};

/// Downlink SNRs reported by default.
pub const REPORT_SNRS_DB: [f64; 3] = [0.0, 10.0, 20.0];

fn same_dims(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(format!(
            "estimate is {:?}, reference is {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// `||h_hat - h||_F^2 / ||h||_F^2`.
pub fn nmse(h_hat: &ComplexMatrix, h: &ComplexMatrix) -> Result<f64> {
    same_dims(h_hat, h)?;
    let energy = h.norm_squared();
    if energy == 0.0 {
        return Err(Error::DegenerateSample("reference channel is all zero".into()));
    }
    Ok((h_hat - h).norm_squared() / energy)
}

/// Real-vector variant for the solver's stacked representation.
pub fn nmse_real(estimate: &[f64], truth: &[f64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::shape(format!("lengths {} and {}", estimate.len(), truth.len())));
    }
    let energy: f64 = truth.iter().map(|x| x * x).sum();
    if energy == 0.0 {
        return Err(Error::DegenerateSample("reference vector is all zero".into()));
    }
    let err: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(err / energy)
}

/// `10 log10(x)`; exact zero maps to negative infinity.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

fn row_norm(m: &ComplexMatrix, i: usize) -> f64 {
    m.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `|sum_k conj(a_ik) b_ik|` for row `i`.
fn row_inner_abs(a: &ComplexMatrix, b: &ComplexMatrix, i: usize) -> f64 {
    a.row(i)
        .iter()
        .zip(b.row(i).iter())
        .map(|(x, y)| x.conj() * y)
        .sum::<Complex64>()
        .norm()
}

fn check_reference_rows(h: &ComplexMatrix) -> Result<()> {
    if let Some(i) = (0..h.nrows()).find(|&i| row_norm(h, i) == 0.0) {
        return Err(Error::DegenerateSample(format!("reference subcarrier {i} is all zero")));
    }
    Ok(())
}

/// Mean over subcarrier rows of `|h_hat_i^H h_i| / (||h_hat_i|| ||h_i||)`.
/// Rows where the estimate is zero count as 0.
pub fn cosine_similarity(h_hat: &ComplexMatrix, h: &ComplexMatrix) -> Result<f64> {
    same_dims(h_hat, h)?;
    check_reference_rows(h)?;
    let rows = h.nrows();
    let total: f64 = (0..rows)
        .map(|i| {
            let nh = row_norm(h_hat, i);
            if nh == 0.0 {
                0.0
            } else {
                (row_inner_abs(h_hat, h, i) / (nh * row_norm(h, i))).min(1.0)
            }
        })
        .sum();
    Ok(total / rows as f64)
}

/// Matched-filter precoder `h^H / ||h||`, returned as the row's entries.
pub fn mf_precoder(h_hat: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm = h_hat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateSample("cannot precode on a zero channel".into()));
    }
    Ok(h_hat.iter().map(|z| z.conj() / norm).collect())
}

/// `|w h|^2` for a precoder row `w` and channel row `h`.
pub fn beamforming_gain(w: &[Complex64], h: &[Complex64]) -> f64 {
    w.iter().zip(h).map(|(a, b)| a * b).sum::<Complex64>().norm_sqr()
}

/// Mean over subcarriers of `log2(1 + snr |w_i h_i|^2)` with `w_i` the
/// matched filter of the estimated row. A zero estimated row gives no rate.
pub fn achievable_rate(h_hat: &ComplexMatrix, h: &ComplexMatrix, snr_db: f64) -> Result<f64> {
    Ok(achievable_rates(h_hat, h, &[snr_db])?[0])
}

/// [`achievable_rate`] at several SNRs, sharing the per-row gains.
pub fn achievable_rates(h_hat: &ComplexMatrix, h: &ComplexMatrix, snrs_db: &[f64]) -> Result<Vec<f64>> {
    same_dims(h_hat, h)?;
    check_reference_rows(h)?;
    let rows = h.nrows();
    let gains: Vec<f64> = (0..rows)
        .map(|i| {
            let nh = row_norm(h_hat, i);
            if nh == 0.0 {
                0.0
            } else {
                let g = row_inner_abs(h_hat, h, i) / nh;
                g * g
            }
        })
        .collect();
    Ok(snrs_db
        .iter()
        .map(|db| {
            let snr = 10f64.powf(db / 10.0);
            gains.iter().map(|g| (1.0 + snr * g).log2()).sum::<f64>() / rows as f64
        })
        .collect())
}

/// Per-sample scores feeding a [`MetricsReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMetrics {
    pub nmse: f64,
    pub cos: f64,
    pub rates: Vec<f64>,
}

/// Scores one reconstruction. `nmse_pair` is compared in whatever domain the
/// caller chose; CoS and rate use the spatial-frequency pair.
pub fn score_sample(
    nmse_pair: (&ComplexMatrix, &ComplexMatrix),
    h_hat_sf: &ComplexMatrix,
    h_sf: &ComplexMatrix,
    snrs_db: &[f64],
) -> Result<SampleMetrics> {
    Ok(SampleMetrics {
        nmse: nmse(nmse_pair.0, nmse_pair.1)?,
        cos: cosine_similarity(h_hat_sf, h_sf)?,
        rates: achievable_rates(h_hat_sf, h_sf, snrs_db)?,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    /// `10 log10` of the mean linear NMSE.
    pub nmse_db: f64,
    pub cos: f64,
    pub snrs_db: Vec<f64>,
    pub rates: Vec<f64>,
    pub sample_count: usize,
}

impl MetricsReport {
    /// Arithmetic means over samples, summed in the given order.
    pub fn aggregate(samples: &[SampleMetrics], snrs_db: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("no samples to aggregate"));
        }
        if let Some(s) = samples.iter().find(|s| s.rates.len() != snrs_db.len()) {
            return Err(Error::invalid(format!(
                "sample has {} rates for {} SNRs",
                s.rates.len(),
                snrs_db.len()
            )));
        }
        let n = samples.len() as f64;
        let mean = |f: &dyn Fn(&SampleMetrics) -> f64| samples.iter().map(f).sum::<f64>() / n;
        Ok(MetricsReport {
            nmse_db: to_db(mean(&|s| s.nmse)),
            cos: mean(&|s| s.cos),
            snrs_db: snrs_db.to_vec(),
            rates: (0..snrs_db.len()).map(|k| mean(&|s| s.rates[k])).collect(),
            sample_count: samples.len(),
        })
    }

    pub fn rate_at(&self, snr_db: f64) -> Option<f64> {
        self.snrs_db.iter().position(|s| *s == snr_db).map(|k| self.rates[k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{complex_gaussian_matrix, SeededRng};
    use crate::transform::to_angular_delay;
    use crate::transform::ChannelSample;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random(seed: u64, r: usize, cols: usize) -> ComplexMatrix {
        complex_gaussian_matrix(&mut SeededRng::new(seed), r, cols)
    }

    #[test]
    fn nmse_identities() {
        let h = random(1, 6, 4);
        assert_eq!(nmse(&h, &h).unwrap(), 0.0);
        assert_eq!(to_db(nmse(&h, &h).unwrap()), f64::NEG_INFINITY);
        let zero = ComplexMatrix::zeros(6, 4);
        assert!((nmse(&zero, &h).unwrap() - 1.0).abs() < 1e-15);
        assert!(to_db(nmse(&zero, &h).unwrap()).abs() < 1e-12);
        let twice = &h * c(2.0, 0.0);
        assert!((nmse(&twice, &h).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(nmse(&h, &zero), Err(Error::DegenerateSample(_))));
        assert!(matches!(nmse(&h, &random(2, 6, 5)), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn nmse_same_in_both_domains() {
        let h = random(3, 16, 8);
        let err = &h + random(4, 16, 8) * c(0.1, 0.0);
        let sf = nmse(&err, &h).unwrap();
        let ad = nmse(
            &to_angular_delay(&ChannelSample::new(err.clone()).unwrap()).unwrap(),
            &to_angular_delay(&ChannelSample::new(h.clone()).unwrap()).unwrap(),
        )
        .unwrap();
        assert!((sf - ad).abs() < 1e-10);
    }

    #[test]
    fn cos_scale_invariant() {
        let h = random(5, 8, 4);
        for s in [c(2.0, 0.0), c(-0.3, 1.7), c(0.0, -1e-3)] {
            assert!((cosine_similarity(&(&h * s), &h).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cos_per_row_scaling() {
        let h = random(6, 5, 4);
        let mut scaled = h.clone();
        let mut rng = SeededRng::new(7);
        for i in 0..5 {
            let s = c(rng.next_gaussian(), rng.next_gaussian());
            scaled.row_mut(i).iter_mut().for_each(|z| *z *= s);
        }
        assert!((cosine_similarity(&scaled, &h).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cos_orthogonal_and_half() {
        let h = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let orth = ComplexMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(3.0, 0.0)]);
        assert_eq!(cosine_similarity(&orth, &h).unwrap(), 0.0);
        // First row exact, second orthogonal: (1 + 0) / 2.
        let half = ComplexMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)]);
        assert!((cosine_similarity(&half, &h).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cos_zero_rows() {
        let h = random(8, 3, 4);
        let mut est = h.clone();
        est.row_mut(1).fill(c(0.0, 0.0));
        assert!((cosine_similarity(&est, &h).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!(matches!(cosine_similarity(&h, &est), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn precoder_properties() {
        let w = mf_precoder(&[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(w, vec![c(1.0, 0.0), c(0.0, 0.0)]);
        let mut rng = SeededRng::new(9);
        for _ in 0..50 {
            let h: Vec<_> = (0..8).map(|_| c(rng.next_gaussian(), rng.next_gaussian())).collect();
            let w = mf_precoder(&h).unwrap();
            let norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            let wh: Complex64 = w.iter().zip(&h).map(|(a, b)| a * b).sum();
            let hn = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            assert!((wh.re - hn).abs() < 1e-12 && wh.im.abs() < 1e-12);
        }
        assert!(mf_precoder(&[c(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn perfect_unit_rate_at_10db() {
        let mut h = random(10, 4, 8);
        for i in 0..4 {
            let n = row_norm(&h, i);
            h.row_mut(i).iter_mut().for_each(|z| *z /= n);
        }
        let r = achievable_rate(&h, &h, 10.0).unwrap();
        assert!((r - 11f64.log2()).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_precoder_zero_rate() {
        let h = ComplexMatrix::from_row_slice(1, 2, &[c(1.0, 0.0), c(0.0, 0.0)]);
        let est = ComplexMatrix::from_row_slice(1, 2, &[c(0.0, 0.0), c(0.0, 2.0)]);
        assert_eq!(achievable_rate(&est, &h, 20.0).unwrap(), 0.0);
    }

    #[test]
    fn perfect_csi_maximizes_rate() {
        let h = random(11, 6, 8);
        let perfect = achievable_rate(&h, &h, 10.0).unwrap();
        for seed in 0..100 {
            let noise = random(100 + seed, 6, 8) * c(0.05 * (seed % 20) as f64, 0.0);
            let r = achievable_rate(&(&h + noise), &h, 10.0).unwrap();
            assert!(r <= perfect + 1e-12);
        }
    }

    #[test]
    fn true_mf_beats_random_unit_precoders() {
        let mut rng = SeededRng::new(12);
        let h: Vec<_> = (0..8).map(|_| c(rng.next_gaussian(), rng.next_gaussian())).collect();
        let best = beamforming_gain(&mf_precoder(&h).unwrap(), &h);
        for _ in 0..500 {
            let v: Vec<_> = (0..8).map(|_| c(rng.next_gaussian(), rng.next_gaussian())).collect();
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let w: Vec<_> = v.iter().map(|z| z / n).collect();
            assert!(beamforming_gain(&w, &h) <= best * (1.0 + 1e-12));
        }
    }

    #[test]
    fn aggregate_means_before_db() {
        let s = |nmse| SampleMetrics { nmse, cos: 0.5, rates: vec![1.0, 2.0, 3.0] };
        let r = MetricsReport::aggregate(&[s(0.1), s(0.001)], &REPORT_SNRS_DB).unwrap();
        assert!((r.nmse_db - to_db(0.0505)).abs() < 1e-12);
        assert_eq!(r.rate_at(10.0), Some(2.0));
        assert_eq!(r.sample_count, 2);
        assert!(MetricsReport::aggregate(&[], &REPORT_SNRS_DB).is_err());
    }

    proptest! {
        #[test]
        fn cos_in_unit_interval(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..6) {
            let h = random(seed, rows, cols);
            let e = random(seed.wrapping_add(1), rows, cols);
            let v = cosine_similarity(&e, &h).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
        }

        #[test]
        fn rate_scale_invariant(seed in any::<u64>(), re in 0.1f64..5.0, im in -5.0f64..5.0) {
            let h = random(seed, 4, 4);
            let e = random(seed ^ 0x55, 4, 4);
            let a = achievable_rate(&e, &h, 10.0).unwrap();
            let b = achievable_rate(&(&e * c(re, im)), &h, 10.0).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
