use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2, Axis};
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use super::SpectralError;
use crate::signal::Epoch;

/// One-sided power spectral density per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// Bin frequencies in Hz, ascending from 0 to Nyquist.
    pub freqs: Vec<f64>,
    /// channels × bins, µV²/Hz.
    pub power: Array2<f64>,
}

impl PsdEstimate {
    pub fn resolution(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    /// Σ PSD · Δf per channel (rectangle rule, matching the one-sided scaling).
    pub fn total_power(&self) -> Vec<f64> {
        let df = self.resolution();
        self.power.axis_iter(Axis(0)).map(|row| row.sum() * df).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WelchConfig {
    /// Segment length in samples; `None` means one second of samples.
    pub segment_samples: Option<usize>,
    pub overlap_fraction: f64,
}

impl Default for WelchConfig {
    fn default() -> Self {
        Self {
            segment_samples: None,
            overlap_fraction: 0.5,
        }
    }
}

impl WelchConfig {
    pub fn segment_len(&self, sample_rate: f64) -> usize {
        self.segment_samples
            .unwrap_or_else(|| sample_rate.round() as usize)
            .max(1)
    }
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch PSD of an epoch: Hann-windowed, mean-detrended segments, averaged
/// periodograms with one-sided density scaling.
pub fn welch_psd(epoch: &Epoch, seg_samples: usize, overlap_fraction: f64) -> Result<PsdEstimate, SpectralError> {
    welch_channels(epoch.data.view(), epoch.sample_rate, seg_samples, overlap_fraction)
}

pub fn welch_channels(
    data: ArrayView2<'_, f64>,
    sample_rate: f64,
    seg_samples: usize,
    overlap_fraction: f64,
) -> Result<PsdEstimate, SpectralError> {
    let n = data.ncols();
    if seg_samples == 0 || seg_samples > n {
        return Err(SpectralError::SegmentTooLong {
            segment: seg_samples,
            available: n,
        });
    }
    if !(0.0..1.0).contains(&overlap_fraction) {
        return Err(SpectralError::InvalidOverlap(overlap_fraction));
    }
    let overlap = (overlap_fraction * seg_samples as f64).round() as usize;
    let step = (seg_samples - overlap.min(seg_samples - 1)).max(1);
    let n_segments = (n - seg_samples) / step + 1;
    let n_bins = seg_samples / 2 + 1;

    let window = hann(seg_samples);
    let window_power: f64 = window.iter().map(|w| w * w).sum();
    let scale = 1.0 / (sample_rate * window_power);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(seg_samples);

    let mut power = Array2::zeros((data.nrows(), n_bins));
    let mut buf = vec![Complex::new(0.0, 0.0); seg_samples];
    for (ch, mut out) in data.axis_iter(Axis(0)).zip(power.axis_iter_mut(Axis(0))) {
        for s in 0..n_segments {
            let seg = ch.slice(ndarray::s![s * step..s * step + seg_samples]);
            let mean = seg.sum() / seg_samples as f64;
            for ((b, x), w) in buf.iter_mut().zip(seg.iter()).zip(&window) {
                *b = Complex::new((x - mean) * w, 0.0);
            }
            fft.process(&mut buf);
            for (k, o) in out.iter_mut().enumerate() {
                let mut p = buf[k].norm_sqr() * scale;
                let nyquist = seg_samples % 2 == 0 && k == seg_samples / 2;
                if k != 0 && !nyquist {
                    p *= 2.0;
                }
                *o += p;
            }
        }
        out.mapv_inplace(|v| v / n_segments as f64);
    }
    let freqs = (0..n_bins)
        .map(|k| k as f64 * sample_rate / seg_samples as f64)
        .collect();
    Ok(PsdEstimate { freqs, power })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn epoch(data: Array2<f64>) -> Epoch {
        Epoch {
            data,
            sample_rate: 256.0,
            start_time: 0.0,
            label: None,
        }
    }

    /// Plain O(n²) DFT periodogram, independent of the FFT path.
    fn dft_periodogram(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..=n / 2)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.iter().enumerate() {
                    let a = -2.0 * PI * (k * t) as f64 / n as f64;
                    re += v * a.cos();
                    im += v * a.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    fn argmax(v: &[f64]) -> usize {
        v.iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0
    }

    #[test]
    fn ten_hz_peak() {
        let n = 256 * 8;
        let data = Array2::from_shape_fn((1, n), |(_, i)| (2.0 * PI * 10.0 * i as f64 / 256.0).sin());
        let psd = welch_psd(&epoch(data.clone()), 256, 0.5).unwrap();
        let peak = psd.freqs[argmax(psd.power.row(0).as_slice().unwrap())];
        let oracle = dft_periodogram(data.row(0).as_slice().unwrap());
        let oracle_peak = argmax(&oracle) as f64 * 256.0 / n as f64;
        assert!((peak - oracle_peak).abs() <= psd.resolution());
        assert!((peak - 10.0).abs() <= psd.resolution());
    }

    #[test]
    fn zero_epoch_zero_psd() {
        let psd = welch_psd(&epoch(Array2::zeros((3, 512))), 256, 0.5).unwrap();
        assert!(psd.power.iter().all(|&p| p == 0.0));
        assert_eq!(psd.freqs.first(), Some(&0.0));
        assert_eq!(psd.freqs.last(), Some(&128.0));
    }

    #[test]
    fn white_noise_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..256 * 30).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let variance = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64;
        let psd = welch_psd(&epoch(Array2::from_shape_vec((1, x.len()), x).unwrap()), 256, 0.5).unwrap();
        let total = psd.total_power()[0];
        assert!((total - variance).abs() / variance < 0.10, "{total} vs {variance}");
    }

    #[test]
    fn segment_longer_than_epoch() {
        let err = welch_psd(&epoch(Array2::zeros((1, 100))), 256, 0.5).unwrap_err();
        assert!(matches!(err, SpectralError::SegmentTooLong { .. }));
        assert!(welch_psd(&epoch(Array2::zeros((1, 300))), 256, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn psd_nonnegative_monotone_and_quadratic(
            values in proptest::collection::vec(-100.0f64..100.0, 64..400),
            scale in -20.0f64..20.0,
        ) {
            let n = values.len();
            let seg = 32.min(n);
            let data = Array2::from_shape_vec((1, n), values).unwrap();
            let psd = welch_channels(data.view(), 128.0, seg, 0.5).unwrap();
            prop_assert!(psd.power.iter().all(|&p| p >= 0.0));
            prop_assert!(psd.freqs.windows(2).all(|w| w[1] > w[0]));
            let scaled = data.mapv(|v| v * scale);
            let psd2 = welch_channels(scaled.view(), 128.0, seg, 0.5).unwrap();
            for (a, b) in psd.power.iter().zip(psd2.power.iter()) {
                let want = a * scale * scale;
                prop_assert!((b - want).abs() <= 1e-9 * want.abs().max(1e-300) + 1e-12);
            }
        }
    }
}
