use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::{PsdEstimate, SpectralError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub name: &'static str,
    pub low: f64,
    pub high: f64,
    /// Whether `high` itself belongs to the band.
    pub closed: bool,
}

impl Band {
    fn contains(&self, f: f64) -> bool {
        f >= self.low && (f < self.high || (self.closed && f <= self.high))
    }
}

/// δ, θ, α, β, γ. γ stops at 45 Hz because the pipeline low-passes there.
pub const BANDS: [Band; 5] = [
    Band { name: "delta", low: 0.5, high: 4.0, closed: false },
    Band { name: "theta", low: 4.0, high: 8.0, closed: false },
    Band { name: "alpha", low: 8.0, high: 13.0, closed: false },
    Band { name: "beta", low: 13.0, high: 30.0, closed: false },
    Band { name: "gamma", low: 30.0, high: 45.0, closed: true },
];

pub const N_BANDS: usize = BANDS.len();

/// Per-channel band powers, flattened channel-major (`ch0.delta, ch0.theta, ...`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPowerVector {
    pub channels: usize,
    pub values: Vec<f64>,
}

impl BandPowerVector {
    pub fn get(&self, channel: usize, band: usize) -> f64 {
        self.values[channel * N_BANDS + band]
    }

    pub fn channel(&self, channel: usize) -> &[f64] {
        &self.values[channel * N_BANDS..(channel + 1) * N_BANDS]
    }

    /// Natural log with a floor so silent channels stay finite.
    pub fn log(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.max(1e-30).ln()).collect()
    }
}

/// Integrates the PSD over each band: Σ P(f_k)·Δf for bins f_k inside the band.
///
/// Each bin stands for the interval `[f_k, f_k + Δf)`, which keeps the
/// integral exact for spectra that are piecewise constant on the bin grid
/// and makes the map linear in the PSD.
pub fn band_powers(psd: &PsdEstimate) -> Result<BandPowerVector, SpectralError> {
    let top = BANDS[N_BANDS - 1].high;
    let max_f = psd.freqs.last().copied().unwrap_or(0.0);
    if psd.freqs.len() < 2 || max_f < top {
        return Err(SpectralError::RangeTooShort { max_freq: max_f, needed: top });
    }
    let df = psd.resolution();
    let channels = psd.power.nrows();
    let mut values = Vec::with_capacity(channels * N_BANDS);
    for row in psd.power.axis_iter(Axis(0)) {
        for band in &BANDS {
            let p: f64 = psd
                .freqs
                .iter()
                .zip(row.iter())
                .filter(|(f, _)| band.contains(**f))
                .map(|(_, p)| p)
                .sum();
            values.push(p * df);
        }
    }
    Ok(BandPowerVector { channels, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::welch_psd;
    use crate::signal::Epoch;
    use ndarray::Array2;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid_psd(f: impl Fn(f64) -> f64) -> PsdEstimate {
        let freqs: Vec<f64> = (0..=128).map(|k| k as f64).collect();
        let power = Array2::from_shape_fn((1, freqs.len()), |(_, k)| f(freqs[k]));
        PsdEstimate { freqs, power }
    }

    #[test]
    fn alpha_box_integrates_to_five() {
        let psd = grid_psd(|f| if (8.0..13.0).contains(&f) { 1.0 } else { 0.0 });
        let v = band_powers(&psd).unwrap();
        assert_eq!(v.values, vec![0.0, 0.0, 5.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_psd_zero_vector() {
        let v = band_powers(&grid_psd(|_| 0.0)).unwrap();
        assert!(v.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn short_range_rejected() {
        let freqs: Vec<f64> = (0..=40).map(|k| k as f64).collect();
        let psd = PsdEstimate { power: Array2::zeros((1, freqs.len())), freqs };
        assert!(matches!(band_powers(&psd), Err(SpectralError::RangeTooShort { .. })));
    }

    #[test]
    fn alpha_tone_dominates() {
        let data = Array2::from_shape_fn((4, 512), |(c, i)| {
            (1.0 + c as f64) * (2.0 * PI * 10.0 * i as f64 / 256.0).sin()
        });
        let epoch = Epoch { data, sample_rate: 256.0, start_time: 0.0, label: None };
        let v = band_powers(&welch_psd(&epoch, 256, 0.5).unwrap()).unwrap();
        for ch in 0..4 {
            let row = v.channel(ch);
            assert!((0..N_BANDS).filter(|&b| b != 2).all(|b| row[2] > row[b]), "{row:?}");
        }
    }

    proptest! {
        #[test]
        fn additive_over_spectra(a in proptest::collection::vec(0.0f64..10.0, 129), b in proptest::collection::vec(0.0f64..10.0, 129)) {
            let freqs: Vec<f64> = (0..=128).map(|k| k as f64 * 0.5).collect();
            let mk = |v: &Vec<f64>| PsdEstimate { freqs: freqs.clone(), power: Array2::from_shape_vec((1, 129), v.clone()).unwrap() };
            let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let va = band_powers(&mk(&a)).unwrap();
            let vb = band_powers(&mk(&b)).unwrap();
            let vs = band_powers(&mk(&sum)).unwrap();
            for i in 0..N_BANDS {
                prop_assert!((vs.values[i] - (va.values[i] + vb.values[i])).abs() <= 1e-12 * vs.values[i].max(1.0));
            }
        }
    }
}
