//! Zero-phase Butterworth band-pass filtering in second-order sections.
//!
//! The band-pass is a cascade of a Butterworth low-pass and a Butterworth
//! high-pass of the same order, each discretised with the prewarped bilinear
//! transform. Filtering runs forward then backward over a mirror-extended copy
//! of each channel, with section states initialised to the step steady state
//! so constant offsets produce no start-up transient.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, Axis};

use super::{EegRecording, FilterSpec, SignalError};

/// One biquad: `b0 + b1 z^-1 + b2 z^-2` over `1 + a1 z^-1 + a2 z^-2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        let den = 1.0 + self.a[0] + self.a[1];
        let num = self.b[0] + self.b[1] + self.b[2];
        if num == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// Transposed direct-form II state reached after a long constant input `u`.
    fn step_state(&self, u: f64) -> [f64; 2] {
        let y = self.dc_gain() * u;
        let z2 = self.b[2] * u - self.a[1] * y;
        let z1 = y - self.b[0] * u;
        [z1, z2]
    }
}

#[derive(Clone, Copy)]
enum Edge {
    Low,
    High,
}

fn butterworth_sections(order: usize, cutoff: f64, sample_rate: f64, edge: Edge) -> Vec<Biquad> {
    // bilinear prewarp, with the 2*fs factor cancelled on both sides
    let k = (PI * cutoff / sample_rate).tan();
    let mut sections = Vec::with_capacity(order.div_ceil(2));
    for i in 1..=order / 2 {
        let d = 2.0 * ((2 * i - 1) as f64 * PI / (2 * order) as f64).sin();
        let a0 = 1.0 + d * k + k * k;
        let a1 = 2.0 * (k * k - 1.0) / a0;
        let a2 = (1.0 - d * k + k * k) / a0;
        let b = match edge {
            Edge::Low => {
                let g = k * k / a0;
                [g, 2.0 * g, g]
            }
            Edge::High => {
                let g = 1.0 / a0;
                [g, -2.0 * g, g]
            }
        };
        sections.push(Biquad { b, a: [a1, a2] });
    }
    if order % 2 == 1 {
        let a0 = 1.0 + k;
        let a1 = (k - 1.0) / a0;
        let b = match edge {
            Edge::Low => [k / a0, k / a0, 0.0],
            Edge::High => [1.0 / a0, -1.0 / a0, 0.0],
        };
        sections.push(Biquad { b, a: [a1, 0.0] });
    }
    sections
}

/// Designs the band-pass cascade (low-pass sections first, then high-pass).
pub fn design_bandpass(spec: &FilterSpec, sample_rate: f64) -> Result<Vec<Biquad>, SignalError> {
    spec.validate(sample_rate)?;
    let mut sos = butterworth_sections(spec.order, spec.high_cut, sample_rate, Edge::Low);
    sos.extend(butterworth_sections(
        spec.order,
        spec.low_cut,
        sample_rate,
        Edge::High,
    ));
    Ok(sos)
}

/// Single-pass magnitude of the cascade at `freq` Hz, evaluated from its coefficients.
pub fn magnitude_response(sos: &[Biquad], freq: f64, sample_rate: f64) -> f64 {
    let w = 2.0 * PI * freq / sample_rate;
    let (c1, s1) = (w.cos(), -w.sin());
    let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
    sos.iter()
        .map(|q| {
            let nr = q.b[0] + q.b[1] * c1 + q.b[2] * c2;
            let ni = q.b[1] * s1 + q.b[2] * s2;
            let dr = 1.0 + q.a[0] * c1 + q.a[1] * c2;
            let di = q.a[0] * s1 + q.a[1] * s2;
            ((nr * nr + ni * ni) / (dr * dr + di * di)).sqrt()
        })
        .product()
}

fn sosfilt_in_place(sos: &[Biquad], x: &mut [f64], mut state: Vec<[f64; 2]>) {
    for v in x.iter_mut() {
        let mut s = *v;
        for (q, z) in sos.iter().zip(state.iter_mut()) {
            let y = q.b[0] * s + z[0];
            z[0] = q.b[1] * s - q.a[0] * y + z[1];
            z[1] = q.b[2] * s - q.a[1] * y;
            s = y;
        }
        *v = s;
    }
}

fn steady_states(sos: &[Biquad], level: f64) -> Vec<[f64; 2]> {
    let mut u = level;
    sos.iter()
        .map(|q| {
            let z = q.step_state(u);
            u *= q.dc_gain();
            z
        })
        .collect()
}

/// Samples for the slowest pole of the cascade to decay by a factor e.
fn slowest_time_constant(sos: &[Biquad]) -> f64 {
    sos.iter()
        .map(|q| {
            let radius = if q.a[1] != 0.0 { q.a[1].abs().sqrt() } else { q.a[0].abs() };
            if radius > 0.0 && radius < 1.0 {
                -1.0 / radius.ln()
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Extension length: long enough for start-up transients to die out
/// (seven time constants), capped by the signal length.
fn pad_len(sos: &[Biquad], n: usize) -> usize {
    let settle = (7.0 * slowest_time_constant(sos)).ceil() as usize;
    settle.max(3 * (2 * sos.len() + 1)).min(n.saturating_sub(1))
}

fn leading_mean(x: &[f64], len: usize) -> f64 {
    let len = len.clamp(1, x.len());
    x[..len].iter().sum::<f64>() / len as f64
}

/// Zero-phase filtering of one channel.
pub fn filtfilt(sos: &[Biquad], x: ArrayView1<'_, f64>) -> Vec<f64> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let pad = pad_len(sos, n);
    // mirror extension: point reflection would add a level step of 2·x[edge],
    // which the sub-hertz high-pass poles ring on for seconds
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| x[i]));
    ext.extend(x.iter().copied());
    ext.extend((1..=pad).map(|i| x[n - 1 - i]));

    // states start at the steady state of the local level, not the edge sample,
    // so oscillatory edges do not kick the slow high-pass poles
    let settle = slowest_time_constant(sos).ceil() as usize;
    let zi = steady_states(sos, leading_mean(&ext, settle));
    sosfilt_in_place(sos, &mut ext, zi);
    ext.reverse();
    let zi = steady_states(sos, leading_mean(&ext, settle));
    sosfilt_in_place(sos, &mut ext, zi);
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Zero-phase band-pass of every channel; dimensions are preserved.
pub fn bandpass_filter(rec: &EegRecording, spec: &FilterSpec) -> Result<EegRecording, SignalError> {
    let sos = design_bandpass(spec, rec.sample_rate())?;
    let data = rec.data();
    let mut out = Array2::zeros(data.raw_dim());
    for (src, mut dst) in data.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        let filtered = filtfilt(&sos, src);
        dst.iter_mut().zip(filtered).for_each(|(d, v)| *d = v);
    }
    rec.with_data(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array1;

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    fn tone(freq: f64, fs: f64, seconds: f64) -> Array2<f64> {
        let n = (fs * seconds) as usize;
        Array2::from_shape_fn((1, n), |(_, i)| (2.0 * PI * freq * i as f64 / fs).sin())
    }

    /// Analytic digital Butterworth response under the prewarped bilinear map.
    fn analytic_bandpass_gain(freq: f64, spec: &FilterSpec, fs: f64) -> f64 {
        let t = |f: f64| (PI * f / fs).tan();
        let n = 2.0 * spec.order as f64;
        let lp = 1.0 / (1.0 + (t(freq) / t(spec.high_cut)).powf(n));
        let hp = 1.0 / (1.0 + (t(spec.low_cut) / t(freq)).powf(n));
        (lp * hp).sqrt()
    }

    #[test]
    fn coefficient_response_matches_analytic_butterworth() {
        let spec = FilterSpec::default();
        let sos = design_bandpass(&spec, 256.0).unwrap();
        for f in [0.25, 0.5, 1.0, 4.0, 10.0, 30.0, 45.0, 50.0, 60.0, 100.0] {
            let got = magnitude_response(&sos, f, 256.0);
            let want = analytic_bandpass_gain(f, &spec, 256.0);
            assert!((got - want).abs() < 1e-9, "f={f}: {got} vs {want}");
        }
        let odd = FilterSpec { order: 3, ..spec };
        let sos = design_bandpass(&odd, 256.0).unwrap();
        for f in [0.3, 10.0, 70.0] {
            let got = magnitude_response(&sos, f, 256.0);
            assert!((got - analytic_bandpass_gain(f, &odd, 256.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn dc_is_removed() {
        let rec = EegRecording::from_data(256.0, Array2::from_elem((1, 256 * 6), 1.0)).unwrap();
        let out = bandpass_filter(&rec, &FilterSpec::default()).unwrap();
        let trimmed: Vec<f64> = out.data().row(0).iter().skip(256).take(256 * 4).copied().collect();
        let mean = trimmed.iter().sum::<f64>() / trimmed.len() as f64;
        assert!(mean.abs() < 1e-3, "mean {mean}");
    }

    #[test]
    fn passband_tone_keeps_rms() {
        let spec = FilterSpec::default();
        let rec = EegRecording::from_data(256.0, tone(10.0, 256.0, 8.0)).unwrap();
        let out = bandpass_filter(&rec, &spec).unwrap();
        let inner = |a: &Array2<f64>| a.row(0).iter().skip(256).take(256 * 6).copied().collect::<Vec<_>>();
        let ratio = rms(&inner(out.data())) / rms(&inner(rec.data()));
        // zero-phase: squared magnitude
        let expected = analytic_bandpass_gain(10.0, &spec, 256.0).powi(2);
        assert!((ratio - 1.0).abs() < 0.05, "ratio {ratio}");
        assert!((ratio - expected).abs() < 1e-3);
    }

    #[test]
    fn line_noise_attenuated_by_40db() {
        let spec = FilterSpec::default();
        let rec = EegRecording::from_data(256.0, tone(60.0, 256.0, 8.0)).unwrap();
        let out = bandpass_filter(&rec, &spec).unwrap();
        let inner = |a: &Array2<f64>| a.row(0).iter().skip(256).take(256 * 6).copied().collect::<Vec<_>>();
        let db = 20.0 * (rms(&inner(out.data())) / rms(&inner(rec.data()))).log10();
        let analytic_db = 40.0 * analytic_bandpass_gain(60.0, &spec, 256.0).log10();
        assert!(analytic_db <= -40.0, "analytic {analytic_db}");
        assert!(db <= -40.0, "measured {db} dB");
    }

    #[test]
    fn rejects_invalid_specs() {
        let rec = EegRecording::from_data(256.0, tone(10.0, 256.0, 1.0)).unwrap();
        let swapped = FilterSpec { low_cut: 45.0, high_cut: 0.5, order: 4 };
        assert!(bandpass_filter(&rec, &swapped).is_err());
        let nyq = FilterSpec { low_cut: 0.5, high_cut: 130.0, order: 4 };
        assert!(bandpass_filter(&rec, &nyq).is_err());
    }

    #[test]
    fn deterministic_and_shape_preserving() {
        let data = Array2::from_shape_fn((3, 700), |(c, i)| ((i * (c + 3)) % 17) as f64 - 8.0);
        let rec = EegRecording::from_data(256.0, data).unwrap();
        let a = bandpass_filter(&rec, &FilterSpec::default()).unwrap();
        let b = bandpass_filter(&rec, &FilterSpec::default()).unwrap();
        assert_eq!(a.data().dim(), rec.data().dim());
        assert_eq!(a, b);
    }

    #[test]
    fn short_input_does_not_panic() {
        let sos = design_bandpass(&FilterSpec::default(), 256.0).unwrap();
        assert_eq!(filtfilt(&sos, Array1::from(vec![1.0]).view()).len(), 1);
        assert!(filtfilt(&sos, Array1::<f64>::zeros(0).view()).is_empty());
    }
}
