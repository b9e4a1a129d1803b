use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{IngestError, LabeledSegment, LabeledSegmentSet};
use crate::signal::{CommandLabel, EegRecording, FeatureLabels, SegmentLabel, DEFAULT_CHANNELS, DEFAULT_SAMPLE_RATE};
use crate::spectral::{BANDS, N_BANDS};

/// Band amplitude multipliers (δ, θ, α, β, γ) imprinted on one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSignature {
    pub label: SegmentLabel,
    pub band_gains: [f64; N_BANDS],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub classes: Vec<ClassSignature>,
    pub n_per_class: usize,
    pub sample_rate: f64,
    pub channels: usize,
    pub duration_s: f64,
    /// Amplitude in µV of each band's tone mixture before class gains.
    pub base_amplitude: f64,
    pub tones_per_band: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Three command classes with α, β and θ boosted respectively.
    pub fn commands(n_per_class: usize, duration_s: f64, noise_sigma: f64, seed: u64) -> Self {
        let boost = |band: usize| {
            let mut g = [1.0; N_BANDS];
            g[band] = 3.0;
            g
        };
        let classes = [(CommandLabel::IncreaseTransparency, 2), (CommandLabel::MoreLuxuriousDecoration, 3), (CommandLabel::MoreClassicalStyle, 1)]
            .into_iter()
            .map(|(c, band)| ClassSignature { label: SegmentLabel::Command(c), band_gains: boost(band) })
            .collect();
        Self {
            classes,
            n_per_class,
            sample_rate: DEFAULT_SAMPLE_RATE,
            channels: DEFAULT_CHANNELS.len(),
            duration_s,
            base_amplitude: 10.0,
            tones_per_band: 3,
            noise_sigma,
            seed,
        }
    }

    /// Five feature-labelled classes whose α and β log-amplitudes sit on a
    /// plane at (0, 0), (1.2, 0), (0, 1.2), (1.2, 1.2) and (0.6, 2.4), so the
    /// class means span a 2-D subspace of log band-power space.
    pub fn five_clusters(n_per_class: usize, duration_s: f64, noise_sigma: f64, seed: u64) -> Self {
        const PLANE: [(f64, f64); 5] = [(0.0, 0.0), (1.2, 0.0), (0.0, 1.2), (1.2, 1.2), (0.6, 2.4)];
        const SCORES: [[f64; 4]; 5] =
            [[3.0, -2.0, 1.0, 0.0], [-4.0, 2.0, 3.0, -1.0], [2.0, 4.0, -3.0, 2.0], [-1.0, -3.0, -4.0, 5.0], [5.0, 1.0, 2.0, -3.0]];
        let classes = PLANE
            .iter()
            .zip(SCORES)
            .map(|(&(a, b), [t, s, d, c])| ClassSignature {
                label: SegmentLabel::Features(FeatureLabels { transparency: t, style: s, decoration_density: d, color_scheme: c }),
                band_gains: [1.0, 1.0, a.exp(), b.exp(), 1.0],
            })
            .collect();
        Self { classes, ..Self::commands(n_per_class, duration_s, noise_sigma, seed) }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        let bad = |msg: &str| Err(IngestError::InvalidSpec(msg.into()));
        if self.classes.is_empty() {
            return bad("at least one class is required");
        }
        if self.n_per_class == 0 || self.channels == 0 || self.tones_per_band == 0 {
            return bad("n_per_class, channels and tones_per_band must be positive");
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return bad("sample_rate must be positive");
        }
        if !(self.duration_s > 0.0 && (self.duration_s * self.sample_rate).round() >= 1.0) {
            return bad("duration must cover at least one sample");
        }
        if !(self.base_amplitude > 0.0)
            || self.classes.iter().flat_map(|c| c.band_gains).any(|g| !(g > 0.0 && g.is_finite()))
        {
            return bad("amplitudes must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        if BANDS[N_BANDS - 1].high >= self.sample_rate / 2.0 {
            return bad("sample rate too low for the band table");
        }
        Ok(())
    }
}

fn channel_names(n: usize) -> Vec<String> {
    if n == DEFAULT_CHANNELS.len() {
        DEFAULT_CHANNELS.iter().map(|s| s.to_string()).collect()
    } else {
        (0..n).map(|i| format!("ch{i}")).collect()
    }
}

/// Class-major segments: sums of per-band sinusoid mixtures scaled by the
/// class gains and a fixed per-channel gain, plus white noise.
pub fn synth_generate(spec: &SynthSpec) -> Result<LabeledSegmentSet, IngestError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).expect("validated sigma");
    let fs = spec.sample_rate;
    let n = (spec.duration_s * fs).round() as usize;
    let channel_gain: Vec<f64> = (0..spec.channels).map(|_| rng.random_range(0.8..1.2)).collect();
    let tone_amp = spec.base_amplitude / (spec.tones_per_band as f64).sqrt();
    let names = channel_names(spec.channels);

    let mut segments = Vec::with_capacity(spec.classes.len() * spec.n_per_class);
    for class in &spec.classes {
        for _ in 0..spec.n_per_class {
            let mut data = Array2::<f64>::zeros((spec.channels, n));
            for (c, mut row) in data.rows_mut().into_iter().enumerate() {
                for (band, gain) in BANDS.iter().zip(class.band_gains) {
                    let margin = 0.1 * (band.high - band.low);
                    for _ in 0..spec.tones_per_band {
                        let f = rng.random_range(band.low + margin..band.high - margin);
                        let phase = rng.random_range(0.0..2.0 * PI);
                        let a = tone_amp * gain * channel_gain[c];
                        for (i, x) in row.iter_mut().enumerate() {
                            *x += a * (2.0 * PI * f * i as f64 / fs + phase).sin();
                        }
                    }
                }
                if spec.noise_sigma > 0.0 {
                    row.iter_mut().for_each(|x| *x += noise.sample(&mut rng));
                }
            }
            let recording = EegRecording::new(fs, names.clone(), data)?;
            segments.push(LabeledSegment { recording, label: class.label });
        }
    }
    Ok(LabeledSegmentSet { participant_id: "synthetic".into(), source: format!("synth:seed={}", spec.seed), segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{band_powers, welch_channels};

    #[test]
    fn alpha_class_has_alpha_maximal_without_noise() {
        let spec = SynthSpec { classes: vec![SynthSpec::commands(1, 4.0, 0.0, 0).classes[0].clone()], ..SynthSpec::commands(3, 4.0, 0.0, 1) };
        let set = synth_generate(&spec).unwrap();
        for seg in &set.segments {
            let rec = &seg.recording;
            let psd = welch_channels(rec.data().view(), 256.0, 256, 0.5).unwrap();
            let bp = band_powers(&psd).unwrap();
            for ch in 0..rec.n_channels() {
                let row = bp.channel(ch);
                assert!((0..N_BANDS).filter(|&b| b != 2).all(|b| row[2] > row[b]));
            }
        }
    }

    #[test]
    fn same_seed_same_data() {
        let spec = SynthSpec::commands(2, 2.0, 1.0, 5);
        assert_eq!(synth_generate(&spec).unwrap(), synth_generate(&spec).unwrap());
        let other = SynthSpec { seed: 6, ..spec.clone() };
        assert_ne!(synth_generate(&spec).unwrap(), synth_generate(&other).unwrap());
    }

    #[test]
    fn zero_classes_rejected() {
        let spec = SynthSpec { classes: vec![], ..SynthSpec::commands(2, 2.0, 1.0, 5) };
        assert!(matches!(synth_generate(&spec), Err(IngestError::InvalidSpec(_))));
        let spec = SynthSpec { noise_sigma: -1.0, ..SynthSpec::commands(2, 2.0, 1.0, 5) };
        assert!(synth_generate(&spec).is_err());
    }
}
