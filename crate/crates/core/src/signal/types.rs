use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use super::SignalError;

/// Default EPOC-style channel layout (10-20 placement, 14 electrodes).
pub const DEFAULT_CHANNELS: [&str; 14] = [
    "AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8", "AF4",
];

pub const DEFAULT_SAMPLE_RATE: f64 = 256.0;

/// A multichannel EEG recording in microvolts, stored channels × samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EegRecording {
    sample_rate: f64,
    channel_names: Vec<String>,
    data: Array2<f64>,
}

impl EegRecording {
    pub fn new(
        sample_rate: f64,
        channel_names: Vec<String>,
        data: Array2<f64>,
    ) -> Result<Self, SignalError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(SignalError::InvalidSampleRate(sample_rate));
        }
        if channel_names.len() != data.nrows() {
            return Err(SignalError::ChannelMismatch {
                expected: channel_names.len(),
                found: data.nrows(),
            });
        }
        if let Some(((ch, idx), _)) = data.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(SignalError::NonFinite {
                channel: ch,
                sample: idx,
            });
        }
        Ok(Self {
            sample_rate,
            channel_names,
            data,
        })
    }

    /// Builds a recording with default channel names `ch0..chN`.
    pub fn from_data(sample_rate: f64, data: Array2<f64>) -> Result<Self, SignalError> {
        let names = (0..data.nrows()).map(|i| format!("ch{i}")).collect();
        Self::new(sample_rate, names, data)
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn duration(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate
    }

    /// Same metadata, new samples. Dimensions of `data` must keep the channel count.
    pub fn with_data(&self, data: Array2<f64>) -> Result<Self, SignalError> {
        Self::new(self.sample_rate, self.channel_names.clone(), data)
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }
}

/// A fixed-length window cut from a recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub data: Array2<f64>,
    pub sample_rate: f64,
    /// Seconds from recording start.
    pub start_time: f64,
    pub label: Option<SegmentLabel>,
}

/// The three decodable design commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandLabel {
    IncreaseTransparency,
    MoreLuxuriousDecoration,
    MoreClassicalStyle,
}

impl CommandLabel {
    pub const ALL: [CommandLabel; 3] = [
        CommandLabel::IncreaseTransparency,
        CommandLabel::MoreLuxuriousDecoration,
        CommandLabel::MoreClassicalStyle,
    ];

    pub fn index(self) -> usize {
        match self {
            CommandLabel::IncreaseTransparency => 0,
            CommandLabel::MoreLuxuriousDecoration => 1,
            CommandLabel::MoreClassicalStyle => 2,
        }
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CommandLabel::IncreaseTransparency => "increase_transparency",
            CommandLabel::MoreLuxuriousDecoration => "more_luxurious_decoration",
            CommandLabel::MoreClassicalStyle => "more_classical_style",
        }
    }
}

impl fmt::Display for CommandLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CommandLabel {
    type Err = SignalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == norm)
            .ok_or_else(|| SignalError::UnknownCommand(s.to_string()))
    }
}

/// The four spatial features scored per image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialFeature {
    Transparency,
    Style,
    DecorationDensity,
    ColorScheme,
}

impl SpatialFeature {
    pub const ALL: [SpatialFeature; 4] = [
        SpatialFeature::Transparency,
        SpatialFeature::Style,
        SpatialFeature::DecorationDensity,
        SpatialFeature::ColorScheme,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SpatialFeature::Transparency => "transparency",
            SpatialFeature::Style => "style",
            SpatialFeature::DecorationDensity => "decoration_density",
            SpatialFeature::ColorScheme => "color_scheme",
        }
    }
}

/// Signed expert scores in [-5, 5] for the four spatial features.
///
/// Positive directions: more open/transparent, more classical, more ornate,
/// warmer palette.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureLabels {
    pub transparency: f64,
    pub style: f64,
    pub decoration_density: f64,
    pub color_scheme: f64,
}

pub const MAX_SCORE: f64 = 5.0;

impl FeatureLabels {
    pub fn new(
        transparency: f64,
        style: f64,
        decoration_density: f64,
        color_scheme: f64,
    ) -> Result<Self, SignalError> {
        let labels = Self {
            transparency,
            style,
            decoration_density,
            color_scheme,
        };
        labels.validate()?;
        Ok(labels)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        for feature in SpatialFeature::ALL {
            let s = self.score(feature);
            if !(s.is_finite() && (-MAX_SCORE..=MAX_SCORE).contains(&s)) {
                return Err(SignalError::ScoreOutOfRange {
                    feature: feature.as_str(),
                    score: s,
                });
            }
        }
        Ok(())
    }

    pub fn score(&self, feature: SpatialFeature) -> f64 {
        match feature {
            SpatialFeature::Transparency => self.transparency,
            SpatialFeature::Style => self.style,
            SpatialFeature::DecorationDensity => self.decoration_density,
            SpatialFeature::ColorScheme => self.color_scheme,
        }
    }

    /// |score| / 5, so integral scores map onto steps of 0.2.
    pub fn weight(&self, feature: SpatialFeature) -> f64 {
        self.score(feature).abs() / MAX_SCORE
    }
}

/// Label attached to a segment: either a command or the four feature scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentLabel {
    Command(CommandLabel),
    Features(FeatureLabels),
}

impl SegmentLabel {
    pub fn command(&self) -> Option<CommandLabel> {
        match self {
            SegmentLabel::Command(c) => Some(*c),
            SegmentLabel::Features(_) => None,
        }
    }

    pub fn features(&self) -> Option<&FeatureLabels> {
        match self {
            SegmentLabel::Features(f) => Some(f),
            SegmentLabel::Command(_) => None,
        }
    }
}

/// Butterworth band-pass parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterSpec {
    pub low_cut: f64,
    pub high_cut: f64,
    /// Butterworth order of each band edge (high-pass and low-pass).
    pub order: usize,
}

impl Default for FilterSpec {
    fn default() -> Self {
        Self {
            low_cut: 0.5,
            high_cut: 45.0,
            order: 8,
        }
    }
}

impl FilterSpec {
    pub fn validate(&self, sample_rate: f64) -> Result<(), SignalError> {
        let nyquist = sample_rate / 2.0;
        if self.order == 0 {
            return Err(SignalError::InvalidFilter("order must be positive".into()));
        }
        if !(self.low_cut > 0.0 && self.low_cut < self.high_cut) {
            return Err(SignalError::InvalidFilter(format!(
                "cutoffs must satisfy 0 < low ({}) < high ({})",
                self.low_cut, self.high_cut
            )));
        }
        if self.high_cut >= nyquist {
            return Err(SignalError::InvalidFilter(format!(
                "high cutoff {} Hz is at or above Nyquist {} Hz",
                self.high_cut, nyquist
            )));
        }
        Ok(())
    }
}
