//! Dataset directory: `dataset.json` plus one EEG CSV per segment.
//!
//! ```json
//! {"v":1,"participant_id":"p01","source":"synthetic","label_kind":"command",
//!  "segments":[{"file":"seg_0000.csv","label":{"command":"increase_transparency"}}]}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{load_recording, save_recording, IngestError};
use crate::signal::{EegRecording, SegmentLabel};

pub const DATASET_FILE: &str = "dataset.json";
const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    Command,
    Features,
}

impl LabelKind {
    fn of(label: &SegmentLabel) -> Self {
        match label {
            SegmentLabel::Command(_) => LabelKind::Command,
            SegmentLabel::Features(_) => LabelKind::Features,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegment {
    pub recording: EegRecording,
    pub label: SegmentLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSegmentSet {
    pub participant_id: String,
    pub source: String,
    pub segments: Vec<LabeledSegment>,
}

impl LabeledSegmentSet {
    /// Checks label homogeneity, label ranges and consistent segment layout.
    pub fn validate(&self) -> Result<LabelKind, IngestError> {
        let first = self.segments.first().ok_or_else(|| IngestError::Manifest("no segments".into()))?;
        let kind = LabelKind::of(&first.label);
        for (i, seg) in self.segments.iter().enumerate() {
            if LabelKind::of(&seg.label) != kind {
                return Err(IngestError::Manifest(format!("segment {i} mixes label kinds")));
            }
            if let SegmentLabel::Features(f) = &seg.label {
                f.validate()?;
            }
            if seg.recording.channel_names() != first.recording.channel_names()
                || seg.recording.sample_rate() != first.recording.sample_rate()
            {
                return Err(IngestError::Manifest(format!("segment {i} has a different channel layout")));
            }
        }
        Ok(kind)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    v: u32,
    participant_id: String,
    source: String,
    label_kind: LabelKind,
    segments: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    file: String,
    label: SegmentLabel,
}

pub fn save_dataset(set: &LabeledSegmentSet, dir: &Path) -> Result<(), IngestError> {
    let label_kind = set.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| IngestError::io(dir, e))?;
    let mut segments = Vec::with_capacity(set.segments.len());
    for (i, seg) in set.segments.iter().enumerate() {
        let file = format!("seg_{i:04}.csv");
        save_recording(&seg.recording, &dir.join(&file))?;
        segments.push(ManifestEntry { file, label: seg.label });
    }
    let manifest = Manifest {
        v: DATASET_VERSION,
        participant_id: set.participant_id.clone(),
        source: set.source.clone(),
        label_kind,
        segments,
    };
    let path = dir.join(DATASET_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json).map_err(|e| IngestError::io(&path, e))
}

pub fn load_dataset(dir: &Path) -> Result<LabeledSegmentSet, IngestError> {
    let path = dir.join(DATASET_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| IngestError::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| IngestError::Manifest(e.to_string()))?;
    if manifest.v != DATASET_VERSION {
        return Err(IngestError::Manifest(format!("unsupported version {}", manifest.v)));
    }
    let segments = manifest
        .segments
        .into_iter()
        .map(|entry| {
            if Path::new(&entry.file).components().count() != 1 {
                return Err(IngestError::Manifest(format!("segment path `{}` must be a bare file name", entry.file)));
            }
            Ok(LabeledSegment { recording: load_recording(&dir.join(&entry.file))?, label: entry.label })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let set = LabeledSegmentSet { participant_id: manifest.participant_id, source: manifest.source, segments };
    if set.validate()? != manifest.label_kind {
        return Err(IngestError::Manifest("label_kind does not match segment labels".into()));
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{CommandLabel, FeatureLabels};
    use ndarray::Array2;

    fn rec(v: f64) -> EegRecording {
        EegRecording::from_data(64.0, Array2::from_elem((2, 8), v)).unwrap()
    }

    #[test]
    fn round_trip() {
        let set = LabeledSegmentSet {
            participant_id: "p01".into(),
            source: "unit".into(),
            segments: vec![
                LabeledSegment { recording: rec(1.0), label: SegmentLabel::Command(CommandLabel::MoreClassicalStyle) },
                LabeledSegment { recording: rec(2.0), label: SegmentLabel::Command(CommandLabel::IncreaseTransparency) },
            ],
        };
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&set, dir.path()).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap(), set);
    }

    #[test]
    fn mixed_kinds_rejected() {
        let set = LabeledSegmentSet {
            participant_id: "p".into(),
            source: "s".into(),
            segments: vec![
                LabeledSegment { recording: rec(1.0), label: SegmentLabel::Command(CommandLabel::MoreClassicalStyle) },
                LabeledSegment {
                    recording: rec(1.0),
                    label: SegmentLabel::Features(FeatureLabels::new(1.0, 0.0, -2.0, 5.0).unwrap()),
                },
            ],
        };
        assert!(matches!(set.validate(), Err(IngestError::Manifest(_))));
    }

    #[test]
    fn unknown_manifest_fields_rejected() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join(DATASET_FILE),
            r#"{"v":1,"participant_id":"p","source":"s","label_kind":"command","segments":[],"extra":1}"#,
        )
        .unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(IngestError::Manifest(_))));
    }
}
