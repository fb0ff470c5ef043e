//! Line-delimited JSON records for detections, ground truth and tracks, plus
//! the run manifest.

use std::collections::BTreeMap;
use std::io::BufRead;

use nalgebra::Vector3;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::GroundTruthRecord;
use crate::track::{TrackId, TrackOutput};
use crate::types::{ClassLabel, Detection, DetectionId, TrackerConfig};

pub const FORMAT_VERSION: u32 = 1;

fn current_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    #[serde(default = "current_version")]
    pub format_version: u32,
    pub scene_id: String,
    pub frame_index: usize,
    pub timestamp: f64,
    pub class: ClassLabel,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vz: Option<f64>,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection_id: Option<u64>,
}

impl DetectionRecord {
    pub fn from_detection(scene_id: &str, d: &Detection) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            scene_id: scene_id.to_string(),
            frame_index: d.frame_index,
            timestamp: d.timestamp,
            class: d.class.clone(),
            x: d.position.x,
            y: d.position.y,
            z: d.position.z,
            yaw: d.yaw,
            l: d.size.x,
            w: d.size.y,
            h: d.size.z,
            vx: d.velocity.map(|v| v.x),
            vy: d.velocity.map(|v| v.y),
            vz: d.velocity.map(|v| v.z),
            confidence: d.confidence,
            embedding: d.embedding.clone(),
            detection_id: Some(d.id.0),
        }
    }

    /// `fallback_id` is used when the record carries no id of its own.
    pub fn to_detection(&self, fallback_id: u64) -> Result<Detection> {
        let velocity = match (self.vx, self.vy, self.vz) {
            (Some(x), Some(y), Some(z)) => Some(Vector3::new(x, y, z)),
            (None, None, None) => None,
            _ => {
                return Err(Error::InvalidValue(
                    "velocity needs all of vx, vy, vz".into(),
                ))
            }
        };
        let d = Detection {
            id: DetectionId(self.detection_id.unwrap_or(fallback_id)),
            frame_index: self.frame_index,
            timestamp: self.timestamp,
            class: self.class.clone(),
            position: Vector3::new(self.x, self.y, self.z),
            yaw: self.yaw,
            size: Vector3::new(self.l, self.w, self.h),
            velocity,
            confidence: self.confidence,
            embedding: self.embedding.clone(),
        };
        d.validate()?;
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthLine {
    #[serde(default = "current_version")]
    pub format_version: u32,
    pub scene_id: String,
    pub frame_index: usize,
    pub timestamp: f64,
    pub gt_track_id: u64,
    pub class: ClassLabel,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
}

impl GroundTruthLine {
    pub fn from_record(scene_id: &str, g: &GroundTruthRecord) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            scene_id: scene_id.to_string(),
            frame_index: g.frame_index,
            timestamp: g.timestamp,
            gt_track_id: g.gt_track_id,
            class: g.class.clone(),
            x: g.position.x,
            y: g.position.y,
            z: g.position.z,
            yaw: g.yaw,
            l: g.size.x,
            w: g.size.y,
            h: g.size.z,
        }
    }

    pub fn to_record(&self) -> GroundTruthRecord {
        GroundTruthRecord {
            frame_index: self.frame_index,
            timestamp: self.timestamp,
            gt_track_id: self.gt_track_id,
            class: self.class.clone(),
            position: Vector3::new(self.x, self.y, self.z),
            yaw: self.yaw,
            size: Vector3::new(self.l, self.w, self.h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackRecord {
    #[serde(default = "current_version")]
    pub format_version: u32,
    pub scene_id: String,
    pub frame_index: usize,
    pub timestamp: f64,
    pub track_id: u64,
    pub class: ClassLabel,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
    pub l: f64,
    pub w: f64,
    pub h: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub score: f64,
    pub coasted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detection_id: Option<u64>,
}

impl TrackRecord {
    pub fn from_output(scene_id: &str, o: &TrackOutput) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            scene_id: scene_id.to_string(),
            frame_index: o.frame_index,
            timestamp: o.timestamp,
            track_id: o.track_id.0,
            class: o.class.clone(),
            x: o.position.x,
            y: o.position.y,
            z: o.position.z,
            yaw: o.yaw,
            l: o.size.x,
            w: o.size.y,
            h: o.size.z,
            vx: o.velocity.x,
            vy: o.velocity.y,
            vz: o.velocity.z,
            score: o.score,
            coasted: o.coasted,
            detection_id: o.detection_id.map(|d| d.0),
        }
    }

    pub fn to_output(&self) -> TrackOutput {
        TrackOutput {
            frame_index: self.frame_index,
            timestamp: self.timestamp,
            track_id: TrackId(self.track_id),
            class: self.class.clone(),
            position: Vector3::new(self.x, self.y, self.z),
            yaw: self.yaw,
            size: Vector3::new(self.l, self.w, self.h),
            velocity: Vector3::new(self.vx, self.vy, self.vz),
            score: self.score,
            coasted: self.coasted,
            detection_id: self.detection_id.map(DetectionId),
        }
    }
}

/// Parses one record per non-blank line. Errors carry the 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut s = String::new();
    for r in records {
        s.push_str(&serde_json::to_string(r).expect("records serialize"));
        s.push('\n');
    }
    s
}

/// Detections of one scene, ready for [`crate::Tracker::run`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneDetections {
    pub frames: Vec<(usize, f64)>,
    pub detections: Vec<Detection>,
}

/// Groups records by scene id. Records without an id get one from their
/// position in the file. Frames are inferred from the records and must
/// carry one timestamp each.
pub fn group_detections(records: &[DetectionRecord]) -> Result<BTreeMap<String, SceneDetections>> {
    let mut scenes: BTreeMap<String, SceneDetections> = BTreeMap::new();
    let mut stamps: BTreeMap<(String, usize), f64> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        let d = r.to_detection(i as u64).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        match stamps.get(&(r.scene_id.clone(), r.frame_index)) {
            Some(&t) if t != r.timestamp => {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!(
                        "frame {} has timestamps {t} and {}",
                        r.frame_index, r.timestamp
                    ),
                })
            }
            Some(_) => {}
            None => {
                stamps.insert((r.scene_id.clone(), r.frame_index), r.timestamp);
            }
        }
        scenes
            .entry(r.scene_id.clone())
            .or_default()
            .detections
            .push(d);
    }
    for ((scene, frame), t) in stamps {
        scenes
            .get_mut(&scene)
            .expect("scene seen")
            .frames
            .push((frame, t));
    }
    for s in scenes.values_mut() {
        s.detections.sort_by_key(|d| d.frame_index);
    }
    Ok(scenes)
}

/// Latency summary in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub p50_s: f64,
    pub p95_s: f64,
    pub max_s: f64,
}

/// Nearest-rank percentile of `samples` (`q` in `[0, 1]`).
pub fn percentile(samples: &[f64], q: f64) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let rank = ((q * s.len() as f64).ceil() as usize).clamp(1, s.len());
    s[rank - 1]
}

impl LatencyStats {
    pub fn from_samples(samples: &[f64]) -> Self {
        Self {
            p50_s: percentile(samples, 0.5),
            p95_s: percentile(samples, 0.95),
            max_s: samples.iter().copied().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub config: TrackerConfig,
    pub inputs: Vec<String>,
    pub seed: Option<u64>,
    pub frames: usize,
    /// Wall-clock seconds spent in each tracker step.
    pub latency_samples_s: Vec<f64>,
    pub latency: LatencyStats,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: TrackerConfig,
        inputs: Vec<String>,
        seed: Option<u64>,
        samples: Vec<f64>,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            command: command.to_string(),
            config,
            inputs,
            seed,
            frames: samples.len(),
            latency: LatencyStats::from_samples(&samples),
            latency_samples_s: samples,
        }
    }
}
