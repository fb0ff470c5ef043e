//! Shared domain vocabulary: detections, object states and tracker configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ConfigViolation, Error, Result};

/// Object category reported by the detector.
///
/// Unknown labels are kept verbatim so the engine works with any label set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ClassLabel {
    Car,
    Truck,
    Bus,
    Trailer,
    Pedestrian,
    Motorcycle,
    Bicycle,
    Other(String),
}

impl ClassLabel {
    pub fn as_str(&self) -> &str {
        match self {
            ClassLabel::Car => "car",
            ClassLabel::Truck => "truck",
            ClassLabel::Bus => "bus",
            ClassLabel::Trailer => "trailer",
            ClassLabel::Pedestrian => "pedestrian",
            ClassLabel::Motorcycle => "motorcycle",
            ClassLabel::Bicycle => "bicycle",
            ClassLabel::Other(s) => s,
        }
    }
}

impl FromStr for ClassLabel {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "car" => ClassLabel::Car,
            "truck" => ClassLabel::Truck,
            "bus" => ClassLabel::Bus,
            "trailer" => ClassLabel::Trailer,
            "pedestrian" => ClassLabel::Pedestrian,
            "motorcycle" => ClassLabel::Motorcycle,
            "bicycle" => ClassLabel::Bicycle,
            other => ClassLabel::Other(other.to_string()),
        })
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for ClassLabel {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for ClassLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse()
            .unwrap_or_else(|e: std::convert::Infallible| match e {}))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DetectionId(pub u64);

impl fmt::Display for DetectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}", self.0)
    }
}

/// A single detector output in the global frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub id: DetectionId,
    pub frame_index: usize,
    /// Seconds, strictly increasing with `frame_index` within a scene.
    pub timestamp: f64,
    pub class: ClassLabel,
    pub position: Vector3<f64>,
    pub yaw: f64,
    /// Box length, width, height in meters.
    pub size: Vector3<f64>,
    pub velocity: Option<Vector3<f64>>,
    /// Detector score in (0, 1].
    pub confidence: f64,
    /// Unit-norm appearance embedding.
    pub embedding: Option<Vec<f64>>,
}

impl Detection {
    /// Checks the per-detection invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.size.iter().all(|&s| s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidValue(format!(
                "detection {}: size components must be positive",
                self.id
            )));
        }
        if !(self.confidence > 0.0 && self.confidence <= 1.0) {
            return Err(Error::InvalidValue(format!(
                "detection {}: confidence {} outside (0, 1]",
                self.id, self.confidence
            )));
        }
        if !self.position.iter().all(|p| p.is_finite()) || !self.timestamp.is_finite() {
            return Err(Error::InvalidValue(format!(
                "detection {}: non-finite position or timestamp",
                self.id
            )));
        }
        if let Some(e) = &self.embedding {
            let norm = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::InvalidValue(format!(
                    "detection {}: embedding norm {norm} is not 1",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

/// Full object state; only position and velocity are filtered.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectState {
    pub position: Vector3<f64>,
    pub yaw: f64,
    pub velocity: Vector3<f64>,
    pub size: Vector3<f64>,
}

/// Wraps an angle into (-π, π].
pub fn normalize_yaw(angle: f64) -> Result<f64> {
    if !angle.is_finite() {
        return Err(Error::InvalidValue(format!("yaw {angle} is not finite")));
    }
    if angle > -PI && angle <= PI {
        return Ok(angle);
    }
    let mut a = angle.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    // rem_euclid maps -π to π already, but 2π - ε rounding can land on -π.
    if a <= -PI {
        a += 2.0 * PI;
    }
    Ok(a)
}

/// Which detector outputs feed the Kalman update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ObservationMode {
    #[default]
    Position,
    PositionVelocity,
}

/// Tracker parameters. Key names carry their units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Frames of history behind the current one kept in the association window.
    pub window_length_frames: usize,
    /// Extra frames a dormant track's last detection survives past the window.
    pub dormant_horizon_frames: usize,
    /// Hypotheses retained per family (root detection).
    pub max_hypotheses: usize,
    /// White-acceleration spectral density per axis.
    pub process_accel_psd_m2ps3: [f64; 3],
    pub measurement_pos_std_m: [f64; 3],
    pub measurement_vel_std_mps: [f64; 3],
    pub observation_mode: ObservationMode,
    /// Volume over which clutter is assumed uniform.
    pub measurement_volume_m3: f64,
    pub detect_prob: f64,
    pub false_alarm_prob: f64,
    /// Per-class velocity limit used by the distance gate.
    pub v_lim_mps: BTreeMap<String, f64>,
    pub default_v_lim_mps: f64,
    /// Upper bound on the distance gate regardless of the frame gap.
    pub distance_cap_m: f64,
    pub init_hits: u32,
    pub delete_misses: u32,
    /// Emit coasted (prediction-only) records for active tracks.
    pub emit_coasted: bool,
    /// Branch-and-bound node budget per solve.
    pub solver_node_limit: usize,
    pub metric_match_threshold_m: f64,
    pub recall_levels: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let v_lim = [
            ("car", 30.0),
            ("truck", 25.0),
            ("bus", 20.0),
            ("trailer", 20.0),
            ("pedestrian", 4.0),
            ("motorcycle", 25.0),
            ("bicycle", 10.0),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        Self {
            window_length_frames: 4,
            dormant_horizon_frames: 0,
            max_hypotheses: 200,
            process_accel_psd_m2ps3: [1.0, 1.0, 0.1],
            measurement_pos_std_m: [0.3, 0.3, 0.3],
            measurement_vel_std_mps: [0.5, 0.5, 0.5],
            observation_mode: ObservationMode::Position,
            measurement_volume_m3: 2.0e4,
            detect_prob: 0.9,
            false_alarm_prob: 0.1,
            v_lim_mps: v_lim,
            default_v_lim_mps: 20.0,
            distance_cap_m: 30.0,
            init_hits: 2,
            delete_misses: 4,
            emit_coasted: true,
            solver_node_limit: 200_000,
            metric_match_threshold_m: 2.0,
            recall_levels: 40,
        }
    }
}

impl TrackerConfig {
    pub fn velocity_limit(&self, class: &ClassLabel) -> f64 {
        self.v_lim_mps
            .get(class.as_str())
            .copied()
            .unwrap_or(self.default_v_lim_mps)
    }

    /// Parses a TOML document; missing keys take their defaults.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse {
            line: e.span().map(|sp| line_of(s, sp.start)).unwrap_or(0),
            message: e.message().to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("tracker config is always representable in TOML")
    }
}

pub(crate) fn line_of(s: &str, byte: usize) -> usize {
    s[..byte.min(s.len())]
        .bytes()
        .filter(|&b| b == b'\n')
        .count()
        + 1
}

/// Returns the config unchanged when every invariant holds, otherwise the
/// full list of violations.
pub fn validate_config(
    config: TrackerConfig,
) -> std::result::Result<TrackerConfig, Vec<ConfigViolation>> {
    let mut v = Vec::new();
    let mut bad = |field: &'static str, message: &str| {
        v.push(ConfigViolation {
            field,
            message: message.to_string(),
        })
    };
    let positive = |x: f64| x.is_finite() && x > 0.0;
    let open_unit = |x: f64| x > 0.0 && x < 1.0;

    if config.window_length_frames < 2 {
        bad("window_length_frames", "window_length_T >= 2");
    }
    if config.max_hypotheses < 1 {
        bad("max_hypotheses", "max_hypotheses_M >= 1");
    }
    if !config
        .process_accel_psd_m2ps3
        .iter()
        .all(|&q| q.is_finite() && q >= 0.0)
    {
        bad(
            "process_accel_psd_m2ps3",
            "process noise must be non-negative",
        );
    }
    if !config.measurement_pos_std_m.iter().all(|&r| positive(r)) {
        bad(
            "measurement_pos_std_m",
            "measurement noise must be positive",
        );
    }
    if config.observation_mode == ObservationMode::PositionVelocity
        && !config.measurement_vel_std_mps.iter().all(|&r| positive(r))
    {
        bad(
            "measurement_vel_std_mps",
            "velocity measurement noise must be positive",
        );
    }
    if !positive(config.measurement_volume_m3) {
        bad("measurement_volume_m3", "measurement_volume_V > 0");
    }
    if !open_unit(config.detect_prob) {
        bad("detect_prob", "detect_prob_P_D in open interval (0, 1)");
    }
    if !open_unit(config.false_alarm_prob) {
        bad(
            "false_alarm_prob",
            "false_alarm_P_FA in open interval (0, 1)",
        );
    }
    if !positive(config.default_v_lim_mps) || !config.v_lim_mps.values().all(|&x| positive(x)) {
        bad("v_lim_mps", "velocity limits must be positive");
    }
    if !positive(config.distance_cap_m) {
        bad("distance_cap_m", "distance cap must be positive");
    }
    if config.init_hits < 1 {
        bad("init_hits", "init_hits >= 1");
    }
    if config.delete_misses < 1 {
        bad("delete_misses", "delete_misses >= 1");
    }
    if config.solver_node_limit < 1 {
        bad("solver_node_limit", "solver_node_limit >= 1");
    }
    if !positive(config.metric_match_threshold_m) {
        bad(
            "metric_match_threshold_m",
            "match threshold must be positive",
        );
    }
    if config.recall_levels < 1 {
        bad("recall_levels", "recall_levels_L >= 1");
    }

    if v.is_empty() {
        Ok(config)
    } else {
        Err(v)
    }
}
