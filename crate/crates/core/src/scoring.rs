//! Log-likelihood-ratio scoring of track hypotheses.
//!
//! A hypothesis score is the running sum of per-frame increments. A frame
//! with a detection contributes a kinematic term (Gaussian measurement
//! likelihood against uniform clutter over the measurement volume), a
//! detector-confidence term and an appearance-similarity term. A skipped
//! frame contributes only the missed-detection term. The constant prior
//! ratio is dropped.

use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector, Vector3, Vector6};

use crate::error::{Error, Result};
use crate::filter::{log_det_spd, mahalanobis_sq, ConstantVelocity, CvBelief};
use crate::types::{Detection, ObservationMode, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScoreIncrement {
    pub kin: f64,
    pub conf: f64,
    pub sim: f64,
}

impl ScoreIncrement {
    pub fn total(&self) -> f64 {
        self.kin + self.conf + self.sim
    }
}

impl std::ops::AddAssign for ScoreIncrement {
    fn add_assign(&mut self, rhs: Self) {
        self.kin += rhs.kin;
        self.conf += rhs.conf;
        self.sim += rhs.sim;
    }
}

/// `log N(ν; 0, S) − log U(V)` = `−½ log((2π)^m det S) − d²/2 + log V`.
pub fn kinematic_increment<const M: usize>(
    innovation: &SVector<f64, M>,
    innovation_cov: &SMatrix<f64, M, M>,
    measurement_volume: f64,
) -> Result<f64> {
    if !(measurement_volume > 0.0) {
        return Err(Error::InvalidValue(format!(
            "measurement volume {measurement_volume} must be > 0"
        )));
    }
    let d2 = mahalanobis_sq(innovation, innovation_cov)?;
    let log_det = log_det_spd(innovation_cov)?;
    Ok(-0.5 * (M as f64 * (2.0 * PI).ln() + log_det) - 0.5 * d2 + measurement_volume.ln())
}

pub fn confidence_increment(confidence: f64) -> Result<f64> {
    if !(confidence > 0.0 && confidence <= 1.0) {
        return Err(Error::InvalidValue(format!(
            "confidence {confidence} outside (0, 1]"
        )));
    }
    Ok(confidence.ln())
}

/// Increment for a frame the hypothesis skips.
pub fn skip_increment(detect_prob: f64, false_alarm_prob: f64) -> ScoreIncrement {
    ScoreIncrement {
        kin: 0.0,
        conf: ((1.0 - detect_prob) / (1.0 - false_alarm_prob)).ln(),
        sim: 0.0,
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// `log Σ_h exp(cos(query, h))`, or `None` for an empty candidate set.
pub fn similarity_log_normalizer<'a, I>(query: &[f64], candidates: I) -> Option<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let sims: Vec<f64> = candidates.into_iter().map(|h| cosine(query, h)).collect();
    let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if sims.is_empty() {
        return None;
    }
    Some(max + sims.iter().map(|s| (s - max).exp()).sum::<f64>().ln())
}

/// Log softmax probability of `matched` among the previous-frame candidates.
/// The denominator includes the matched embedding.
pub fn similarity_increment(query: &[f64], matched: &[f64], candidates: &[&[f64]]) -> f64 {
    match similarity_log_normalizer(query, candidates.iter().copied()) {
        Some(log_norm) => cosine(query, matched) - log_norm,
        None => 0.0,
    }
}

pub fn accumulate(score: f64, increment: ScoreIncrement) -> f64 {
    score + increment.total()
}

/// Logistic map from log-likelihood ratio to track probability.
pub fn score_to_probability(llr: f64) -> f64 {
    if llr >= 0.0 {
        1.0 / (1.0 + (-llr).exp())
    } else {
        let e = llr.exp();
        e / (1.0 + e)
    }
}

/// Scores hypothesis growth with a constant-velocity Kalman filter.
#[derive(Debug, Clone)]
pub struct HypothesisScorer {
    pub model: ConstantVelocity,
    pub measurement_volume: f64,
    pub detect_prob: f64,
    pub false_alarm_prob: f64,
    config: TrackerConfig,
}

impl HypothesisScorer {
    pub fn new(config: &TrackerConfig) -> Self {
        Self {
            model: ConstantVelocity::from_config(config),
            measurement_volume: config.measurement_volume_m3,
            detect_prob: config.detect_prob,
            false_alarm_prob: config.false_alarm_prob,
            config: config.clone(),
        }
    }

    /// Prior velocity spread for a fresh track: the class velocity limit is
    /// treated as a ~3σ bound, vertical motion is capped at 1 m/s.
    pub fn initial_velocity_std(&self, det: &Detection) -> Vector3<f64> {
        let s = self.config.velocity_limit(&det.class) / 3.0;
        Vector3::new(s, s, s.min(1.0))
    }

    /// First detection of a hypothesis: belief seeded from it, confidence term only.
    pub fn start(&self, det: &Detection) -> Result<(CvBelief, ScoreIncrement)> {
        let belief = self.model.initiate(
            &det.position,
            det.velocity.as_ref(),
            self.initial_velocity_std(det),
        );
        let inc = ScoreIncrement {
            conf: confidence_increment(det.confidence)?,
            ..Default::default()
        };
        Ok((belief, inc))
    }

    /// Predicts `belief` from `belief_time` to the detection and absorbs it.
    pub fn extend(
        &self,
        belief: &CvBelief,
        belief_time: f64,
        det: &Detection,
        sim: f64,
    ) -> Result<(CvBelief, ScoreIncrement)> {
        let predicted = self.model.predict(belief, det.timestamp - belief_time)?;
        let (posterior, kin) = match (self.model.mode, det.velocity) {
            (ObservationMode::PositionVelocity, Some(v)) => {
                let z = Vector6::new(
                    det.position.x,
                    det.position.y,
                    det.position.z,
                    v.x,
                    v.y,
                    v.z,
                );
                let u = self.model.update_position_velocity(&predicted, &z)?;
                let kin =
                    kinematic_increment(&u.innovation, &u.innovation_cov, self.measurement_volume)?;
                (u.posterior, kin)
            }
            _ => {
                let u = self.model.update_position(&predicted, &det.position)?;
                let kin =
                    kinematic_increment(&u.innovation, &u.innovation_cov, self.measurement_volume)?;
                (u.posterior, kin)
            }
        };
        let inc = ScoreIncrement {
            kin,
            conf: confidence_increment(det.confidence)?,
            sim,
        };
        Ok((posterior, inc))
    }

    pub fn skip(&self) -> ScoreIncrement {
        skip_increment(self.detect_prob, self.false_alarm_prob)
    }
}
