//! Deterministic synthetic scenes.
//!
//! Every random draw comes from its own generator keyed by
//! `(seed, frame, object, purpose)`, so toggling one effect (say, clutter)
//! leaves all other draws untouched.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::GroundTruthRecord;
use crate::types::{line_of, normalize_yaw, ClassLabel, Detection, DetectionId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occlusion {
    pub object: usize,
    pub start_frame: usize,
    pub length_frames: usize,
}

/// Heading change applied at the start of `frame`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Turn {
    pub frame: usize,
    pub angle_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub class: ClassLabel,
    pub position_m: [f64; 3],
    pub velocity_mps: [f64; 3],
    #[serde(default)]
    pub first_frame: usize,
    /// Exclusive; `None` runs to the end of the scene.
    #[serde(default)]
    pub last_frame: Option<usize>,
    #[serde(default)]
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub seed: u64,
    pub scene_id: String,
    pub duration_frames: usize,
    pub frame_rate_hz: f64,
    pub region_min_m: [f64; 3],
    pub region_max_m: [f64; 3],
    pub objects: Vec<ObjectSpec>,
    /// Extra objects per class, placed and oriented at random.
    pub random_objects: BTreeMap<String, usize>,
    pub position_noise_std_m: f64,
    pub size_noise_std_m: f64,
    pub velocity_noise_std_mps: f64,
    pub dropout_prob: f64,
    /// Expected false detections per frame, uniform over the region.
    pub clutter_rate: f64,
    pub occlusions: Vec<Occlusion>,
    /// Random occlusions: each object draws this many intervals.
    pub random_occlusions_per_object: usize,
    pub random_occlusion_max_frames: usize,
    /// 0 disables embeddings.
    pub embedding_dim: usize,
    pub embedding_perturb_std_rad: f64,
    pub true_confidence_beta: [f64; 2],
    pub clutter_confidence_beta: [f64; 2],
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            scene_id: "scene-0".into(),
            duration_frames: 40,
            frame_rate_hz: 2.0,
            region_min_m: [-50.0, -50.0, -1.0],
            region_max_m: [50.0, 50.0, 3.0],
            objects: Vec::new(),
            random_objects: BTreeMap::new(),
            position_noise_std_m: 0.2,
            size_noise_std_m: 0.05,
            velocity_noise_std_mps: 0.3,
            dropout_prob: 0.0,
            clutter_rate: 0.0,
            occlusions: Vec::new(),
            random_occlusions_per_object: 0,
            random_occlusion_max_frames: 3,
            embedding_dim: 16,
            embedding_perturb_std_rad: 0.1,
            true_confidence_beta: [8.0, 2.0],
            clutter_confidence_beta: [2.0, 5.0],
        }
    }
}

const PURPOSE_SPAWN: u64 = 1;
const PURPOSE_NOISE: u64 = 2;
const PURPOSE_DROPOUT: u64 = 3;
const PURPOSE_CLUTTER: u64 = 4;
const PURPOSE_EMBED: u64 = 5;
const PURPOSE_CONFIDENCE: u64 = 6;
const PURPOSE_OCCLUSION: u64 = 7;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream(seed: u64, frame: u64, object: u64, purpose: u64) -> ChaCha8Rng {
    let key = [seed, frame, object, purpose]
        .iter()
        .fold(0u64, |h, &x| splitmix(h ^ splitmix(x)));
    ChaCha8Rng::seed_from_u64(key)
}

/// Nominal box size `(l, w, h)` for a class.
pub fn nominal_size(class: &ClassLabel) -> Vector3<f64> {
    match class {
        ClassLabel::Car => Vector3::new(4.6, 1.9, 1.7),
        ClassLabel::Truck => Vector3::new(7.0, 2.5, 3.0),
        ClassLabel::Bus => Vector3::new(11.0, 2.9, 3.5),
        ClassLabel::Trailer => Vector3::new(12.0, 2.9, 3.8),
        ClassLabel::Pedestrian => Vector3::new(0.7, 0.7, 1.8),
        ClassLabel::Motorcycle => Vector3::new(2.1, 0.8, 1.5),
        ClassLabel::Bicycle => Vector3::new(1.8, 0.6, 1.3),
        ClassLabel::Other(_) => Vector3::new(1.0, 1.0, 1.0),
    }
}

/// Typical `(min, max)` ground speed for randomly placed objects.
fn speed_range(class: &ClassLabel) -> (f64, f64) {
    match class {
        ClassLabel::Pedestrian => (0.8, 1.8),
        ClassLabel::Bicycle => (3.0, 6.0),
        ClassLabel::Car | ClassLabel::Motorcycle => (4.0, 12.0),
        ClassLabel::Truck | ClassLabel::Bus | ClassLabel::Trailer => (3.0, 9.0),
        ClassLabel::Other(_) => (0.0, 2.0),
    }
}

impl ScenarioSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: Self = toml::from_str(s).map_err(|e| Error::Parse {
            line: e.span().map(|sp| line_of(s, sp.start)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario spec is always representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !(self.frame_rate_hz.is_finite() && self.frame_rate_hz > 0.0) {
            bad.push("frame_rate_hz must be positive".to_string());
        }
        if (0..3).any(|i| !(self.region_min_m[i] < self.region_max_m[i])) {
            bad.push("region_min_m must be below region_max_m on every axis".into());
        }
        for (name, v) in [
            ("position_noise_std_m", self.position_noise_std_m),
            ("size_noise_std_m", self.size_noise_std_m),
            ("velocity_noise_std_mps", self.velocity_noise_std_mps),
            ("embedding_perturb_std_rad", self.embedding_perturb_std_rad),
            ("clutter_rate", self.clutter_rate),
        ] {
            if !nonneg(v) {
                bad.push(format!("{name} must be >= 0"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout_prob) {
            bad.push("dropout_prob must be in [0, 1)".into());
        }
        for b in [self.true_confidence_beta, self.clutter_confidence_beta] {
            if !(b[0] > 0.0 && b[1] > 0.0) {
                bad.push("confidence beta parameters must be positive".into());
            }
        }
        if let Some(o) = self
            .occlusions
            .iter()
            .find(|o| o.object >= self.object_count())
        {
            bad.push(format!(
                "occlusion refers to object {} of {}",
                o.object,
                self.object_count()
            ));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidValue(bad.join("; ")))
        }
    }

    pub fn object_count(&self) -> usize {
        self.objects.len() + self.random_objects.values().sum::<usize>()
    }

    pub fn frame_interval(&self) -> f64 {
        1.0 / self.frame_rate_hz
    }

    fn timestamp(&self, frame: usize) -> f64 {
        frame as f64 / self.frame_rate_hz
    }

    /// Explicit objects followed by the random ones, in class-name order.
    pub fn resolved_objects(&self) -> Vec<ObjectSpec> {
        let mut out = self.objects.clone();
        let (lo, hi) = (
            Vector3::from(self.region_min_m),
            Vector3::from(self.region_max_m),
        );
        for (class, &count) in &self.random_objects {
            let class: ClassLabel = class.parse().expect("infallible");
            for _ in 0..count {
                let mut rng = stream(self.seed, 0, out.len() as u64, PURPOSE_SPAWN);
                let span = hi - lo;
                let x = lo.x + span.x * rng.random_range(0.1..0.9);
                let y = lo.y + span.y * rng.random_range(0.1..0.9);
                let heading = rng.random_range(-PI..PI);
                let (smin, smax) = speed_range(&class);
                let speed = rng.random_range(smin..=smax);
                out.push(ObjectSpec {
                    position_m: [x, y, 0.5 * nominal_size(&class).z],
                    velocity_mps: [speed * heading.cos(), speed * heading.sin(), 0.0],
                    class: class.clone(),
                    first_frame: 0,
                    last_frame: None,
                    turns: Vec::new(),
                });
            }
        }
        out
    }

    /// Explicit occlusions plus the randomly drawn ones.
    pub fn resolved_occlusions(&self) -> Vec<Occlusion> {
        let mut out = self.occlusions.clone();
        if self.random_occlusions_per_object == 0 || self.random_occlusion_max_frames == 0 {
            return out;
        }
        for obj in 0..self.object_count() {
            let mut rng = stream(self.seed, 0, obj as u64, PURPOSE_OCCLUSION);
            for _ in 0..self.random_occlusions_per_object {
                out.push(Occlusion {
                    object: obj,
                    start_frame: rng.random_range(2..self.duration_frames.max(3)),
                    length_frames: rng.random_range(1..=self.random_occlusion_max_frames),
                });
            }
        }
        out
    }
}

/// A scene's ground truth and detections, each ordered by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub ground_truth: Vec<GroundTruthRecord>,
    pub detections: Vec<Detection>,
    /// `(frame, timestamp)` for every frame of the scene.
    pub frames: Vec<(usize, f64)>,
    /// Ground-truth id behind each detection; `None` for clutter.
    pub detection_sources: Vec<Option<u64>>,
}

fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-9 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Rotates unit vector `v` by `angle` towards a random orthogonal direction.
fn perturb(rng: &mut impl Rng, v: &[f64], angle: f64) -> Vec<f64> {
    let r = random_unit(rng, v.len());
    let dot: f64 = r.iter().zip(v).map(|(a, b)| a * b).sum();
    let mut u: Vec<f64> = r.iter().zip(v).map(|(a, b)| a - dot * b).collect();
    let n = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-12 {
        return v.to_vec();
    }
    u.iter_mut().for_each(|x| *x /= n);
    v.iter()
        .zip(&u)
        .map(|(a, b)| a * angle.cos() + b * angle.sin())
        .collect()
}

fn occluded(occ: &[Occlusion], object: usize, frame: usize) -> bool {
    occ.iter().any(|o| {
        o.object == object && frame >= o.start_frame && frame < o.start_frame + o.length_frames
    })
}

pub fn generate(spec: &ScenarioSpec) -> Result<Scene> {
    spec.validate()?;
    let objects = spec.resolved_objects();
    let occlusions = spec.resolved_occlusions();
    let dt = spec.frame_interval();
    let noise = Normal::new(0.0, spec.position_noise_std_m)
        .map_err(|e| Error::InvalidValue(e.to_string()))?;
    let velocity_noise = Normal::new(0.0, spec.velocity_noise_std_mps)
        .map_err(|e| Error::InvalidValue(e.to_string()))?;
    let size_noise =
        Normal::new(0.0, spec.size_noise_std_m).map_err(|e| Error::InvalidValue(e.to_string()))?;
    let beta = |p: [f64; 2]| Beta::new(p[0], p[1]).map_err(|e| Error::InvalidValue(e.to_string()));
    let (true_conf, clutter_conf) = (
        beta(spec.true_confidence_beta)?,
        beta(spec.clutter_confidence_beta)?,
    );
    let classes: Vec<ClassLabel> = {
        let mut c: Vec<ClassLabel> = objects.iter().map(|o| o.class.clone()).collect();
        c.sort_by(|a, b| a.as_str().cmp(b.as_str()));
        c.dedup();
        if c.is_empty() {
            c.push(ClassLabel::Car);
        }
        c
    };

    // Latent appearance per object; drifts a little each frame.
    let mut appearance: Vec<Option<Vec<f64>>> = (0..objects.len())
        .map(|i| {
            (spec.embedding_dim > 0).then(|| {
                random_unit(
                    &mut stream(spec.seed, 0, i as u64, PURPOSE_EMBED),
                    spec.embedding_dim,
                )
            })
        })
        .collect();
    let mut state: Vec<(Vector3<f64>, Vector3<f64>)> = objects
        .iter()
        .map(|o| (Vector3::from(o.position_m), Vector3::from(o.velocity_mps)))
        .collect();

    let mut scene = Scene {
        ground_truth: Vec::new(),
        detections: Vec::new(),
        frames: Vec::new(),
        detection_sources: Vec::new(),
    };
    let mut next_det = 0u64;
    for frame in 0..spec.duration_frames {
        let t = spec.timestamp(frame);
        scene.frames.push((frame, t));
        for (i, obj) in objects.iter().enumerate() {
            let (pos, vel) = &mut state[i];
            if frame > 0 {
                *pos += *vel * dt;
            }
            for turn in obj.turns.iter().filter(|tr| tr.frame == frame) {
                let rot =
                    Rotation3::from_axis_angle(&Unit::new_unchecked(Vector3::z()), turn.angle_rad);
                *vel = rot * *vel;
            }
            let alive = frame >= obj.first_frame && obj.last_frame.is_none_or(|l| frame < l);
            if !alive {
                continue;
            }
            let yaw = normalize_yaw(vel.y.atan2(vel.x))?;
            let size = nominal_size(&obj.class);
            scene.ground_truth.push(GroundTruthRecord {
                frame_index: frame,
                timestamp: t,
                gt_track_id: i as u64,
                class: obj.class.clone(),
                position: *pos,
                yaw,
                size,
            });
            let key = (spec.seed, frame as u64, i as u64);
            let mut emb_rng = stream(key.0, key.1, key.2, PURPOSE_EMBED);
            if let Some(a) = appearance[i].as_mut() {
                let angle =
                    spec.embedding_perturb_std_rad * emb_rng.sample::<f64, _>(StandardNormal);
                *a = perturb(&mut emb_rng, a, angle.abs());
            }
            if occluded(&occlusions, i, frame) {
                continue;
            }
            if stream(key.0, key.1, key.2, PURPOSE_DROPOUT).random::<f64>() < spec.dropout_prob {
                continue;
            }
            let mut nrng = stream(key.0, key.1, key.2, PURPOSE_NOISE);
            let offset = Vector3::from_fn(|_, _| noise.sample(&mut nrng));
            let measured_size = size.map(|s| (s + size_noise.sample(&mut nrng)).max(0.1));
            let vel_offset = Vector3::from_fn(|_, _| velocity_noise.sample(&mut nrng));
            let confidence = true_conf
                .sample(&mut stream(key.0, key.1, key.2, PURPOSE_CONFIDENCE))
                .clamp(1e-3, 1.0);
            scene.detections.push(Detection {
                id: DetectionId(next_det),
                frame_index: frame,
                timestamp: t,
                class: obj.class.clone(),
                position: *pos + offset,
                yaw,
                size: measured_size,
                velocity: Some(*vel + vel_offset),
                confidence,
                embedding: appearance[i].clone(),
            });
            scene.detection_sources.push(Some(i as u64));
            next_det += 1;
        }

        if spec.clutter_rate > 0.0 {
            let mut crng = stream(spec.seed, frame as u64, u64::MAX, PURPOSE_CLUTTER);
            let poisson =
                Poisson::new(spec.clutter_rate).map_err(|e| Error::InvalidValue(e.to_string()))?;
            let n = poisson.sample(&mut crng) as usize;
            let (lo, hi) = (
                Vector3::from(spec.region_min_m),
                Vector3::from(spec.region_max_m),
            );
            for _ in 0..n {
                let pos = Vector3::from_fn(|r, _| crng.random_range(lo[r]..hi[r]));
                let class = classes[crng.random_range(0..classes.len())].clone();
                let size =
                    nominal_size(&class).map(|s| (s + size_noise.sample(&mut crng)).max(0.1));
                scene.detections.push(Detection {
                    id: DetectionId(next_det),
                    frame_index: frame,
                    timestamp: t,
                    class,
                    position: pos,
                    yaw: crng.random_range(-PI..PI),
                    size,
                    velocity: None,
                    confidence: clutter_conf.sample(&mut crng).clamp(1e-3, 1.0),
                    embedding: (spec.embedding_dim > 0)
                        .then(|| random_unit(&mut crng, spec.embedding_dim)),
                });
                scene.detection_sources.push(None);
                next_det += 1;
            }
        }
    }
    Ok(scene)
}

/// Five pedestrians walking side by side, all hidden for frames 20 and 21
/// of a 40-frame, 2 Hz scene.
pub fn preset_occlusion_benchmark() -> ScenarioSpec {
    let objects = (0..5)
        .map(|i| ObjectSpec {
            class: ClassLabel::Pedestrian,
            position_m: [-20.0, -3.0 + 1.5 * i as f64, 0.9],
            velocity_mps: [1.3, 0.0, 0.0],
            first_frame: 0,
            last_frame: None,
            turns: Vec::new(),
        })
        .collect();
    ScenarioSpec {
        seed: 3,
        scene_id: "occlusion-benchmark".into(),
        duration_frames: 40,
        frame_rate_hz: 2.0,
        region_min_m: [-40.0, -40.0, -1.0],
        region_max_m: [40.0, 40.0, 3.0],
        objects,
        position_noise_std_m: 0.1,
        clutter_rate: 4.0,
        occlusions: (0..5)
            .map(|object| Occlusion {
                object,
                start_frame: 20,
                length_frames: 2,
            })
            .collect(),
        ..Default::default()
    }
}

/// Mixed traffic with clutter, dropouts and short random occlusions.
pub fn preset_ablation_scene(seed: u64) -> ScenarioSpec {
    ScenarioSpec {
        seed,
        scene_id: format!("ablation-{seed}"),
        duration_frames: 40,
        random_objects: BTreeMap::from([("car".into(), 8), ("pedestrian".into(), 8)]),
        position_noise_std_m: 0.2,
        dropout_prob: 0.1,
        clutter_rate: 6.0,
        random_occlusions_per_object: 2,
        random_occlusion_max_frames: 3,
        ..Default::default()
    }
}

/// About `n` detections per frame over a wide area.
pub fn preset_dense_scene(seed: u64, n: usize) -> ScenarioSpec {
    let clutter = (n / 10).max(1);
    let objects = n - clutter;
    ScenarioSpec {
        seed,
        scene_id: format!("dense-{seed}"),
        duration_frames: 20,
        region_min_m: [-150.0, -150.0, -1.0],
        region_max_m: [150.0, 150.0, 3.0],
        random_objects: BTreeMap::from([
            ("car".into(), objects / 2),
            ("pedestrian".into(), objects - objects / 2),
        ]),
        clutter_rate: clutter as f64,
        ..Default::default()
    }
}
