//! Shared fixtures for the benchmarks.

use std::collections::BTreeMap;

use slidewin::sim::{self, Scene};
use slidewin::{Detection, Tracker, TrackerConfig};

/// Dense scene with roughly `per_frame` detections per frame.
pub fn dense_scene(seed: u64, per_frame: usize) -> Scene {
    sim::generate(&sim::preset_dense_scene(seed, per_frame)).expect("preset is valid")
}

pub fn by_frame(scene: &Scene) -> BTreeMap<usize, Vec<Detection>> {
    let mut out: BTreeMap<usize, Vec<Detection>> = BTreeMap::new();
    for d in &scene.detections {
        out.entry(d.frame_index).or_default().push(d.clone());
    }
    out
}

/// A tracker that has already consumed the first `warm` frames of `scene`,
/// plus the next frame to feed it.
pub fn warmed_tracker(
    scene: &Scene,
    window: usize,
    warm: usize,
) -> (Tracker, usize, f64, Vec<Detection>) {
    let config = TrackerConfig {
        window_length_frames: window,
        ..Default::default()
    };
    let mut tracker = Tracker::new(config).expect("default config is valid");
    let mut frames = by_frame(scene);
    for &(f, t) in scene.frames.iter().take(warm) {
        tracker
            .step(f, t, frames.remove(&f).unwrap_or_default())
            .expect("simulated frames are well formed");
    }
    let (f, t) = scene.frames[warm];
    (tracker, f, t, frames.remove(&f).unwrap_or_default())
}
