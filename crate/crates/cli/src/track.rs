use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{debug, info};
use slidewin::io::{
    group_detections, to_jsonl, DetectionRecord, RunManifest, SceneDetections, TrackRecord,
};
use slidewin::{Detection, TrackOutput, Tracker, TrackerConfig};

use crate::error::CliResult;
use crate::files::{self, ConfigOverrides};

#[derive(Debug, clap::Args)]
pub struct TrackArgs {
    /// Detections, one JSON record per line.
    #[arg(long)]
    pub detections: PathBuf,
    /// Tracker configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Track records, one JSON record per line.
    #[arg(long)]
    pub output: PathBuf,
    /// Run manifest; defaults to the output path with `.manifest.json` added.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
    /// Write the association graph of every frame into this directory.
    #[arg(long)]
    pub debug_graph: Option<PathBuf>,
    /// Write the selection program of every frame into this directory (CPLEX LP format).
    #[arg(long)]
    pub dump_lp: Option<PathBuf>,
}

#[derive(Debug, Default)]
pub struct Debug<'a> {
    pub graph_dir: Option<&'a Path>,
    pub lp_dir: Option<&'a Path>,
}

pub struct SceneRun {
    pub outputs: Vec<TrackOutput>,
    /// Seconds per tracker step, one per frame.
    pub latency: Vec<f64>,
}

fn file_stem(scene: &str) -> String {
    scene
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Streams one scene through a fresh tracker. Only the step call is timed.
pub fn track_scene(
    config: &TrackerConfig,
    scene_id: &str,
    scene: &SceneDetections,
    dbg: &Debug,
) -> CliResult<SceneRun> {
    let mut tracker = Tracker::new(config.clone())?;
    tracker.retain_problems(dbg.lp_dir.is_some());
    let mut by_frame: std::collections::BTreeMap<usize, Vec<Detection>> = Default::default();
    for d in &scene.detections {
        by_frame.entry(d.frame_index).or_default().push(d.clone());
    }
    let mut outputs = Vec::new();
    let mut latency = Vec::with_capacity(scene.frames.len());
    for &(frame, t) in &scene.frames {
        let dets = by_frame.remove(&frame).unwrap_or_default();
        let start = Instant::now();
        let out = tracker.step(frame, t, dets)?;
        latency.push(start.elapsed().as_secs_f64());
        debug!("{scene_id} frame {frame}: {:?}", out.stats);
        let stem = file_stem(scene_id);
        if let Some(dir) = dbg.graph_dir {
            let json = serde_json::to_string_pretty(&tracker.graph_export())
                .expect("graph export serializes");
            files::write_atomic(
                &dir.join(format!("{stem}_{frame:06}.graph.json")),
                json.as_bytes(),
            )?;
        }
        if let (Some(dir), Some(p)) = (dbg.lp_dir, tracker.last_problem()) {
            files::write_atomic(
                &dir.join(format!("{stem}_{frame:06}.lp")),
                p.to_lp_format().as_bytes(),
            )?;
        }
        outputs.extend(out.tracks);
    }
    Ok(SceneRun { outputs, latency })
}

pub fn run(args: &TrackArgs) -> CliResult<()> {
    let config = files::load_config(args.config.as_deref(), &args.overrides)?;
    let records: Vec<DetectionRecord> = files::read_records(&args.detections)?;
    let scenes = group_detections(&records)
        .map_err(|e| crate::error::CliError::input(&args.detections, e))?;
    for dir in [&args.debug_graph, &args.dump_lp].into_iter().flatten() {
        files::create_dir(dir)?;
    }
    let dbg = Debug {
        graph_dir: args.debug_graph.as_deref(),
        lp_dir: args.dump_lp.as_deref(),
    };

    let mut lines = Vec::new();
    let mut latency = Vec::new();
    for (scene_id, scene) in &scenes {
        let r = track_scene(&config, scene_id, scene, &dbg)?;
        info!(
            "{scene_id}: {} frames, {} track records",
            scene.frames.len(),
            r.outputs.len()
        );
        lines.extend(
            r.outputs
                .iter()
                .map(|o| TrackRecord::from_output(scene_id, o)),
        );
        latency.extend(r.latency);
    }

    files::write_atomic(&args.output, to_jsonl(&lines).as_bytes())?;
    let manifest = RunManifest::new(
        "track",
        config,
        vec![args.detections.display().to_string()],
        None,
        latency,
    );
    let manifest_path = args.manifest.clone().unwrap_or_else(|| {
        let mut p = args.output.clone().into_os_string();
        p.push(".manifest.json");
        p.into()
    });
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    files::write_atomic(&manifest_path, json.as_bytes())?;
    println!(
        "{} scenes, {} frames, {} track records; step latency p50 {:.4} s, p95 {:.4} s, max {:.4} s",
        scenes.len(),
        manifest.frames,
        lines.len(),
        manifest.latency.p50_s,
        manifest.latency.p95_s,
        manifest.latency.max_s
    );
    Ok(())
}
