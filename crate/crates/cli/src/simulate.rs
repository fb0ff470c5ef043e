use std::path::{Path, PathBuf};

use slidewin::io::{to_jsonl, DetectionRecord, GroundTruthLine};
use slidewin::sim::{self, Scene};
use slidewin::ScenarioSpec;

use crate::error::{CliError, CliResult};
use crate::files;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Five pedestrians hidden together for two frames.
    Occlusion,
    /// Cars and pedestrians with dropouts, clutter and random occlusions.
    Ablation,
    /// About 100 detections per frame.
    Dense,
}

#[derive(Debug, Clone, clap::Args)]
pub struct ScenarioSource {
    /// Scenario specification (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub scenario: Option<PathBuf>,
    /// Built-in scenario instead of a file.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the scenario length in frames.
    #[arg(long)]
    pub frames: Option<usize>,
}

impl ScenarioSource {
    pub fn resolve(&self) -> CliResult<ScenarioSpec> {
        let mut spec = match (&self.scenario, self.preset) {
            (Some(path), _) => ScenarioSpec::from_toml_str(&files::read_text(path)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            (None, Some(Preset::Occlusion)) => sim::preset_occlusion_benchmark(),
            (None, Some(Preset::Ablation)) => sim::preset_ablation_scene(self.seed.unwrap_or(0)),
            (None, Some(Preset::Dense)) => sim::preset_dense_scene(self.seed.unwrap_or(0), 100),
            (None, None) => unreachable!("clap requires a scenario or a preset"),
        };
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(frames) = self.frames {
            spec.duration_frames = frames;
        }
        spec.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub source: ScenarioSource,
    /// Directory receiving detections.jsonl, ground_truth.jsonl and scenario.toml.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn generate(spec: &ScenarioSpec) -> CliResult<Scene> {
    sim::generate(spec).map_err(|e| CliError::Config(e.to_string()))
}

pub fn write_scene(dir: &Path, spec: &ScenarioSpec, scene: &Scene) -> CliResult<()> {
    files::create_dir(dir)?;
    let dets: Vec<DetectionRecord> = scene
        .detections
        .iter()
        .map(|d| DetectionRecord::from_detection(&spec.scene_id, d))
        .collect();
    let gts: Vec<GroundTruthLine> = scene
        .ground_truth
        .iter()
        .map(|g| GroundTruthLine::from_record(&spec.scene_id, g))
        .collect();
    files::write_atomic(&dir.join("detections.jsonl"), to_jsonl(&dets).as_bytes())?;
    files::write_atomic(&dir.join("ground_truth.jsonl"), to_jsonl(&gts).as_bytes())?;
    files::write_atomic(&dir.join("scenario.toml"), spec.to_toml_string().as_bytes())
}

pub fn run(args: &SimulateArgs) -> CliResult<()> {
    let spec = args.source.resolve()?;
    let scene = generate(&spec)?;
    write_scene(&args.out, &spec, &scene)?;
    println!(
        "{}: {} frames, {} detections, {} ground-truth records -> {}",
        spec.scene_id,
        scene.frames.len(),
        scene.detections.len(),
        scene.ground_truth.len(),
        args.out.display()
    );
    Ok(())
}
