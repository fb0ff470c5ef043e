use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use slidewin::io::{LatencyStats, RunManifest, SceneDetections};
use slidewin::metrics::EvalParams;

use crate::error::CliResult;
use crate::eval::{evaluate_scenes, EvalOptions};
use crate::files::{self, ConfigOverrides};
use crate::simulate::{self, ScenarioSource};
use crate::track::{track_scene, Debug};

#[derive(Debug, clap::Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub source: ScenarioSource,
    /// Window lengths to compare (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    pub windows: Vec<usize>,
    /// Number of scenes; scene i uses the scenario seed plus i.
    #[arg(long, default_value_t = 1)]
    pub scenes: u64,
    /// Base tracker configuration (TOML); the window length is overridden per row.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub max_hypotheses: Option<usize>,
    /// Directory receiving results.csv, results.txt and one manifest per row.
    #[arg(long)]
    pub out: PathBuf,
}

pub struct BenchRow {
    pub window: usize,
    pub amota: Option<f64>,
    pub fp: usize,
    pub fn_: usize,
    pub ids: usize,
    pub latency: LatencyStats,
}

pub const CSV_HEADER: &str = "sw_length,amota,fp,fn,ids,latency_p50_s,latency_p95_s,latency_max_s";

pub fn run(args: &BenchArgs) -> CliResult<()> {
    let base = args.source.resolve()?;
    let mut scenes = BTreeMap::new();
    let mut gts = BTreeMap::new();
    for i in 0..args.scenes.max(1) {
        let mut spec = base.clone();
        spec.seed = base.seed.wrapping_add(i);
        if args.scenes > 1 {
            spec.scene_id = format!("{}-{i}", base.scene_id);
        }
        let scene = simulate::generate(&spec)?;
        gts.insert(spec.scene_id.clone(), scene.ground_truth);
        scenes.insert(
            spec.scene_id,
            SceneDetections {
                frames: scene.frames,
                detections: scene.detections,
            },
        );
    }
    files::create_dir(&args.out)?;

    let mut rows = Vec::new();
    for &window in &args.windows {
        let overrides = ConfigOverrides {
            window: Some(window),
            max_hypotheses: args.max_hypotheses,
            exclude_coasted: false,
        };
        let config = files::load_config(args.config.as_deref(), &overrides)?;
        let mut tracks = BTreeMap::new();
        let mut latency = Vec::new();
        for (id, scene) in &scenes {
            let r = track_scene(&config, id, scene, &Debug::default())?;
            latency.extend(r.latency);
            tracks.insert(id.clone(), r.outputs);
        }
        let opts = EvalOptions {
            classes: &[],
            exclude_coasted: false,
            params: EvalParams {
                match_threshold_m: config.metric_match_threshold_m,
                recall_levels: config.recall_levels,
            },
        };
        let report = evaluate_scenes(&tracks, &gts, &opts)?;
        let manifest = RunManifest::new(
            "bench",
            config,
            scenes.keys().cloned().collect(),
            Some(base.seed),
            latency,
        );
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        files::write_atomic(
            &args.out.join(format!("manifest_T{window}.json")),
            json.as_bytes(),
        )?;
        let c = report.overall.counts;
        rows.push(BenchRow {
            window,
            amota: report.overall.amota,
            fp: c.fp,
            fn_: c.fn_,
            ids: c.ids,
            latency: manifest.latency,
        });
    }

    let mut csv = format!("{CSV_HEADER}\n");
    let mut table = format!(
        "{:>9} {:>8} {:>7} {:>7} {:>6} {:>9} {:>9}\n",
        "SW Length", "AMOTA%", "FP", "FN", "IDS", "p50 s", "p95 s"
    );
    for r in &rows {
        let amota = r.amota.map_or(String::new(), |a| format!("{a}"));
        let _ = writeln!(
            csv,
            "{},{amota},{},{},{},{},{},{}",
            r.window, r.fp, r.fn_, r.ids, r.latency.p50_s, r.latency.p95_s, r.latency.max_s
        );
        let _ = writeln!(
            table,
            "{:>9} {:>8} {:>7} {:>7} {:>6} {:>9.4} {:>9.4}",
            r.window,
            r.amota.map_or("-".into(), |a| format!("{:.2}", 100.0 * a)),
            r.fp,
            r.fn_,
            r.ids,
            r.latency.p50_s,
            r.latency.p95_s
        );
    }
    files::write_atomic(&args.out.join("results.csv"), csv.as_bytes())?;
    files::write_atomic(&args.out.join("results.txt"), table.as_bytes())?;
    print!("{table}");
    Ok(())
}
