use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use slidewin::io::{GroundTruthLine, TrackRecord};
use slidewin::metrics::{evaluate, ClassReport, EvalParams};
use slidewin::{GroundTruthRecord, MetricsReport, TrackId, TrackOutput};

use crate::error::{CliError, CliResult};
use crate::files;

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    /// Track records written by `track`.
    #[arg(long)]
    pub tracks: PathBuf,
    /// Ground-truth records.
    #[arg(long)]
    pub gt: PathBuf,
    /// Only report these classes (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub classes: Vec<String>,
    /// Ignore coasted track records.
    #[arg(long)]
    pub exclude_coasted: bool,
    /// Center-distance match threshold in the ground plane.
    #[arg(long, default_value_t = 2.0)]
    pub match_threshold_m: f64,
    /// Recall levels in the AMOTA sweep.
    #[arg(long, default_value_t = 40)]
    pub recall_levels: usize,
    /// Machine-readable report; defaults to the tracks path with `.metrics.json` added.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

pub struct EvalOptions<'a> {
    pub classes: &'a [String],
    pub exclude_coasted: bool,
    pub params: EvalParams,
}

/// Evaluates several scenes as one sequence. Frames and ids are shifted per
/// scene so nothing is matched or switched across scene boundaries.
pub fn evaluate_scenes(
    tracks: &BTreeMap<String, Vec<TrackOutput>>,
    gts: &BTreeMap<String, Vec<GroundTruthRecord>>,
    opts: &EvalOptions,
) -> CliResult<MetricsReport> {
    if let Some(extra) = tracks.keys().find(|s| !gts.contains_key(*s)) {
        return Err(CliError::SceneMismatch(format!(
            "scene {extra:?} has tracks but no ground truth"
        )));
    }
    let keep = |class: &str| opts.classes.is_empty() || opts.classes.iter().any(|c| c == class);
    let mut all_outputs = Vec::new();
    let mut all_gts = Vec::new();
    let mut offset = 0usize;
    for (i, (scene, g)) in gts.iter().enumerate() {
        let tag = (i as u64) << 32;
        let outs = tracks.get(scene).map(Vec::as_slice).unwrap_or_default();
        let span = g
            .iter()
            .map(|r| r.frame_index)
            .chain(outs.iter().map(|o| o.frame_index))
            .max()
            .map_or(0, |m| m + 1);
        all_gts.extend(
            g.iter()
                .filter(|r| keep(r.class.as_str()))
                .map(|r| GroundTruthRecord {
                    frame_index: r.frame_index + offset,
                    gt_track_id: r.gt_track_id | tag,
                    ..r.clone()
                }),
        );
        all_outputs.extend(
            outs.iter()
                .filter(|o| keep(o.class.as_str()) && !(opts.exclude_coasted && o.coasted))
                .map(|o| TrackOutput {
                    frame_index: o.frame_index + offset,
                    track_id: TrackId(o.track_id.0 | tag),
                    ..o.clone()
                }),
        );
        offset += span;
    }
    Ok(evaluate(&all_outputs, &all_gts, &opts.params))
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v))
}

fn row(out: &mut String, name: &str, r: &ClassReport) {
    let c = &r.counts;
    let _ = writeln!(
        out,
        "{name:<12} {:>7} {:>7} {:>6} {:>6} {:>5} {:>8} {:>8}",
        c.gt,
        c.matches,
        c.fp,
        c.fn_,
        c.ids,
        pct(r.mota),
        pct(r.amota)
    );
}

pub fn format_report(report: &MetricsReport) -> String {
    let mut out = format!(
        "{:<12} {:>7} {:>7} {:>6} {:>6} {:>5} {:>8} {:>8}\n",
        "class", "GT", "TP", "FP", "FN", "IDS", "MOTA%", "AMOTA%"
    );
    for (class, r) in &report.per_class {
        row(&mut out, class, r);
    }
    row(&mut out, "overall", &report.overall);
    out
}

pub fn by_scene<T, R>(
    records: Vec<R>,
    scene: impl Fn(&R) -> &str,
    convert: impl Fn(&R) -> T,
) -> BTreeMap<String, Vec<T>> {
    let mut out: BTreeMap<String, Vec<T>> = BTreeMap::new();
    for r in &records {
        out.entry(scene(r).to_string())
            .or_default()
            .push(convert(r));
    }
    out
}

pub fn run(args: &EvalArgs) -> CliResult<()> {
    let track_lines: Vec<TrackRecord> = files::read_records(&args.tracks)?;
    let gt_lines: Vec<GroundTruthLine> = files::read_records(&args.gt)?;
    let tracks = by_scene(track_lines, |r| &r.scene_id, TrackRecord::to_output);
    let gts = by_scene(gt_lines, |r| &r.scene_id, GroundTruthLine::to_record);
    let opts = EvalOptions {
        classes: &args.classes,
        exclude_coasted: args.exclude_coasted,
        params: EvalParams {
            match_threshold_m: args.match_threshold_m,
            recall_levels: args.recall_levels,
        },
    };
    let report = evaluate_scenes(&tracks, &gts, &opts)?;
    let scenes: BTreeSet<&String> = gts.keys().collect();
    print!("{} scenes\n{}", scenes.len(), format_report(&report));
    let path = args.report.clone().unwrap_or_else(|| {
        let mut p = args.tracks.clone().into_os_string();
        p.push(".metrics.json");
        p.into()
    });
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    files::write_atomic(&path, json.as_bytes())
}
