//! CLEAR-MOT counting and AMOTA.
//!
//! Matching is greedy on ground-plane center distance, with pairs carried
//! over from the previous frame matched first. AMOTA follows the usual
//! recall-sweep recipe: for each recall level the score threshold that just
//! reaches it is found, counts are recomputed at that threshold, and the
//! clamped per-level terms are averaged.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::track::{TrackId, TrackOutput};
use crate::types::ClassLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthRecord {
    pub frame_index: usize,
    pub timestamp: f64,
    pub gt_track_id: u64,
    pub class: ClassLabel,
    pub position: Vector3<f64>,
    pub yaw: f64,
    pub size: Vector3<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ErrorCounts {
    pub gt: usize,
    pub matches: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub ids: usize,
}

impl std::ops::AddAssign for ErrorCounts {
    fn add_assign(&mut self, o: Self) {
        self.gt += o.gt;
        self.matches += o.matches;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.ids += o.ids;
    }
}

/// Result of matching one frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMatch {
    /// `(gt_track_id, track_id)` pairs.
    pub matches: Vec<(u64, TrackId)>,
    /// Indices into the output slice of the matched outputs, parallel to `matches`.
    pub matched_outputs: Vec<usize>,
    pub counts: ErrorCounts,
}

fn ground_distance(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    (a.x - b.x).hypot(a.y - b.y)
}

/// Matches one frame. `prev` maps each ground-truth id to the track it was
/// last matched to and is updated in place.
pub fn match_frame(
    outputs: &[TrackOutput],
    gts: &[GroundTruthRecord],
    threshold: f64,
    prev: &mut HashMap<u64, TrackId>,
) -> FrameMatch {
    let mut out_used = vec![false; outputs.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let admissible = |g: &GroundTruthRecord, o: &TrackOutput| {
        g.class == o.class && ground_distance(&g.position, &o.position) <= threshold
    };

    let mut persistent: Vec<(u64, TrackId, usize, usize)> = Vec::new();
    for (gi, g) in gts.iter().enumerate() {
        let Some(&t) = prev.get(&g.gt_track_id) else {
            continue;
        };
        if let Some(oi) = outputs
            .iter()
            .enumerate()
            .filter(|(_, o)| o.track_id == t && admissible(g, o))
            .map(|(i, _)| i)
            .next()
        {
            persistent.push((g.gt_track_id, t, gi, oi));
        }
    }
    persistent.sort();
    for (_, _, gi, oi) in persistent {
        if !gt_used[gi] && !out_used[oi] {
            gt_used[gi] = true;
            out_used[oi] = true;
            pairs.push((gi, oi));
        }
    }

    let mut candidates: Vec<(f64, u64, TrackId, usize, usize)> = Vec::new();
    for (gi, g) in gts.iter().enumerate() {
        if gt_used[gi] {
            continue;
        }
        for (oi, o) in outputs.iter().enumerate() {
            if !out_used[oi] && admissible(g, o) {
                candidates.push((
                    ground_distance(&g.position, &o.position),
                    g.gt_track_id,
                    o.track_id,
                    gi,
                    oi,
                ));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    for (_, _, _, gi, oi) in candidates {
        if !gt_used[gi] && !out_used[oi] {
            gt_used[gi] = true;
            out_used[oi] = true;
            pairs.push((gi, oi));
        }
    }
    pairs.sort_by_key(|&(gi, oi)| (gts[gi].gt_track_id, outputs[oi].track_id));

    let mut result = FrameMatch::default();
    for (gi, oi) in pairs {
        let g = gts[gi].gt_track_id;
        let t = outputs[oi].track_id;
        if let Some(old) = prev.insert(g, t) {
            if old != t {
                result.counts.ids += 1;
            }
        }
        result.matches.push((g, t));
        result.matched_outputs.push(oi);
    }
    result.counts.gt = gts.len();
    result.counts.matches = result.matches.len();
    result.counts.fp = outputs.len() - result.matches.len();
    result.counts.fn_ = gts.len() - result.matches.len();
    result
}

pub fn mota(fp: usize, fn_: usize, ids: usize, gt: usize) -> Result<f64> {
    if gt == 0 {
        return Err(Error::UndefinedMetric(
            "MOTA with no ground-truth objects".into(),
        ));
    }
    Ok(1.0 - (fp + fn_ + ids) as f64 / gt as f64)
}

/// One recall level of the sweep; `counts` is `None` when the level cannot
/// be reached at any score threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecallLevel {
    pub recall: f64,
    pub threshold: Option<f64>,
    pub counts: Option<ErrorCounts>,
    pub term: f64,
}

/// `1 − (FP + FN + IDS − (1 − r)·GT) / (r·GT)`, clamped to `[0, 1]`.
pub fn recall_term(recall: f64, counts: &ErrorCounts, gt: usize) -> Result<f64> {
    if gt == 0 {
        return Err(Error::UndefinedMetric(
            "AMOTA with no ground-truth objects".into(),
        ));
    }
    if !(recall > 0.0 && recall <= 1.0) {
        return Err(Error::InvalidValue(format!(
            "recall level {recall} outside (0, 1]"
        )));
    }
    let g = gt as f64;
    let errors = (counts.fp + counts.fn_ + counts.ids) as f64;
    Ok((1.0 - (errors - (1.0 - recall) * g) / (recall * g)).clamp(0.0, 1.0))
}

/// Mean of the per-level terms.
pub fn amota(sweep: &[RecallLevel]) -> Result<f64> {
    if sweep.is_empty() {
        return Err(Error::UndefinedMetric(
            "AMOTA over an empty recall sweep".into(),
        ));
    }
    Ok(sweep.iter().map(|l| l.term).sum::<f64>() / sweep.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub counts: ErrorCounts,
    pub mota: Option<f64>,
    pub amota: Option<f64>,
    pub sweep: Vec<RecallLevel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub per_class: BTreeMap<String, ClassReport>,
    /// Counts summed over classes; MOTA from the sums, AMOTA as the mean of
    /// the per-class values.
    pub overall: ClassReport,
}

#[derive(Debug, Clone, Copy)]
pub struct EvalParams {
    pub match_threshold_m: f64,
    pub recall_levels: usize,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self {
            match_threshold_m: 2.0,
            recall_levels: 40,
        }
    }
}

struct ClassData<'a> {
    frames: BTreeMap<usize, (Vec<&'a TrackOutput>, Vec<&'a GroundTruthRecord>)>,
}

impl ClassData<'_> {
    /// Counts over the scene using outputs with score ≥ `min_score`; also
    /// returns the scores of matched outputs.
    fn count(&self, threshold: f64, min_score: f64) -> (ErrorCounts, Vec<f64>) {
        let mut prev = HashMap::new();
        let mut total = ErrorCounts::default();
        let mut tp_scores = Vec::new();
        for (outs, gts) in self.frames.values() {
            let o: Vec<TrackOutput> = outs
                .iter()
                .filter(|o| o.score >= min_score)
                .map(|o| (*o).clone())
                .collect();
            let g: Vec<GroundTruthRecord> = gts.iter().map(|g| (*g).clone()).collect();
            let m = match_frame(&o, &g, threshold, &mut prev);
            tp_scores.extend(m.matched_outputs.iter().map(|&i| o[i].score));
            total += m.counts;
        }
        (total, tp_scores)
    }

    fn report(&self, params: &EvalParams) -> ClassReport {
        let (counts, mut tp_scores) = self.count(params.match_threshold_m, f64::NEG_INFINITY);
        let gt = counts.gt;
        let mota = mota(counts.fp, counts.fn_, counts.ids, gt).ok();
        if gt == 0 {
            return ClassReport {
                counts,
                mota,
                amota: None,
                sweep: Vec::new(),
            };
        }
        tp_scores.sort_by(|a, b| b.total_cmp(a));
        let l = params.recall_levels.max(1);
        let mut sweep = Vec::with_capacity(l);
        for i in 1..=l {
            let r = i as f64 / l as f64;
            let needed = ((r * gt as f64) - 1e-9).ceil().max(1.0) as usize;
            let level = match tp_scores.get(needed - 1) {
                Some(&tau) => {
                    let (c, _) = self.count(params.match_threshold_m, tau);
                    RecallLevel {
                        recall: r,
                        threshold: Some(tau),
                        counts: Some(c),
                        term: recall_term(r, &c, gt).unwrap_or(0.0),
                    }
                }
                None => RecallLevel {
                    recall: r,
                    threshold: None,
                    counts: None,
                    term: 0.0,
                },
            };
            sweep.push(level);
        }
        ClassReport {
            counts,
            mota,
            amota: amota(&sweep).ok(),
            sweep,
        }
    }
}

/// Evaluates a scene. Outputs and ground truth are partitioned by class and
/// frame; only classes present in the ground truth or the outputs appear.
pub fn evaluate(
    outputs: &[TrackOutput],
    gts: &[GroundTruthRecord],
    params: &EvalParams,
) -> MetricsReport {
    let classes: BTreeSet<String> = outputs
        .iter()
        .map(|o| o.class.as_str().to_string())
        .chain(gts.iter().map(|g| g.class.as_str().to_string()))
        .collect();
    let mut per_class = BTreeMap::new();
    let mut total = ErrorCounts::default();
    let mut amotas = Vec::new();
    for class in classes {
        let mut data = ClassData {
            frames: BTreeMap::new(),
        };
        for o in outputs.iter().filter(|o| o.class.as_str() == class) {
            data.frames.entry(o.frame_index).or_default().0.push(o);
        }
        for g in gts.iter().filter(|g| g.class.as_str() == class) {
            data.frames.entry(g.frame_index).or_default().1.push(g);
        }
        let report = data.report(params);
        total += report.counts;
        if let Some(a) = report.amota {
            amotas.push(a);
        }
        per_class.insert(class, report);
    }
    let overall = ClassReport {
        counts: total,
        mota: mota(total.fp, total.fn_, total.ids, total.gt).ok(),
        amota: (!amotas.is_empty()).then(|| amotas.iter().sum::<f64>() / amotas.len() as f64),
        sweep: Vec::new(),
    };
    MetricsReport { per_class, overall }
}
