//! Persistent track identities on top of per-frame hypothesis selections.
//!
//! Selections may re-associate detections inside the window from one frame
//! to the next. Identities stay causal: a frame's output is final once
//! emitted, and later revisions only show up in [`TrackSet::revised_history`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use log::trace;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::CvBelief;
use crate::graph::{AssociationGraph, NodeId};
use crate::hypothesis::HypothesisMap;
use crate::scoring::{score_to_probability, HypothesisScorer};
use crate::types::{normalize_yaw, ClassLabel, Detection, DetectionId, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrackId(pub u64);

impl fmt::Display for TrackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tentative,
    Active,
    /// Confirmed, but its last detection has left the window.
    Dormant,
    Deleted,
    /// Absorbed into another track; see [`TrackSet::resolve`].
    Merged,
}

impl TrackStatus {
    pub fn is_alive(self) -> bool {
        matches!(self, Self::Tentative | Self::Active | Self::Dormant)
    }

    pub fn is_confirmed(self) -> bool {
        matches!(self, Self::Active | Self::Dormant)
    }
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: TrackId,
    pub status: TrackStatus,
    pub class: ClassLabel,
    pub hits: u32,
    pub misses: u32,
    pub first_frame: usize,
    pub last_detection_frame: usize,
    pub last_node: NodeId,
    pub belief: CvBelief,
    pub belief_time: f64,
    pub yaw: f64,
    pub size: Vector3<f64>,
    size_samples: u32,
    /// LLR of the hypothesis that last extended this track.
    pub last_score: f64,
}

impl Track {
    pub fn position(&self) -> Vector3<f64> {
        self.belief.mean.fixed_rows::<3>(0).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.belief.mean.fixed_rows::<3>(3).into_owned()
    }

    fn absorb_shape(&mut self, det: &Detection) {
        self.size = smooth_dimensions(&self.size, self.size_samples, &det.size);
        self.size_samples += 1;
        self.yaw = normalize_yaw(det.yaw).unwrap_or(self.yaw);
    }
}

/// Running mean of box sizes after `seen` earlier observations averaging to `mean`.
pub fn smooth_dimensions(mean: &Vector3<f64>, seen: u32, new_size: &Vector3<f64>) -> Vector3<f64> {
    mean + (new_size - mean) / f64::from(seen + 1)
}

/// One emitted track state.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub frame_index: usize,
    pub timestamp: f64,
    pub track_id: TrackId,
    pub class: ClassLabel,
    pub position: Vector3<f64>,
    pub yaw: f64,
    pub size: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Track-existence probability in (0, 1).
    pub score: f64,
    /// No detection was associated at this frame; the state is a prediction.
    pub coasted: bool,
    pub detection_id: Option<DetectionId>,
}

#[derive(Debug, Clone)]
pub struct TrackSet {
    tracks: BTreeMap<TrackId, Track>,
    node_owner: HashMap<NodeId, TrackId>,
    merged_into: HashMap<TrackId, TrackId>,
    history: BTreeMap<TrackId, BTreeMap<usize, DetectionId>>,
    next_id: u64,
    init_hits: u32,
    delete_misses: u32,
    window_length: usize,
    emit_coasted: bool,
}

impl TrackSet {
    pub fn new(config: &TrackerConfig) -> Self {
        Self {
            tracks: BTreeMap::new(),
            node_owner: HashMap::new(),
            merged_into: HashMap::new(),
            history: BTreeMap::new(),
            next_id: 0,
            init_hits: config.init_hits,
            delete_misses: config.delete_misses,
            window_length: config.window_length_frames,
            emit_coasted: config.emit_coasted,
        }
    }

    pub fn get(&self, id: TrackId) -> Option<&Track> {
        self.tracks.get(&id)
    }

    pub fn tracks(&self) -> impl Iterator<Item = &Track> {
        self.tracks.values()
    }

    pub fn alive(&self) -> impl Iterator<Item = &Track> {
        self.tracks.values().filter(|t| t.status.is_alive())
    }

    /// Follows merge links to the track that finally absorbed `id`.
    pub fn resolve(&self, mut id: TrackId) -> TrackId {
        while let Some(&next) = self.merged_into.get(&id) {
            id = next;
        }
        id
    }

    /// `id` after following merges, if that track is still alive.
    pub fn live(&self, id: TrackId) -> Option<TrackId> {
        let id = self.resolve(id);
        self.tracks
            .get(&id)
            .filter(|t| t.status.is_alive())
            .map(|t| t.id)
    }

    /// Live track owning `node`, if any.
    pub fn owner(&self, node: NodeId) -> Option<TrackId> {
        self.live(*self.node_owner.get(&node)?)
    }

    /// Last-observation nodes of live tracks; these may outlive the window.
    pub fn anchors(&self) -> HashSet<NodeId> {
        self.alive().map(|t| t.last_node).collect()
    }

    pub fn forget_nodes(&mut self, removed: &[NodeId]) {
        for n in removed {
            self.node_owner.remove(n);
        }
    }

    /// Detection ids per track, including re-associations made after the
    /// corresponding frames were emitted.
    pub fn revised_history(&self) -> &BTreeMap<TrackId, BTreeMap<usize, DetectionId>> {
        &self.history
    }

    fn spawn(
        &mut self,
        det: &Detection,
        node: NodeId,
        frame: usize,
        scorer: &HypothesisScorer,
        score: f64,
        hits: u32,
    ) -> Result<TrackId> {
        let (belief, _) = scorer.start(det)?;
        let id = TrackId(self.next_id);
        self.next_id += 1;
        self.tracks.insert(
            id,
            Track {
                id,
                status: TrackStatus::Tentative,
                class: det.class.clone(),
                hits,
                misses: 0,
                first_frame: frame,
                last_detection_frame: frame,
                last_node: node,
                belief,
                belief_time: det.timestamp,
                yaw: normalize_yaw(det.yaw).unwrap_or(0.0),
                size: det.size,
                size_samples: 1,
                last_score: score,
            },
        );
        self.node_owner.insert(node, id);
        self.history.entry(id).or_default().insert(frame, det.id);
        Ok(id)
    }

    /// Folds the selected hypotheses of frame `k` into the track set and
    /// returns the frame's output records.
    pub fn commit(
        &mut self,
        k: usize,
        timestamp: f64,
        graph: &AssociationGraph,
        map: &HypothesisMap,
        selected: &[usize],
        scorer: &HypothesisScorer,
    ) -> Result<Vec<TrackOutput>> {
        if let Some(&bad) = selected.iter().find(|&&h| h >= map.len()) {
            return Err(Error::Consistency(format!(
                "selected hypothesis {bad} but the map has {} rows",
                map.len()
            )));
        }
        let mut order: Vec<usize> = selected.to_vec();
        order.sort_by(|&a, &b| {
            map.rows[b]
                .score
                .total_cmp(&map.rows[a].score)
                .then(a.cmp(&b))
        });

        // Which selected rows touch which live tracks.
        let mut touching: HashMap<TrackId, usize> = HashMap::new();
        let mut row_tracks: Vec<Vec<TrackId>> = Vec::with_capacity(order.len());
        for &h in &order {
            let row = &map.rows[h];
            let root = row.root_node();
            let mut ts: Vec<TrackId> = row
                .nodes()
                .filter(|&n| Some(n) != root)
                .filter_map(|n| self.owner(n))
                .collect();
            ts.extend(
                row.origin_track
                    .iter()
                    .chain(&row.tracks)
                    .filter_map(|&t| self.live(t)),
            );
            ts.sort_unstable();
            ts.dedup();
            for &t in &ts {
                *touching.entry(t).or_default() += 1;
            }
            row_tracks.push(ts);
        }

        let mut claimed: HashSet<TrackId> = HashSet::new();
        let mut updated: HashSet<TrackId> = HashSet::new();
        let mut covered: HashSet<NodeId> = HashSet::new();
        for (&h, candidates) in order.iter().zip(&row_tracks) {
            let row = &map.rows[h];
            let free: Vec<TrackId> = candidates
                .iter()
                .copied()
                .filter(|t| !claimed.contains(t))
                .collect();
            let Some(root) = row.root_node() else {
                // A coasting row keeps its track alive without a detection.
                if let Some(t) = free.iter().copied().max() {
                    claimed.insert(t);
                    if let Some(tr) = self.tracks.get_mut(&t) {
                        tr.last_score = row.score;
                    }
                }
                continue;
            };
            let Some(node) = graph.node(root) else {
                continue;
            };
            let det = node.detection.clone();
            covered.insert(root);

            let survivor = free
                .iter()
                .copied()
                .max_by_key(|t| (self.tracks[t].status.is_confirmed(), *t));
            let id = match survivor {
                Some(id) => {
                    for &t in &free {
                        if t != id && touching.get(&t) == Some(&1) {
                            trace!("merging {t} into {id}");
                            if let Some(tr) = self.tracks.get_mut(&t) {
                                tr.status = TrackStatus::Merged;
                            }
                            self.merged_into.insert(t, id);
                        }
                    }
                    let tr = self.tracks.get_mut(&id).expect("candidate is live");
                    let (belief, _) = scorer.extend(&tr.belief, tr.belief_time, &det, 0.0)?;
                    tr.belief = belief;
                    tr.belief_time = det.timestamp;
                    tr.hits += 1;
                    tr.misses = 0;
                    tr.last_detection_frame = k;
                    tr.last_node = root;
                    tr.last_score = row.score;
                    tr.absorb_shape(&det);
                    self.node_owner.insert(root, id);
                    id
                }
                None => self.spawn(
                    &det,
                    root,
                    k,
                    scorer,
                    row.score,
                    row.detection_count() as u32,
                )?,
            };
            if survivor.is_none() {
                // Seed the filter with the whole hypothesis rather than one detection.
                let tr = self.tracks.get_mut(&id).expect("just spawned");
                tr.belief = row.belief.clone();
            }
            claimed.insert(id);
            updated.insert(id);
            let hist = self.history.entry(id).or_default();
            for &(f, n) in &row.entries {
                if let Some(gn) = graph.node(n) {
                    hist.insert(f, gn.detection.id);
                }
                self.node_owner.insert(n, id);
            }
        }

        for node in graph.layer(k) {
            if covered.contains(&node.id) {
                continue;
            }
            let conf = node.detection.confidence.ln();
            let id = self.spawn(&node.detection, node.id, k, scorer, conf, 1)?;
            updated.insert(id);
        }

        let lo = k.saturating_sub(self.window_length);
        let mut out = Vec::new();
        let skip = scorer.skip().total();
        for tr in self.tracks.values_mut() {
            if !tr.status.is_alive() {
                continue;
            }
            let detected = updated.contains(&tr.id);
            if !detected {
                tr.misses += 1;
                let dt = timestamp - tr.belief_time;
                if dt > 0.0 {
                    tr.belief = scorer.model.predict(&tr.belief, dt)?;
                    tr.belief_time = timestamp;
                }
                if tr.misses >= self.delete_misses {
                    tr.status = TrackStatus::Deleted;
                    continue;
                }
            }
            if tr.status == TrackStatus::Tentative && tr.hits >= self.init_hits {
                tr.status = TrackStatus::Active;
            }
            if tr.status.is_confirmed() {
                tr.status = if tr.last_detection_frame < lo {
                    TrackStatus::Dormant
                } else {
                    TrackStatus::Active
                };
            }
            if tr.status != TrackStatus::Active || !(detected || self.emit_coasted) {
                continue;
            }
            let llr = tr.last_score
                + if detected {
                    0.0
                } else {
                    skip * f64::from(tr.misses)
                };
            let detection_id = if detected {
                graph.node(tr.last_node).map(|n| n.detection.id)
            } else {
                None
            };
            out.push(TrackOutput {
                frame_index: k,
                timestamp,
                track_id: tr.id,
                class: tr.class.clone(),
                position: tr.position(),
                yaw: tr.yaw,
                size: tr.size,
                velocity: tr.velocity(),
                score: score_to_probability(llr),
                coasted: !detected,
                detection_id,
            });
        }
        Ok(out)
    }
}
