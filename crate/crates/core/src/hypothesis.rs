//! Track hypotheses as node-or-skip traversals of the association graph.
//!
//! Each row carries its cumulative score and Kalman belief, so growing a row
//! by one frame costs one filter step. Families are keyed by the row's
//! detection at the current frame; rows that skip the current frame
//! (coasting rows) are keyed by the track they continue.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use log::debug;

use crate::error::{Error, Result};
use crate::filter::CvBelief;
use crate::graph::{AssociationGraph, NodeId};
use crate::scoring::{cosine, similarity_log_normalizer, HypothesisScorer, ScoreIncrement};
use crate::track::TrackId;

#[derive(Debug, Clone)]
pub struct Hypothesis {
    /// `(frame, node)` for every non-skip entry, ordered by frame.
    pub entries: Vec<(usize, NodeId)>,
    /// Last frame folded into the score; equals the map's current frame.
    pub end_frame: usize,
    pub score: f64,
    pub components: ScoreIncrement,
    pub belief: CvBelief,
    /// Timestamp of the last absorbed detection.
    pub belief_time: f64,
    /// Track this row continues: the owner of its last node.
    pub origin_track: Option<TrackId>,
    /// Every track whose detections this row has absorbed, including ones
    /// whose nodes have since left the window. Sorted, no duplicates.
    pub tracks: Vec<TrackId>,
}

impl Hypothesis {
    pub fn detection_count(&self) -> usize {
        self.entries.len()
    }

    pub fn last_node(&self) -> Option<NodeId> {
        self.entries.last().map(|e| e.1)
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.entries.iter().map(|e| e.1)
    }

    /// The current-frame detection this row is rooted at, if it has one.
    pub fn root_node(&self) -> Option<NodeId> {
        self.entries
            .last()
            .filter(|(f, _)| *f == self.end_frame)
            .map(|e| e.1)
    }

    /// Rows with equal identity describe the same hypothesis; only the
    /// best-scoring one is worth keeping.
    fn identity(&self) -> (Vec<NodeId>, Vec<TrackId>) {
        (self.nodes().collect(), self.tracks.clone())
    }

    pub fn trailing_skips(&self) -> usize {
        self.entries.last().map_or(0, |(f, _)| self.end_frame - f)
    }

    /// Row of the hypothesis map over frames `first..=self.end_frame`:
    /// the 1-based slot of the node in each frame, 0 for a skip.
    pub fn node_sequence(&self, graph: &AssociationGraph, first: usize) -> Vec<usize> {
        let mut row = vec![0; self.end_frame + 1 - first.min(self.end_frame + 1)];
        for &(f, id) in &self.entries {
            if f >= first {
                row[f - first] = graph.slot(id).unwrap_or(0);
            }
        }
        row
    }

    /// Lexicographic order of node sequences (skip < any node, and node ids
    /// grow with slot inside a frame).
    pub fn cmp_sequence(&self, other: &Self) -> Ordering {
        let (mut a, mut b) = (
            self.entries.iter().peekable(),
            other.entries.iter().peekable(),
        );
        loop {
            match (a.peek(), b.peek()) {
                (None, None) => return Ordering::Equal,
                (None, Some(_)) => return Ordering::Less,
                (Some(_), None) => return Ordering::Greater,
                (Some(&&(fa, na)), Some(&&(fb, nb))) => {
                    if fa < fb {
                        return Ordering::Greater;
                    }
                    if fb < fa {
                        return Ordering::Less;
                    }
                    match na.cmp(&nb) {
                        Ordering::Equal => {
                            a.next();
                            b.next();
                        }
                        o => return o,
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FamilyKey {
    Root(NodeId),
    Coasting(Option<TrackId>),
}

impl Hypothesis {
    pub fn family(&self) -> FamilyKey {
        match self.root_node() {
            Some(n) => FamilyKey::Root(n),
            None => FamilyKey::Coasting(self.origin_track),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BranchLimits {
    /// Rows may trail at most this many skipped frames.
    pub max_trailing_skips: usize,
}

#[derive(Debug, Clone, Default)]
pub struct HypothesisMap {
    pub rows: Vec<Hypothesis>,
    current_frame: Option<usize>,
}

fn descending(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.cmp_sequence(b))
}

impl HypothesisMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn current_frame(&self) -> Option<usize> {
        self.current_frame
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Grows the map to frame `k`, which must already be in the graph.
    ///
    /// Every row spawns one child per edge from its last node into frame `k`
    /// plus a skip child; every frame-`k` node also roots a fresh pair with
    /// each of its predecessors.
    pub fn branch_on_frame(
        &self,
        graph: &AssociationGraph,
        k: usize,
        scorer: &HypothesisScorer,
        limits: BranchLimits,
    ) -> Result<HypothesisMap> {
        if graph.current_frame() != Some(k) {
            return Err(Error::Sequencing(format!(
                "graph has not been expanded to frame {k}"
            )));
        }
        if let Some(prev) = self.current_frame {
            if k <= prev {
                return Err(Error::Sequencing(format!(
                    "frame {k} does not follow {prev}"
                )));
            }
        }
        let skip = scorer.skip();
        let mut norms: HashMap<(NodeId, usize), Option<f64>> = HashMap::new();
        let mut similarity = |from: NodeId, from_frame: usize, to: NodeId| -> f64 {
            let (Some(a), Some(b)) = (graph.node(from), graph.node(to)) else {
                return 0.0;
            };
            let (Some(prev), Some(query)) = (&a.detection.embedding, &b.detection.embedding) else {
                return 0.0;
            };
            let norm = *norms.entry((to, from_frame)).or_insert_with(|| {
                similarity_log_normalizer(
                    query,
                    graph
                        .layer(from_frame)
                        .iter()
                        .filter_map(|n| n.detection.embedding.as_deref()),
                )
            });
            norm.map_or(0.0, |z| cosine(query, prev) - z)
        };

        let mut out: Vec<Hypothesis> = Vec::new();
        let mut index: HashMap<(Vec<NodeId>, Vec<TrackId>), usize> = HashMap::new();
        let mut push = |h: Hypothesis, out: &mut Vec<Hypothesis>| {
            let key = h.identity();
            match index.get(&key) {
                Some(&i) => {
                    if h.score > out[i].score {
                        out[i] = h;
                    }
                }
                None => {
                    index.insert(key, out.len());
                    out.push(h);
                }
            }
        };

        for row in &self.rows {
            let Some((last_frame, last)) = row.entries.last().copied() else {
                continue;
            };
            let gap_skips = (k - row.end_frame - 1) as f64;
            for &succ in graph.successors(last) {
                let Some(node) = graph.node(succ) else {
                    continue;
                };
                if node.frame_index != k {
                    continue;
                }
                let sim = similarity(last, last_frame, succ);
                match scorer.extend(&row.belief, row.belief_time, &node.detection, sim) {
                    Ok((belief, inc)) => {
                        let mut components = row.components;
                        components.conf += skip.conf * gap_skips;
                        components += inc;
                        let mut entries = row.entries.clone();
                        entries.push((k, succ));
                        push(
                            Hypothesis {
                                entries,
                                end_frame: k,
                                score: row.score + skip.total() * gap_skips + inc.total(),
                                components,
                                belief,
                                belief_time: node.detection.timestamp,
                                origin_track: row.origin_track,
                                tracks: row.tracks.clone(),
                            },
                            &mut out,
                        );
                    }
                    Err(e) => debug!("dropping branch {last}→{succ}: {e}"),
                }
            }
            if k - last_frame <= limits.max_trailing_skips {
                let n = (k - row.end_frame) as f64;
                let mut child = row.clone();
                child.end_frame = k;
                child.score += skip.total() * n;
                child.components.conf += skip.conf * n;
                push(child, &mut out);
            }
        }

        for new in graph.layer(k) {
            for &pred in graph.predecessors(new.id) {
                let Some(first) = graph.node(pred) else {
                    continue;
                };
                let gap_skips = (k - first.frame_index - 1) as f64;
                let sim = similarity(pred, first.frame_index, new.id);
                let grown = scorer.start(&first.detection).and_then(|(b0, inc0)| {
                    scorer
                        .extend(&b0, first.detection.timestamp, &new.detection, sim)
                        .map(|(b, inc)| (b, inc0, inc))
                });
                match grown {
                    Ok((belief, inc0, inc)) => {
                        let mut components = inc0;
                        components.conf += skip.conf * gap_skips;
                        components += inc;
                        push(
                            Hypothesis {
                                entries: vec![(first.frame_index, pred), (k, new.id)],
                                end_frame: k,
                                score: inc0.total() + skip.total() * gap_skips + inc.total(),
                                components,
                                belief,
                                belief_time: new.detection.timestamp,
                                origin_track: None,
                                tracks: Vec::new(),
                            },
                            &mut out,
                        );
                    }
                    Err(e) => debug!("dropping pair {pred}→{}: {e}", new.id),
                }
            }
        }

        Ok(HypothesisMap {
            rows: out,
            current_frame: Some(k),
        })
    }

    /// Keeps the `max_per_family` best rows of each family, then trims
    /// coasting rows so that the total never exceeds
    /// `root_count · max_per_family`. Rows come out grouped by family, best
    /// first, ties broken by the smaller node sequence.
    pub fn prune_m_best(&mut self, max_per_family: usize, root_count: usize) {
        let mut families: BTreeMap<FamilyKey, Vec<Hypothesis>> = BTreeMap::new();
        for row in self.rows.drain(..) {
            families.entry(row.family()).or_default().push(row);
        }
        let budget = root_count.saturating_mul(max_per_family);
        let mut rooted = Vec::new();
        let mut coasting = Vec::new();
        for (key, mut rows) in families {
            rows.sort_by(descending);
            rows.truncate(max_per_family);
            match key {
                FamilyKey::Root(_) => rooted.extend(rows),
                FamilyKey::Coasting(_) => coasting.extend(rows.into_iter().map(|r| (key, r))),
            }
        }
        let room = budget.saturating_sub(rooted.len());
        if coasting.len() > room {
            coasting.sort_by(|a, b| descending(&a.1, &b.1));
            coasting.truncate(room);
            coasting.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| descending(&a.1, &b.1)));
        }
        self.rows = rooted;
        self.rows.extend(coasting.into_iter().map(|(_, r)| r));
    }

    /// Drops entries whose nodes left the graph. Rows that lose their last
    /// node, end with no detections, or end with fewer than two detections
    /// and no origin track are removed; rows that collapse onto the same
    /// node sequence and track set keep the higher score.
    pub fn contract(&mut self, graph: &AssociationGraph) {
        let mut kept: Vec<Hypothesis> = Vec::with_capacity(self.rows.len());
        let mut index: HashMap<(Vec<NodeId>, Vec<TrackId>), usize> = HashMap::new();
        for mut row in self.rows.drain(..) {
            match row.last_node() {
                Some(n) if graph.contains(n) => {}
                _ => continue,
            }
            row.entries.retain(|&(_, n)| graph.contains(n));
            if row.entries.len() < 2 && row.origin_track.is_none() {
                continue;
            }
            let key = row.identity();
            match index.get(&key) {
                Some(&i) => {
                    if row.score > kept[i].score {
                        kept[i] = row;
                    }
                }
                None => {
                    index.insert(key, kept.len());
                    kept.push(row);
                }
            }
        }
        self.rows = kept;
    }

    /// Sets each row's origin to the owner of its last node and adds the
    /// owners of all its nodes to its track set. `resolve` maps a recorded
    /// track to the live track that absorbed it, or `None` once it is gone.
    pub fn tag_origins(
        &mut self,
        owner: impl Fn(NodeId) -> Option<TrackId>,
        resolve: impl Fn(TrackId) -> Option<TrackId>,
    ) {
        for row in &mut self.rows {
            if let Some(t) = row.last_node().and_then(&owner) {
                row.origin_track = Some(t);
            }
            let mut tracks: Vec<TrackId> = row.tracks.iter().filter_map(|&t| resolve(t)).collect();
            tracks.extend(row.origin_track.and_then(&resolve));
            tracks.extend(row.entries.iter().filter_map(|&(_, n)| owner(n)));
            tracks.sort_unstable();
            tracks.dedup();
            row.tracks = tracks;
        }
    }

    /// Every consecutive pair of entries must be joined by a graph edge.
    pub fn verify(&self, graph: &AssociationGraph) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            for w in row.entries.windows(2) {
                if !graph.has_edge(w[0].1, w[1].1) {
                    return Err(Error::Consistency(format!(
                        "row {i}: no edge {}→{}",
                        w[0].1, w[1].1
                    )));
                }
            }
        }
        Ok(())
    }

    /// The map as a `p × frames` table of slots over the graph window.
    pub fn z_map(&self, graph: &AssociationGraph) -> Vec<Vec<usize>> {
        let first = graph.window_bounds().map_or(0, |(lo, _)| lo);
        self.rows
            .iter()
            .map(|r| r.node_sequence(graph, first))
            .collect()
    }
}
