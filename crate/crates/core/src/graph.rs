//! Sparse association graph over the sliding window.
//!
//! Nodes are detections grouped in per-frame layers. Directed edges always
//! point forward in time and may skip frames ("lifted" edges), which lets a
//! hypothesis bridge missed detections. Edges are pruned at insertion by a
//! class gate and a velocity-bounded distance gate.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{ClassLabel, Detection, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone)]
pub struct GraphNode {
    pub id: NodeId,
    pub frame_index: usize,
    pub detection: Arc<Detection>,
    /// Set once the node is older than the window and kept only because it
    /// is the last observation of a live track.
    pub is_dormant_anchor: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GraphEdge {
    pub from: NodeId,
    pub to: NodeId,
    pub frame_gap: usize,
}

impl GraphEdge {
    pub fn is_lifted(&self) -> bool {
        self.frame_gap > 1
    }
}

/// Edge-pruning parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gates {
    pub v_lim_mps: BTreeMap<String, f64>,
    pub default_v_lim_mps: f64,
    pub distance_cap_m: f64,
}

impl Gates {
    pub fn from_config(config: &TrackerConfig) -> Self {
        Self {
            v_lim_mps: config.v_lim_mps.clone(),
            default_v_lim_mps: config.default_v_lim_mps,
            distance_cap_m: config.distance_cap_m,
        }
    }

    pub fn velocity_limit(&self, class: &ClassLabel) -> f64 {
        self.v_lim_mps
            .get(class.as_str())
            .copied()
            .unwrap_or(self.default_v_lim_mps)
    }

    pub fn admits(&self, a: &Detection, b: &Detection) -> Result<bool> {
        Ok(class_gate(a, b)
            && distance_gate(a, b, self.velocity_limit(&a.class), self.distance_cap_m)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphParams {
    /// `T`: frames kept behind the current one.
    pub window_length: usize,
    /// `T_old`: additional frames dormant anchors survive.
    pub dormant_horizon: usize,
    /// `None` connects every cross-frame pair.
    pub gates: Option<Gates>,
}

impl GraphParams {
    pub fn from_config(config: &TrackerConfig) -> Self {
        Self {
            window_length: config.window_length_frames,
            dormant_horizon: config.dormant_horizon_frames,
            gates: Some(Gates::from_config(config)),
        }
    }
}

pub fn class_gate(a: &Detection, b: &Detection) -> bool {
    a.class == b.class
}

/// True iff the centers are within `min(v_lim·|Δt|, cap)`.
pub fn distance_gate(a: &Detection, b: &Detection, v_lim: f64, cap: f64) -> Result<bool> {
    let dt = (b.timestamp - a.timestamp).abs();
    if dt == 0.0 {
        return Err(Error::InvalidPair(format!(
            "detections {} and {} share timestamp {}",
            a.id, b.id, a.timestamp
        )));
    }
    let limit = (v_lim * dt).min(cap);
    Ok((a.position - b.position).norm() <= limit)
}

/// Dense-graph sizes for the given per-frame detection counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseCounts {
    /// `|V| = Σ N_i`.
    pub order: u64,
    /// Cross-frame pairs `Σ_{i<j} N_i N_j`, the edges this graph can hold.
    pub size: u64,
    /// The double sum read literally from `j = i`, which also counts
    /// same-frame pairs. Kept for comparison only.
    pub size_including_same_frame: u64,
    /// Node-or-skip sequences with at least two detections:
    /// `Π (N_i + 1) − Σ N_i − 1`. Saturates at `u128::MAX`.
    pub hypotheses: u128,
}

pub fn dense_counts(layer_sizes: &[u64]) -> DenseCounts {
    let order: u64 = layer_sizes.iter().sum();
    let mut size = 0u64;
    let mut with_same = 0u64;
    for (i, &ni) in layer_sizes.iter().enumerate() {
        for (j, &nj) in layer_sizes.iter().enumerate().skip(i) {
            with_same += ni * nj;
            if j > i {
                size += ni * nj;
            }
        }
    }
    let product = layer_sizes
        .iter()
        .try_fold(1u128, |acc, &n| acc.checked_mul(n as u128 + 1));
    let hypotheses = match product {
        Some(p) => p - order as u128 - 1,
        None => u128::MAX,
    };
    DenseCounts {
        order,
        size,
        size_including_same_frame: with_same,
        hypotheses,
    }
}

#[derive(Debug, Clone)]
pub struct AssociationGraph {
    params: GraphParams,
    layers: BTreeMap<usize, Vec<GraphNode>>,
    frame_of: HashMap<NodeId, usize>,
    successors: HashMap<NodeId, Vec<NodeId>>,
    predecessors: HashMap<NodeId, Vec<NodeId>>,
    current_frame: Option<usize>,
    next_node: u64,
}

impl AssociationGraph {
    pub fn new(params: GraphParams) -> Self {
        Self {
            params,
            layers: BTreeMap::new(),
            frame_of: HashMap::new(),
            successors: HashMap::new(),
            predecessors: HashMap::new(),
            current_frame: None,
            next_node: 0,
        }
    }

    pub fn params(&self) -> &GraphParams {
        &self.params
    }

    pub fn current_frame(&self) -> Option<usize> {
        self.current_frame
    }

    /// `(oldest frame that may hold nodes, current frame)`.
    pub fn window_bounds(&self) -> Option<(usize, usize)> {
        let k = self.current_frame?;
        let lo = k.saturating_sub(self.params.window_length + self.params.dormant_horizon);
        Some((lo, k))
    }

    pub fn order(&self) -> usize {
        self.frame_of.len()
    }

    pub fn size(&self) -> usize {
        self.successors.values().map(Vec::len).sum()
    }

    pub fn frames(&self) -> impl Iterator<Item = usize> + '_ {
        self.layers.keys().copied()
    }

    pub fn layer(&self, frame: usize) -> &[GraphNode] {
        self.layers.get(&frame).map_or(&[], Vec::as_slice)
    }

    /// `(frame, node count)` for every non-empty layer.
    pub fn layer_sizes(&self) -> Vec<(usize, usize)> {
        self.layers.iter().map(|(&f, l)| (f, l.len())).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.layers.values().flatten()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.frame_of.contains_key(&id)
    }

    pub fn node(&self, id: NodeId) -> Option<&GraphNode> {
        let frame = self.frame_of.get(&id)?;
        let layer = self.layers.get(frame)?;
        layer
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| &layer[i])
    }

    /// 1-based position of the node inside its layer.
    pub fn slot(&self, id: NodeId) -> Option<usize> {
        let frame = self.frame_of.get(&id)?;
        self.layers[frame]
            .binary_search_by_key(&id, |n| n.id)
            .ok()
            .map(|i| i + 1)
    }

    pub fn successors(&self, id: NodeId) -> &[NodeId] {
        self.successors.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn predecessors(&self, id: NodeId) -> &[NodeId] {
        self.predecessors.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn has_edge(&self, from: NodeId, to: NodeId) -> bool {
        self.successors(from).contains(&to)
    }

    pub fn edges(&self) -> Vec<GraphEdge> {
        let mut out = Vec::with_capacity(self.size());
        for node in self.nodes() {
            for &to in self.successors(node.id) {
                out.push(GraphEdge {
                    from: node.id,
                    to,
                    frame_gap: self.frame_of[&to] - node.frame_index,
                });
            }
        }
        out
    }

    /// Adds one node per detection at frame `frame` and connects every
    /// retained earlier node to each new node that passes the gates.
    pub fn expand_frame(
        &mut self,
        frame: usize,
        detections: Vec<Detection>,
    ) -> Result<Vec<GraphEdge>> {
        if let Some(k) = self.current_frame {
            if frame <= k {
                return Err(Error::Sequencing(format!(
                    "frame {frame} does not follow frame {k}"
                )));
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame_index != frame) {
            return Err(Error::Sequencing(format!(
                "detection {} has frame {} but was added at frame {frame}",
                d.id, d.frame_index
            )));
        }

        let mut layer = Vec::with_capacity(detections.len());
        for det in detections {
            let id = NodeId(self.next_node);
            self.next_node += 1;
            layer.push(GraphNode {
                id,
                frame_index: frame,
                detection: Arc::new(det),
                is_dormant_anchor: false,
            });
        }

        let mut added = Vec::new();
        for new in &layer {
            let mut preds = Vec::new();
            for (&f, earlier) in &self.layers {
                for old in earlier {
                    let keep = match &self.params.gates {
                        Some(g) => g.admits(&old.detection, &new.detection)?,
                        None => true,
                    };
                    if keep {
                        preds.push(old.id);
                        added.push(GraphEdge {
                            from: old.id,
                            to: new.id,
                            frame_gap: frame - f,
                        });
                    }
                }
            }
            for &p in &preds {
                self.successors.entry(p).or_default().push(new.id);
            }
            if !preds.is_empty() {
                self.predecessors.insert(new.id, preds);
            }
        }

        for n in &layer {
            self.frame_of.insert(n.id, frame);
        }
        if !layer.is_empty() {
            self.layers.insert(frame, layer);
        }
        self.current_frame = Some(frame);
        Ok(added)
    }

    /// Slides the window so that `new_k` becomes the next frame: drops every
    /// node older than `new_k − T − T_old`, and nodes older than `new_k − T`
    /// unless they are in `anchors`. Returns the removed node ids.
    pub fn contract_window(&mut self, new_k: usize, anchors: &HashSet<NodeId>) -> Vec<NodeId> {
        let lo = new_k.saturating_sub(self.params.window_length);
        let floor = new_k.saturating_sub(self.params.window_length + self.params.dormant_horizon);
        let mut removed = Vec::new();
        let stale: Vec<usize> = self.layers.range(..lo).map(|(&f, _)| f).collect();
        for f in stale {
            let layer = self.layers.get_mut(&f).expect("frame listed above");
            layer.retain_mut(|n| {
                let keep = f >= floor && anchors.contains(&n.id);
                if keep {
                    n.is_dormant_anchor = true;
                } else {
                    removed.push(n.id);
                }
                keep
            });
            if layer.is_empty() {
                self.layers.remove(&f);
            }
        }
        if removed.is_empty() {
            return removed;
        }
        let gone: HashSet<NodeId> = removed.iter().copied().collect();
        for id in &removed {
            self.frame_of.remove(id);
            if let Some(succ) = self.successors.remove(id) {
                for s in succ {
                    if let Some(p) = self.predecessors.get_mut(&s) {
                        p.retain(|x| !gone.contains(x));
                    }
                }
            }
            self.predecessors.remove(id);
        }
        self.predecessors.retain(|_, p| !p.is_empty());
        removed
    }

    /// Re-checks every edge against the gates and the forward-in-time rule.
    pub fn verify(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in self.edges() {
            let (a, b) = match (self.node(e.from), self.node(e.to)) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    return Err(Error::Consistency(format!(
                        "edge {}→{} dangles",
                        e.from, e.to
                    )))
                }
            };
            if a.frame_index >= b.frame_index {
                return Err(Error::Consistency(format!(
                    "edge {}→{} points backwards",
                    e.from, e.to
                )));
            }
            if let Some(g) = &self.params.gates {
                if !g.admits(&a.detection, &b.detection)? {
                    return Err(Error::Consistency(format!(
                        "edge {}→{} violates a gate",
                        e.from, e.to
                    )));
                }
            }
            if !seen.insert((e.from, e.to)) {
                return Err(Error::Consistency(format!(
                    "duplicate edge {}→{}",
                    e.from, e.to
                )));
            }
        }
        Ok(())
    }

    pub fn export(&self) -> GraphExport {
        GraphExport {
            format_version: 1,
            current_frame: self.current_frame,
            nodes: self
                .nodes()
                .map(|n| NodeExport {
                    id: n.id,
                    frame_index: n.frame_index,
                    slot: self.slot(n.id).unwrap_or(0),
                    detection_id: n.detection.id.0,
                    class: n.detection.class.to_string(),
                    dormant_anchor: n.is_dormant_anchor,
                })
                .collect(),
            edges: self
                .edges()
                .into_iter()
                .map(|e| EdgeExport {
                    from: e.from,
                    to: e.to,
                    frame_gap: e.frame_gap,
                })
                .collect(),
        }
    }
}

/// Serializable snapshot of the graph for inspection.
#[derive(Debug, Clone, Serialize)]
pub struct GraphExport {
    pub format_version: u32,
    pub current_frame: Option<usize>,
    pub nodes: Vec<NodeExport>,
    pub edges: Vec<EdgeExport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeExport {
    pub id: NodeId,
    pub frame_index: usize,
    pub slot: usize,
    pub detection_id: u64,
    pub class: String,
    pub dormant_anchor: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeExport {
    pub from: NodeId,
    pub to: NodeId,
    pub frame_gap: usize,
}
