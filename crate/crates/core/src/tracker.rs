//! Per-frame driver tying graph, hypotheses, solver and tracks together.

use log::{debug, warn};

use crate::assignment::{self, AssignmentProblem};
use crate::error::{Error, Result};
use crate::graph::{AssociationGraph, GraphExport, GraphParams};
use crate::hypothesis::{BranchLimits, HypothesisMap};
use crate::scoring::HypothesisScorer;
use crate::track::{TrackOutput, TrackSet};
use crate::types::{validate_config, Detection, TrackerConfig};

/// Bookkeeping for one processed frame.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameStats {
    /// Detections in the current frame.
    pub roots: usize,
    pub nodes: usize,
    pub edges: usize,
    pub hypotheses: usize,
    pub columns: usize,
    pub selected: usize,
    pub objective: f64,
    pub relaxation_was_integral: bool,
    pub sparsity: f64,
    pub solver_budget_exhausted: bool,
}

#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub frame_index: usize,
    pub timestamp: f64,
    pub tracks: Vec<TrackOutput>,
    /// Rows of [`Tracker::hypotheses`] chosen at this frame.
    pub selected: Vec<usize>,
    pub stats: FrameStats,
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    scorer: HypothesisScorer,
    graph: AssociationGraph,
    map: HypothesisMap,
    tracks: TrackSet,
    last_frame: Option<(usize, f64)>,
    last_problem: Option<AssignmentProblem>,
    keep_problem: bool,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        let config = validate_config(config).map_err(Error::InvalidConfig)?;
        Ok(Self {
            scorer: HypothesisScorer::new(&config),
            graph: AssociationGraph::new(GraphParams::from_config(&config)),
            map: HypothesisMap::new(),
            tracks: TrackSet::new(&config),
            last_frame: None,
            last_problem: None,
            keep_problem: false,
            config,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn graph(&self) -> &AssociationGraph {
        &self.graph
    }

    pub fn hypotheses(&self) -> &HypothesisMap {
        &self.map
    }

    pub fn tracks(&self) -> &TrackSet {
        &self.tracks
    }

    pub fn graph_export(&self) -> GraphExport {
        self.graph.export()
    }

    /// Keep the last assignment problem around for [`Tracker::last_problem`].
    pub fn retain_problems(&mut self, keep: bool) {
        self.keep_problem = keep;
    }

    pub fn last_problem(&self) -> Option<&AssignmentProblem> {
        self.last_problem.as_ref()
    }

    /// Processes one frame. Frames must arrive with strictly increasing
    /// indices and timestamps; gaps in the index are allowed.
    pub fn step(
        &mut self,
        frame_index: usize,
        timestamp: f64,
        detections: Vec<Detection>,
    ) -> Result<FrameOutput> {
        if !timestamp.is_finite() {
            return Err(Error::InvalidValue(format!(
                "timestamp {timestamp} is not finite"
            )));
        }
        if let Some((f, t)) = self.last_frame {
            if frame_index <= f || timestamp <= t {
                return Err(Error::Sequencing(format!(
                    "frame {frame_index} at t={timestamp} does not follow frame {f} at t={t}"
                )));
            }
        }
        for d in &detections {
            d.validate()?;
            if d.frame_index != frame_index || d.timestamp != timestamp {
                return Err(Error::Sequencing(format!(
                    "detection {} is stamped frame {} t={} inside frame {frame_index} t={timestamp}",
                    d.id, d.frame_index, d.timestamp
                )));
            }
        }
        let k = frame_index;
        let m = self.config.max_hypotheses;

        let removed = self.graph.contract_window(k, &self.tracks.anchors());
        self.tracks.forget_nodes(&removed);
        self.map.contract(&self.graph);

        self.graph.expand_frame(k, detections)?;
        let limits = BranchLimits {
            max_trailing_skips: self.config.delete_misses as usize,
        };
        self.map = self
            .map
            .branch_on_frame(&self.graph, k, &self.scorer, limits)?;
        let roots = self.graph.layer(k).len();
        self.map.prune_m_best(m, roots);

        let problem = assignment::build_problem(&self.map, &self.graph)?;
        let (solution, exhausted) = match assignment::solve(&problem, self.config.solver_node_limit)
        {
            Ok(s) => (s, false),
            Err(Error::Resource { nodes, incumbent }) => {
                warn!("frame {k}: solver stopped after {nodes} nodes, using incumbent");
                (*incumbent, true)
            }
            Err(e) => return Err(e),
        };
        let selected: Vec<usize> = solution
            .selected
            .iter()
            .map(|&j| problem.column_to_hypothesis[j])
            .collect();

        let tracks = self.tracks.commit(
            k,
            timestamp,
            &self.graph,
            &self.map,
            &selected,
            &self.scorer,
        )?;
        let owners = &self.tracks;
        self.map
            .tag_origins(|n| owners.owner(n), |t| owners.live(t));

        let stats = FrameStats {
            roots,
            nodes: self.graph.order(),
            edges: self.graph.size(),
            hypotheses: self.map.len(),
            columns: problem.num_columns(),
            selected: selected.len(),
            objective: solution.objective,
            relaxation_was_integral: solution.relaxation_was_integral,
            sparsity: problem.sparsity(),
            solver_budget_exhausted: exhausted,
        };
        debug!("frame {k}: {stats:?}");
        if self.keep_problem {
            self.last_problem = Some(problem);
        }
        self.last_frame = Some((k, timestamp));
        Ok(FrameOutput {
            frame_index: k,
            timestamp,
            tracks,
            selected,
            stats,
        })
    }

    /// Runs a whole scene, grouping detections by frame. Frames listed in
    /// `frames` with no detections are still stepped.
    pub fn run(
        &mut self,
        frames: &[(usize, f64)],
        detections: &[Detection],
    ) -> Result<Vec<FrameOutput>> {
        let mut by_frame: std::collections::BTreeMap<usize, Vec<Detection>> = Default::default();
        for d in detections {
            by_frame.entry(d.frame_index).or_default().push(d.clone());
        }
        frames
            .iter()
            .map(|&(f, t)| self.step(f, t, by_frame.remove(&f).unwrap_or_default()))
            .collect()
    }
}
