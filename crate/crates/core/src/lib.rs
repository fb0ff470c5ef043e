//! Sliding-window multi-hypothesis tracking for 3D object detections.
//!
//! Detections from a fixed number of recent frames are kept in a sparse
//! association graph whose edges may skip frames. Candidate tracks are
//! enumerated as graph traversals, scored by a log-likelihood ratio against
//! the clutter hypothesis, and a conflict-free subset is selected by solving
//! a 0/1 packing program through its LP relaxation. The selected
//! associations are then mapped onto persistent, causal track identities.
//!
//! The crate also ships a deterministic scene simulator and a CLEAR-MOT /
//! AMOTA evaluator so the tracker can be exercised without a dataset.

pub mod assignment;
pub mod error;
pub mod filter;
pub mod graph;
pub mod hypothesis;
pub mod io;
pub mod metrics;
pub mod scoring;
pub mod sim;
pub mod track;
pub mod tracker;
pub mod types;

pub use assignment::{AssignmentProblem, AssignmentSolution};
pub use error::{ConfigViolation, Error, Result};
pub use filter::{ConstantVelocity, GaussianBelief};
pub use graph::{AssociationGraph, GraphEdge, GraphNode, NodeId};
pub use hypothesis::{Hypothesis, HypothesisMap};
pub use metrics::{GroundTruthRecord, MetricsReport};
pub use scoring::ScoreIncrement;
pub use sim::ScenarioSpec;
pub use track::{Track, TrackId, TrackOutput, TrackSet, TrackStatus};
pub use tracker::{FrameOutput, Tracker};
pub use types::{
    normalize_yaw, validate_config, ClassLabel, Detection, DetectionId, ObjectState,
    ObservationMode, TrackerConfig,
};
