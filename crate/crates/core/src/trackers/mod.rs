//! Tracking-by-detection baselines. Every tracker consumes a (possibly
//! subsampled) segmentation and returns a lineage over exactly its
//! detections.

mod distance;
mod lap;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::AssignmentError;
use crate::lineage::{GraphError, LineageGraph, SegmentationSequence};

pub use distance::DistanceGreedy;
pub use lap::LapOverlap;

#[derive(Debug, Error)]
pub enum TrackerError {
    #[error("oracle tracker needs the ground-truth lineage")]
    MissingGroundTruth,
    #[error("invalid tracker configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// What a tracker gets to see for one run.
#[derive(Debug, Clone, Copy)]
pub struct TrackerInput<'a> {
    pub sequence: &'a SegmentationSequence,
    /// Only the oracle reads this.
    pub ground_truth: Option<&'a LineageGraph>,
    /// Subsampling factor of `sequence`, for parameters that scale with the
    /// imaging interval.
    pub k: u32,
}

impl<'a> TrackerInput<'a> {
    pub fn new(sequence: &'a SegmentationSequence) -> Self {
        Self {
            sequence,
            ground_truth: None,
            k: 1,
        }
    }
}

pub trait Tracker: Send + Sync {
    fn name(&self) -> &str;

    /// Parameters recorded in report provenance.
    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "method": self.name() })
    }

    fn track(&self, input: &TrackerInput<'_>) -> Result<LineageGraph, TrackerError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackerMethod {
    Distance,
    Lap,
    Oracle,
    Empty,
}

impl fmt::Display for TrackerMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrackerMethod::Distance => "distance",
            TrackerMethod::Lap => "lap",
            TrackerMethod::Oracle => "oracle",
            TrackerMethod::Empty => "empty",
        })
    }
}

impl FromStr for TrackerMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "distance" => Ok(TrackerMethod::Distance),
            "lap" => Ok(TrackerMethod::Lap),
            "oracle" => Ok(TrackerMethod::Oracle),
            "empty" => Ok(TrackerMethod::Empty),
            other => Err(format!(
                "unknown tracker {other:?} (distance, lap, oracle, empty)"
            )),
        }
    }
}

/// Linking cost derived from mask overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapCost {
    /// `1 - |u ∩ v| / |u ∪ v|`
    #[default]
    Iou,
    /// `1 - |u ∩ v| / |v|`
    IntersectionOverTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    pub method: TrackerMethod,
    /// Maximum centroid displacement in pixels at the native interval.
    pub gate: f64,
    /// Multiply the gate by the subsampling factor.
    pub scale_gate_with_k: bool,
    pub birth_cost: f64,
    pub death_cost: f64,
    /// Children a source may receive; 2 allows binary divisions.
    pub max_children: usize,
    pub overlap: OverlapCost,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            method: TrackerMethod::Lap,
            gate: 60.0,
            scale_gate_with_k: true,
            birth_cost: 1.0,
            death_cost: 1.0,
            max_children: 2,
            overlap: OverlapCost::Iou,
        }
    }
}

impl TrackerConfig {
    pub fn with_method(method: TrackerMethod) -> Self {
        Self {
            method,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        if !(self.gate > 0.0) {
            return Err(TrackerError::Config(format!(
                "gate must be positive, got {}",
                self.gate
            )));
        }
        if self.max_children < 1 {
            return Err(TrackerError::Config(
                "max_children must be at least 1".into(),
            ));
        }
        if matches!(self.method, TrackerMethod::Distance | TrackerMethod::Lap)
            && self.max_children < 2
        {
            return Err(TrackerError::Config(
                "division-capable trackers need max_children >= 2".into(),
            ));
        }
        if !(self.birth_cost >= 0.0 && self.death_cost >= 0.0) {
            return Err(TrackerError::Config(
                "birth and death costs must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn effective_gate(&self, k: u32) -> f64 {
        if self.scale_gate_with_k {
            self.gate * k as f64
        } else {
            self.gate
        }
    }

    pub fn build(&self) -> Result<Box<dyn Tracker>, TrackerError> {
        self.validate()?;
        Ok(match self.method {
            TrackerMethod::Distance => Box::new(DistanceGreedy::new(self.clone())),
            TrackerMethod::Lap => Box::new(LapOverlap::new(self.clone())),
            TrackerMethod::Oracle => Box::new(OracleTracker),
            TrackerMethod::Empty => Box::new(EmptyTracker),
        })
    }
}

/// Returns the ground-truth lineage unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleTracker;

impl Tracker for OracleTracker {
    fn name(&self) -> &str {
        "oracle"
    }

    fn track(&self, input: &TrackerInput<'_>) -> Result<LineageGraph, TrackerError> {
        input
            .ground_truth
            .cloned()
            .ok_or(TrackerError::MissingGroundTruth)
    }
}

/// Every detection, no links.
#[derive(Debug, Clone, Copy, Default)]
pub struct EmptyTracker;

impl Tracker for EmptyTracker {
    fn name(&self) -> &str {
        "empty"
    }

    fn track(&self, input: &TrackerInput<'_>) -> Result<LineageGraph, TrackerError> {
        Ok(LineageGraph::new(input.sequence.node_keys(), [])?)
    }
}
