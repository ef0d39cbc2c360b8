//! Temporal subsampling and cell-count truncation of a time-lapse and its
//! ground-truth lineage, plus per-interval lineage statistics.

mod stats;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lineage::{LineageGraph, NodeKey, SegmentationSequence, SequenceError};

pub use stats::{exponential_smoothing, interval_stats, IntervalStats, DEFAULT_SMOOTHING};

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("subsampling factor must be at least 1")]
    ZeroFactor,
    #[error("cell count limit must be at least 1")]
    ZeroLimit,
    #[error("frame offset {offset} must be smaller than k = {k}")]
    Offset { offset: u32, k: u32 },
    #[error("sequence is empty")]
    EmptySequence,
    #[error("no frame survives: {0}")]
    EmptyCondition(String),
    #[error("ground-truth node {0} lies outside the sequence")]
    NodeOutsideSequence(NodeKey),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

/// Upper bound on the ground-truth cell count, or no bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum CellLimit {
    Max(u32),
    #[default]
    Unbounded,
}

impl CellLimit {
    pub fn admits(self, count: usize) -> bool {
        match self {
            CellLimit::Max(n) => count <= n as usize,
            CellLimit::Unbounded => true,
        }
    }
}

impl fmt::Display for CellLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellLimit::Max(n) => write!(f, "{n}"),
            CellLimit::Unbounded => f.write_str("inf"),
        }
    }
}

impl FromStr for CellLimit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "∞" | "unbounded" => Ok(CellLimit::Unbounded),
            n => n
                .parse()
                .map(CellLimit::Max)
                .map_err(|e| format!("bad cell limit {n:?}: {e}")),
        }
    }
}

impl Serialize for CellLimit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            CellLimit::Max(n) => s.serialize_u32(*n),
            CellLimit::Unbounded => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for CellLimit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u32),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n) => Ok(CellLimit::Max(n)),
            Raw::S(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Where to cut when the cell count crosses the limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Truncation {
    /// Keep retained frames up to (excluding) the first one over the limit.
    #[default]
    Prefix,
    /// Keep retained frames up to the last one within the limit, even if
    /// an earlier frame exceeded it.
    LastCompliant,
}

impl FromStr for Truncation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prefix" => Ok(Truncation::Prefix),
            "last-compliant" => Ok(Truncation::LastCompliant),
            other => Err(format!("unknown truncation rule {other:?}")),
        }
    }
}

/// One simulated experiment condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub k: u32,
    pub n_max: CellLimit,
    #[serde(default)]
    pub frame_offset: u32,
    #[serde(default)]
    pub truncation: Truncation,
}

impl ExperimentSpec {
    pub fn new(k: u32, n_max: CellLimit) -> Self {
        Self {
            k,
            n_max,
            frame_offset: 0,
            truncation: Truncation::Prefix,
        }
    }

    /// `k = 1`, no limit.
    pub fn identity() -> Self {
        Self::new(1, CellLimit::Unbounded)
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        if self.k == 0 {
            return Err(TransformError::ZeroFactor);
        }
        if self.n_max == CellLimit::Max(0) {
            return Err(TransformError::ZeroLimit);
        }
        if self.frame_offset >= self.k {
            return Err(TransformError::Offset {
                offset: self.frame_offset,
                k: self.k,
            });
        }
        Ok(())
    }

    fn retains(&self, frame: u32) -> bool {
        frame >= self.frame_offset && (frame - self.frame_offset) % self.k == 0
    }
}

#[derive(Debug, Clone)]
pub struct TransformResult {
    pub sequence: SegmentationSequence,
    pub graph: LineageGraph,
    /// Original frame index of each new frame.
    pub frame_map: Vec<u32>,
}

/// Keeps frames `offset, offset + k, ...`, truncates by ground-truth cell
/// count and induces the lineage on the kept frames.
///
/// Node `u` on a kept frame gets an edge to node `v` on a later kept frame
/// when `v` descends from `u` through nodes that all lie on dropped frames.
/// Lineages born and ended inside a gap leave no trace.
pub fn subsample(
    seq: &SegmentationSequence,
    gt: &LineageGraph,
    spec: &ExperimentSpec,
) -> Result<TransformResult, TransformError> {
    spec.validate()?;
    if seq.is_empty() {
        return Err(TransformError::EmptySequence);
    }
    if let Some(k) = gt.nodes().iter().find(|k| k.frame as usize >= seq.len()) {
        return Err(TransformError::NodeOutsideSequence(*k));
    }
    let mut counts = vec![0usize; seq.len()];
    for k in gt.nodes() {
        counts[k.frame as usize] += 1;
    }
    let lattice: Vec<u32> = (spec.frame_offset..seq.len() as u32)
        .step_by(spec.k as usize)
        .collect();
    let kept = match spec.truncation {
        Truncation::Prefix => lattice
            .iter()
            .take_while(|&&f| spec.n_max.admits(counts[f as usize]))
            .count(),
        Truncation::LastCompliant => lattice
            .iter()
            .rposition(|&f| spec.n_max.admits(counts[f as usize]))
            .map_or(0, |i| i + 1),
    };
    if kept == 0 {
        let first = lattice.first().map(|&f| counts[f as usize]).unwrap_or(0);
        return Err(TransformError::EmptyCondition(format!(
            "first retained frame has {first} cells, limit {}",
            spec.n_max
        )));
    }
    let frame_map = lattice[..kept].to_vec();
    let last_kept = frame_map[kept - 1];
    let new_index = |orig: u32| (orig - spec.frame_offset) / spec.k;

    let sequence = SegmentationSequence::from_frames(
        frame_map
            .iter()
            .map(|&f| Arc::clone(&seq.frames()[f as usize]))
            .collect(),
        seq.frame_interval_minutes() * spec.k as f64,
    )?;

    let on_kept = |key: NodeKey| spec.retains(key.frame) && key.frame <= last_kept;
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut stack = Vec::new();
    for i in 0..gt.node_count() {
        let key = gt.key(i);
        if !on_kept(key) {
            continue;
        }
        let from = NodeKey::new(new_index(key.frame), key.label);
        nodes.push(from);
        stack.extend_from_slice(gt.children_indices(i));
        while let Some(c) = stack.pop() {
            let ck = gt.key(c as usize);
            if spec.retains(ck.frame) {
                // descendants past a lattice frame belong to that frame's nodes
                if ck.frame <= last_kept {
                    edges.push((from, NodeKey::new(new_index(ck.frame), ck.label)));
                }
            } else {
                stack.extend_from_slice(gt.children_indices(c as usize));
            }
        }
    }
    let graph = LineageGraph::new(nodes, edges)
        .expect("induced lineage keeps forward edges and single parents");
    Ok(TransformResult {
        sequence,
        graph,
        frame_map,
    })
}
