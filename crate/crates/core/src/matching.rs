//! Correspondence between ground-truth and predicted detections.
//!
//! A ground-truth region matches the predicted region covering strictly more
//! than half of its pixels. At most one predicted region can do that, so the
//! ground-truth side of the matching is a function.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::lineage::{Frame, Label, NodeKey, SegmentationSequence};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    #[error("ground truth has {gt} frames, prediction has {pred}")]
    FrameCount { gt: usize, pred: usize },
    #[error("frame {frame}: ground truth is {gt:?}, prediction is {pred:?}")]
    Dimensions {
        frame: usize,
        gt: (u32, u32),
        pred: (u32, u32),
    },
}

/// Per-frame and global node correspondence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeMatching {
    gt_to_pred: BTreeMap<NodeKey, NodeKey>,
    pred_to_gt: BTreeMap<NodeKey, Vec<NodeKey>>,
    false_negatives: Vec<Vec<NodeKey>>,
    false_positives: Vec<Vec<NodeKey>>,
    gt_nodes: usize,
    pred_nodes: usize,
}

impl NodeMatching {
    pub fn pred_of(&self, gt: NodeKey) -> Option<NodeKey> {
        self.gt_to_pred.get(&gt).copied()
    }

    /// Ground-truth nodes matched to `pred`, sorted.
    pub fn gt_of(&self, pred: NodeKey) -> &[NodeKey] {
        self.pred_to_gt.get(&pred).map_or(&[], Vec::as_slice)
    }

    pub fn matched_pairs(&self) -> impl Iterator<Item = (NodeKey, NodeKey)> + '_ {
        self.gt_to_pred.iter().map(|(g, p)| (*g, *p))
    }

    pub fn matched_count(&self) -> usize {
        self.gt_to_pred.len()
    }

    /// Unmatched ground-truth nodes, one list per frame.
    pub fn false_negatives(&self) -> &[Vec<NodeKey>] {
        &self.false_negatives
    }

    /// Unmatched predicted nodes, one list per frame.
    pub fn false_positives(&self) -> &[Vec<NodeKey>] {
        &self.false_positives
    }

    pub fn false_negative_count(&self) -> usize {
        self.false_negatives.iter().map(Vec::len).sum()
    }

    pub fn false_positive_count(&self) -> usize {
        self.false_positives.iter().map(Vec::len).sum()
    }

    /// Predicted nodes claimed by two or more ground-truth nodes, with the
    /// number of claims.
    pub fn split_sites(&self) -> impl Iterator<Item = (NodeKey, usize)> + '_ {
        self.pred_to_gt
            .iter()
            .filter(|(_, g)| g.len() >= 2)
            .map(|(p, g)| (*p, g.len()))
    }

    pub fn gt_node_count(&self) -> usize {
        self.gt_nodes
    }

    pub fn pred_node_count(&self) -> usize {
        self.pred_nodes
    }

    fn push_frame(&mut self, t: usize, gt: &Frame, pred: &Frame, pairs: Vec<(Label, Label)>) {
        let t32 = t as u32;
        let mut fns = Vec::new();
        let mut matched_gt: HashMap<Label, Label> = pairs.into_iter().collect();
        for d in gt.detections() {
            match matched_gt.remove(&d.label) {
                Some(p) => {
                    let (g, p) = (NodeKey::new(t32, d.label), NodeKey::new(t32, p));
                    let prev = self.gt_to_pred.insert(g, p);
                    assert!(prev.is_none(), "ground-truth node {g} matched twice");
                    self.pred_to_gt.entry(p).or_default().push(g);
                }
                None => fns.push(NodeKey::new(t32, d.label)),
            }
        }
        let fps = pred
            .detections()
            .iter()
            .map(|d| NodeKey::new(t32, d.label))
            .filter(|k| !self.pred_to_gt.contains_key(k))
            .collect();
        self.false_negatives.push(fns);
        self.false_positives.push(fps);
        self.gt_nodes += gt.detections().len();
        self.pred_nodes += pred.detections().len();
    }
}

/// Matches every frame of `pred` against the same frame of `gt`.
///
/// Frames whose rasters are identical take a label-identity shortcut, which
/// yields the same result as the overlap computation.
pub fn match_frames(
    gt: &SegmentationSequence,
    pred: &SegmentationSequence,
) -> Result<NodeMatching, MatchError> {
    match_with(gt, pred, true)
}

/// Same as [`match_frames`] but always counts pixel overlaps.
pub fn match_frames_by_overlap(
    gt: &SegmentationSequence,
    pred: &SegmentationSequence,
) -> Result<NodeMatching, MatchError> {
    match_with(gt, pred, false)
}

fn match_with(
    gt: &SegmentationSequence,
    pred: &SegmentationSequence,
    fast_path: bool,
) -> Result<NodeMatching, MatchError> {
    if gt.len() != pred.len() {
        return Err(MatchError::FrameCount {
            gt: gt.len(),
            pred: pred.len(),
        });
    }
    for (t, (g, p)) in gt.frames().iter().zip(pred.frames()).enumerate() {
        let (gd, pd) = (
            (g.image().width(), g.image().height()),
            (p.image().width(), p.image().height()),
        );
        if gd != pd {
            return Err(MatchError::Dimensions {
                frame: t,
                gt: gd,
                pred: pd,
            });
        }
    }
    let per_frame: Vec<Vec<(Label, Label)>> = gt
        .frames()
        .par_iter()
        .zip(pred.frames().par_iter())
        .map(|(g, p)| {
            if fast_path && g.image() == p.image() {
                g.detections().iter().map(|d| (d.label, d.label)).collect()
            } else {
                frame_pairs(g, p)
            }
        })
        .collect();
    let mut m = NodeMatching::default();
    for (t, pairs) in per_frame.into_iter().enumerate() {
        m.push_frame(t, gt.frame(t), pred.frame(t), pairs);
    }
    Ok(m)
}

/// Pixel co-occurrence counts between two label images of equal size,
/// keyed by `(a_label, b_label)` over pixels where both are nonzero.
pub fn overlap_counts(a: &Frame, b: &Frame) -> HashMap<(Label, Label), u64> {
    let mut counts = HashMap::new();
    for (&x, &y) in a.image().labels().iter().zip(b.image().labels()) {
        if x != 0 && y != 0 {
            *counts.entry((x, y)).or_insert(0u64) += 1;
        }
    }
    counts
}

fn frame_pairs(gt: &Frame, pred: &Frame) -> Vec<(Label, Label)> {
    let mut pairs: Vec<(Label, Label)> = overlap_counts(gt, pred)
        .into_iter()
        .filter(|&((g, _), n)| {
            let area = gt.detection(g).map_or(0, |d| d.area);
            2 * n > area
        })
        .map(|(k, _)| k)
        .collect();
    pairs.sort_unstable();
    pairs
}
