use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::aogm::check_consistency;
use super::MetricError;
use crate::lineage::{build_tracks, LineageGraph, NodeKey};
use crate::matching::NodeMatching;
use crate::scalar::Scalar;

/// True/false positive and false negative counts of one event type with the
/// derived scores. Scores are `None` where their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventCounts<T = f64> {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: Option<T>,
    pub recall: Option<T>,
    pub f1: Option<T>,
}

impl<T: Scalar> EventCounts<T> {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let ratio = |num: u64, den: u64| (den > 0).then(|| T::from_count(num) / T::from_count(den));
        Self {
            tp,
            fp,
            fn_,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
        }
    }
}

/// Division reconstruction.
///
/// A ground-truth division (out-degree >= 2) is found when its node and all
/// of its children are matched, the children map to distinct predicted
/// nodes, and the matched parent has exactly those predicted children.
/// Predicted divisions that found no ground-truth division are false
/// positives.
pub fn div_f1<T: Scalar>(
    gt: &LineageGraph,
    pred: &LineageGraph,
    m: &NodeMatching,
) -> Result<EventCounts<T>, MetricError> {
    check_consistency(gt, pred, m)?;
    let mut tp = 0;
    let mut fn_ = 0;
    let mut found = BTreeSet::new();
    for &g in gt.nodes().iter().filter(|&&g| gt.out_degree(g) >= 2) {
        match reproduced_division(gt, pred, m, g) {
            Some(p) => {
                tp += 1;
                found.insert(p);
            }
            None => fn_ += 1,
        }
    }
    let pred_divisions = pred
        .nodes()
        .iter()
        .filter(|&&p| pred.out_degree(p) >= 2)
        .count() as u64;
    Ok(EventCounts::from_counts(
        tp,
        pred_divisions - found.len() as u64,
        fn_,
    ))
}

fn reproduced_division(
    gt: &LineageGraph,
    pred: &LineageGraph,
    m: &NodeMatching,
    g: NodeKey,
) -> Option<NodeKey> {
    let p = m.pred_of(g)?;
    let mapped: Option<BTreeSet<NodeKey>> = gt.children(g).map(|c| m.pred_of(c)).collect();
    let mapped = mapped?;
    if mapped.len() != gt.out_degree(g) {
        return None;
    }
    let actual: BTreeSet<NodeKey> = pred.children(p).collect();
    (actual == mapped).then_some(p)
}

/// Complete tracks.
///
/// A ground-truth track is found when its members, mapped through the
/// matching, are exactly the member list of one predicted track. Predicted
/// tracks not hit this way are false positives.
pub fn ct_f1<T: Scalar>(
    gt: &LineageGraph,
    pred: &LineageGraph,
    m: &NodeMatching,
) -> Result<EventCounts<T>, MetricError> {
    check_consistency(gt, pred, m)?;
    let pred_tracks = build_tracks(pred);
    let by_first: HashMap<NodeKey, usize> = pred_tracks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.members[0], i))
        .collect();
    let gt_tracks = build_tracks(gt);
    let mut hit = BTreeSet::new();
    let mut tp = 0;
    for t in &gt_tracks {
        let mapped: Option<Vec<NodeKey>> = t.members.iter().map(|&g| m.pred_of(g)).collect();
        let Some(mapped) = mapped else { continue };
        if let Some(&i) = by_first.get(&mapped[0]) {
            if pred_tracks[i].members == mapped {
                tp += 1;
                hit.insert(i);
            }
        }
    }
    // merged predictions can serve several ground-truth tracks at once
    Ok(EventCounts::from_counts(
        tp,
        (pred_tracks.len() - hit.len()) as u64,
        gt_tracks.len() as u64 - tp,
    ))
}
