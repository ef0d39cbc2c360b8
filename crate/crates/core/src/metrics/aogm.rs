use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::lineage::LineageGraph;
use crate::matching::NodeMatching;
use crate::scalar::Scalar;

/// Penalty per graph edit operation.
/// Missing fields deserialize to the defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct AogmWeights<T = f64> {
    /// Splitting an under-segmented predicted node.
    #[serde(rename = "ns")]
    pub split_node: T,
    /// Adding a missing node.
    #[serde(rename = "fn")]
    pub add_node: T,
    /// Deleting a spurious node.
    #[serde(rename = "fp")]
    pub delete_node: T,
    #[serde(rename = "ea")]
    pub add_edge: T,
    #[serde(rename = "ed")]
    pub delete_edge: T,
    /// Changing an edge between link and division semantics.
    #[serde(rename = "ec")]
    pub change_edge: T,
}

impl<T: Scalar> Default for AogmWeights<T> {
    /// The Cell Tracking Challenge weights: NS 5, FN 10, FP 1, EA 1.5, ED 1, EC 1.
    fn default() -> Self {
        let n = |v: u64| T::from_count(v);
        Self {
            split_node: n(5),
            add_node: n(10),
            delete_node: n(1),
            add_edge: n(3) / n(2),
            delete_edge: n(1),
            change_edge: n(1),
        }
    }
}

impl<T: Scalar> AogmWeights<T> {
    pub fn validate(&self) -> Result<(), MetricError> {
        let all = [
            self.split_node,
            self.add_node,
            self.delete_node,
            self.add_edge,
            self.delete_edge,
            self.change_edge,
        ];
        if all.iter().any(|w| *w < T::zero()) {
            return Err(MetricError::InvalidWeights(
                "weights must be non-negative".into(),
            ));
        }
        let zero = T::zero();
        if !(self.split_node > zero || self.add_node > zero || self.delete_node > zero) {
            return Err(MetricError::InvalidWeights(
                "at least one node weight must be positive".into(),
            ));
        }
        if !(self.add_edge > zero || self.delete_edge > zero || self.change_edge > zero) {
            return Err(MetricError::InvalidWeights(
                "at least one edge weight must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            split_node: self.split_node * factor,
            add_node: self.add_node * factor,
            delete_node: self.delete_node * factor,
            add_edge: self.add_edge * factor,
            delete_edge: self.delete_edge * factor,
            change_edge: self.change_edge * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationCounts {
    pub ns: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub fp: u64,
    pub ea: u64,
    pub ed: u64,
    pub ec: u64,
}

impl OperationCounts {
    pub fn node_cost<T: Scalar>(&self, w: &AogmWeights<T>) -> T {
        T::from_count(self.ns) * w.split_node
            + T::from_count(self.fn_) * w.add_node
            + T::from_count(self.fp) * w.delete_node
    }

    pub fn edge_cost<T: Scalar>(&self, w: &AogmWeights<T>) -> T {
        T::from_count(self.ea) * w.add_edge
            + T::from_count(self.ed) * w.delete_edge
            + T::from_count(self.ec) * w.change_edge
    }
}

/// Operation counts together with the weighted totals and the empty-graph
/// references used for normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AogmBreakdown<T = f64> {
    pub counts: OperationCounts,
    pub aogm: T,
    /// Cost of building the ground truth from an empty graph.
    pub aogm_0: T,
    /// Edge operations only.
    pub aogma: T,
    /// Cost of adding every ground-truth edge.
    pub aogma_0: T,
}

impl<T: Scalar> AogmBreakdown<T> {
    /// `1 - min(AOGM, AOGM_0) / AOGM_0`.
    pub fn tra(&self) -> Result<T, MetricError> {
        if !(self.aogm_0 > T::zero()) {
            return Err(MetricError::EmptyGroundTruth);
        }
        Ok(T::one() - self.aogm.min_val(self.aogm_0) / self.aogm_0)
    }

    /// `1 - min(AOGMA, AOGMA_0) / AOGMA_0`, node costs excluded.
    pub fn lnk(&self) -> Result<T, MetricError> {
        if !(self.aogma_0 > T::zero()) {
            return Err(MetricError::NoGroundTruthEdges);
        }
        Ok(T::one() - self.aogma.min_val(self.aogma_0) / self.aogma_0)
    }
}

/// Counts the edit operations that turn `pred` into `gt` under `matching`.
///
/// Node operations: unmatched ground truth is FN, unmatched prediction is FP,
/// and a predicted node claimed by `m` ground-truth nodes needs `m - 1`
/// splits. A ground-truth edge is reproduced when both endpoints are matched
/// and the prediction links their counterparts; otherwise it is EA. A
/// reproduced edge whose division/link type differs costs EC. A predicted
/// edge that reproduces no ground-truth edge is ED.
pub fn aogm_counts(
    gt: &LineageGraph,
    pred: &LineageGraph,
    matching: &NodeMatching,
) -> Result<OperationCounts, MetricError> {
    check_consistency(gt, pred, matching)?;
    let mut c = OperationCounts {
        fn_: matching.false_negative_count() as u64,
        fp: matching.false_positive_count() as u64,
        ns: matching.split_sites().map(|(_, m)| m as u64 - 1).sum(),
        ..Default::default()
    };
    for (g1, g2) in gt.edges() {
        match (matching.pred_of(g1), matching.pred_of(g2)) {
            (Some(p1), Some(p2)) if pred.has_edge(p1, p2) => {
                let gt_division = gt.out_degree(g1) >= 2;
                let pred_division = pred.out_degree(p1) >= 2;
                if gt_division != pred_division {
                    c.ec += 1;
                }
            }
            _ => c.ea += 1,
        }
    }
    for (p1, p2) in pred.edges() {
        let sources = matching.gt_of(p1);
        let reproduces = matching.gt_of(p2).iter().any(|&g2| {
            gt.parent(g2)
                .is_some_and(|g1| sources.binary_search(&g1).is_ok())
        });
        if !reproduces {
            c.ed += 1;
        }
    }
    Ok(c)
}

pub fn aogm<T: Scalar>(
    gt: &LineageGraph,
    pred: &LineageGraph,
    matching: &NodeMatching,
    weights: &AogmWeights<T>,
) -> Result<AogmBreakdown<T>, MetricError> {
    weights.validate()?;
    let counts = aogm_counts(gt, pred, matching)?;
    let empty = OperationCounts {
        fn_: gt.node_count() as u64,
        ea: gt.edge_count() as u64,
        ..Default::default()
    };
    Ok(AogmBreakdown {
        counts,
        aogm: counts.node_cost(weights) + counts.edge_cost(weights),
        aogm_0: empty.node_cost(weights) + empty.edge_cost(weights),
        aogma: counts.edge_cost(weights),
        aogma_0: empty.edge_cost(weights),
    })
}

pub fn tra<T: Scalar>(
    gt: &LineageGraph,
    pred: &LineageGraph,
    matching: &NodeMatching,
    weights: &AogmWeights<T>,
) -> Result<T, MetricError> {
    aogm(gt, pred, matching, weights)?.tra()
}

pub fn lnk<T: Scalar>(
    gt: &LineageGraph,
    pred: &LineageGraph,
    matching: &NodeMatching,
    weights: &AogmWeights<T>,
) -> Result<T, MetricError> {
    aogm(gt, pred, matching, weights)?.lnk()
}

pub(super) fn check_consistency(
    gt: &LineageGraph,
    pred: &LineageGraph,
    m: &NodeMatching,
) -> Result<(), MetricError> {
    if m.gt_node_count() != gt.node_count() || m.pred_node_count() != pred.node_count() {
        return Err(MetricError::Inconsistent(format!(
            "matching covers {}/{} nodes, graphs have {}/{}",
            m.gt_node_count(),
            m.pred_node_count(),
            gt.node_count(),
            pred.node_count()
        )));
    }
    if let Some((g, p)) = m
        .matched_pairs()
        .find(|&(g, p)| !gt.contains(g) || !pred.contains(p))
    {
        return Err(MetricError::Inconsistent(format!(
            "matched pair {g} -> {p} not in graphs"
        )));
    }
    Ok(())
}
