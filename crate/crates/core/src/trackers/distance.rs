use crate::lineage::{Detection, LineageGraph, NodeKey};

use super::{Tracker, TrackerConfig, TrackerError, TrackerInput};

/// Greedy nearest-centroid linking between consecutive frames.
///
/// Candidate links within the gate are accepted in ascending distance
/// (ties by source then target key) while the target has no parent and the
/// source has room for another child.
#[derive(Debug, Clone)]
pub struct DistanceGreedy {
    config: TrackerConfig,
}

impl DistanceGreedy {
    pub fn new(config: TrackerConfig) -> Self {
        Self { config }
    }
}

impl Tracker for DistanceGreedy {
    fn name(&self) -> &str {
        "distance"
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }

    fn track(&self, input: &TrackerInput<'_>) -> Result<LineageGraph, TrackerError> {
        let seq = input.sequence;
        let gate = self.config.effective_gate(input.k);
        let mut edges = Vec::new();
        for t in 1..seq.len() {
            let sources = seq.frame(t - 1).detections();
            let targets = seq.frame(t).detections();
            let mut candidates = candidates_within(sources, targets, gate);
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut children = vec![0usize; sources.len()];
            let mut has_parent = vec![false; targets.len()];
            for (_, s, d) in candidates {
                if has_parent[d] || children[s] >= self.config.max_children {
                    continue;
                }
                has_parent[d] = true;
                children[s] += 1;
                edges.push((
                    NodeKey::new(t as u32 - 1, sources[s].label),
                    NodeKey::new(t as u32, targets[d].label),
                ));
            }
        }
        Ok(LineageGraph::new(seq.node_keys(), edges)?)
    }
}

/// `(distance, source index, target index)` for every pair within `gate`.
/// Indices follow label order, so index order equals key order.
fn candidates_within(
    sources: &[Detection],
    targets: &[Detection],
    gate: f64,
) -> Vec<(f64, usize, usize)> {
    let mut by_x: Vec<(f64, usize)> = targets
        .iter()
        .enumerate()
        .map(|(i, d)| (d.centroid[0], i))
        .collect();
    by_x.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = Vec::new();
    for (s, src) in sources.iter().enumerate() {
        let [sx, sy] = src.centroid;
        let lo = by_x.partition_point(|&(x, _)| x < sx - gate);
        for &(x, d) in by_x[lo..].iter().take_while(|&&(x, _)| x <= sx + gate) {
            let dist = (x - sx).hypot(targets[d].centroid[1] - sy);
            if dist <= gate {
                out.push((dist, s, d));
            }
        }
    }
    out
}
