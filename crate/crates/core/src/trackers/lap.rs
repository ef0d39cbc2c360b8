use std::collections::{BTreeMap, HashMap};

use crate::assignment::{solve, CostMatrix};
use crate::lineage::{Frame, Label, LineageGraph, NodeKey};
use crate::matching::overlap_counts;

use super::{OverlapCost, Tracker, TrackerConfig, TrackerError, TrackerInput};

/// Frame-to-frame linear assignment on mask-overlap costs with birth and
/// death alternatives, followed by a division pass that hands each
/// still-unlinked target to the overlapping linked source it shares the most
/// pixels with.
///
/// Only overlapping pairs are linkable, so each frame pair splits into
/// independent overlap components that are solved separately.
#[derive(Debug, Clone)]
pub struct LapOverlap {
    config: TrackerConfig,
}

impl LapOverlap {
    pub fn new(config: TrackerConfig) -> Self {
        Self { config }
    }

    fn link_pair(&self, a: &Frame, b: &Frame) -> Result<Vec<(Label, Label)>, TrackerError> {
        let sources = a.detections();
        let targets = b.detections();
        let n = sources.len();
        let src_index: HashMap<Label, usize> = sources
            .iter()
            .enumerate()
            .map(|(i, d)| (d.label, i))
            .collect();
        let dst_index: HashMap<Label, usize> = targets
            .iter()
            .enumerate()
            .map(|(i, d)| (d.label, i))
            .collect();

        let mut overlaps: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for ((la, lb), count) in overlap_counts(a, b) {
            overlaps.insert((src_index[&la], dst_index[&lb]), count);
        }
        if overlaps.is_empty() {
            return Ok(Vec::new());
        }
        let cost = |s: usize, d: usize, inter: u64| -> f64 {
            let (au, av) = (sources[s].area as f64, targets[d].area as f64);
            let inter = inter as f64;
            match self.config.overlap {
                OverlapCost::Iou => 1.0 - inter / (au + av - inter),
                OverlapCost::IntersectionOverTarget => 1.0 - inter / av,
            }
        };
        let fill = overlaps
            .iter()
            .map(|(&(s, d), &c)| cost(s, d, c))
            .reduce(f64::min);

        // union-find over sources 0..n and targets n..n+m
        let mut parent: Vec<usize> = (0..n + targets.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(s, d) in overlaps.keys() {
            let (rs, rd) = (find(&mut parent, s), find(&mut parent, n + d));
            if rs != rd {
                parent[rs.max(rd)] = rs.min(rd);
            }
        }
        let mut components: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
        for &(s, d) in overlaps.keys() {
            let root = find(&mut parent, s);
            let entry = components.entry(root).or_default();
            entry.0.push(s);
            entry.1.push(d);
        }

        let mut children = vec![0usize; n];
        let mut has_parent = vec![false; targets.len()];
        let mut links = Vec::new();
        for (rows, cols) in components.values_mut() {
            rows.sort_unstable();
            rows.dedup();
            cols.sort_unstable();
            cols.dedup();
            let mut local = CostMatrix::forbidden(rows.len(), cols.len());
            for (i, &s) in rows.iter().enumerate() {
                for (j, &d) in cols.iter().enumerate() {
                    if let Some(&c) = overlaps.get(&(s, d)) {
                        local.set(i, j, Some(cost(s, d, c)));
                    }
                }
            }
            let augmented =
                local.augment_with_fill(self.config.birth_cost, self.config.death_cost, fill);
            let assignment = solve(&augmented)?;
            for (i, &s) in rows.iter().enumerate() {
                if let Some(j) = assignment.row_to_col[i].filter(|&j| j < cols.len()) {
                    let d = cols[j];
                    children[s] += 1;
                    has_parent[d] = true;
                    links.push((s, d));
                }
            }
        }

        for d in 0..targets.len() {
            if has_parent[d] {
                continue;
            }
            let best = overlaps
                .iter()
                .filter(|&(&(s, dd), _)| {
                    dd == d && children[s] >= 1 && children[s] < self.config.max_children
                })
                .max_by(|a, b| a.1.cmp(b.1).then(b.0 .0.cmp(&a.0 .0)))
                .map(|(&(s, _), _)| s);
            if let Some(s) = best {
                children[s] += 1;
                has_parent[d] = true;
                links.push((s, d));
            }
        }
        Ok(links
            .into_iter()
            .map(|(s, d)| (sources[s].label, targets[d].label))
            .collect())
    }
}

impl Tracker for LapOverlap {
    fn name(&self) -> &str {
        "lap"
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::to_value(&self.config).expect("config serializes")
    }

    fn track(&self, input: &TrackerInput<'_>) -> Result<LineageGraph, TrackerError> {
        let seq = input.sequence;
        let mut edges = Vec::new();
        for t in 1..seq.len() {
            for (la, lb) in self.link_pair(seq.frame(t - 1), seq.frame(t))? {
                edges.push((NodeKey::new(t as u32 - 1, la), NodeKey::new(t as u32, lb)));
            }
        }
        Ok(LineageGraph::new(seq.node_keys(), edges)?)
    }
}
