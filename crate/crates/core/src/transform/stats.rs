use serde::{Deserialize, Serialize};

use super::{subsample, CellLimit, ExperimentSpec, TransformError};
use crate::lineage::{LineageGraph, SegmentationSequence};

/// Weight of the newest observation in the smoothed series.
pub const DEFAULT_SMOOTHING: f64 = 0.1;

/// Lineage statistics of one subsampling factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalStats {
    pub k: u32,
    pub smoothing: f64,
    /// Original frame index of every retained frame.
    pub frames: Vec<u32>,
    /// Nodes with two or more children, per retained frame.
    pub divisions: Vec<u64>,
    /// Childless nodes, per retained frame (the final frame is always 0).
    pub disappearances: Vec<u64>,
    /// Mean centroid displacement of the links leaving each retained frame.
    pub displacement: Vec<Option<f64>>,
    pub divisions_smoothed: Vec<f64>,
    pub disappearances_smoothed: Vec<f64>,
    pub displacement_smoothed: Vec<f64>,
    pub links: u64,
    /// Links whose parent has two or more children.
    pub division_links: u64,
    pub division_fraction: Option<f64>,
    pub mean_displacement: Option<f64>,
}

/// `s_0 = x_0`, `s_t = alpha * x_t + (1 - alpha) * s_{t-1}`.
pub fn exponential_smoothing(xs: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut state = None;
    for &x in xs {
        let s = match state {
            None => x,
            Some(prev) => alpha * x + (1.0 - alpha) * prev,
        };
        out.push(s);
        state = Some(s);
    }
    out
}

/// Division, disappearance and movement statistics of the induced lineage at
/// each subsampling factor (no cell-count limit, offset 0).
pub fn interval_stats(
    seq: &SegmentationSequence,
    gt: &LineageGraph,
    k_values: &[u32],
    smoothing: f64,
) -> Result<Vec<IntervalStats>, TransformError> {
    k_values
        .iter()
        .map(|&k| {
            let r = subsample(seq, gt, &ExperimentSpec::new(k, CellLimit::Unbounded))?;
            Ok(stats_of(k, &r.sequence, &r.graph, r.frame_map, smoothing))
        })
        .collect()
}

fn stats_of(
    k: u32,
    seq: &SegmentationSequence,
    g: &LineageGraph,
    frames: Vec<u32>,
    smoothing: f64,
) -> IntervalStats {
    let n = frames.len();
    let mut divisions = vec![0u64; n];
    let mut disappearances = vec![0u64; n];
    let mut disp_sum = vec![0f64; n];
    let mut disp_n = vec![0u64; n];
    let mut links = 0;
    let mut division_links = 0;
    for &u in g.nodes() {
        let t = u.frame as usize;
        let deg = g.out_degree(u);
        if deg >= 2 {
            divisions[t] += 1;
            division_links += deg as u64;
        }
        if deg == 0 && t + 1 < n {
            disappearances[t] += 1;
        }
        links += deg as u64;
        let cu = seq.detection(u).expect("node has a detection").centroid;
        for v in g.children(u) {
            let cv = seq.detection(v).expect("node has a detection").centroid;
            disp_sum[t] += (cv[0] - cu[0]).hypot(cv[1] - cu[1]);
            disp_n[t] += 1;
        }
    }
    let displacement: Vec<Option<f64>> = disp_sum
        .iter()
        .zip(&disp_n)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect();
    let as_f64 = |v: &[u64]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
    let total_disp: f64 = disp_sum.iter().sum();
    let total_n: u64 = disp_n.iter().sum();
    // frames without links carry the previous smoothed value forward
    let mut filled = Vec::with_capacity(n);
    let mut last = 0.0;
    for d in &displacement {
        last = d.unwrap_or(last);
        filled.push(last);
    }
    IntervalStats {
        k,
        smoothing,
        divisions_smoothed: exponential_smoothing(&as_f64(&divisions), smoothing),
        disappearances_smoothed: exponential_smoothing(&as_f64(&disappearances), smoothing),
        displacement_smoothed: exponential_smoothing(&filled, smoothing),
        frames,
        divisions,
        disappearances,
        displacement,
        links,
        division_links,
        division_fraction: (links > 0).then(|| division_links as f64 / links as f64),
        mean_displacement: (total_n > 0).then(|| total_disp / total_n as f64),
    }
}
