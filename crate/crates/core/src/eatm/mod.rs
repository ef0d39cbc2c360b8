//! Metrics under simulated experiment conditions, parameter sweeps over
//! (subsampling factor, cell-count limit) grids, and the robustness score
//! summarising a grid.

mod export;

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lineage::{LineageGraph, SegmentationSequence};
use crate::matching::match_frames;
use crate::metrics::{score_all, AogmWeights, Breakdown, Metric};
use crate::scalar::Scalar;
use crate::trackers::{Tracker, TrackerInput};
use crate::transform::{subsample, CellLimit, ExperimentSpec, TransformError, Truncation};

pub use export::{contour, rm_table, write_csv, write_rm_csv, ContourCell, ContourClass, RmRow};

#[derive(Debug, Error)]
pub enum EatmError {
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("grid has no {metric} report for k={k}, n_max={n_max}")]
    IncompleteGrid {
        k: u32,
        n_max: CellLimit,
        metric: Metric,
    },
    #[error("threshold {0} is outside [0, 1]")]
    Threshold(f64),
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One grid cell's coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Condition {
    pub k: u32,
    pub n_max: CellLimit,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "k={}, n_max={}", self.k, self.n_max)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    /// The metric has no value on this condition, e.g. no divisions.
    Undefined {
        reason: String,
    },
    /// No frame survives the cell-count limit.
    Empty {
        reason: String,
    },
    /// The tracker or the matching failed.
    Failed {
        diagnostic: String,
    },
}

impl CellStatus {
    pub fn name(&self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::Undefined { .. } => "undefined",
            CellStatus::Empty { .. } => "empty",
            CellStatus::Failed { .. } => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct MetricReport<T = f64> {
    pub metric: Metric,
    pub condition: Condition,
    /// Present exactly when `status` is ok.
    pub value: Option<T>,
    #[serde(flatten)]
    pub status: CellStatus,
    pub breakdown: Option<Breakdown<T>>,
}

impl<T> MetricReport<T> {
    pub fn ok(metric: Metric, condition: Condition, value: T) -> Self {
        Self {
            metric,
            condition,
            value: Some(value),
            status: CellStatus::Ok,
            breakdown: None,
        }
    }

    pub fn without_value(metric: Metric, condition: Condition, status: CellStatus) -> Self {
        Self {
            metric,
            condition,
            value: None,
            status,
            breakdown: None,
        }
    }
}

/// Evaluate `metrics` for `tracker` on one condition: subsample and truncate
/// the sequence and its ground truth, track the subsampled segmentation and
/// score the prediction against the induced ground truth.
///
/// Conditions without frames and metrics without a value are reported as
/// such rather than failing; only an invalid `spec` is an error.
pub fn eatm<T: Scalar>(
    tracker: &dyn Tracker,
    seq: &SegmentationSequence,
    gt: &LineageGraph,
    spec: &ExperimentSpec,
    metrics: &[Metric],
    weights: &AogmWeights<T>,
) -> Result<Vec<MetricReport<T>>, EatmError> {
    let condition = Condition {
        k: spec.k,
        n_max: spec.n_max,
    };
    let all = |status: CellStatus| {
        metrics
            .iter()
            .map(|&m| MetricReport::without_value(m, condition, status.clone()))
            .collect()
    };
    let induced = match subsample(seq, gt, spec) {
        Ok(r) => r,
        Err(TransformError::EmptyCondition(reason)) => {
            return Ok(all(CellStatus::Empty { reason }))
        }
        Err(e) => return Err(e.into()),
    };
    let input = TrackerInput {
        sequence: &induced.sequence,
        ground_truth: Some(&induced.graph),
        k: spec.k,
    };
    let pred = match tracker.track(&input) {
        Ok(p) => p,
        Err(e) => {
            return Ok(all(CellStatus::Failed {
                diagnostic: format!("tracker {}: {e}", tracker.name()),
            }))
        }
    };
    let matching = match match_frames(&induced.sequence, &induced.sequence) {
        Ok(m) => m,
        Err(e) => {
            return Ok(all(CellStatus::Failed {
                diagnostic: e.to_string(),
            }))
        }
    };
    Ok(
        score_all(&induced.graph, &pred, &matching, weights, metrics)
            .into_iter()
            .map(|s| match s.value {
                Ok(v) => MetricReport {
                    metric: s.metric,
                    condition,
                    value: Some(v),
                    status: CellStatus::Ok,
                    breakdown: s.breakdown,
                },
                Err(e) => MetricReport::without_value(
                    s.metric,
                    condition,
                    CellStatus::Undefined {
                        reason: e.to_string(),
                    },
                ),
            })
            .collect(),
    )
}

pub const DEFAULT_SF: [u32; 9] = [1, 2, 3, 5, 10, 15, 20, 30, 40];
pub const DEFAULT_MC: [u32; 6] = [100, 400, 700, 1000, 1300, 1600];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub sf: Vec<u32>,
    pub mc: Vec<CellLimit>,
    pub metrics: Vec<Metric>,
    pub thresholds: Vec<f64>,
    pub frame_offset: u32,
    pub truncation: Truncation,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            sf: DEFAULT_SF.to_vec(),
            mc: DEFAULT_MC.iter().map(|&n| CellLimit::Max(n)).collect(),
            metrics: vec![Metric::Tra, Metric::Lnk, Metric::Div],
            thresholds: vec![0.8],
            frame_offset: 0,
            truncation: Truncation::Prefix,
            threads: None,
        }
    }
}

impl SweepSpec {
    pub fn new(sf: Vec<u32>, mc: Vec<CellLimit>, metrics: Vec<Metric>) -> Self {
        Self {
            sf,
            mc,
            metrics,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), EatmError> {
        let fail = |m: String| Err(EatmError::Spec(m));
        if self.sf.is_empty() || self.mc.is_empty() || self.metrics.is_empty() {
            return fail("subsampling factors, cell limits and metrics must be non-empty".into());
        }
        if self.sf.contains(&0) {
            return fail("subsampling factors must be positive".into());
        }
        if self.mc.contains(&CellLimit::Max(0)) {
            return fail("cell limits must be positive".into());
        }
        if has_duplicates(&self.sf) || has_duplicates(&self.mc) || has_duplicates(&self.metrics) {
            return fail("grid axes and metrics must not repeat".into());
        }
        if let Some(&t) = self.thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return Err(EatmError::Threshold(t));
        }
        if self.threads == Some(0) {
            return fail("threads must be at least 1".into());
        }
        if let Some(&k) = self.sf.iter().find(|&&k| self.frame_offset >= k) {
            return fail(format!(
                "frame offset {} must be below every factor (k={k})",
                self.frame_offset
            ));
        }
        Ok(())
    }

    pub fn conditions(&self) -> Vec<Condition> {
        self.sf
            .iter()
            .flat_map(|&k| self.mc.iter().map(move |&n_max| Condition { k, n_max }))
            .collect()
    }

    fn experiment(&self, c: Condition) -> ExperimentSpec {
        ExperimentSpec {
            k: c.k,
            n_max: c.n_max,
            frame_offset: self.frame_offset,
            truncation: self.truncation,
        }
    }
}

fn has_duplicates<T: Ord + Clone>(xs: &[T]) -> bool {
    let mut v = xs.to_vec();
    v.sort();
    v.windows(2).any(|w| w[0] == w[1])
}

/// Everything needed to reproduce a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub tracker: String,
    pub tracker_config: serde_json::Value,
    pub weights: serde_json::Value,
    pub dataset: Option<String>,
    pub sweep: SweepSpec,
}

/// Reports of every metric on every condition, row-major over `(k, n_max)`
/// with metrics in sweep order inside a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct SweepGrid<T = f64> {
    pub provenance: Provenance,
    pub reports: Vec<MetricReport<T>>,
}

impl<T> SweepGrid<T> {
    pub fn spec(&self) -> &SweepSpec {
        &self.provenance.sweep
    }

    pub fn report(&self, condition: Condition, metric: Metric) -> Option<&MetricReport<T>> {
        self.reports
            .iter()
            .find(|r| r.condition == condition && r.metric == metric)
    }

    /// Reports of one metric in grid order; errors on a missing cell.
    pub fn metric_reports(&self, metric: Metric) -> Result<Vec<&MetricReport<T>>, EatmError> {
        self.spec()
            .conditions()
            .into_iter()
            .map(|c| {
                self.report(c, metric).ok_or(EatmError::IncompleteGrid {
                    k: c.k,
                    n_max: c.n_max,
                    metric,
                })
            })
            .collect()
    }
}

/// Fraction of grid cells whose value reaches `theta`. Cells without a value
/// count as not reaching it.
pub fn rm<T: Scalar>(grid: &SweepGrid<T>, metric: Metric, theta: T) -> Result<T, EatmError> {
    let t = theta.to_f64_lossy();
    if !(0.0..=1.0).contains(&t) {
        return Err(EatmError::Threshold(t));
    }
    let reports = grid.metric_reports(metric)?;
    let hits = reports
        .iter()
        .filter(|r| r.value.is_some_and(|v| v >= theta))
        .count();
    Ok(T::from_count(hits as u64) / T::from_count(reports.len() as u64))
}

/// Run `tracker` on every condition of `spec`. Cells are evaluated in
/// parallel; the result is ordered by condition, so it does not depend on
/// scheduling.
pub fn run_sweep<T: Scalar + Serialize>(
    tracker: &dyn Tracker,
    seq: &SegmentationSequence,
    gt: &LineageGraph,
    spec: &SweepSpec,
    weights: &AogmWeights<T>,
    dataset: Option<String>,
) -> Result<SweepGrid<T>, EatmError> {
    spec.validate()?;
    weights
        .validate()
        .map_err(|e| EatmError::Spec(e.to_string()))?;
    if seq.is_empty() {
        return Err(TransformError::EmptySequence.into());
    }
    let conditions = spec.conditions();
    let evaluate = || -> Result<Vec<Vec<MetricReport<T>>>, EatmError> {
        conditions
            .par_iter()
            .map(|&c| {
                eatm(
                    tracker,
                    seq,
                    gt,
                    &spec.experiment(c),
                    &spec.metrics,
                    weights,
                )
            })
            .collect()
    };
    let cells = match spec.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| EatmError::Pool(e.to_string()))?
            .install(evaluate)?,
        None => evaluate()?,
    };
    Ok(SweepGrid {
        provenance: Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            tracker: tracker.name().to_string(),
            tracker_config: tracker.describe(),
            weights: serde_json::to_value(weights).expect("weights serialize"),
            dataset,
            sweep: spec.clone(),
        },
        reports: cells.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate, ColonyParams};
    use crate::trackers::{EmptyTracker, OracleTracker};
    use num_rational::Ratio;

    pub(crate) fn hand_grid(values: &[f64]) -> SweepGrid<f64> {
        let spec = SweepSpec::new(
            vec![1, 2],
            vec![CellLimit::Max(10), CellLimit::Max(20)],
            vec![Metric::Tra],
        );
        let reports = spec
            .conditions()
            .into_iter()
            .zip(values)
            .map(|(c, &v)| MetricReport::ok(Metric::Tra, c, v))
            .collect();
        SweepGrid {
            provenance: Provenance {
                tool_version: "test".into(),
                tracker: "hand".into(),
                tracker_config: serde_json::Value::Null,
                weights: serde_json::Value::Null,
                dataset: None,
                sweep: spec,
            },
            reports,
        }
    }

    #[test]
    fn rm_counts_cells_at_or_above_threshold() {
        let g = hand_grid(&[0.9, 0.7, 0.85, 0.6]);
        assert_eq!(rm(&g, Metric::Tra, 0.8).unwrap(), 0.5);
        assert_eq!(rm(&g, Metric::Tra, 0.0).unwrap(), 1.0);
        assert_eq!(rm(&g, Metric::Tra, 0.85).unwrap(), 0.5);
        assert_eq!(rm(&g, Metric::Tra, 1.0).unwrap(), 0.0);
        assert!(matches!(
            rm(&g, Metric::Lnk, 0.5),
            Err(EatmError::IncompleteGrid { .. })
        ));
        assert!(matches!(
            rm(&g, Metric::Tra, 1.5),
            Err(EatmError::Threshold(_))
        ));
    }

    #[test]
    fn undefined_cells_do_not_count() {
        let mut g = hand_grid(&[1.0, 1.0, 1.0, 1.0]);
        g.reports[3] = MetricReport::without_value(
            Metric::Tra,
            g.reports[3].condition,
            CellStatus::Undefined {
                reason: "no divisions".into(),
            },
        );
        assert_eq!(rm(&g, Metric::Tra, 0.0).unwrap(), 0.75);
    }

    #[test]
    fn exact_rm() {
        let spec = SweepSpec::new(vec![1, 2, 3], vec![CellLimit::Unbounded], vec![Metric::Div]);
        let vals = [Ratio::new(2, 3), Ratio::new(1, 3), Ratio::new(1, 1)];
        let reports = spec
            .conditions()
            .into_iter()
            .zip(vals)
            .map(|(c, v)| MetricReport::ok(Metric::Div, c, v))
            .collect();
        let g = SweepGrid {
            provenance: hand_grid(&[0.0; 4]).provenance,
            reports,
        };
        let g = SweepGrid {
            provenance: Provenance {
                sweep: spec,
                ..g.provenance
            },
            ..g
        };
        assert_eq!(
            rm(&g, Metric::Div, Ratio::new(2, 3)).unwrap(),
            Ratio::new(2, 3)
        );
    }

    #[test]
    fn empty_condition_is_marked_not_failed() {
        let c = generate(&ColonyParams {
            seed: 1,
            frames: 12,
            ..ColonyParams::default()
        })
        .unwrap();
        let spec = ExperimentSpec::new(1, CellLimit::Max(1));
        let r = eatm(
            &OracleTracker,
            &c.sequence,
            &c.graph,
            &spec,
            &[Metric::Tra],
            &AogmWeights::<f64>::default(),
        )
        .unwrap();
        assert_eq!(r[0].status.name(), "empty");
        assert_eq!(r[0].value, None);
    }

    #[test]
    fn oracle_and_empty_sweeps() {
        let c = generate(&ColonyParams {
            seed: 5,
            frames: 24,
            ..ColonyParams::default()
        })
        .unwrap();
        let spec = SweepSpec {
            threads: Some(2),
            ..SweepSpec::new(
                vec![1, 2, 3],
                vec![CellLimit::Max(12), CellLimit::Unbounded],
                vec![Metric::Tra, Metric::Lnk],
            )
        };
        let w = AogmWeights::<f64>::default();
        let oracle = run_sweep(&OracleTracker, &c.sequence, &c.graph, &spec, &w, None).unwrap();
        assert_eq!(oracle.reports.len(), 12);
        assert_eq!(rm(&oracle, Metric::Tra, 1.0).unwrap(), 1.0);
        let empty = run_sweep(&EmptyTracker, &c.sequence, &c.graph, &spec, &w, None).unwrap();
        assert!(empty
            .metric_reports(Metric::Lnk)
            .unwrap()
            .iter()
            .all(|r| r.value == Some(0.0)));
        assert_eq!(empty.provenance.tracker, "empty");
    }

    #[test]
    fn sweep_validation() {
        assert!(SweepSpec::default().validate().is_ok());
        assert!(SweepSpec {
            sf: vec![1, 1],
            ..SweepSpec::default()
        }
        .validate()
        .is_err());
        assert!(SweepSpec {
            sf: vec![],
            ..SweepSpec::default()
        }
        .validate()
        .is_err());
        assert!(SweepSpec {
            thresholds: vec![1.2],
            ..SweepSpec::default()
        }
        .validate()
        .is_err());
        assert!(SweepSpec {
            frame_offset: 1,
            ..SweepSpec::default()
        }
        .validate()
        .is_err());
    }
}
