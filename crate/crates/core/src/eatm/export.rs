use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{rm, Condition, EatmError, SweepGrid};
use crate::metrics::Metric;
use crate::scalar::Scalar;

/// One row per report: `k,n_max,metric,value,status`. Missing values are
/// left blank; unbounded limits are written as `inf`.
pub fn write_csv<T: Scalar, W: Write>(grid: &SweepGrid<T>, mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,n_max,metric,value,status")?;
    for r in &grid.reports {
        let value = r
            .value
            .map(|v| v.to_f64_lossy().to_string())
            .unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{}",
            r.condition.k,
            r.condition.n_max,
            r.metric,
            value,
            r.status.name()
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContourClass {
    Above,
    Below,
    Undefined,
}

/// Threshold classification of one cell. `boundary` marks cells at or above
/// the threshold that touch a grid neighbour which is not, i.e. the cells
/// along the threshold contour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContourCell {
    pub condition: Condition,
    pub class: ContourClass,
    pub boundary: bool,
}

pub fn contour<T: Scalar>(
    grid: &SweepGrid<T>,
    metric: Metric,
    theta: T,
) -> Result<Vec<ContourCell>, EatmError> {
    let reports = grid.metric_reports(metric)?;
    let cols = grid.spec().mc.len();
    let class: Vec<ContourClass> = reports
        .iter()
        .map(|r| match r.value {
            Some(v) if v >= theta => ContourClass::Above,
            Some(_) => ContourClass::Below,
            None => ContourClass::Undefined,
        })
        .collect();
    let rows = class.len() / cols.max(1);
    Ok(reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let (row, col) = (i / cols, i % cols);
            let mut neighbours = Vec::with_capacity(4);
            if row > 0 {
                neighbours.push(i - cols);
            }
            if row + 1 < rows {
                neighbours.push(i + cols);
            }
            if col > 0 {
                neighbours.push(i - 1);
            }
            if col + 1 < cols {
                neighbours.push(i + 1);
            }
            let boundary = class[i] == ContourClass::Above
                && neighbours.iter().any(|&j| class[j] != ContourClass::Above);
            ContourCell {
                condition: r.condition,
                class: class[i],
                boundary,
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmRow {
    pub tracker: String,
    pub metric: Metric,
    pub theta: f64,
    pub rm: f64,
}

/// Robustness of every metric at every threshold recorded in each grid's
/// sweep spec.
pub fn rm_table<T: Scalar>(grids: &[&SweepGrid<T>]) -> Result<Vec<RmRow>, EatmError> {
    let mut rows = Vec::new();
    for grid in grids {
        for &metric in &grid.spec().metrics {
            for &theta in &grid.spec().thresholds {
                let t = T::from_f64(theta).ok_or(EatmError::Threshold(theta))?;
                rows.push(RmRow {
                    tracker: grid.provenance.tracker.clone(),
                    metric,
                    theta,
                    rm: rm(grid, metric, t)?.to_f64_lossy(),
                });
            }
        }
    }
    Ok(rows)
}

pub fn write_rm_csv<W: Write>(rows: &[RmRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "tracker,metric,theta,rm")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.tracker, r.metric, r.theta, r.rm)?;
    }
    Ok(())
}
