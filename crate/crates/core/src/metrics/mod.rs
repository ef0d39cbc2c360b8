//! Graph-matching (TRA, LNK) and biological event (DIV, CT) scores.

mod aogm;
mod events;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lineage::LineageGraph;
use crate::matching::NodeMatching;
use crate::scalar::Scalar;

pub use aogm::{aogm, aogm_counts, lnk, tra, AogmBreakdown, AogmWeights, OperationCounts};
pub use events::{ct_f1, div_f1, EventCounts};

#[derive(Debug, Clone, Error, PartialEq, Eq, Serialize, Deserialize)]
pub enum MetricError {
    #[error("ground truth is empty, AOGM_0 is zero")]
    EmptyGroundTruth,
    #[error("ground truth has no edges, AOGMA_0 is zero")]
    NoGroundTruthEdges,
    #[error("no events in ground truth or prediction")]
    NoEvents,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("matching does not fit the graphs: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Tra,
    Lnk,
    Div,
    Ct,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Tra, Metric::Lnk, Metric::Div, Metric::Ct];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Tra => "tra",
            Metric::Lnk => "lnk",
            Metric::Div => "div",
            Metric::Ct => "ct",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tra" => Ok(Metric::Tra),
            "lnk" => Ok(Metric::Lnk),
            "div" => Ok(Metric::Div),
            "ct" => Ok(Metric::Ct),
            other => Err(format!(
                "unknown metric {other:?} (expected tra, lnk, div or ct)"
            )),
        }
    }
}

/// What a score was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Breakdown<T = f64> {
    Aogm(AogmBreakdown<T>),
    Events(EventCounts<T>),
}

/// A score, or the reason it is undefined, with its breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct Score<T = f64> {
    pub metric: Metric,
    pub value: Result<T, MetricError>,
    pub breakdown: Option<Breakdown<T>>,
}

/// Evaluates several metrics on one (ground truth, prediction) pair, sharing
/// the AOGM pass between TRA and LNK.
pub fn score_all<T: Scalar>(
    gt: &LineageGraph,
    pred: &LineageGraph,
    matching: &NodeMatching,
    weights: &AogmWeights<T>,
    metrics: &[Metric],
) -> Vec<Score<T>> {
    let mut aogm_cache: Option<Result<AogmBreakdown<T>, MetricError>> = None;
    metrics
        .iter()
        .map(|&metric| match metric {
            Metric::Tra | Metric::Lnk => {
                let b = aogm_cache
                    .get_or_insert_with(|| aogm(gt, pred, matching, weights))
                    .clone();
                match b {
                    Ok(b) => Score {
                        metric,
                        value: if metric == Metric::Tra {
                            b.tra()
                        } else {
                            b.lnk()
                        },
                        breakdown: Some(Breakdown::Aogm(b)),
                    },
                    Err(e) => Score {
                        metric,
                        value: Err(e),
                        breakdown: None,
                    },
                }
            }
            Metric::Div | Metric::Ct => {
                let counts = if metric == Metric::Div {
                    div_f1(gt, pred, matching)
                } else {
                    ct_f1(gt, pred, matching)
                };
                match counts {
                    Ok(c) => Score {
                        metric,
                        value: c.f1.ok_or(MetricError::NoEvents),
                        breakdown: Some(Breakdown::Events(c)),
                    },
                    Err(e) => Score {
                        metric,
                        value: Err(e),
                        breakdown: None,
                    },
                }
            }
        })
        .collect()
}
