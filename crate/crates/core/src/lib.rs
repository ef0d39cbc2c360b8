//! Benchmarking cell trackers under simulated experimental conditions.
//!
//! Lineages are read from label masks and lineage tables ([`io`]), thinned to
//! longer imaging intervals and smaller colonies ([`transform`]), tracked by
//! baseline methods ([`trackers`]) and scored ([`metrics`]) per condition and
//! across whole condition grids ([`eatm`]). Metric arithmetic is generic over
//! [`Scalar`]; the aliases below fix it to `f64` or to exact rationals.

pub mod assignment;
pub mod eatm;
pub mod io;
pub mod lineage;
pub mod matching;
pub mod metrics;
pub mod scalar;
pub mod synthgen;
pub mod trackers;
pub mod transform;

pub use scalar::Scalar;

/// Exact rational scalar.
pub type Exact = num_rational::Ratio<i64>;

pub type Weights = metrics::AogmWeights<f64>;
pub type ExactWeights = metrics::AogmWeights<Exact>;
pub type Breakdown = metrics::AogmBreakdown<f64>;
pub type ExactBreakdown = metrics::AogmBreakdown<Exact>;
pub type Report = eatm::MetricReport<f64>;
pub type ExactReport = eatm::MetricReport<Exact>;
pub type Grid = eatm::SweepGrid<f64>;
pub type ExactGrid = eatm::SweepGrid<Exact>;
pub type Costs = assignment::CostMatrix<f64>;
