//! Layer-wise representation dynamics.
//!
//! Given the per-layer representations of a fixed example set, this crate
//! measures how the dominant subspace moves ([`frenet`]), how stable local
//! neighborhoods are ([`nrs`]) and how each layer's kNN-graph partitions align
//! with the final layer ([`gfmi`]). On top of those it builds model-level
//! summaries and selection scores ([`summaries`]), layer pruning plans
//! ([`pruning`]) and Spearman-based evaluation ([`stats`]).

pub mod config;
pub mod error;
pub mod frenet;
pub mod gfmi;
pub mod nrs;
pub mod pipeline;
pub mod pruning;
pub mod repr;
pub mod stats;
pub mod summaries;
pub mod tables;

pub use config::{MeasurementConfig, RNG_NAME};
pub use error::{Error, Result};
pub use frenet::{FrenetMeasurement, PrincipalAngleSpectrum, SubspaceSet, TriangleGeometry};
pub use gfmi::{EdgeList, GfmiMeasurement, MiCurve, Partition};
pub use nrs::{AnchorSet, NeighborSet};
pub use pipeline::{measure, Measurements};
pub use pruning::{Budget, BudgetBase, PlanRule, PruneOutcome, PrunePlan, PruneScores};
pub use repr::{LayerSeries, RepresentationSequence, SeriesKind};
pub use stats::{CorrelationResult, SelectionMetric, TaskGroup};
pub use summaries::{SelectionScores, SummaryRecord, TaskType};
