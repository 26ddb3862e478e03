//! Runs all three measurement families over one sequence.

use serde::{Deserialize, Serialize};

use crate::config::MeasurementConfig;
use crate::error::Result;
use crate::frenet::FrenetMeasurement;
use crate::gfmi::{gfmi_series, MiCurve};
use crate::nrs::nrs_series;
use crate::repr::{LayerSeries, RepresentationSequence};

/// Every per-layer output for one (model, task) sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub source_id: String,
    /// Depth `L`.
    pub depth: usize,
    pub n_examples: usize,
    pub dim: usize,
    pub rank: usize,
    pub speed: LayerSeries,
    pub curvature: Option<LayerSeries>,
    pub end_to_end: f64,
    pub nrs: LayerSeries,
    pub gfmi: LayerSeries,
    pub mi_curves: Vec<MiCurve>,
}

/// Measures `seq` under `cfg`.
pub fn measure(seq: &RepresentationSequence, cfg: &MeasurementConfig) -> Result<Measurements> {
    cfg.validate_for(seq.n_examples())?;
    let frenet = FrenetMeasurement::measure(seq, cfg)?;
    let nrs = nrs_series(seq, cfg)?;
    let gfmi = gfmi_series(seq, cfg)?;
    Ok(Measurements {
        source_id: seq.source_id().to_string(),
        depth: seq.depth(),
        n_examples: seq.n_examples(),
        dim: seq.dim(),
        rank: frenet.rank,
        speed: frenet.speed,
        curvature: frenet.curvature,
        end_to_end: frenet.end_to_end,
        nrs,
        gfmi: gfmi.series,
        mi_curves: gfmi.curves,
    })
}
