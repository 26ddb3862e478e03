//! Model-level reductions of the layer series: the descriptive shape and
//! magnitude summaries, the three selection scores, and group means by
//! architecture family and task type.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfmi::{gfmi_peak, MiCurve};
use crate::pipeline::Measurements;
use crate::repr::{LayerSeries, SeriesKind};

/// Coarse MTEB task category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskType {
    #[serde(rename = "CLS")]
    Cls,
    #[serde(rename = "RET")]
    Ret,
    #[serde(rename = "Other")]
    Other,
}

impl TaskType {
    pub const ALL: [TaskType; 3] = [TaskType::Cls, TaskType::Ret, TaskType::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskType::Cls => "CLS",
            TaskType::Ret => "RET",
            TaskType::Other => "Other",
        }
    }
}

impl std::str::FromStr for TaskType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "CLS" | "cls" | "Classification" => Ok(TaskType::Cls),
            "RET" | "ret" | "Retrieval" => Ok(TaskType::Ret),
            "Other" | "other" => Ok(TaskType::Other),
            other => Err(Error::UnmappedTask(other.to_string())),
        }
    }
}

/// Descriptive per-(model, task) summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub model_id: String,
    pub task_id: String,
    pub d_peak_curvature: f64,
    pub delta_j: f64,
    pub mean_curvature: f64,
    pub mean_speed: f64,
    pub gfmi_scale: f64,
}

/// Label-free selection scores for one (model, task).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionScores {
    pub model_id: String,
    pub task_id: String,
    pub d0l: f64,
    pub j_late: f64,
    pub g_peak: f64,
}

/// Depth of the first curvature maximum, divided by the last valid
/// curvature index `L - 1`.
pub fn curvature_peak_depth(kappa: &LayerSeries, depth: usize) -> Result<f64> {
    if depth < 2 || kappa.is_empty() {
        return Err(Error::TooShallow(format!(
            "curvature peak needs L >= 2, got L = {depth}"
        )));
    }
    let last = kappa.first_index() + kappa.len() - 1;
    let mut best = (kappa.first_index(), f64::NEG_INFINITY);
    for (l, v) in kappa.iter() {
        if v > best.1 {
            best = (l, v);
        }
    }
    Ok(best.0 as f64 / last as f64)
}

/// Mean of the last third of the retention series minus the mean of the
/// first third, with thirds of `floor(m / 3)` values.
pub fn nrs_trend(j: &LayerSeries) -> Result<f64> {
    let m = j.len();
    if m < 3 {
        return Err(Error::TooShallow(format!(
            "retention trend needs at least 3 transitions, got {m}"
        )));
    }
    let t = m / 3;
    let v = j.values();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    Ok(mean(&v[m - t..]) - mean(&v[..t]))
}

/// Layer-aggregate magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerAggregates {
    pub mean_speed: f64,
    pub mean_curvature: f64,
    pub gfmi_scale: f64,
}

/// Arithmetic means over each series' valid window.
pub fn layer_aggregates(speed: &LayerSeries, curvature: &LayerSeries, gfmi: &LayerSeries) -> Result<LayerAggregates> {
    let mean = |s: &LayerSeries, what: &'static str| s.mean().ok_or(Error::Empty(what));
    Ok(LayerAggregates {
        mean_speed: mean(speed, "speed series")?,
        mean_curvature: mean(curvature, "curvature series")?,
        gfmi_scale: mean(gfmi, "gfmi series")?,
    })
}

/// Late third of adjacent-layer transitions, `ceil(2L/3) .. L-1`.
pub fn late_window(depth: usize) -> Range<usize> {
    (2 * depth).div_ceil(3)..depth
}

/// Mean retention over [`late_window`].
pub fn late_retention(j: &LayerSeries, depth: usize) -> Result<f64> {
    let window = late_window(depth);
    if window.is_empty() {
        return Err(Error::TooShallow(format!(
            "late retention needs L >= 3, got L = {depth}"
        )));
    }
    let values = window
        .clone()
        .map(|l| {
            j.get(l)
                .ok_or_else(|| Error::IncompatibleSeries(format!("retention missing at layer {l}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean over layers of each layer's peak MI.
pub fn peak_alignment(curves: &[MiCurve]) -> Result<f64> {
    if curves.is_empty() {
        return Err(Error::Empty("MI curves"));
    }
    let peaks = curves.iter().map(gfmi_peak).collect::<Result<Vec<_>>>()?;
    Ok(peaks.iter().sum::<f64>() / peaks.len() as f64)
}

pub fn selection_scores(m: &Measurements, model_id: &str, task_id: &str) -> Result<SelectionScores> {
    if m.nrs.kind() != SeriesKind::Nrs || m.mi_curves.len() != m.depth + 1 {
        return Err(Error::IncompatibleSeries(
            "measurements do not cover every layer".into(),
        ));
    }
    Ok(SelectionScores {
        model_id: model_id.to_string(),
        task_id: task_id.to_string(),
        d0l: m.end_to_end,
        j_late: late_retention(&m.nrs, m.depth)?,
        g_peak: peak_alignment(&m.mi_curves)?,
    })
}

pub fn summary_record(m: &Measurements, model_id: &str, task_id: &str) -> Result<SummaryRecord> {
    let curvature = m
        .curvature
        .as_ref()
        .ok_or_else(|| Error::TooShallow(format!("curvature needs L >= 2, got L = {}", m.depth)))?;
    let agg = layer_aggregates(&m.speed, curvature, &m.gfmi)?;
    Ok(SummaryRecord {
        model_id: model_id.to_string(),
        task_id: task_id.to_string(),
        d_peak_curvature: curvature_peak_depth(curvature, m.depth)?,
        delta_j: nrs_trend(&m.nrs)?,
        mean_curvature: agg.mean_curvature,
        mean_speed: agg.mean_speed,
        gfmi_scale: agg.gfmi_scale,
    })
}

/// Unweighted means of every summary over a group of records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupMeans {
    pub count: usize,
    pub d_peak_curvature: f64,
    pub delta_j: f64,
    pub mean_curvature: f64,
    pub mean_speed: f64,
    pub gfmi_scale: f64,
}

impl GroupMeans {
    fn of(rows: &[&SummaryRecord]) -> Self {
        let n = rows.len() as f64;
        let mean = |f: fn(&SummaryRecord) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n;
        Self {
            count: rows.len(),
            d_peak_curvature: mean(|r| r.d_peak_curvature),
            delta_j: mean(|r| r.delta_j),
            mean_curvature: mean(|r| r.mean_curvature),
            mean_speed: mean(|r| r.mean_speed),
            gfmi_scale: mean(|r| r.gfmi_scale),
        }
    }
}

/// Per-family means, keyed and ordered by family name.
pub fn family_aggregate(
    rows: &[SummaryRecord],
    family_map: &BTreeMap<String, String>,
) -> Result<BTreeMap<String, GroupMeans>> {
    let mut groups: BTreeMap<String, Vec<&SummaryRecord>> = BTreeMap::new();
    for row in rows {
        let family = family_map
            .get(&row.model_id)
            .ok_or_else(|| Error::UnmappedModel(row.model_id.clone()))?;
        groups.entry(family.clone()).or_default().push(row);
    }
    Ok(groups
        .into_iter()
        .map(|(family, rows)| (family, GroupMeans::of(&rows)))
        .collect())
}

/// Means over (model, task) rows grouped by (family, task type).
pub fn tasktype_aggregate(
    rows: &[SummaryRecord],
    family_map: &BTreeMap<String, String>,
    tasktype_map: &BTreeMap<String, TaskType>,
) -> Result<BTreeMap<(String, TaskType), GroupMeans>> {
    let mut groups: BTreeMap<(String, TaskType), Vec<&SummaryRecord>> = BTreeMap::new();
    for row in rows {
        let family = family_map
            .get(&row.model_id)
            .ok_or_else(|| Error::UnmappedModel(row.model_id.clone()))?;
        let task_type = *tasktype_map
            .get(&row.task_id)
            .ok_or_else(|| Error::UnmappedTask(row.task_id.clone()))?;
        groups.entry((family.clone(), task_type)).or_default().push(row);
    }
    Ok(groups
        .into_iter()
        .map(|(key, rows)| (key, GroupMeans::of(&rows)))
        .collect())
}
