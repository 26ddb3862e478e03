//! Tie-aware Spearman correlation and per-task selection evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::summaries::{SelectionScores, TaskType};

pub const SIGNIFICANCE: f64 = 0.05;

/// Ranks `1..=n`; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided tail probability `P(|T| >= |t|)` for Student-t with `nu`
/// degrees of freedom.
pub fn student_t_two_sided(t: f64, nu: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(nu / 2.0, 0.5, nu / (nu + t * t)).clamp(0.0, 1.0)
}

/// Spearman's rho with a two-sided t-approximation p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::TooFewPoints(n));
    }
    if x.iter().all(|v| *v == x[0]) {
        return Err(Error::ConstantInput("x"));
    }
    if y.iter().all(|v| *v == y[0]) {
        return Err(Error::ConstantInput("y"));
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y)).expect("non-constant ranks");
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let nu = (n - 2) as f64;
        student_t_two_sided(rho * (nu / (1.0 - rho * rho)).sqrt(), nu)
    };
    Ok(CorrelationResult { rho, p_value, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    D0l,
    JLate,
    GPeak,
}

impl SelectionMetric {
    pub const ALL: [SelectionMetric; 3] = [SelectionMetric::D0l, SelectionMetric::JLate, SelectionMetric::GPeak];

    pub fn as_str(self) -> &'static str {
        match self {
            SelectionMetric::D0l => "d0l",
            SelectionMetric::JLate => "j_late",
            SelectionMetric::GPeak => "g_peak",
        }
    }

    pub fn of(self, s: &SelectionScores) -> f64 {
        match self {
            SelectionMetric::D0l => s.d0l,
            SelectionMetric::JLate => s.j_late,
            SelectionMetric::GPeak => s.g_peak,
        }
    }
}

impl fmt::Display for SelectionMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SelectionMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SelectionMetric::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown selection metric {s:?}")))
    }
}

/// A reported p-value: exact, or only bounded from above (`"<.001"`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PValue {
    Exact(f64),
    Below(f64),
}

impl PValue {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let num = |t: &str| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|p| (0.0..=1.0).contains(p))
                .ok_or_else(|| Error::InvalidConfig(format!("bad p-value {s:?}")))
        };
        match s.strip_prefix('<') {
            Some(rest) => Ok(PValue::Below(num(rest)?)),
            None => Ok(PValue::Exact(num(s)?)),
        }
    }

    /// Upper bound on the true value.
    pub fn bound(self) -> f64 {
        match self {
            PValue::Exact(p) | PValue::Below(p) => p,
        }
    }

    pub fn is_significant(self, alpha: f64) -> bool {
        match self {
            PValue::Exact(p) => p < alpha,
            PValue::Below(p) => p <= alpha,
        }
    }
}

impl fmt::Display for PValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PValue::Exact(p) => write!(f, "{p}"),
            PValue::Below(p) => write!(f, "<{p}"),
        }
    }
}

/// One task's correlation between a selection score and the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskCorrelation {
    pub task_id: String,
    pub metric: SelectionMetric,
    pub rho: f64,
    pub p_value: PValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskGroup {
    All,
    Type(TaskType),
}

impl TaskGroup {
    pub const ALL: [TaskGroup; 4] = [
        TaskGroup::All,
        TaskGroup::Type(TaskType::Cls),
        TaskGroup::Type(TaskType::Ret),
        TaskGroup::Type(TaskType::Other),
    ];

    fn contains(self, t: TaskType) -> bool {
        match self {
            TaskGroup::All => true,
            TaskGroup::Type(g) => g == t,
        }
    }
}

impl fmt::Display for TaskGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TaskGroup::All => f.write_str("All"),
            TaskGroup::Type(t) => f.write_str(t.as_str()),
        }
    }
}

/// Cross-task mean, sample standard deviation and number of tasks with
/// `p < 0.05`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub metric: SelectionMetric,
    pub group: TaskGroup,
    pub n_tasks: usize,
    pub mean: f64,
    pub sd: f64,
    pub sig_count: usize,
}

/// Sample standard deviation (`n - 1` denominator); 0 for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 || values.iter().all(|v| *v == values[0]) {
        return 0.0;
    }
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Summaries for every metric present, over All and each task type.
/// Empty groups are omitted.
pub fn group_summaries(
    rows: &[TaskCorrelation],
    tasktype_map: &BTreeMap<String, TaskType>,
) -> Result<Vec<GroupSummary>> {
    let metrics: BTreeSet<SelectionMetric> = rows.iter().map(|r| r.metric).collect();
    let typed = rows
        .iter()
        .map(|r| {
            tasktype_map
                .get(&r.task_id)
                .map(|t| (r, *t))
                .ok_or_else(|| Error::UnmappedTask(r.task_id.clone()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for metric in metrics {
        for group in TaskGroup::ALL {
            let members: Vec<&TaskCorrelation> = typed
                .iter()
                .filter(|(r, t)| r.metric == metric && group.contains(*t))
                .map(|(r, _)| *r)
                .collect();
            if members.is_empty() {
                continue;
            }
            let rhos: Vec<f64> = members.iter().map(|r| r.rho).collect();
            out.push(GroupSummary {
                metric,
                group,
                n_tasks: members.len(),
                mean: rhos.iter().sum::<f64>() / rhos.len() as f64,
                sd: sample_sd(&rhos),
                sig_count: members
                    .iter()
                    .filter(|r| r.p_value.is_significant(SIGNIFICANCE))
                    .count(),
            });
        }
    }
    Ok(out)
}

/// A complete-or-not model × task matrix of scalar values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreGrid {
    cells: BTreeMap<(String, String), f64>,
}

impl ScoreGrid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, model: &str, task: &str, value: f64) {
        self.cells.insert((model.to_string(), task.to_string()), value);
    }

    pub fn get(&self, model: &str, task: &str) -> Option<f64> {
        self.cells.get(&(model.to_string(), task.to_string())).copied()
    }

    pub fn from_scores(scores: &[SelectionScores], metric: SelectionMetric) -> Self {
        let mut g = Self::new();
        for s in scores {
            g.insert(&s.model_id, &s.task_id, metric.of(s));
        }
        g
    }

    pub fn models(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|(m, _)| m.as_str()).collect()
    }

    pub fn tasks(&self) -> BTreeSet<&str> {
        self.cells.keys().map(|(_, t)| t.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTable {
    pub per_task: Vec<TaskCorrelation>,
    pub groups: Vec<GroupSummary>,
}

/// Per task, correlates each metric with the reference across models, then
/// summarizes by task group. Both grids must cover the same full
/// model × task set.
pub fn selection_table(
    scores: &BTreeMap<SelectionMetric, ScoreGrid>,
    reference: &ScoreGrid,
    tasktype_map: &BTreeMap<String, TaskType>,
) -> Result<SelectionTable> {
    let models: Vec<&str> = reference.models().into_iter().collect();
    let tasks: Vec<&str> = reference.tasks().into_iter().collect();
    for (metric, grid) in scores {
        for &m in &models {
            for &t in &tasks {
                if reference.get(m, t).is_none() {
                    return Err(Error::MissingCell(format!("reference {m}/{t}")));
                }
                if grid.get(m, t).is_none() {
                    return Err(Error::MissingCell(format!("{metric} {m}/{t}")));
                }
            }
        }
        if grid.len() != models.len() * tasks.len() {
            return Err(Error::MissingCell(format!(
                "{metric} grid has cells outside the reference panel"
            )));
        }
    }
    let jobs: Vec<(SelectionMetric, &str)> = scores
        .keys()
        .flat_map(|&m| tasks.iter().map(move |&t| (m, t)))
        .collect();
    let per_task = jobs
        .into_par_iter()
        .map(|(metric, task)| {
            let x: Vec<f64> = models.iter().map(|m| scores[&metric].get(m, task).unwrap()).collect();
            let y: Vec<f64> = models.iter().map(|m| reference.get(m, task).unwrap()).collect();
            let r = spearman(&x, &y).map_err(|e| Error::InTask {
                what: format!("{metric} on {task}"),
                source: Box::new(e),
            })?;
            Ok(TaskCorrelation {
                task_id: task.to_string(),
                metric,
                rho: r.rho,
                p_value: PValue::Exact(r.p_value),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let groups = group_summaries(&per_task, tasktype_map)?;
    Ok(SelectionTable { per_task, groups })
}
