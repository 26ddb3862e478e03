//! CSV readers for summary, selection and pruning tables, plus the reference
//! tables bundled with the crate.
//!
//! Every reader takes a header row, ignores `#` comment lines and reports
//! schema problems with the 1-based line number of the offending row.

use std::collections::BTreeMap;
use std::io::Read;

use csv::{ReaderBuilder, StringRecord};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pruning::{rel_delta, Budget, PlanRule, PruneOutcome};
use crate::stats::{PValue, ScoreGrid, SelectionMetric, TaskCorrelation};
use crate::summaries::{SelectionScores, SummaryRecord, TaskType};

/// Reference tables shipped with the crate.
pub mod bundled {
    use super::*;

    pub const PER_MODEL_SUMMARY: &str = include_str!("../fixtures/per_model_summary.csv");
    pub const LLM_PANEL: &str = include_str!("../fixtures/llm_panel.csv");
    pub const TASK_SELECTION: &str = include_str!("../fixtures/task_selection.csv");
    pub const PRUNING_CELLS: &str = include_str!("../fixtures/pruning_cells.csv");
    pub const MODELS: &str = include_str!("../fixtures/models.csv");
    pub const TASKS: &str = include_str!("../fixtures/tasks.csv");

    /// `(file name, contents)` of every bundled table.
    pub const ALL: [(&str, &str); 6] = [
        ("per_model_summary.csv", PER_MODEL_SUMMARY),
        ("llm_panel.csv", LLM_PANEL),
        ("task_selection.csv", TASK_SELECTION),
        ("pruning_cells.csv", PRUNING_CELLS),
        ("models.csv", MODELS),
        ("tasks.csv", TASKS),
    ];

    /// Task-averaged summaries for the 31-model panel.
    pub fn per_model_summary() -> Result<SummaryTable> {
        read_summaries(PER_MODEL_SUMMARY.as_bytes(), "per_model_summary.csv")
    }

    pub fn llm_panel() -> Result<Vec<PanelRow>> {
        read_panel(LLM_PANEL.as_bytes(), "llm_panel.csv")
    }

    pub fn task_selection() -> Result<TaskCorrelationTable> {
        read_task_correlations(TASK_SELECTION.as_bytes(), "task_selection.csv")
    }

    pub fn pruning_cells() -> Result<Vec<PruneOutcome>> {
        read_outcomes(PRUNING_CELLS.as_bytes(), "pruning_cells.csv")
    }

    pub fn models() -> Result<Vec<ModelInfo>> {
        read_models(MODELS.as_bytes(), "models.csv")
    }

    pub fn tasks() -> Result<Vec<TaskInfo>> {
        read_tasks(TASKS.as_bytes(), "tasks.csv")
    }
}

/// Parsed CSV with named columns.
struct Sheet {
    name: String,
    headers: StringRecord,
    rows: Vec<(usize, StringRecord)>,
}

impl Sheet {
    fn read<R: Read>(reader: R, name: &str) -> Result<Self> {
        let mut rdr = ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::Schema {
                    path: name.to_string(),
                    row: line,
                    msg: e.to_string(),
                }
            })?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec));
        }
        Ok(Self {
            name: name.to_string(),
            headers,
            rows,
        })
    }

    fn err(&self, row: usize, msg: impl Into<String>) -> Error {
        Error::Schema {
            path: self.name.clone(),
            row,
            msg: msg.into(),
        }
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.opt_col(name)
            .ok_or_else(|| self.err(1, format!("missing column {name:?}")))
    }

    fn opt_col(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn text<'r>(&self, line: usize, rec: &'r StringRecord, col: usize) -> Result<&'r str> {
        match rec.get(col) {
            Some(s) if !s.is_empty() => Ok(s),
            _ => Err(self.err(line, format!("empty {:?}", &self.headers[col]))),
        }
    }

    fn num(&self, line: usize, rec: &StringRecord, col: usize) -> Result<f64> {
        let s = self.text(line, rec, col)?;
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(line, format!("{:?} is not a finite number: {s:?}", &self.headers[col])))
    }

    fn opt_num(&self, line: usize, rec: &StringRecord, col: Option<usize>) -> Result<Option<f64>> {
        match col {
            Some(c) if rec.get(c).is_some_and(|s| !s.is_empty()) => self.num(line, rec, c).map(Some),
            _ => Ok(None),
        }
    }

    fn parsed<T>(&self, line: usize, rec: &StringRecord, col: usize, f: impl FnOnce(&str) -> Result<T>) -> Result<T> {
        let s = self.text(line, rec, col)?;
        f(s).map_err(|e| self.err(line, e.to_string()))
    }
}

/// Summary records with the family of each model, where given.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub records: Vec<SummaryRecord>,
    pub families: BTreeMap<String, String>,
}

/// Columns `model, [task], [family], d_peak, delta_j, kappa_bar, s_bar, g_bar`.
/// A missing task column means task-averaged rows (task id `"all"`).
pub fn read_summaries<R: Read>(reader: R, name: &str) -> Result<SummaryTable> {
    let sh = Sheet::read(reader, name)?;
    let model = sh.col("model")?;
    let task = sh.opt_col("task");
    let family = sh.opt_col("family");
    let (dp, dj) = (sh.col("d_peak")?, sh.col("delta_j")?);
    let (kb, sb, gb) = (sh.col("kappa_bar")?, sh.col("s_bar")?, sh.col("g_bar")?);
    let mut records = Vec::new();
    let mut families = BTreeMap::new();
    for (line, rec) in &sh.rows {
        let line = *line;
        let model_id = sh.text(line, rec, model)?.to_string();
        if let Some(f) = family {
            families.insert(model_id.clone(), sh.text(line, rec, f)?.to_string());
        }
        records.push(SummaryRecord {
            model_id,
            task_id: match task {
                Some(t) => sh.text(line, rec, t)?.to_string(),
                None => "all".to_string(),
            },
            d_peak_curvature: sh.num(line, rec, dp)?,
            delta_j: sh.num(line, rec, dj)?,
            mean_curvature: sh.num(line, rec, kb)?,
            mean_speed: sh.num(line, rec, sb)?,
            gfmi_scale: sh.num(line, rec, gb)?,
        });
    }
    Ok(SummaryTable { records, families })
}

/// Columns `model, family`.
pub fn read_family_map<R: Read>(reader: R, name: &str) -> Result<BTreeMap<String, String>> {
    let sh = Sheet::read(reader, name)?;
    let (m, f) = (sh.col("model")?, sh.col("family")?);
    sh.rows
        .iter()
        .map(|(line, rec)| Ok((sh.text(*line, rec, m)?.to_string(), sh.text(*line, rec, f)?.to_string())))
        .collect()
}

/// Columns `task, type`.
pub fn read_tasktype_map<R: Read>(reader: R, name: &str) -> Result<BTreeMap<String, TaskType>> {
    let sh = Sheet::read(reader, name)?;
    let (t, ty) = (sh.col("task")?, sh.col("type")?);
    sh.rows
        .iter()
        .map(|(line, rec)| {
            Ok((
                sh.text(*line, rec, t)?.to_string(),
                sh.parsed(*line, rec, ty, str::parse::<TaskType>)?,
            ))
        })
        .collect()
}

/// One model of a model-level selection panel with its reference score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub reference: f64,
    pub scores: SelectionScores,
}

/// Columns `model, <reference>, d0l, j_late, g_peak`; the reference column
/// is `mmlu` or `reference`.
pub fn read_panel<R: Read>(reader: R, name: &str) -> Result<Vec<PanelRow>> {
    let sh = Sheet::read(reader, name)?;
    let model = sh.col("model")?;
    let reference = sh.opt_col("mmlu").or(sh.opt_col("reference")).ok_or_else(|| {
        sh.err(1, "missing reference column (\"mmlu\" or \"reference\")")
    })?;
    let (d, j, g) = (sh.col("d0l")?, sh.col("j_late")?, sh.col("g_peak")?);
    sh.rows
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            Ok(PanelRow {
                reference: sh.num(line, rec, reference)?,
                scores: SelectionScores {
                    model_id: sh.text(line, rec, model)?.to_string(),
                    task_id: "all".to_string(),
                    d0l: sh.num(line, rec, d)?,
                    j_late: sh.num(line, rec, j)?,
                    g_peak: sh.num(line, rec, g)?,
                },
            })
        })
        .collect()
}

/// Columns `model, task, d0l, j_late, g_peak`.
pub fn read_selection_scores<R: Read>(reader: R, name: &str) -> Result<Vec<SelectionScores>> {
    let sh = Sheet::read(reader, name)?;
    let (model, task) = (sh.col("model")?, sh.col("task")?);
    let (d, j, g) = (sh.col("d0l")?, sh.col("j_late")?, sh.col("g_peak")?);
    sh.rows
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            Ok(SelectionScores {
                model_id: sh.text(line, rec, model)?.to_string(),
                task_id: sh.text(line, rec, task)?.to_string(),
                d0l: sh.num(line, rec, d)?,
                j_late: sh.num(line, rec, j)?,
                g_peak: sh.num(line, rec, g)?,
            })
        })
        .collect()
}

/// Columns `model, task, score`.
pub fn read_score_grid<R: Read>(reader: R, name: &str) -> Result<ScoreGrid> {
    let sh = Sheet::read(reader, name)?;
    let (model, task, score) = (sh.col("model")?, sh.col("task")?, sh.col("score")?);
    let mut grid = ScoreGrid::new();
    for (line, rec) in &sh.rows {
        let (m, t) = (sh.text(*line, rec, model)?, sh.text(*line, rec, task)?);
        if grid.get(m, t).is_some() {
            return Err(sh.err(*line, format!("duplicate cell {m}/{t}")));
        }
        grid.insert(m, t, sh.num(*line, rec, score)?);
    }
    Ok(grid)
}

/// Per-task correlations with the task type of every task.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskCorrelationTable {
    pub rows: Vec<TaskCorrelation>,
    pub task_types: BTreeMap<String, TaskType>,
}

/// Wide layout: `task, type, <metric>_rho, <metric>_p` for each metric
/// present. p-values may be bounds such as `<.001`.
pub fn read_task_correlations<R: Read>(reader: R, name: &str) -> Result<TaskCorrelationTable> {
    let sh = Sheet::read(reader, name)?;
    let (task, ty) = (sh.col("task")?, sh.col("type")?);
    let metrics: Vec<(SelectionMetric, usize, usize)> = SelectionMetric::ALL
        .iter()
        .filter_map(|&m| {
            let rho = sh.opt_col(&format!("{}_rho", m.as_str()))?;
            let p = sh.opt_col(&format!("{}_p", m.as_str()))?;
            Some((m, rho, p))
        })
        .collect();
    if metrics.is_empty() {
        return Err(sh.err(1, "no <metric>_rho/<metric>_p column pairs"));
    }
    let mut rows = Vec::new();
    let mut task_types = BTreeMap::new();
    for (line, rec) in &sh.rows {
        let line = *line;
        let task_id = sh.text(line, rec, task)?.to_string();
        task_types.insert(task_id.clone(), sh.parsed(line, rec, ty, str::parse::<TaskType>)?);
        for &(metric, rc, pc) in &metrics {
            let rho = sh.num(line, rec, rc)?;
            if !(-1.0..=1.0).contains(&rho) {
                return Err(sh.err(line, format!("rho {rho} outside [-1, 1]")));
            }
            rows.push(TaskCorrelation {
                task_id: task_id.clone(),
                metric,
                rho,
                p_value: sh.parsed(line, rec, pc, PValue::parse)?,
            });
        }
    }
    Ok(TaskCorrelationTable { rows, task_types })
}

/// Columns `model, task, rule, budget` and either `rel_delta` or both
/// `s_unpruned` and `s_pruned`. When all three are given the scores win.
pub fn read_outcomes<R: Read>(reader: R, name: &str) -> Result<Vec<PruneOutcome>> {
    let sh = Sheet::read(reader, name)?;
    let (model, task, rule, budget) = (sh.col("model")?, sh.col("task")?, sh.col("rule")?, sh.col("budget")?);
    let (su, sp, rd) = (sh.opt_col("s_unpruned"), sh.opt_col("s_pruned"), sh.opt_col("rel_delta"));
    if rd.is_none() && (su.is_none() || sp.is_none()) {
        return Err(sh.err(1, "need rel_delta or both s_unpruned and s_pruned"));
    }
    sh.rows
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            let s_unpruned = sh.opt_num(line, rec, su)?;
            let s_pruned = sh.opt_num(line, rec, sp)?;
            let delta = match (s_pruned, s_unpruned) {
                (Some(p), Some(u)) => rel_delta(p, u).map_err(|e| sh.err(line, e.to_string()))?,
                _ => sh
                    .opt_num(line, rec, rd)?
                    .ok_or_else(|| sh.err(line, "no rel_delta and incomplete scores"))?,
            };
            Ok(PruneOutcome {
                model_id: sh.text(line, rec, model)?.to_string(),
                task_id: sh.text(line, rec, task)?.to_string(),
                rule: sh.parsed(line, rec, rule, str::parse::<PlanRule>)?,
                budget: sh.parsed(line, rec, budget, Budget::parse)?,
                s_pruned,
                s_unpruned,
                rel_delta: delta,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub model: String,
    pub family: String,
    pub backbone: String,
    /// Transformer block count `L`.
    pub layers: usize,
}

pub fn read_models<R: Read>(reader: R, name: &str) -> Result<Vec<ModelInfo>> {
    let sh = Sheet::read(reader, name)?;
    let (m, f, b, l) = (sh.col("model")?, sh.col("family")?, sh.col("backbone")?, sh.col("layers")?);
    sh.rows
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            Ok(ModelInfo {
                model: sh.text(line, rec, m)?.to_string(),
                family: sh.text(line, rec, f)?.to_string(),
                backbone: sh.text(line, rec, b)?.to_string(),
                layers: sh.parsed(line, rec, l, |s| {
                    s.parse::<usize>()
                        .map_err(|_| Error::InvalidConfig(format!("bad layer count {s:?}")))
                })?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInfo {
    pub task: String,
    pub task_type: TaskType,
    pub category: String,
    pub metric: String,
}

pub fn read_tasks<R: Read>(reader: R, name: &str) -> Result<Vec<TaskInfo>> {
    let sh = Sheet::read(reader, name)?;
    let (t, ty, c, m) = (sh.col("task")?, sh.col("type")?, sh.col("category")?, sh.col("metric")?);
    sh.rows
        .iter()
        .map(|(line, rec)| {
            let line = *line;
            Ok(TaskInfo {
                task: sh.text(line, rec, t)?.to_string(),
                task_type: sh.parsed(line, rec, ty, str::parse::<TaskType>)?,
                category: sh.text(line, rec, c)?.to_string(),
                metric: sh.text(line, rec, m)?.to_string(),
            })
        })
        .collect()
}
