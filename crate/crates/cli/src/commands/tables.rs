//! Table-level commands: summarize, select, aggregate and reproduce.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use lrd_core::pruning::{aggregate_pruning, PruningTable};
use lrd_core::stats::{group_summaries, selection_table, GroupSummary, PValue, ScoreGrid, TaskCorrelation};
use lrd_core::summaries::{family_aggregate, selection_scores, summary_record, tasktype_aggregate, GroupMeans};
use lrd_core::tables::{self, bundled};
use lrd_core::{Budget, CorrelationResult, Measurements, PlanRule, PruneOutcome, SelectionMetric, SelectionScores, SummaryRecord, TaskType};
use serde::Serialize;

use super::{record_inputs, split_source};
use crate::manifest::{InputRecord, RunManifest};
use crate::output::{read_sidecar, sig6, Sink};
use crate::{Global, Outcome};

/// A CSV input, read from disk or from the tables compiled into the binary.
struct Source {
    name: String,
    text: String,
    record: InputRecord,
}

impl Source {
    fn file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self {
            name: path.display().to_string(),
            text,
            record: InputRecord::from_path(path)?,
        })
    }

    fn bundled(name: &str, text: &'static str) -> Self {
        Self {
            name: name.to_string(),
            text: text.to_string(),
            record: InputRecord::bundled(name, text),
        }
    }

    fn file_or_bundled(path: Option<&Path>, name: &str, text: &'static str) -> Result<Self> {
        match path {
            Some(p) => Self::file(p),
            None => Ok(Self::bundled(name, text)),
        }
    }

    fn bytes(&self) -> &[u8] {
        self.text.as_bytes()
    }
}

fn manifest_with(command: &str, g: &Global, sources: &[&Source]) -> Result<RunManifest> {
    let mut m = RunManifest::new(command, g.load_config()?, &g.out);
    m.inputs.extend(sources.iter().map(|s| s.record.clone()));
    Ok(m)
}

const SUMMARY_HEADER: [&str; 7] = ["model", "task", "d_peak", "delta_j", "kappa_bar", "s_bar", "g_bar"];
const SCORES_HEADER: [&str; 5] = ["model", "task", "d0l", "j_late", "g_peak"];
const MEANS_HEADER: [&str; 6] = ["count", "d_peak", "delta_j", "kappa_bar", "s_bar", "g_bar"];

fn summary_cells(r: &SummaryRecord) -> Vec<String> {
    vec![
        r.model_id.clone(),
        r.task_id.clone(),
        sig6(r.d_peak_curvature),
        sig6(r.delta_j),
        sig6(r.mean_curvature),
        sig6(r.mean_speed),
        sig6(r.gfmi_scale),
    ]
}

fn score_cells(s: &SelectionScores) -> Vec<String> {
    vec![s.model_id.clone(), s.task_id.clone(), sig6(s.d0l), sig6(s.j_late), sig6(s.g_peak)]
}

fn means_cells(g: &GroupMeans) -> Vec<String> {
    vec![
        g.count.to_string(),
        sig6(g.d_peak_curvature),
        sig6(g.delta_j),
        sig6(g.mean_curvature),
        sig6(g.mean_speed),
        sig6(g.gfmi_scale),
    ]
}

fn p_cell(p: PValue) -> String {
    match p {
        PValue::Exact(v) => sig6(v),
        PValue::Below(v) => format!("<{v}"),
    }
}

#[derive(Args, Debug)]
pub struct SummarizeArgs {
    /// Measurement sidecars (`*.measurements.json`) written by `measure`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

pub fn summarize(g: &Global, args: &SummarizeArgs) -> Result<Outcome> {
    let mut manifest = RunManifest::new("summarize", g.load_config()?, &g.out);
    record_inputs(&mut manifest, &args.inputs);
    let mut sink = Sink::open(&g.out, g.format, &manifest)?;
    let mut outcome = Outcome::default();
    let mut summaries = Vec::new();
    let mut scores = Vec::new();
    for path in &args.inputs {
        let row = read_sidecar::<Measurements>(path).and_then(|m| {
            let (model, task) = split_source(&m.source_id);
            Ok((summary_record(&m, model, task)?, selection_scores(&m, model, task)?))
        });
        match row {
            Ok((s, sc)) => {
                summaries.push(s);
                scores.push(sc);
            }
            Err(e) => outcome.fail(path, &e),
        }
    }
    let cells: Vec<_> = summaries.iter().map(summary_cells).collect();
    sink.table("summaries", &SUMMARY_HEADER, &cells, &summaries)?;
    let cells: Vec<_> = scores.iter().map(score_cells).collect();
    sink.table("selection_scores", &SCORES_HEADER, &cells, &scores)?;
    Ok(outcome)
}

#[derive(Subcommand, Debug)]
pub enum AggregateCommand {
    /// Family means of summary rows, and family x task-type means when task
    /// types are given.
    Families {
        /// Summary CSV; defaults to the bundled per-model table.
        summaries: Option<PathBuf>,
        /// `model,family` CSV, for summaries without a family column.
        #[arg(long)]
        families: Option<PathBuf>,
        /// `task,type` CSV.
        #[arg(long)]
        task_types: Option<PathBuf>,
    },
    /// Mean and median relative change per (rule, budget).
    Pruning {
        /// Outcome CSV; defaults to the bundled pruning cells.
        outcomes: Option<PathBuf>,
    },
}

#[derive(Serialize)]
struct FamilyTypeRow<'a> {
    family: &'a str,
    task_type: TaskType,
    #[serde(flatten)]
    means: &'a GroupMeans,
}

fn write_family_tables(
    sink: &mut Sink,
    records: &[SummaryRecord],
    families: &BTreeMap<String, String>,
    task_types: Option<&BTreeMap<String, TaskType>>,
) -> Result<BTreeMap<String, GroupMeans>> {
    if families.is_empty() {
        bail!("no family mapping: add a family column or pass --families");
    }
    let fam = family_aggregate(records, families)?;
    let header: Vec<&str> = ["family"].into_iter().chain(MEANS_HEADER).collect();
    let cells: Vec<_> = fam
        .iter()
        .map(|(f, m)| std::iter::once(f.clone()).chain(means_cells(m)).collect())
        .collect();
    sink.table("family_summary", &header, &cells, &fam)?;

    if let Some(types) = task_types {
        let by_type = tasktype_aggregate(records, families, types)?;
        let rows: Vec<_> = by_type
            .iter()
            .map(|((f, t), m)| FamilyTypeRow {
                family: f,
                task_type: *t,
                means: m,
            })
            .collect();
        let header: Vec<&str> = ["family", "type"].into_iter().chain(MEANS_HEADER).collect();
        let cells: Vec<_> = by_type
            .iter()
            .map(|((f, t), m)| [f.clone(), t.as_str().to_string()].into_iter().chain(means_cells(m)).collect())
            .collect();
        sink.table("tasktype_summary", &header, &cells, &rows)?;
    }
    Ok(fam)
}

#[derive(Serialize)]
struct PruningRow {
    rule: PlanRule,
    budget: Budget,
    cells: usize,
    mean: f64,
    median: f64,
}

#[derive(Serialize)]
struct MissingRow<'a> {
    model: &'a str,
    task: &'a str,
    rule: PlanRule,
    budget: Budget,
}

fn write_pruning_tables(sink: &mut Sink, outcomes: &[PruneOutcome]) -> Result<PruningTable> {
    let table = aggregate_pruning(outcomes);
    let rows: Vec<_> = table
        .cells
        .iter()
        .map(|(&(rule, budget), c)| PruningRow {
            rule,
            budget,
            cells: c.cells,
            mean: c.mean,
            median: c.median,
        })
        .collect();
    let cells: Vec<_> = rows
        .iter()
        .map(|r| vec![r.rule.to_string(), r.budget.to_string(), r.cells.to_string(), sig6(r.mean), sig6(r.median)])
        .collect();
    sink.table("pruning_summary", &["rule", "budget", "cells", "mean", "median"], &cells, &rows)?;
    if !table.missing.is_empty() {
        eprintln!("warning: {} (model, task, rule, budget) cell(s) missing; see pruning_missing", table.missing.len());
        let rows: Vec<_> = table
            .missing
            .iter()
            .map(|(m, t, rule, budget)| MissingRow {
                model: m,
                task: t,
                rule: *rule,
                budget: *budget,
            })
            .collect();
        let cells: Vec<_> = rows
            .iter()
            .map(|r| vec![r.model.to_string(), r.task.to_string(), r.rule.to_string(), r.budget.to_string()])
            .collect();
        sink.table("pruning_missing", &["model", "task", "rule", "budget"], &cells, &rows)?;
    }
    Ok(table)
}

pub fn aggregate(g: &Global, cmd: &AggregateCommand) -> Result<Outcome> {
    match cmd {
        AggregateCommand::Families {
            summaries,
            families,
            task_types,
        } => {
            let src = Source::file_or_bundled(summaries.as_deref(), "per_model_summary.csv", bundled::PER_MODEL_SUMMARY)?;
            let fam_src = families.as_deref().map(Source::file).transpose()?;
            let type_src = task_types.as_deref().map(Source::file).transpose()?;
            let all: Vec<&Source> = [Some(&src), fam_src.as_ref(), type_src.as_ref()].into_iter().flatten().collect();
            let manifest = manifest_with("aggregate families", g, &all)?;

            let table = tables::read_summaries(src.bytes(), &src.name)?;
            let family_map = match &fam_src {
                Some(s) => tables::read_family_map(s.bytes(), &s.name)?,
                None => table.families.clone(),
            };
            let types = type_src
                .as_ref()
                .map(|s| tables::read_tasktype_map(s.bytes(), &s.name))
                .transpose()?;
            let mut sink = Sink::open(&g.out, g.format, &manifest)?;
            write_family_tables(&mut sink, &table.records, &family_map, types.as_ref())?;
        }
        AggregateCommand::Pruning { outcomes } => {
            let src = Source::file_or_bundled(outcomes.as_deref(), "pruning_cells.csv", bundled::PRUNING_CELLS)?;
            let manifest = manifest_with("aggregate pruning", g, &[&src])?;
            let outcomes = tables::read_outcomes(src.bytes(), &src.name)?;
            let mut sink = Sink::open(&g.out, g.format, &manifest)?;
            write_pruning_tables(&mut sink, &outcomes)?;
        }
    }
    Ok(Outcome::default())
}

#[derive(Subcommand, Debug)]
pub enum SelectCommand {
    /// One row per model with a reference score (`model,mmlu|reference,d0l,j_late,g_peak`).
    Panel {
        /// Defaults to the bundled six-model panel.
        panel: Option<PathBuf>,
    },
    /// Group summaries of per-task correlations (`task,type,<metric>_rho,<metric>_p`).
    Tasks {
        /// Defaults to the bundled 30-task table.
        correlations: Option<PathBuf>,
    },
    /// Per-task correlations over models from score grids, then group summaries.
    Grid {
        /// Selection scores (`model,task,d0l,j_late,g_peak`), e.g. from `summarize`.
        #[arg(long)]
        scores: PathBuf,
        /// Reference scores (`model,task,score`).
        #[arg(long)]
        reference: PathBuf,
        /// `task,type` CSV.
        #[arg(long)]
        task_types: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "d0l,j_late,g_peak")]
        metrics: Vec<SelectionMetric>,
    },
}

#[derive(Serialize)]
struct PanelCorrelation {
    metric: SelectionMetric,
    #[serde(flatten)]
    result: CorrelationResult,
}

fn write_panel_table(sink: &mut Sink, panel: &[tables::PanelRow]) -> Result<Vec<PanelCorrelation>> {
    let reference: Vec<f64> = panel.iter().map(|r| r.reference).collect();
    let rows = SelectionMetric::ALL
        .iter()
        .map(|&metric| {
            let x: Vec<f64> = panel.iter().map(|r| metric.of(&r.scores)).collect();
            let result = lrd_core::stats::spearman(&x, &reference).with_context(|| format!("{metric}"))?;
            Ok(PanelCorrelation { metric, result })
        })
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<_> = rows
        .iter()
        .map(|r| vec![r.metric.to_string(), sig6(r.result.rho), sig6(r.result.p_value), r.result.n.to_string()])
        .collect();
    sink.table("panel_correlations", &["metric", "rho", "p_value", "n"], &cells, &rows)?;
    Ok(rows)
}

fn write_group_table(sink: &mut Sink, groups: &[GroupSummary]) -> Result<()> {
    let cells: Vec<_> = groups
        .iter()
        .map(|s| {
            vec![
                s.metric.to_string(),
                s.group.to_string(),
                s.n_tasks.to_string(),
                sig6(s.mean),
                sig6(s.sd),
                s.sig_count.to_string(),
            ]
        })
        .collect();
    sink.table(
        "selection_groups",
        &["metric", "group", "n_tasks", "mean", "sd", "sig_count"],
        &cells,
        &groups,
    )
}

/// Wide per-task layout readable by `select tasks`.
fn write_task_table(sink: &mut Sink, rows: &[TaskCorrelation], types: &BTreeMap<String, TaskType>) -> Result<()> {
    let metrics: Vec<SelectionMetric> = SelectionMetric::ALL
        .into_iter()
        .filter(|m| rows.iter().any(|r| r.metric == *m))
        .collect();
    let mut header = vec!["task".to_string(), "type".to_string()];
    for m in &metrics {
        header.push(format!("{}_rho", m.as_str()));
        header.push(format!("{}_p", m.as_str()));
    }
    let mut by_task: BTreeMap<&str, BTreeMap<SelectionMetric, &TaskCorrelation>> = BTreeMap::new();
    for r in rows {
        by_task.entry(&r.task_id).or_default().insert(r.metric, r);
    }
    let mut cells = Vec::new();
    for (task, per_metric) in &by_task {
        let ty = types.get(*task).map_or("Other", |t| t.as_str());
        let mut row = vec![task.to_string(), ty.to_string()];
        for m in &metrics {
            let r = per_metric[m];
            row.push(sig6(r.rho));
            row.push(p_cell(r.p_value));
        }
        cells.push(row);
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    sink.table("task_correlations", &header, &cells, &rows)
}

pub fn select(g: &Global, cmd: &SelectCommand) -> Result<Outcome> {
    match cmd {
        SelectCommand::Panel { panel } => {
            let src = Source::file_or_bundled(panel.as_deref(), "llm_panel.csv", bundled::LLM_PANEL)?;
            let manifest = manifest_with("select panel", g, &[&src])?;
            let rows = tables::read_panel(src.bytes(), &src.name)?;
            let mut sink = Sink::open(&g.out, g.format, &manifest)?;
            write_panel_table(&mut sink, &rows)?;
        }
        SelectCommand::Tasks { correlations } => {
            let src = Source::file_or_bundled(correlations.as_deref(), "task_selection.csv", bundled::TASK_SELECTION)?;
            let manifest = manifest_with("select tasks", g, &[&src])?;
            let t = tables::read_task_correlations(src.bytes(), &src.name)?;
            let groups = group_summaries(&t.rows, &t.task_types)?;
            let mut sink = Sink::open(&g.out, g.format, &manifest)?;
            write_group_table(&mut sink, &groups)?;
        }
        SelectCommand::Grid {
            scores,
            reference,
            task_types,
            metrics,
        } => {
            let (s, r, t) = (Source::file(scores)?, Source::file(reference)?, Source::file(task_types)?);
            let names: Vec<&str> = metrics.iter().map(|m| m.as_str()).collect();
            let manifest = manifest_with("select grid", g, &[&s, &r, &t])?.option("metrics", names.join(","));
            let scores = tables::read_selection_scores(s.bytes(), &s.name)?;
            let reference = tables::read_score_grid(r.bytes(), &r.name)?;
            let types = tables::read_tasktype_map(t.bytes(), &t.name)?;
            let grids: BTreeMap<SelectionMetric, ScoreGrid> = metrics
                .iter()
                .map(|&m| (m, ScoreGrid::from_scores(&scores, m)))
                .collect();
            let table = selection_table(&grids, &reference, &types)?;
            let mut sink = Sink::open(&g.out, g.format, &manifest)?;
            write_task_table(&mut sink, &table.per_task, &types)?;
            write_group_table(&mut sink, &table.groups)?;
        }
    }
    Ok(Outcome::default())
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    /// Directory with replacement copies of the bundled tables, under the
    /// same file names.
    #[arg(long)]
    pub fixtures: Option<PathBuf>,
}

pub fn reproduce(g: &Global, args: &ReproduceArgs) -> Result<Outcome> {
    let load = |name: &str, text: &'static str| match &args.fixtures {
        Some(dir) => Source::file(&dir.join(name)),
        None => Ok(Source::bundled(name, text)),
    };
    let summary = load("per_model_summary.csv", bundled::PER_MODEL_SUMMARY)?;
    let panel = load("llm_panel.csv", bundled::LLM_PANEL)?;
    let tasks = load("task_selection.csv", bundled::TASK_SELECTION)?;
    let cells = load("pruning_cells.csv", bundled::PRUNING_CELLS)?;
    let manifest = manifest_with("reproduce", g, &[&summary, &panel, &tasks, &cells])?;

    let summary_t = tables::read_summaries(summary.bytes(), &summary.name)?;
    let panel_t = tables::read_panel(panel.bytes(), &panel.name)?;
    let tasks_t = tables::read_task_correlations(tasks.bytes(), &tasks.name)?;
    let outcomes = tables::read_outcomes(cells.bytes(), &cells.name)?;
    let groups = group_summaries(&tasks_t.rows, &tasks_t.task_types)?;

    let mut sink = Sink::open(&g.out, g.format, &manifest)?;
    let fam = write_family_tables(&mut sink, &summary_t.records, &summary_t.families, None)?;
    let corr = write_panel_table(&mut sink, &panel_t)?;
    write_group_table(&mut sink, &groups)?;
    let pruning = write_pruning_tables(&mut sink, &outcomes)?;

    println!("family          n   d_peak   delta_j");
    for (f, m) in &fam {
        println!("{f:<14} {:>2}   {:.3}   {:+.3}", m.count, m.d_peak_curvature, m.delta_j);
    }
    println!("\npanel spearman  rho      p");
    for c in &corr {
        println!("{:<14} {:+.3}   {:.3}", c.metric.to_string(), c.result.rho, c.result.p_value);
    }
    println!("\ntask groups     All     CLS     RET     Other   sig");
    for m in SelectionMetric::ALL {
        let of_metric: Vec<&GroupSummary> = groups.iter().filter(|s| s.metric == m).collect();
        let means: Vec<String> = of_metric.iter().map(|s| format!("{:+.2}", s.mean)).collect();
        let sig = of_metric.first().map_or(0, |s| s.sig_count);
        println!("{:<14}  {}   {sig}", m.to_string(), means.join("   "));
    }
    println!("\npruning         budget  mean     median");
    for ((rule, budget), c) in &pruning.cells {
        println!("{:<14}  {:<6}  {:+.2}   {:+.2}", rule.to_string(), budget.to_string(), c.mean, c.median);
    }
    eprintln!("wrote {} file(s) to {}", sink.written().len(), g.out.display());
    Ok(Outcome::default())
}
