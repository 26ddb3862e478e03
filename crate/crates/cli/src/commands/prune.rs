use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use lrd_core::pruning::{baseline_plan, make_plan, rule_scores};
use lrd_core::{Budget, BudgetBase, Measurements, PlanRule, PrunePlan};
use serde::Serialize;

use super::{record_inputs, split_source};
use crate::manifest::RunManifest;
use crate::output::{read_sidecar, Sink};
use crate::{Global, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaseArg {
    /// Budgets are fractions of the removable (unprotected) layers.
    Unprotected,
    /// Budgets are fractions of all L layers.
    AllLayers,
}

impl From<BaseArg> for BudgetBase {
    fn from(b: BaseArg) -> Self {
        match b {
            BaseArg::Unprotected => BudgetBase::Unprotected,
            BaseArg::AllLayers => BudgetBase::AllLayers,
        }
    }
}

#[derive(Args, Debug)]
pub struct PrunePlanArgs {
    /// Measurement sidecars written by `measure`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "random,last-k,frenet,nrs,gfmi")]
    pub rules: Vec<PlanRule>,
    #[arg(long, value_delimiter = ',', default_value = "5%,10%,15%,20%", value_parser = Budget::parse)]
    pub budgets: Vec<Budget>,
    #[arg(long, value_enum, default_value_t = BaseArg::Unprotected)]
    pub budget_base: BaseArg,
    /// Random-baseline draws per budget, seeded `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 3)]
    pub draws: u64,
}

#[derive(Debug, Serialize)]
struct PlanRow {
    model: String,
    task: String,
    plan: PrunePlan,
}

fn plans_for(m: &Measurements, args: &PrunePlanArgs, seed: u64) -> Result<Vec<PrunePlan>> {
    let base = BudgetBase::from(args.budget_base);
    let mut plans = Vec::new();
    for &rule in &args.rules {
        match rule {
            PlanRule::Random => {
                for draw in 0..args.draws {
                    for &b in &args.budgets {
                        plans.push(baseline_plan(m.depth, b, rule, seed.wrapping_add(draw), base)?);
                    }
                }
            }
            PlanRule::LastK => {
                for &b in &args.budgets {
                    plans.push(baseline_plan(m.depth, b, rule, seed, base)?);
                }
            }
            _ => {
                let curvature = m
                    .curvature
                    .as_ref()
                    .with_context(|| format!("{rule} needs a curvature series"))?;
                let scores = rule_scores(&m.speed, curvature, &m.nrs, &m.gfmi, rule)?;
                for &b in &args.budgets {
                    plans.push(make_plan(&scores, b, base)?);
                }
            }
        }
    }
    Ok(plans)
}

pub fn run(g: &Global, args: &PrunePlanArgs) -> Result<Outcome> {
    let seed = g.seed.unwrap_or(0);
    let rules: Vec<&str> = args.rules.iter().map(|r| r.as_str()).collect();
    let budgets: Vec<String> = args.budgets.iter().map(|b| b.to_string()).collect();
    let mut manifest = RunManifest::new("prune-plan", g.load_config()?, &g.out)
        .seed("baseline_seed", seed)
        .option("rules", rules.join(","))
        .option("budgets", budgets.join(","))
        .option("budget_base", format!("{:?}", args.budget_base))
        .option("draws", args.draws);
    record_inputs(&mut manifest, &args.inputs);
    let mut sink = Sink::open(&g.out, g.format, &manifest)?;

    let mut outcome = Outcome::default();
    let mut rows = Vec::new();
    for path in &args.inputs {
        match read_sidecar::<Measurements>(path).and_then(|m| Ok((plans_for(&m, args, seed)?, m))) {
            Ok((plans, m)) => {
                let (model, task) = split_source(&m.source_id);
                rows.extend(plans.into_iter().map(|plan| PlanRow {
                    model: model.to_string(),
                    task: task.to_string(),
                    plan,
                }));
            }
            Err(e) => outcome.fail(path, &e),
        }
    }

    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let layers: Vec<String> = r.plan.removed_layers.iter().map(|l| l.to_string()).collect();
            vec![
                r.model.clone(),
                r.task.clone(),
                r.plan.rule.to_string(),
                r.plan.budget.to_string(),
                r.plan.seed.map(|s| s.to_string()).unwrap_or_default(),
                r.plan.depth.to_string(),
                layers.join(" "),
            ]
        })
        .collect();
    sink.table(
        "prune_plans",
        &["model", "task", "rule", "budget", "seed", "depth", "removed_layers"],
        &cells,
        &rows,
    )?;
    Ok(outcome)
}
