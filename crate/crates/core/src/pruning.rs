//! Layer pruning plans from per-layer scores, the random and last-k
//! baselines, and aggregation of the resulting score changes.
//!
//! Blocks are indexed `1..=L`; layer 0 (embedding output) is never removable.
//! The first three and last three blocks are protected, so only
//! `4..=L-3` can be removed. Each primitive is z-scored over its own valid
//! window, then
//!
//! ```text
//! frenet_l = -z(s_l) - z(kappa_l)
//! nrs_l    =  z(J_l)
//! gfmi_l   =  z(GFMI(l))
//! ```
//!
//! and larger scores are removed first.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::repr::{LayerSeries, SeriesKind};

pub const PROTECTED_FRONT: usize = 3;
pub const PROTECTED_BACK: usize = 3;

/// Which selection produced a plan or an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanRule {
    Random,
    LastK,
    Frenet,
    Nrs,
    Gfmi,
}

impl PlanRule {
    pub const ALL: [PlanRule; 5] = [
        PlanRule::Random,
        PlanRule::LastK,
        PlanRule::Frenet,
        PlanRule::Nrs,
        PlanRule::Gfmi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PlanRule::Random => "random",
            PlanRule::LastK => "last-k",
            PlanRule::Frenet => "frenet",
            PlanRule::Nrs => "nrs",
            PlanRule::Gfmi => "gfmi",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, PlanRule::Random | PlanRule::LastK)
    }
}

impl fmt::Display for PlanRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PlanRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "random" => Ok(PlanRule::Random),
            "last-k" | "lastk" => Ok(PlanRule::LastK),
            "frenet" => Ok(PlanRule::Frenet),
            "nrs" => Ok(PlanRule::Nrs),
            "gfmi" => Ok(PlanRule::Gfmi),
            other => Err(Error::InvalidConfig(format!("unknown pruning rule {other:?}"))),
        }
    }
}

/// A pruning budget held in basis points so that it can key tables exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "f64", try_from = "f64")]
pub struct Budget(u32);

impl Budget {
    pub const STANDARD: [Budget; 4] = [Budget(500), Budget(1000), Budget(1500), Budget(2000)];

    pub fn from_fraction(f: f64) -> Result<Self> {
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::InvalidConfig(format!("budget {f} not in (0, 1]")));
        }
        Ok(Budget((f * 10_000.0).round() as u32))
    }

    /// Parses `"5%"`, `"5"` (percent) or `"0.05"` (fraction).
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidConfig(format!("bad budget {s:?}"));
        if let Some(p) = s.strip_suffix('%') {
            let v: f64 = p.trim().parse().map_err(|_| bad())?;
            return Self::from_fraction(v / 100.0);
        }
        let v: f64 = s.parse().map_err(|_| bad())?;
        if v > 1.0 {
            Self::from_fraction(v / 100.0)
        } else {
            Self::from_fraction(v)
        }
    }

    pub fn basis_points(self) -> u32 {
        self.0
    }

    pub fn fraction(self) -> f64 {
        f64::from(self.0) / 10_000.0
    }
}

impl From<Budget> for f64 {
    fn from(b: Budget) -> f64 {
        b.fraction()
    }
}

impl TryFrom<f64> for Budget {
    type Error = Error;

    fn try_from(f: f64) -> Result<Self> {
        Budget::from_fraction(f)
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_multiple_of(100) {
            write!(f, "{}%", self.0 / 100)
        } else {
            write!(f, "{}%", f64::from(self.0) / 100.0)
        }
    }
}

/// Layer count the budget fraction is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetBase {
    /// `k = round(budget * (L - 6))`, over the unprotected blocks only.
    #[default]
    Unprotected,
    /// `k = round(budget * L)`. Reproduces the duplicate-cell pattern of the
    /// published 12- and 16-layer per-cell results.
    AllLayers,
}

/// Blocks that may be removed, `4..=L-3`.
pub fn unprotected_layers(depth: usize) -> Result<Vec<usize>> {
    if depth < PROTECTED_FRONT + PROTECTED_BACK + 1 {
        return Err(Error::NoPrunableLayers(depth));
    }
    Ok((PROTECTED_FRONT + 1..=depth - PROTECTED_BACK).collect())
}

pub fn is_protected(depth: usize, layer: usize) -> bool {
    layer <= PROTECTED_FRONT || layer + PROTECTED_BACK > depth
}

/// Number of blocks removed at `budget`: `max(1, round_half_up(budget * base))`,
/// capped at the unprotected count.
pub fn removal_count(depth: usize, budget: Budget, base: BudgetBase) -> Result<usize> {
    let available = unprotected_layers(depth)?.len();
    let count = match base {
        BudgetBase::AllLayers => depth,
        BudgetBase::Unprotected => available,
    } as u64;
    let k = (u64::from(budget.0) * count + 5_000) / 10_000;
    Ok((k as usize).clamp(1, available))
}

/// Population mean and standard deviation of a primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZStats {
    pub mean: f64,
    pub std: f64,
}

/// Standardizes over the valid window; a constant series maps to zeros.
pub fn zscore(series: &LayerSeries) -> (LayerSeries, ZStats) {
    let v = series.values();
    if v.is_empty() {
        return (series.clone(), ZStats { mean: 0.0, std: 0.0 });
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let std = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let z = if std > 0.0 {
        v.iter().map(|x| (x - mean) / std).collect()
    } else {
        vec![0.0; v.len()]
    };
    (series.with_values(z), ZStats { mean, std })
}

/// Per-layer removability under one measurement rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneScores {
    pub rule: PlanRule,
    pub depth: usize,
    /// Indexed by layer `0..=L`; `None` where a needed primitive is
    /// undefined (always layer 0).
    pub scores: Vec<Option<f64>>,
    pub stats: Vec<(SeriesKind, ZStats)>,
}

fn expect_kind(s: &LayerSeries, kind: SeriesKind, depth: usize) -> Result<()> {
    let window = kind.window(depth).unwrap();
    if s.kind() != kind || (s.first_index(), s.len()) != window {
        return Err(Error::IncompatibleSeries(format!(
            "expected {} series with window {window:?} for L = {depth}, got {} at ({}, {})",
            kind.as_str(),
            s.kind().as_str(),
            s.first_index(),
            s.len()
        )));
    }
    Ok(())
}

/// Builds rule scores from the four primitive series of one (model, task).
pub fn rule_scores(
    speed: &LayerSeries,
    curvature: &LayerSeries,
    nrs: &LayerSeries,
    gfmi: &LayerSeries,
    rule: PlanRule,
) -> Result<PruneScores> {
    let depth = speed.len();
    expect_kind(speed, SeriesKind::Speed, depth)?;
    expect_kind(curvature, SeriesKind::Curvature, depth)?;
    expect_kind(nrs, SeriesKind::Nrs, depth)?;
    expect_kind(gfmi, SeriesKind::Gfmi, depth)?;

    let (scores, stats) = match rule {
        PlanRule::Frenet => {
            let (zs, ss) = zscore(speed);
            let (zk, sk) = zscore(curvature);
            let scores = (0..=depth)
                .map(|l| {
                    if l == 0 {
                        return None;
                    }
                    Some(-zs.get(l)? - zk.get(l)?)
                })
                .collect();
            (scores, vec![(SeriesKind::Speed, ss), (SeriesKind::Curvature, sk)])
        }
        PlanRule::Nrs | PlanRule::Gfmi => {
            let (source, kind) = if rule == PlanRule::Nrs {
                (nrs, SeriesKind::Nrs)
            } else {
                (gfmi, SeriesKind::Gfmi)
            };
            let (z, st) = zscore(source);
            let scores = (0..=depth).map(|l| if l == 0 { None } else { z.get(l) }).collect();
            (scores, vec![(kind, st)])
        }
        PlanRule::Random | PlanRule::LastK => {
            return Err(Error::InvalidConfig(format!(
                "{rule} is a baseline, not a measurement rule"
            )))
        }
    };
    Ok(PruneScores {
        rule,
        depth,
        scores,
        stats,
    })
}

/// Blocks to skip, in removal order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunePlan {
    pub rule: PlanRule,
    pub budget: Budget,
    pub depth: usize,
    pub removed_layers: Vec<usize>,
    pub protected_front: usize,
    pub protected_back: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Removes the `k` highest-scoring unprotected blocks; ties go to the lower
/// index.
pub fn make_plan(scores: &PruneScores, budget: Budget, base: BudgetBase) -> Result<PrunePlan> {
    let k = removal_count(scores.depth, budget, base)?;
    let mut ranked = unprotected_layers(scores.depth)?
        .into_iter()
        .map(|l| {
            scores
                .scores
                .get(l)
                .copied()
                .flatten()
                .map(|s| (l, s))
                .ok_or_else(|| Error::IncompatibleSeries(format!("no score for unprotected layer {l}")))
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(PrunePlan {
        rule: scores.rule,
        budget,
        depth: scores.depth,
        removed_layers: ranked.into_iter().take(k).map(|(l, _)| l).collect(),
        protected_front: PROTECTED_FRONT,
        protected_back: PROTECTED_BACK,
        seed: None,
    })
}

/// Random (seeded, without replacement) or last-k (deepest unprotected)
/// removal.
pub fn baseline_plan(depth: usize, budget: Budget, kind: PlanRule, seed: u64, base: BudgetBase) -> Result<PrunePlan> {
    let k = removal_count(depth, budget, base)?;
    let mut layers = unprotected_layers(depth)?;
    let (removed, seed) = match kind {
        PlanRule::Random => {
            layers.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            (layers.into_iter().take(k).collect(), Some(seed))
        }
        PlanRule::LastK => (layers.into_iter().rev().take(k).collect(), None),
        other => {
            return Err(Error::InvalidConfig(format!(
                "{other} is a measurement rule, not a baseline"
            )))
        }
    };
    Ok(PrunePlan {
        rule: kind,
        budget,
        depth,
        removed_layers: removed,
        protected_front: PROTECTED_FRONT,
        protected_back: PROTECTED_BACK,
        seed,
    })
}

/// `100 (s_pruned - s_unpruned) / s_unpruned`.
pub fn rel_delta(s_pruned: f64, s_unpruned: f64) -> Result<f64> {
    if s_unpruned == 0.0 {
        return Err(Error::ZeroBaseline);
    }
    Ok(100.0 * (s_pruned - s_unpruned) / s_unpruned)
}

/// Downstream effect of one plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    pub model_id: String,
    pub task_id: String,
    pub rule: PlanRule,
    pub budget: Budget,
    pub s_pruned: Option<f64>,
    pub s_unpruned: Option<f64>,
    /// Percent.
    pub rel_delta: f64,
}

impl PruneOutcome {
    pub fn from_scores(
        model_id: &str,
        task_id: &str,
        rule: PlanRule,
        budget: Budget,
        s_pruned: f64,
        s_unpruned: f64,
    ) -> Result<Self> {
        Ok(Self {
            model_id: model_id.to_string(),
            task_id: task_id.to_string(),
            rule,
            budget,
            s_pruned: Some(s_pruned),
            s_unpruned: Some(s_unpruned),
            rel_delta: rel_delta(s_pruned, s_unpruned)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateCell {
    pub cells: usize,
    pub mean: f64,
    pub median: f64,
}

/// Mean and median relative change per (rule, budget).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningTable {
    pub cells: BTreeMap<(PlanRule, Budget), AggregateCell>,
    /// `(model, task, rule, budget)` combinations absent from the input.
    pub missing: Vec<(String, String, PlanRule, Budget)>,
}

impl PruningTable {
    pub fn get(&self, rule: PlanRule, budget: Budget) -> Option<&AggregateCell> {
        self.cells.get(&(rule, budget))
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Aggregates outcomes over (model, task) cells. Repeated rows for one cell
/// (random seeds) are averaged first; missing cells are reported.
pub fn aggregate_pruning(outcomes: &[PruneOutcome]) -> PruningTable {
    type Key = (PlanRule, Budget, String, String);
    let mut per_cell: BTreeMap<Key, Vec<f64>> = BTreeMap::new();
    let mut models_tasks: BTreeSet<(String, String)> = BTreeSet::new();
    for o in outcomes {
        models_tasks.insert((o.model_id.clone(), o.task_id.clone()));
        per_cell
            .entry((o.rule, o.budget, o.model_id.clone(), o.task_id.clone()))
            .or_default()
            .push(o.rel_delta);
    }
    let mut by_group: BTreeMap<(PlanRule, Budget), BTreeMap<(String, String), f64>> = BTreeMap::new();
    for ((rule, budget, model, task), v) in per_cell {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        by_group.entry((rule, budget)).or_default().insert((model, task), mean);
    }
    let mut missing = Vec::new();
    let cells = by_group
        .into_iter()
        .map(|((rule, budget), cells)| {
            for mt in &models_tasks {
                if !cells.contains_key(mt) {
                    missing.push((mt.0.clone(), mt.1.clone(), rule, budget));
                }
            }
            let values: Vec<f64> = cells.into_values().collect();
            let agg = AggregateCell {
                cells: values.len(),
                mean: values.iter().sum::<f64>() / values.len() as f64,
                median: median(&values).unwrap(),
            };
            ((rule, budget), agg)
        })
        .collect();
    PruningTable { cells, missing }
}
