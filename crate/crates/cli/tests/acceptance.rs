//! Acceptance report. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use lrd_core::frenet::grassmann_distance;
use lrd_core::gfmi::{components, knn_edges, partition_mi, Partition};
use lrd_core::nrs::knn_set;
use lrd_core::pruning::{aggregate_pruning, baseline_plan, make_plan, rule_scores};
use lrd_core::repr::synth::{synth_sequence, SynthMode, SynthSpec};
use lrd_core::stats::{average_ranks, group_summaries, spearman};
use lrd_core::summaries::family_aggregate;
use lrd_core::tables::bundled;
use lrd_core::{
    measure, Budget, BudgetBase, LayerSeries, MeasurementConfig, PlanRule, SelectionMetric, SeriesKind, TaskGroup,
    TaskType,
};
use nalgebra::DMatrix;
use rand::Rng;

/// `Ok(detail)` or `Err(reason)`.
type Check = Result<String, String>;

/// Inclusive, with a margin for values that sit exactly on a rounded
/// boundary (the encoder peak-depth mean is 0.555 against 0.56 +- 0.005).
fn close(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol + 1e-9
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn criterion(name: &str, limit: Option<Duration>, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = f();
    let took = start.elapsed();
    let result = result.and_then(|detail| match limit {
        Some(l) if took > l => Err(format!("{detail}; took {took:.2?}, limit {l:?}")),
        _ => Ok(detail),
    });
    match result {
        Ok(detail) => {
            println!("PASS  {name}: {detail} [{took:.2?}]");
            true
        }
        Err(reason) => {
            println!("FAIL  {name}: {reason} [{took:.2?}]");
            false
        }
    }
}

fn family_means() -> Check {
    let t = bundled::per_model_summary().map_err(|e| e.to_string())?;
    let fam = family_aggregate(&t.records, &t.families).map_err(|e| e.to_string())?;
    let mut detail = Vec::new();
    for (name, d_peak, delta_j) in [("encoder", 0.56, 0.015), ("decoder", 0.89, 0.144), ("base", 0.78, 0.121)] {
        let g = fam.get(name).ok_or_else(|| format!("no {name} family"))?;
        ensure(close(g.d_peak_curvature, d_peak, 0.005), || {
            format!("{name} d_peak {} vs {d_peak}", g.d_peak_curvature)
        })?;
        ensure(close(g.delta_j, delta_j, 0.005), || format!("{name} delta_j {} vs {delta_j}", g.delta_j))?;
        detail.push(format!("{name} ({:.3}, {:+.3})", g.d_peak_curvature, g.delta_j));
    }
    Ok(detail.join(", "))
}

fn mmlu_panel() -> Check {
    let panel = bundled::llm_panel().map_err(|e| e.to_string())?;
    let reference: Vec<f64> = panel.iter().map(|r| r.reference).collect();
    // Tie handling: the tied reference scores share the average rank, and
    // the ranks agree with counting ranks.
    let ranks = average_ranks(&reference);
    ensure(ranks == naive_ranks(&reference), || format!("ranks {ranks:?}"))?;
    let tied: Vec<f64> = reference
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| reference.iter().filter(|w| *w == *v).count() > 1)
        .map(|(_, r)| *r)
        .collect();
    ensure(tied.len() == 2 && tied[0] == tied[1] && tied[0].fract() == 0.5, || {
        format!("expected one tied pair at a half rank, got {tied:?}")
    })?;
    let mut detail = Vec::new();
    for (metric, want) in [(SelectionMetric::D0l, 0.64), (SelectionMetric::JLate, 0.46), (SelectionMetric::GPeak, 0.64)] {
        let x: Vec<f64> = panel.iter().map(|r| metric.of(&r.scores)).collect();
        let c = spearman(&x, &reference).map_err(|e| e.to_string())?;
        ensure(close(c.rho, want, 0.005), || format!("{metric} rho {} vs {want}", c.rho))?;
        detail.push(format!("{metric} {:+.3}", c.rho));
    }
    Ok(format!("{} (tied ranks {})", detail.join(", "), tied[0]))
}

fn task_group_means() -> Check {
    let t = bundled::task_selection().map_err(|e| e.to_string())?;
    let groups = group_summaries(&t.rows, &t.task_types).map_err(|e| e.to_string())?;
    let expected = [
        (SelectionMetric::D0l, [0.64, 0.67, 0.68, 0.50]),
        (SelectionMetric::JLate, [0.58, 0.64, 0.57, 0.49]),
        (SelectionMetric::GPeak, [0.52, 0.60, 0.51, 0.36]),
    ];
    let order = [
        TaskGroup::All,
        TaskGroup::Type(TaskType::Cls),
        TaskGroup::Type(TaskType::Ret),
        TaskGroup::Type(TaskType::Other),
    ];
    let mut worst = 0.0f64;
    for (metric, means) in expected {
        for (group, want) in order.iter().zip(means) {
            let g = groups
                .iter()
                .find(|g| g.metric == metric && g.group == *group)
                .ok_or_else(|| format!("no {metric}/{group} group"))?;
            ensure(close(g.mean, want, 0.01), || format!("{metric} {group} mean {} vs {want}", g.mean))?;
            worst = worst.max((g.mean - want).abs());
        }
    }
    Ok(format!("12 group means, max deviation {worst:.4}"))
}

fn pruning_aggregates() -> Check {
    let table = aggregate_pruning(&bundled::pruning_cells().map_err(|e| e.to_string())?);
    ensure(table.missing.is_empty(), || format!("{} missing cells", table.missing.len()))?;
    let expected: [(PlanRule, [f64; 4], [f64; 4]); 5] = [
        (PlanRule::Random, [-4.79, -4.14, -5.90, -12.08], [-1.96, -2.88, -5.41, -5.41]),
        (PlanRule::LastK, [-6.73, -11.76, -14.76, -13.13], [-1.94, -5.47, -8.66, -8.66]),
        (PlanRule::Frenet, [-2.10, -8.83, -19.62, -21.33], [-0.98, -5.32, -15.12, -14.19]),
        (PlanRule::Nrs, [-9.54, -14.90, -15.05, -15.50], [-1.94, -5.51, -7.27, -9.89]),
        (PlanRule::Gfmi, [-5.09, -6.95, -2.37, -6.14], [-0.20, -0.20, -1.31, -3.27]),
    ];
    let mut worst = 0.0f64;
    for (rule, means, medians) in expected {
        for (i, b) in Budget::STANDARD.iter().enumerate() {
            let c = table.get(rule, *b).ok_or_else(|| format!("no {rule} {b} cell"))?;
            ensure(c.cells == 15, || format!("{rule} {b}: {} cells", c.cells))?;
            ensure(close(c.mean, means[i], 0.15), || format!("{rule} {b} mean {} vs {}", c.mean, means[i]))?;
            ensure(close(c.median, medians[i], 0.15), || {
                format!("{rule} {b} median {} vs {}", c.median, medians[i])
            })?;
            worst = worst.max((c.mean - means[i]).abs()).max((c.median - medians[i]).abs());
        }
    }
    Ok(format!("40 entries, max deviation {worst:.3}"))
}

fn config(k: usize) -> MeasurementConfig {
    MeasurementConfig {
        k_nrs: k,
        k_gfmi: k,
        ..MeasurementConfig::default()
    }
}

fn identity_fixed_point() -> Result<(), String> {
    let (n, d, depth, k) = (60, 7, 5, 6);
    let spec = SynthSpec {
        mode: SynthMode::Identity,
        depth,
        n,
        d,
        angle: 0.0,
        seed: 21,
    };
    let (seq, _) = synth_sequence(&spec).map_err(|e| e.to_string())?;
    let cfg = config(k);
    let m = measure(&seq, &cfg).map_err(|e| e.to_string())?;
    ensure(m.speed.values().iter().all(|s| s.abs() < 1e-8), || "(a) nonzero speed".into())?;
    let kappa = m.curvature.as_ref().ok_or("(a) no curvature")?;
    ensure(kappa.values().iter().all(|c| c.abs() < 1e-8), || "(a) nonzero curvature".into())?;
    ensure(m.nrs.values().iter().all(|j| (j - 1.0).abs() < 1e-8), || "(a) J != 1".into())?;

    let x = layer_from_flat(seq.data(), depth, n, d);
    let edges = brute_edges(&x, k);
    let dists: Vec<f64> = edges.values().copied().collect();
    let grid = cfg.grid();
    let h: Vec<f64> = grid
        .iter()
        .map(|&tau| {
            let t = naive_percentile(&dists, tau);
            let kept: Vec<(usize, usize)> = edges.iter().filter(|(_, w)| **w <= t).map(|(e, _)| *e).collect();
            naive_entropy(&bfs_components(n, &kept))
        })
        .collect();
    let integrated: f64 = (0..grid.len() - 1)
        .map(|i| (grid[i + 1] - grid[i]) * (h[i] + h[i + 1]) / 2.0)
        .sum();
    ensure(m.gfmi.values().iter().all(|g| (g - integrated).abs() < 1e-8), || {
        format!("(a) GFMI {:?} vs integrated entropy {integrated}", m.gfmi.values())
    })
}

fn planted_rotation() -> Result<(), String> {
    for (i, angle) in [PI / 8.0, 0.3, 0.05].into_iter().enumerate() {
        let spec = SynthSpec {
            mode: SynthMode::Rotation,
            depth: 6,
            n: 200,
            d: 6,
            angle,
            seed: 3 + i as u64,
        };
        let (seq, _) = synth_sequence(&spec).map_err(|e| e.to_string())?;
        let m = measure(&seq, &config(5)).map_err(|e| e.to_string())?;
        ensure(m.rank == 1, || format!("(b) rank {} != 1", m.rank))?;
        for s in m.speed.values() {
            ensure((s - angle).abs() < 1e-6, || format!("(b) speed {s} vs planted {angle}"))?;
        }
    }
    Ok(())
}

fn brute_force_oracles() -> Result<(), String> {
    let mut r = rng(11);
    for n in [5usize, 17, 33, 64] {
        for trial in 0..2 {
            let d = r.random_range(2..10);
            let x = if trial == 0 {
                DMatrix::from_fn(n, d, |_, _| f64::from(r.random_range(-2i32..=2)))
            } else {
                gaussian(&mut r, n, d)
            };
            for k in [1, 3, n - 1] {
                for anchor in 0..n {
                    let got = knn_set(&x, anchor, k).map_err(|e| e.to_string())?.neighbors;
                    ensure(got == brute_knn(&x, anchor, k), || format!("(c) kNN n={n} k={k} anchor={anchor}"))?;
                }
            }
        }
    }
    for n in [4usize, 10, 23, 32] {
        let x = gaussian(&mut r, n, 3);
        let edges = knn_edges(&x, 2).map_err(|e| e.to_string())?;
        let dists = edges.distances();
        for tau in [0.0, 10.0, 35.0, 50.0, 80.0, 100.0] {
            let t = naive_percentile(&dists, tau);
            let kept: Vec<(usize, usize)> = edges.edges.iter().filter(|e| e.2 <= t).map(|e| (e.0, e.1)).collect();
            ensure(components(&edges, t).labels() == bfs_components(n, &kept).as_slice(), || {
                format!("(c) components n={n} tau={tau}")
            })?;
        }
    }
    for _ in 0..200 {
        let n = r.random_range(1..60);
        let (ka, kb) = (r.random_range(1..6), r.random_range(1..6));
        let a: Vec<usize> = (0..n).map(|_| r.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| r.random_range(0..kb)).collect();
        let got = partition_mi(&Partition::from_labels(&a), &Partition::from_labels(&b)).map_err(|e| e.to_string())?;
        ensure((got - naive_mi(&a, &b)).abs() < 1e-10, || format!("(c) MI {a:?} {b:?}"))?;
    }
    let mut checked = 0;
    while checked < 200 {
        let n = r.random_range(3..40);
        let x: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..6))).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        if x.iter().all(|v| *v == x[0]) {
            continue;
        }
        let got = spearman(&x, &y).map_err(|e| e.to_string())?;
        ensure((got.rho - naive_spearman(&x, &y)).abs() < 1e-10, || format!("(c) spearman {x:?}"))?;
        checked += 1;
    }
    Ok(())
}

fn grassmann_suite() -> Result<(), String> {
    let mut g = rng(2024);
    let dist = |a: &DMatrix<f64>, b: &DMatrix<f64>| grassmann_distance(a, b).map_err(|e| e.to_string());
    for _ in 0..200 {
        let d = g.random_range(2..9);
        let r = g.random_range(1..d);
        let (a, b, c) = (random_basis(&mut g, d, r), random_basis(&mut g, d, r), random_basis(&mut g, d, r));
        let (dab, dba, dbc, dac) = (dist(&a, &b)?, dist(&b, &a)?, dist(&b, &c)?, dist(&a, &c)?);
        ensure((dab - dba).abs() < 1e-12, || format!("(d) asymmetric {dab} {dba}"))?;
        ensure(dac <= dab + dbc + 1e-10, || format!("(d) triangle {dac} > {dab} + {dbc}"))?;
        ensure(dab <= FRAC_PI_2 * (r as f64).sqrt() + 1e-12, || format!("(d) bound {dab} r={r}"))?;
        let a2 = &a * random_orthogonal(&mut g, r);
        ensure((dist(&a2, &b)? - dab).abs() < 1e-10, || "(d) basis dependence".into())?;
    }
    Ok(())
}

fn budget_nesting() -> Result<(), String> {
    let mut g = rng(77);
    for _ in 0..100 {
        let depth = g.random_range(7..49);
        let mut draw = |kind, first, len| {
            let v: Vec<f64> = (0..len).map(|_| g.random_range(-5.0..5.0)).collect();
            LayerSeries::new(kind, first, v, depth).unwrap()
        };
        let s = draw(SeriesKind::Speed, 0, depth);
        let k = draw(SeriesKind::Curvature, 1, depth - 1);
        let j = draw(SeriesKind::Nrs, 0, depth);
        let gf = draw(SeriesKind::Gfmi, 0, depth + 1);
        let seed = g.random::<u64>();
        for base in [BudgetBase::Unprotected, BudgetBase::AllLayers] {
            let mut plans = Vec::new();
            for rule in [PlanRule::Frenet, PlanRule::Nrs, PlanRule::Gfmi] {
                let scores = rule_scores(&s, &k, &j, &gf, rule).map_err(|e| e.to_string())?;
                plans.push(Budget::STANDARD.map(|b| make_plan(&scores, b, base).unwrap().removed_layers));
            }
            for rule in [PlanRule::Random, PlanRule::LastK] {
                plans.push(Budget::STANDARD.map(|b| baseline_plan(depth, b, rule, seed, base).unwrap().removed_layers));
            }
            for per_budget in &plans {
                for w in per_budget.windows(2) {
                    ensure(w[0].iter().all(|l| w[1].contains(l)), || {
                        format!("(e) L={depth}: {:?} not within {:?}", w[0], w[1])
                    })?;
                }
            }
        }
    }
    Ok(())
}

fn properties() -> Check {
    identity_fixed_point()?;
    planted_rotation()?;
    brute_force_oracles()?;
    grassmann_suite()?;
    budget_nesting()?;
    Ok("(a) identity fixed point, (b) planted rotation, (c) brute-force oracles, (d) 200 Grassmann triples, (e) 100 nesting draws".into())
}

fn lrd(args: &[&str], threads: Option<&str>) -> Result<(), String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lrd"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("LRD_THREADS", t),
        None => cmd.env_remove("LRD_THREADS"),
    };
    let out = cmd.output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("lrd {args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    Ok(files)
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = tmp.path();
    let data = root.join("data");
    let data_s = data.to_str().unwrap();
    for (mode, name) in [("rotation", "m__rot"), ("shuffle", "m__shuf"), ("identity", "m__id")] {
        lrd(&["synth", "--mode", mode, "--depth", "9", "--n", "80", "--dim", "10", "--angle", "0.2", "--seed", "5", "--name", name, "--out", data_s], None)?;
    }
    let inputs: Vec<String> = ["m__rot", "m__shuf", "m__id"]
        .iter()
        .map(|n| data.join(format!("{n}.lrdt")).display().to_string())
        .collect();
    // Equal manifests include the output directory, so every run writes to
    // the same place and the previous result is moved aside.
    let out = root.join("out");
    let out_s = out.to_str().unwrap();
    let mut runs = Vec::new();
    for threads in [Some("1"), Some("4"), None] {
        let mut args = vec!["measure", "--out", out_s, "--seed", "3"];
        args.extend(inputs.iter().map(String::as_str));
        lrd(&args, threads)?;
        runs.push(snapshot(&out)?);
        fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
    }
    let files = runs[0].len();
    ensure(files >= 10, || format!("only {files} files written"))?;
    for (i, run) in runs.iter().enumerate().skip(1) {
        ensure(run == &runs[0], || format!("run {i} differs from the single-threaded run"))?;
    }
    Ok(format!("{files} CSV/JSON files byte-identical across LRD_THREADS=1, 4 and unset"))
}

fn main() {
    let second = Some(Duration::from_secs(1));
    let results = [
        criterion("family means", second, family_means),
        criterion("MMLU panel spearman", second, mmlu_panel),
        criterion("task-group means", None, task_group_means),
        criterion("pruning aggregates", None, pruning_aggregates),
        criterion("property acceptance (a)-(e)", Some(Duration::from_secs(60)), properties),
        criterion("measure determinism", None, determinism),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
