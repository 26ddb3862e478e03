mod common;

use std::f64::consts::PI;

use common::*;
use lrd_core::frenet::{grassmann_distance, principal_angles, subspace_basis};
use lrd_core::gfmi::{components, gfmi_series, knn_edges, partition_mi, Partition};
use lrd_core::nrs::{knn_set, nrs_series};
use lrd_core::repr::synth::{synth_sequence, SynthMode, SynthSpec};
use lrd_core::stats::{spearman, student_t_two_sided};
use lrd_core::{measure, MeasurementConfig, RepresentationSequence};
use nalgebra::DMatrix;
use rand::Rng;

fn small_config(k: usize) -> MeasurementConfig {
    MeasurementConfig {
        k_nrs: k,
        k_gfmi: k,
        ..MeasurementConfig::default()
    }
}

fn sequence_from(layers: &[DMatrix<f64>]) -> RepresentationSequence {
    let (n, d) = layers[0].shape();
    let flat: Vec<Vec<f32>> = layers
        .iter()
        .map(|x| {
            let mut v = Vec::with_capacity(n * d);
            for i in 0..n {
                v.extend(x.row(i).iter().map(|&a| a as f32));
            }
            v
        })
        .collect();
    RepresentationSequence::from_layers(flat, n, d, "oracle").unwrap()
}

#[test]
fn knn_matches_brute_force() {
    let mut r = rng(11);
    for &n in &[5usize, 9, 17, 33, 64] {
        for trial in 0..3 {
            let d = r.random_range(2..10);
            // Small integer grids make exact distance ties common.
            let x = if trial == 0 {
                DMatrix::from_fn(n, d, |_, _| f64::from(r.random_range(-2i32..=2)))
            } else {
                gaussian(&mut r, n, d)
            };
            for &k in &[1, 3, n - 1] {
                for anchor in 0..n {
                    let got = knn_set(&x, anchor, k).unwrap().neighbors;
                    assert_eq!(got, brute_knn(&x, anchor, k), "n={n} d={d} k={k} anchor={anchor}");
                }
            }
        }
    }
}

#[test]
fn edges_match_brute_force() {
    let mut r = rng(12);
    for &n in &[6usize, 20, 32] {
        let x = gaussian(&mut r, n, 5);
        for k in [1, 2, 4] {
            let got = knn_edges(&x, k).unwrap();
            let want = brute_edges(&x, k);
            assert_eq!(got.edges.len(), want.len());
            for &(i, j, dist) in &got.edges {
                assert!((want[&(i, j)] - dist).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn components_match_bfs() {
    let mut r = rng(13);
    for &n in &[4usize, 10, 23, 32] {
        for _ in 0..4 {
            let x = gaussian(&mut r, n, 3);
            let edges = knn_edges(&x, 2).unwrap();
            let dists = edges.distances();
            for tau in [0.0, 10.0, 35.0, 50.0, 80.0, 100.0] {
                let threshold = naive_percentile(&dists, tau);
                let kept: Vec<(usize, usize)> = edges
                    .edges
                    .iter()
                    .filter(|e| e.2 <= threshold)
                    .map(|e| (e.0, e.1))
                    .collect();
                let got = components(&edges, threshold);
                assert_eq!(got.labels(), bfs_components(n, &kept).as_slice(), "n={n} tau={tau}");
            }
        }
    }
}

#[test]
fn partition_mi_matches_contingency_table() {
    let mut r = rng(14);
    for _ in 0..200 {
        let n = r.random_range(1..60);
        let ka = r.random_range(1..6);
        let kb = r.random_range(1..6);
        let a: Vec<usize> = (0..n).map(|_| r.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| r.random_range(0..kb)).collect();
        let pa = Partition::from_labels(&a);
        let pb = Partition::from_labels(&b);
        let got = partition_mi(&pa, &pb).unwrap();
        // The oracle reads raw labels, so also exercise relabeling.
        assert!((got - naive_mi(&a, &b)).abs() < 1e-12, "{a:?} {b:?}");
    }
}

#[test]
fn spearman_matches_naive_ranks() {
    let mut r = rng(15);
    let mut checked = 0;
    while checked < 300 {
        let n = r.random_range(3..40);
        let x: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..6))).collect();
        let y: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        if x.iter().all(|v| *v == x[0]) {
            continue;
        }
        let got = spearman(&x, &y).unwrap();
        assert!((got.rho - naive_spearman(&x, &y)).abs() < 1e-10);
        checked += 1;
    }
}

#[test]
fn t_tail_matches_quadrature() {
    for &nu in &[1.0, 2.0, 4.0, 10.0, 23.0, 28.0] {
        for &t in &[0.1, 0.5, 1.0, 2.0, 3.5, 6.0] {
            let got = student_t_two_sided(t, nu);
            let want = t_two_sided_by_quadrature(t, nu);
            assert!((got - want).abs() < 1e-8, "nu={nu} t={t}: {got} vs {want}");
        }
    }
}

#[test]
fn spearman_p_matches_quadrature() {
    let mut r = rng(16);
    for _ in 0..50 {
        let n = r.random_range(5..30);
        let x: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + 0.5 * r.random::<f64>()).collect();
        let c = spearman(&x, &y).unwrap();
        let nu = (n - 2) as f64;
        let t = c.rho * (nu / (1.0 - c.rho * c.rho)).sqrt();
        assert!((c.p_value - t_two_sided_by_quadrature(t, nu)).abs() < 1e-8);
    }
}

/// Recomputes every GFMI value from brute-force neighbors, a hand-written
/// percentile, BFS components and a full contingency table.
#[test]
fn gfmi_matches_naive_recomputation() {
    let mut r = rng(17);
    let layers: Vec<DMatrix<f64>> = (0..4).map(|_| gaussian(&mut r, 24, 6)).collect();
    let seq = sequence_from(&layers);
    let cfg = small_config(4);
    let got = gfmi_series(&seq, &cfg).unwrap();

    let grid = cfg.grid();
    let labels_at = |x: &DMatrix<f64>| -> Vec<Vec<usize>> {
        let edges = brute_edges(x, 4);
        let dists: Vec<f64> = edges.values().copied().collect();
        grid.iter()
            .map(|&tau| {
                let t = naive_percentile(&dists, tau);
                let kept: Vec<(usize, usize)> = edges.iter().filter(|(_, d)| **d <= t).map(|(k, _)| *k).collect();
                bfs_components(24, &kept)
            })
            .collect()
    };
    let mats: Vec<DMatrix<f64>> = (0..4).map(|l| layer_from_flat(seq.data(), l, 24, 6)).collect();
    let reference = labels_at(&mats[3]);
    for (l, x) in mats.iter().enumerate() {
        let mine = labels_at(x);
        let mi: Vec<f64> = mine.iter().zip(&reference).map(|(a, b)| naive_mi(a, b)).collect();
        let auc: f64 = (0..grid.len() - 1)
            .map(|i| (grid[i + 1] - grid[i]) * (mi[i] + mi[i + 1]) / 2.0)
            .sum();
        assert!((got.series.values()[l] - auc).abs() < 1e-10, "layer {l}");
        for (g, w) in got.curves[l].values().iter().zip(&mi) {
            assert!((g - w).abs() < 1e-12);
        }
    }
}

#[test]
fn nrs_matches_naive_recomputation() {
    let mut r = rng(18);
    let layers: Vec<DMatrix<f64>> = (0..3).map(|_| gaussian(&mut r, 30, 4)).collect();
    let seq = sequence_from(&layers);
    let cfg = small_config(5);
    let got = nrs_series(&seq, &cfg).unwrap();
    let mats: Vec<DMatrix<f64>> = (0..3).map(|l| layer_from_flat(seq.data(), l, 30, 4)).collect();
    for l in 0..2 {
        let want: f64 = (0..30)
            .map(|i| naive_jaccard(&brute_knn(&mats[l], i, 5), &brute_knn(&mats[l + 1], i, 5)))
            .sum::<f64>()
            / 30.0;
        assert!((got.values()[l] - want).abs() < 1e-12);
    }
}

#[test]
fn shuffled_layers_lose_neighborhoods() {
    // Monte Carlo over 100 seeds; independent permutations leave an anchor
    // with roughly k^2 / N shared neighbors.
    let mut total = 0.0;
    let mut count = 0.0;
    for seed in 0..100 {
        let spec = SynthSpec {
            mode: SynthMode::Shuffle,
            depth: 2,
            n: 50,
            d: 8,
            angle: 0.0,
            seed,
        };
        let (seq, _) = synth_sequence(&spec).unwrap();
        for j in nrs_series(&seq, &small_config(5)).unwrap().values() {
            total += j;
            count += 1.0;
        }
    }
    let mean = total / count;
    assert!(mean < 0.5, "mean retention {mean}");
    assert!(mean < 0.2, "mean retention {mean} far above the chance level");
}

#[test]
fn planted_rotation_speed() {
    let angle = PI / 8.0;
    let spec = SynthSpec {
        mode: SynthMode::Rotation,
        depth: 6,
        n: 200,
        d: 6,
        angle,
        seed: 3,
    };
    let (seq, truth) = synth_sequence(&spec).unwrap();
    assert_eq!(truth.step_angle, Some(angle));
    let m = measure(&seq, &small_config(5)).unwrap();
    assert_eq!(m.rank, 1);
    for s in m.speed.values() {
        assert!((s - angle).abs() < 1e-6, "speed {s}");
    }
    // Constant speed along one geodesic circle: every curvature is 0 up to
    // the rounding of the f32 payload.
    for k in m.curvature.as_ref().unwrap().values() {
        assert!(k.abs() < 1e-2, "curvature {k}");
    }
    // Six steps of pi/8 overshoot pi/2, so the line angle folds back.
    assert!((m.end_to_end - truth.end_to_end_angle.unwrap()).abs() < 1e-6);
}

#[test]
fn two_step_rotation_end_to_end() {
    let spec = SynthSpec {
        mode: SynthMode::Rotation,
        depth: 2,
        n: 120,
        d: 4,
        angle: PI / 8.0,
        seed: 9,
    };
    let (seq, _) = synth_sequence(&spec).unwrap();
    let m = measure(&seq, &small_config(5)).unwrap();
    assert!((m.end_to_end - PI / 4.0).abs() < 1e-6);
}

#[test]
fn orthogonal_transform_and_scaling_keep_neighborhoods() {
    let mut r = rng(19);
    let x = gaussian(&mut r, 40, 5);
    let q = random_orthogonal(&mut r, 5);
    let layers = vec![x.clone(), &x * &q, &x * 3.5, (&x * &q) * 0.25];
    let seq = sequence_from(&layers);
    let j = nrs_series(&seq, &small_config(6)).unwrap();
    for v in j.values() {
        assert_eq!(*v, 1.0);
    }
}

#[test]
fn identity_fixed_point() {
    let spec = SynthSpec {
        mode: SynthMode::Identity,
        depth: 5,
        n: 60,
        d: 7,
        angle: 0.0,
        seed: 21,
    };
    let (seq, _) = synth_sequence(&spec).unwrap();
    let cfg = small_config(6);
    let m = measure(&seq, &cfg).unwrap();
    assert!(m.speed.values().iter().all(|s| s.abs() < 1e-8));
    assert!(m.curvature.as_ref().unwrap().values().iter().all(|k| k.abs() < 1e-8));
    assert!(m.nrs.values().iter().all(|j| (j - 1.0).abs() < 1e-8));

    // GFMI(l) equals the integrated entropy of the final-layer partitions.
    let x = layer_from_flat(seq.data(), 5, 60, 7);
    let edges = brute_edges(&x, 6);
    let dists: Vec<f64> = edges.values().copied().collect();
    let grid = cfg.grid();
    let h: Vec<f64> = grid
        .iter()
        .map(|&tau| {
            let t = naive_percentile(&dists, tau);
            let kept: Vec<(usize, usize)> = edges.iter().filter(|(_, d)| **d <= t).map(|(k, _)| *k).collect();
            naive_entropy(&bfs_components(60, &kept))
        })
        .collect();
    let integrated: f64 = (0..grid.len() - 1)
        .map(|i| (grid[i + 1] - grid[i]) * (h[i] + h[i + 1]) / 2.0)
        .sum();
    for g in m.gfmi.values() {
        assert!((g - integrated).abs() < 1e-8, "{g} vs {integrated}");
    }
}

#[test]
fn principal_angles_match_planted_construction() {
    // Q_b = [cos t e1 + sin t e3, e2] against Q_a = [e1, e2]: angles {0, t}.
    let t: f64 = 0.3;
    let qa = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let qb = DMatrix::from_row_slice(4, 2, &[t.cos(), 0.0, 0.0, 1.0, t.sin(), 0.0, 0.0, 0.0]);
    let spec = principal_angles(&qa, &qb).unwrap();
    assert!(spec.angles[0].abs() < 1e-12);
    assert!((spec.angles[1] - t).abs() < 1e-12);
    assert!((grassmann_distance(&qa, &qb).unwrap() - t).abs() < 1e-12);
}

#[test]
fn subspace_basis_recovers_planted_span() {
    let mut r = rng(20);
    let span = random_basis(&mut r, 8, 2);
    // Points in the span plus tiny noise.
    let coeff = gaussian(&mut r, 100, 2) * 10.0;
    let noise = gaussian(&mut r, 100, 8) * 1e-4;
    let x = &coeff * span.transpose() + noise;
    let q = subspace_basis(&x, 2).unwrap();
    assert!(grassmann_distance(&q, &span).unwrap() < 1e-4);
}
