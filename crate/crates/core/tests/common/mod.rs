//! Naive reference implementations used as test oracles. None of these call
//! into the crate's numerical kernels.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, d, |_, _| rng.sample(StandardNormal))
}

/// Orthonormal `d x r` basis of a uniformly random subspace.
pub fn random_basis(rng: &mut ChaCha8Rng, d: usize, r: usize) -> DMatrix<f64> {
    let g = gaussian(rng, d, r);
    g.qr().q().columns(0, r).into_owned()
}

/// Uniformly random `r x r` orthogonal matrix.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, r: usize) -> DMatrix<f64> {
    random_basis(rng, r, r)
}

pub fn naive_cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

pub fn row(x: &DMatrix<f64>, i: usize) -> Vec<f64> {
    x.row(i).iter().copied().collect()
}

/// Full sort of every other row by (distance, index); first `k`, ascending
/// by index.
pub fn brute_knn(x: &DMatrix<f64>, anchor: usize, k: usize) -> Vec<usize> {
    let a = row(x, anchor);
    let mut all: Vec<(f64, usize)> = (0..x.nrows())
        .filter(|&j| j != anchor)
        .map(|j| (naive_cosine_distance(&a, &row(x, j)), j))
        .collect();
    all.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap().then(p.1.cmp(&q.1)));
    let mut out: Vec<usize> = all.into_iter().take(k).map(|(_, j)| j).collect();
    out.sort();
    out
}

/// Symmetrized kNN edges as a map `(i, j) -> distance`, `i < j`.
pub fn brute_edges(x: &DMatrix<f64>, k: usize) -> BTreeMap<(usize, usize), f64> {
    let mut out = BTreeMap::new();
    for i in 0..x.nrows() {
        for j in brute_knn(x, i, k) {
            let key = (i.min(j), i.max(j));
            out.insert(key, naive_cosine_distance(&row(x, key.0), &row(x, key.1)));
        }
    }
    out
}

/// Linear-interpolation percentile, written out directly.
pub fn naive_percentile(values: &[f64], tau: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = tau / 100.0 * (v.len() as f64 - 1.0);
    let i = pos.floor() as usize;
    if i + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[i] + (pos - i as f64) * (v[i + 1] - v[i])
}

/// Component labels by breadth-first search, numbered in order of each
/// component's smallest node.
pub fn bfs_components(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([start]);
        label[start] = next;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if label[v] == usize::MAX {
                    label[v] = next;
                    queue.push_back(v);
                }
            }
        }
        next += 1;
    }
    label
}

/// Mutual information in nats from the full contingency table.
pub fn naive_mi(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let cols: Vec<usize> = (0..kb).map(|j| table.iter().map(|row| row[j]).sum()).collect();
    let mut mi = 0.0;
    for row in &table {
        let ri: usize = row.iter().sum();
        for (&nij, &cj) in row.iter().zip(&cols) {
            if nij > 0 {
                let pij = nij as f64 / n;
                mi += pij * (pij / ((ri as f64 / n) * (cj as f64 / n))).ln();
            }
        }
    }
    mi.max(0.0)
}

pub fn naive_entropy(a: &[usize]) -> f64 {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &x in a {
        *counts.entry(x).or_default() += 1;
    }
    let n = a.len() as f64;
    -counts
        .values()
        .map(|&c| {
            let p = c as f64 / n;
            p * p.ln()
        })
        .sum::<f64>()
}

/// Rank by counting: `1 + #less + (#equal - 1) / 2`.
pub fn naive_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            1.0 + less + (equal - 1.0) / 2.0
        })
        .collect()
}

pub fn naive_spearman(x: &[f64], y: &[f64]) -> f64 {
    let rx = naive_ranks(x);
    let ry = naive_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Two-sided Student-t tail by quadrature. Substituting `x = sqrt(nu) tan u`
/// turns the density kernel into `cos(u)^(nu - 1)`, so
/// `P(|T| < t) = int_0^atan(t / sqrt nu) cos^(nu-1) / int_0^(pi/2) cos^(nu-1)`.
pub fn t_two_sided_by_quadrature(t: f64, nu: f64) -> f64 {
    let kernel = |u: f64| u.cos().powf(nu - 1.0);
    let upper = (t.abs() / nu.sqrt()).atan();
    let inner = simpson(kernel, 0.0, upper, 20_000);
    let total = simpson(kernel, 0.0, std::f64::consts::FRAC_PI_2, 20_000);
    1.0 - inner / total
}

/// Jaccard on sets, from scratch.
pub fn naive_jaccard(a: &[usize], b: &[usize]) -> f64 {
    let a: BTreeSet<_> = a.iter().collect();
    let b: BTreeSet<_> = b.iter().collect();
    a.intersection(&b).count() as f64 / a.union(&b).count() as f64
}

/// Row matrix of layer `l` as f64, straight from the flat f32 buffer.
pub fn layer_from_flat(data: &[f32], l: usize, n: usize, d: usize) -> DMatrix<f64> {
    let off = l * n * d;
    DMatrix::from_fn(n, d, |i, j| f64::from(data[off + i * d + j]))
}
