//! Neighborhood retention: for a fixed random anchor set, the Jaccard
//! overlap of each anchor's cosine kNN set between adjacent layers.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::MeasurementConfig;
use crate::error::{Error, Result};
use crate::repr::{cosine_distance_with_norms, LayerSeries, RepresentationSequence, Rows, SeriesKind};

/// Sorted, distinct anchor rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorSet {
    pub indices: Vec<usize>,
    pub seed: u64,
}

/// Samples `min(anchors_max, n)` rows without replacement: the prefix of a
/// seeded shuffle, sorted.
pub fn sample_anchors(n: usize, anchors_max: usize, seed: u64) -> AnchorSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(&mut rng);
    all.truncate(anchors_max.min(n));
    all.sort_unstable();
    AnchorSet { indices: all, seed }
}

/// The `k` nearest rows to `anchor`, anchor excluded, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborSet {
    pub anchor: usize,
    pub neighbors: Vec<usize>,
}

/// Exact cosine kNN over precomputed rows. Ties go to the lower row index.
/// Returns `(index, distance)` in neighbor order.
pub(crate) fn knn_rows(rows: &Rows, norms: &[f64], anchor: usize, k: usize) -> Vec<(usize, f64)> {
    let a = rows.row(anchor);
    let na = norms[anchor];
    let mut cand: Vec<(f64, usize)> = (0..rows.n)
        .filter(|&j| j != anchor)
        .map(|j| (cosine_distance_with_norms(a, rows.row(j), na, norms[j]), j))
        .collect();
    let cmp = |x: &(f64, usize), y: &(f64, usize)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k - 1, cmp);
        cand.truncate(k);
    }
    cand.sort_by(cmp);
    cand.into_iter().map(|(d, j)| (j, d)).collect()
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k >= n {
        Err(Error::KTooLarge { k, n })
    } else {
        Ok(())
    }
}

/// Cosine `k`-nearest neighbors of row `anchor` in `x`.
pub fn knn_set(x: &DMatrix<f64>, anchor: usize, k: usize) -> Result<NeighborSet> {
    check_k(k, x.nrows())?;
    if anchor >= x.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "anchor {anchor} outside {} rows",
            x.nrows()
        )));
    }
    let rows = Rows::from_matrix(x);
    let norms = rows.norms();
    let mut neighbors: Vec<usize> = knn_rows(&rows, &norms, anchor, k)
        .into_iter()
        .map(|(j, _)| j)
        .collect();
    neighbors.sort_unstable();
    Ok(NeighborSet { anchor, neighbors })
}

/// `|A ∩ B| / |A ∪ B|`.
pub fn jaccard(a: &[usize], b: &[usize]) -> Result<f64> {
    let a: BTreeSet<usize> = a.iter().copied().collect();
    let b: BTreeSet<usize> = b.iter().copied().collect();
    if a.is_empty() && b.is_empty() {
        return Err(Error::BothEmpty);
    }
    let inter = a.intersection(&b).count();
    let union = a.len() + b.len() - inter;
    Ok(inter as f64 / union as f64)
}

/// Jaccard of two sorted, duplicate-free lists.
fn jaccard_sorted(a: &[usize], b: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    inter as f64 / (a.len() + b.len() - inter) as f64
}

/// Per-layer sorted neighbor lists for every anchor.
fn layer_neighbors(seq: &RepresentationSequence, l: usize, anchors: &[usize], k: usize) -> Vec<Vec<usize>> {
    let rows = seq.layer_rows(l);
    let norms = rows.norms();
    anchors
        .iter()
        .map(|&i| {
            let mut nb: Vec<usize> = knn_rows(&rows, &norms, i, k).into_iter().map(|(j, _)| j).collect();
            nb.sort_unstable();
            nb
        })
        .collect()
}

/// Retention series `J_0 .. J_{L-1}`; `J_l` compares layers `l` and `l+1`.
pub fn nrs_series(seq: &RepresentationSequence, cfg: &MeasurementConfig) -> Result<LayerSeries> {
    check_k(cfg.k_nrs, seq.n_examples())?;
    let anchors = sample_anchors(seq.n_examples(), cfg.anchors_max, cfg.anchor_seed);
    let neighbors: Vec<Vec<Vec<usize>>> = (0..seq.layer_count())
        .into_par_iter()
        .map(|l| layer_neighbors(seq, l, &anchors.indices, cfg.k_nrs))
        .collect();
    let count = anchors.indices.len() as f64;
    let values = neighbors
        .windows(2)
        .map(|pair| {
            // Fixed anchor order keeps the sum bit-reproducible.
            let total: f64 = pair[0]
                .iter()
                .zip(&pair[1])
                .map(|(a, b)| jaccard_sorted(a, b))
                .sum();
            total / count
        })
        .collect();
    LayerSeries::new(SeriesKind::Nrs, 0, values, seq.depth())
}
