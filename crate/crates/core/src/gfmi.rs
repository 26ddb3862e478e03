//! Graph-filtration mutual information.
//!
//! Every layer gets a symmetrized cosine kNN candidate graph. Sweeping a
//! percentile `tau` of that layer's own edge-distance distribution keeps the
//! edges at or below the threshold; the connected components of what is
//! left form a partition. `MI_l(tau)` compares layer `l`'s partition with
//! the final layer's partition at the same percentile, and `GFMI(l)` is the
//! trapezoidal area of that curve over the grid.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::MeasurementConfig;
use crate::error::{Error, Result};
use crate::nrs::knn_rows;
use crate::repr::{LayerSeries, RepresentationSequence, Rows, SeriesKind};

/// Undirected candidate edges `(i, j, distance)` with `i < j`, sorted by
/// `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeList {
    pub node_count: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl EdgeList {
    pub fn distances(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.2).collect()
    }
}

fn edges_from_rows(rows: &Rows, k: usize) -> EdgeList {
    let norms = rows.norms();
    let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..rows.n {
        for (j, d) in knn_rows(rows, &norms, i, k) {
            map.insert((i.min(j), i.max(j)), d);
        }
    }
    EdgeList {
        node_count: rows.n,
        edges: map.into_iter().map(|((i, j), d)| (i, j, d)).collect(),
    }
}

/// Union of all directed cosine kNN relations, stored undirected.
pub fn knn_edges(x: &DMatrix<f64>, k: usize) -> Result<EdgeList> {
    if k == 0 || k >= x.nrows() {
        return Err(Error::KTooLarge { k, n: x.nrows() });
    }
    Ok(edges_from_rows(&Rows::from_matrix(x), k))
}

/// Linear-interpolation percentile over sorted values, rank
/// `tau / 100 * (n - 1)`.
pub fn percentile_threshold(distances: &[f64], tau: f64) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::Empty("distance multiset"));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(percentile_sorted(&sorted, tau))
}

fn percentile_sorted(sorted: &[f64], tau: f64) -> f64 {
    let rank = (tau / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (rank - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Block labels over `N` items. Labels are numbered by the smallest member
/// index, so label 0 always contains item 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<usize>,
    block_count: usize,
}

impl Partition {
    /// Canonicalizes arbitrary labels.
    pub fn from_labels<T: Ord + Clone>(raw: &[T]) -> Self {
        let mut seen: BTreeMap<T, usize> = BTreeMap::new();
        let labels = raw
            .iter()
            .map(|v| {
                let next = seen.len();
                *seen.entry(v.clone()).or_insert(next)
            })
            .collect();
        Self {
            labels,
            block_count: seen.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Connected components of the edges with distance `<= threshold`.
pub fn components(edges: &EdgeList, threshold: f64) -> Partition {
    let mut set = DisjointSet::new(edges.node_count);
    for &(i, j, d) in &edges.edges {
        if d <= threshold {
            set.union(i, j);
        }
    }
    let roots: Vec<usize> = (0..edges.node_count).map(|i| set.find(i)).collect();
    Partition::from_labels(&roots)
}

/// Sorted `(label_a, label_b)` joint counts.
fn joint_counts(p: &Partition, q: &Partition) -> Vec<((usize, usize), usize)> {
    let mut pairs: Vec<(usize, usize)> = p.labels.iter().copied().zip(q.labels.iter().copied()).collect();
    pairs.sort_unstable();
    let mut out: Vec<((usize, usize), usize)> = Vec::new();
    for pair in pairs {
        match out.last_mut() {
            Some((last, count)) if *last == pair => *count += 1,
            _ => out.push((pair, 1)),
        }
    }
    out
}

fn block_sizes(p: &Partition) -> Vec<usize> {
    let mut sizes = vec![0; p.block_count];
    for &l in &p.labels {
        sizes[l] += 1;
    }
    sizes
}

/// Discrete mutual information `I(P; Q)` in nats.
pub fn partition_mi(p: &Partition, q: &Partition) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    if p.is_empty() {
        return Ok(0.0);
    }
    let n = p.len() as f64;
    let pa = block_sizes(p);
    let qb = block_sizes(q);
    let mi: f64 = joint_counts(p, q)
        .into_iter()
        .map(|((a, b), nab)| {
            let nab = nab as f64;
            nab / n * (nab * n / (pa[a] as f64 * qb[b] as f64)).ln()
        })
        .sum();
    Ok(mi.max(0.0))
}

/// Shannon entropy of a partition in nats.
pub fn partition_entropy(p: &Partition) -> f64 {
    let n = p.len() as f64;
    block_sizes(p)
        .into_iter()
        .map(|c| {
            let f = c as f64 / n;
            -f * f.ln()
        })
        .sum()
}

/// `MI_l(tau)` sampled on a percentile grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl MiCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: grid.len(),
                right: values.len(),
            });
        }
        if grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("percentile grid must be strictly increasing".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Trapezoidal area under the curve, unnormalized.
pub fn gfmi_auc(curve: &MiCurve) -> Result<f64> {
    if curve.grid.len() < 2 {
        return Err(Error::TooFewPoints(curve.grid.len()));
    }
    Ok(curve
        .grid
        .windows(2)
        .zip(curve.values.windows(2))
        .map(|(t, v)| (t[1] - t[0]) * (v[0] + v[1]) / 2.0)
        .sum())
}

/// Largest value on the grid.
pub fn gfmi_peak(curve: &MiCurve) -> Result<f64> {
    curve
        .values
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or(Error::Empty("MI curve"))
}

/// Partitions of one layer's filtration at each grid percentile.
fn filtration(rows: &Rows, k: usize, grid: &[f64]) -> Vec<Partition> {
    let edges = edges_from_rows(rows, k);
    let mut sorted = edges.distances();
    sorted.sort_by(f64::total_cmp);
    grid.iter()
        .map(|&tau| components(&edges, percentile_sorted(&sorted, tau)))
        .collect()
}

fn curve_against(layer: &[Partition], reference: &[Partition], grid: &[f64]) -> Result<MiCurve> {
    let values = layer
        .iter()
        .zip(reference)
        .map(|(p, q)| partition_mi(p, q))
        .collect::<Result<Vec<_>>>()?;
    MiCurve::new(grid.to_vec(), values)
}

fn check_inputs(n: usize, cfg: &MeasurementConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.k_gfmi >= n {
        return Err(Error::KTooLarge { k: cfg.k_gfmi, n });
    }
    Ok(())
}

/// MI curve of `layer_x` against `final_x` on the configured grid.
pub fn mi_curve(layer_x: &DMatrix<f64>, final_x: &DMatrix<f64>, cfg: &MeasurementConfig) -> Result<MiCurve> {
    if layer_x.nrows() != final_x.nrows() {
        return Err(Error::LengthMismatch {
            left: layer_x.nrows(),
            right: final_x.nrows(),
        });
    }
    check_inputs(layer_x.nrows(), cfg)?;
    let grid = cfg.grid();
    let reference = filtration(&Rows::from_matrix(final_x), cfg.k_gfmi, &grid);
    let layer = filtration(&Rows::from_matrix(layer_x), cfg.k_gfmi, &grid);
    curve_against(&layer, &reference, &grid)
}

/// `GFMI(0) .. GFMI(L)` with the per-layer curves behind them.
#[derive(Debug, Clone)]
pub struct GfmiMeasurement {
    pub series: LayerSeries,
    pub curves: Vec<MiCurve>,
}

pub fn gfmi_series(seq: &RepresentationSequence, cfg: &MeasurementConfig) -> Result<GfmiMeasurement> {
    check_inputs(seq.n_examples(), cfg)?;
    let grid = cfg.grid();
    let partitions: Vec<Vec<Partition>> = (0..seq.layer_count())
        .into_par_iter()
        .map(|l| filtration(&seq.layer_rows(l), cfg.k_gfmi, &grid))
        .collect();
    let reference = &partitions[seq.depth()];
    let curves = partitions
        .iter()
        .map(|layer| curve_against(layer, reference, &grid))
        .collect::<Result<Vec<_>>>()?;
    let values = curves.iter().map(gfmi_auc).collect::<Result<Vec<_>>>()?;
    Ok(GfmiMeasurement {
        series: LayerSeries::new(SeriesKind::Gfmi, 0, values, seq.depth())?,
        curves,
    })
}
