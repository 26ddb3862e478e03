//! Global subspace motion.
//!
//! Each layer is reduced to the span of its top-`r` right singular vectors
//! (after column centering), with `r` fixed once from the final layer. The
//! layer stack then becomes a path on the Grassmann manifold `Gr(d, r)`:
//! adjacent geodesic distances give the speed series `s_l = d(Q_l, Q_{l+1})`
//! for `l = 0..L-1`, and the Menger curvature of each consecutive triple is
//! assigned to its middle layer, `l = 1..L-1`.

use nalgebra::{DMatrix, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::MeasurementConfig;
use crate::error::{Error, Result};
use crate::repr::{center_columns, LayerSeries, RepresentationSequence, SeriesKind};

/// Grassmann sides at or below this length are treated as a repeated
/// subspace and the triple gets zero curvature.
pub const DEGENERATE_SIDE: f64 = 1e-10;

/// Singular values in decreasing order, with the matching row indices of `V^T`.
fn sorted_svd(x: DMatrix<f64>, want_v: bool) -> (Vec<f64>, Option<DMatrix<f64>>) {
    let svd = SVD::new(x, false, want_v);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v_t = svd.v_t.map(|v_t| v_t.select_rows(order.iter()));
    (values, v_t)
}

/// Smallest rank whose leading singular values hold at least `threshold` of
/// the centered matrix's total squared spectrum. Never below 1.
pub fn select_rank(final_layer: &DMatrix<f64>, threshold: f64) -> usize {
    let (sigma, _) = sorted_svd(center_columns(final_layer), false);
    let energy: Vec<f64> = sigma.iter().map(|s| s * s).collect();
    let total: f64 = energy.iter().sum();
    if total <= 0.0 {
        return 1;
    }
    let mut cumulative = 0.0;
    for (i, e) in energy.iter().enumerate() {
        cumulative += e;
        if cumulative / total >= threshold {
            return i + 1;
        }
    }
    energy.len().max(1)
}

/// Orthonormal `d x r` basis of the top-`r` right singular vectors of the
/// column-centered `x`.
pub fn subspace_basis(x: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let max = x.nrows().min(x.ncols());
    if r == 0 || r > max {
        return Err(Error::RankTooLarge { rank: r, max });
    }
    let (_, v_t) = sorted_svd(center_columns(x), true);
    let v_t = v_t.expect("requested V^T");
    Ok(v_t.rows(0, r).transpose())
}

/// One orthonormal basis per layer, all of the same rank.
#[derive(Debug, Clone)]
pub struct SubspaceSet {
    rank: usize,
    bases: Vec<DMatrix<f64>>,
}

impl SubspaceSet {
    /// Picks `r` from the final layer and builds every layer's basis.
    pub fn from_sequence(seq: &RepresentationSequence, cfg: &MeasurementConfig) -> Result<Self> {
        let rank = select_rank(&seq.layer_matrix(seq.depth()), cfg.variance_threshold);
        let bases = (0..seq.layer_count())
            .into_par_iter()
            .map(|l| subspace_basis(&seq.layer_matrix(l), rank))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rank, bases })
    }

    pub fn from_bases(bases: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = bases
            .first()
            .ok_or(Error::Empty("subspace bases"))?;
        let shape = first.shape();
        if let Some(bad) = bases.iter().find(|b| b.shape() != shape) {
            return Err(Error::ShapeMismatch(format!(
                "basis {:?} differs from {:?}",
                bad.shape(),
                shape
            )));
        }
        Ok(Self {
            rank: shape.1,
            bases,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn bases(&self) -> &[DMatrix<f64>] {
        &self.bases
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        grassmann_distance(&self.bases[a], &self.bases[b]).expect("bases share one shape")
    }
}

/// Principal angles between two equal-rank subspaces, nondecreasing, each in
/// `[0, pi/2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrincipalAngleSpectrum {
    pub angles: Vec<f64>,
}

/// Principal angles between `span(qa)` and `span(qb)`.
///
/// The cosines are the singular values of `qa^T qb`, clamped into `[0, 1]`.
/// For angles below pi/4 the arccosine is ill conditioned, so those angles
/// come from the sines instead: the singular values of `qb - qa (qa^T qb)`.
pub fn principal_angles(qa: &DMatrix<f64>, qb: &DMatrix<f64>) -> Result<PrincipalAngleSpectrum> {
    if qa.shape() != qb.shape() {
        return Err(Error::ShapeMismatch(format!(
            "bases {:?} and {:?}",
            qa.shape(),
            qb.shape()
        )));
    }
    // Identical bases span the same subspace; skip the rounding noise of the
    // residual so repeated layers measure exactly zero.
    if qa == qb {
        return Ok(PrincipalAngleSpectrum {
            angles: vec![0.0; qa.ncols()],
        });
    }
    let cross = qa.transpose() * qb;
    let residual = qb - qa * &cross;
    let (cosines, _) = sorted_svd(cross, false);
    let (mut sines, _) = sorted_svd(residual, false);
    sines.reverse();
    let sines_len = sines.len();
    let mut angles: Vec<f64> = cosines
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let c = c.clamp(0.0, 1.0);
            if c * c > 0.5 && i < sines_len {
                sines[i].clamp(0.0, 1.0).asin()
            } else {
                c.acos()
            }
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    Ok(PrincipalAngleSpectrum { angles })
}

/// Geodesic distance `sqrt(sum theta_i^2)` on the Grassmann manifold.
pub fn grassmann_distance(qa: &DMatrix<f64>, qb: &DMatrix<f64>) -> Result<f64> {
    let spectrum = principal_angles(qa, qb)?;
    Ok(spectrum.angles.iter().map(|t| t * t).sum::<f64>().sqrt())
}

/// Triangle with Grassmann-distance sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangleGeometry {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Semi-perimeter.
    pub p: f64,
    /// Heron area; 0 when the radicand is not positive.
    pub area: f64,
}

impl TriangleGeometry {
    pub fn from_sides(a: f64, b: f64, c: f64) -> Self {
        let p = (a + b + c) / 2.0;
        // Heron's radicand 16 p(p-a)(p-b)(p-c), rearranged over the sorted
        // sides so near-collinear triples do not cancel catastrophically.
        let mut s = [a, b, c];
        s.sort_by(|x, y| y.total_cmp(x));
        let [x, y, z] = s;
        let radicand = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z));
        let area = if radicand > 0.0 {
            radicand.sqrt() / 4.0
        } else {
            0.0
        };
        Self { a, b, c, p, area }
    }

    /// Menger curvature `4A / (abc)`, zero for degenerate triples.
    pub fn curvature(&self) -> f64 {
        if self.a <= DEGENERATE_SIDE || self.b <= DEGENERATE_SIDE || self.c <= DEGENERATE_SIDE {
            return 0.0;
        }
        if self.area <= 0.0 {
            return 0.0;
        }
        4.0 * self.area / (self.a * self.b * self.c)
    }
}

/// Menger curvature of a triangle given by its sides.
pub fn curvature_from_sides(a: f64, b: f64, c: f64) -> f64 {
    TriangleGeometry::from_sides(a, b, c).curvature()
}

/// All Frenet-family outputs for one sequence, sharing one SVD pass.
#[derive(Debug, Clone)]
pub struct FrenetMeasurement {
    pub rank: usize,
    pub speed: LayerSeries,
    /// `None` when `L < 2`.
    pub curvature: Option<LayerSeries>,
    pub end_to_end: f64,
}

impl FrenetMeasurement {
    pub fn from_subspaces(subspaces: &SubspaceSet) -> Result<Self> {
        let depth = subspaces.bases().len() - 1;
        let speed = speeds_of(subspaces)?;
        let curvature = if depth >= 2 {
            Some(curvatures_of(subspaces, &speed)?)
        } else {
            None
        };
        Ok(Self {
            rank: subspaces.rank(),
            speed,
            curvature,
            end_to_end: subspaces.distance(0, depth),
        })
    }

    pub fn measure(seq: &RepresentationSequence, cfg: &MeasurementConfig) -> Result<Self> {
        Self::from_subspaces(&SubspaceSet::from_sequence(seq, cfg)?)
    }
}

fn speeds_of(subspaces: &SubspaceSet) -> Result<LayerSeries> {
    let depth = subspaces.bases().len() - 1;
    let values = (0..depth)
        .into_par_iter()
        .map(|l| subspaces.distance(l, l + 1))
        .collect();
    LayerSeries::new(SeriesKind::Speed, 0, values, depth)
}

fn curvatures_of(subspaces: &SubspaceSet, speed: &LayerSeries) -> Result<LayerSeries> {
    let depth = subspaces.bases().len() - 1;
    let s = speed.values();
    let values = (1..depth)
        .into_par_iter()
        .map(|l| curvature_from_sides(s[l - 1], s[l], subspaces.distance(l - 1, l + 1)))
        .collect();
    LayerSeries::new(SeriesKind::Curvature, 1, values, depth)
}

/// Adjacent-layer Grassmann speeds `s_0 .. s_{L-1}`.
pub fn speed_series(seq: &RepresentationSequence, cfg: &MeasurementConfig) -> Result<LayerSeries> {
    speeds_of(&SubspaceSet::from_sequence(seq, cfg)?)
}

/// Menger curvatures `kappa_1 .. kappa_{L-1}`, each from the triple
/// `(l-1, l, l+1)`.
pub fn curvature_series(seq: &RepresentationSequence, cfg: &MeasurementConfig) -> Result<LayerSeries> {
    if seq.depth() < 2 {
        return Err(Error::TooShallow(format!(
            "curvature needs L >= 2, got L = {}",
            seq.depth()
        )));
    }
    let subspaces = SubspaceSet::from_sequence(seq, cfg)?;
    let speed = speeds_of(&subspaces)?;
    curvatures_of(&subspaces, &speed)
}

/// End-to-end displacement `d(Q_0, Q_L)`.
pub fn end_to_end(seq: &RepresentationSequence, cfg: &MeasurementConfig) -> Result<f64> {
    let r = select_rank(&seq.layer_matrix(seq.depth()), cfg.variance_threshold);
    let q0 = subspace_basis(&seq.layer_matrix(0), r)?;
    let ql = subspace_basis(&seq.layer_matrix(seq.depth()), r)?;
    grassmann_distance(&q0, &ql)
}
