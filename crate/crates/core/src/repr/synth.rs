//! Seeded synthetic layer stacks with known ground truth.

use nalgebra::{DMatrix, DVector, SVD};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{center_columns, RepresentationSequence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthMode {
    /// One random layer repeated `L + 1` times.
    Identity,
    /// Consecutive layers differ by a planar rotation in the span of the
    /// top two principal directions.
    Rotation,
    /// Rows permuted independently per layer.
    Shuffle,
}

impl std::str::FromStr for SynthMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(SynthMode::Identity),
            "rotation" => Ok(SynthMode::Rotation),
            "shuffle" => Ok(SynthMode::Shuffle),
            other => Err(Error::InvalidSpec(format!("unknown synth mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub mode: SynthMode,
    /// Depth `L`; the sequence has `L + 1` layers.
    pub depth: usize,
    pub n: usize,
    pub d: usize,
    /// Per-step rotation angle in radians (rotation mode only).
    pub angle: f64,
    pub seed: u64,
}

/// What a generator planted, for test harnesses and CLI sidecars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub spec: SynthSpec,
    pub rng: String,
    /// Expected principal angle between consecutive dominant directions
    /// (rotation mode), 0 for identity.
    pub step_angle: Option<f64>,
    /// Expected principal angle between layer 0 and layer L.
    pub end_to_end_angle: Option<f64>,
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize, d: usize, col_scale: impl Fn(usize) -> f64) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            x[(i, j)] = z * col_scale(j);
        }
    }
    x
}

fn to_f32(x: &DMatrix<f64>) -> Vec<f32> {
    let (n, d) = x.shape();
    let mut out = Vec::with_capacity(n * d);
    for i in 0..n {
        out.extend(x.row(i).iter().map(|&v| v as f32));
    }
    out
}

/// Principal angle between two lines separated by a rotation of `angle`.
fn line_angle(angle: f64) -> f64 {
    let a = angle.rem_euclid(std::f64::consts::PI);
    a.min(std::f64::consts::PI - a)
}

/// Generates a sequence according to `spec`.
pub fn synth_sequence(spec: &SynthSpec) -> Result<(RepresentationSequence, SynthTruth)> {
    if spec.depth < 1 {
        return Err(Error::InvalidSpec("depth L must be >= 1".into()));
    }
    if spec.n < 2 || spec.d < 1 {
        return Err(Error::InvalidSpec("need n >= 2 and d >= 1".into()));
    }
    if spec.mode == SynthMode::Rotation && spec.d < 2 {
        return Err(Error::InvalidSpec("rotation mode needs d >= 2".into()));
    }
    if !spec.angle.is_finite() {
        return Err(Error::InvalidSpec("angle must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, d) = (spec.n, spec.d);
    let layers: Vec<Vec<f32>> = match spec.mode {
        SynthMode::Identity => {
            let x = to_f32(&gaussian(&mut rng, n, d, |_| 1.0));
            vec![x; spec.depth + 1]
        }
        SynthMode::Shuffle => {
            let base = to_f32(&gaussian(&mut rng, n, d, |_| 1.0));
            let mut order: Vec<usize> = (0..n).collect();
            (0..=spec.depth)
                .map(|_| {
                    order.shuffle(&mut rng);
                    order
                        .iter()
                        .flat_map(|&i| base[i * d..(i + 1) * d].iter().copied())
                        .collect()
                })
                .collect()
        }
        SynthMode::Rotation => {
            // One dominant direction (variance 100 vs 1 vs 0.01), so the
            // 95% rule picks r = 1 for moderate d.
            let base = center_columns(&gaussian(&mut rng, n, d, |j| match j {
                0 => 10.0,
                1 => 1.0,
                _ => 0.1,
            }));
            let svd = SVD::new(base.clone(), false, true);
            let v_t = svd.v_t.expect("requested V^T");
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
            let p1: DVector<f64> = v_t.row(order[0]).transpose();
            let p2: DVector<f64> = v_t.row(order[1]).transpose();
            let a = &base * &p1;
            let b = &base * &p2;
            (0..=spec.depth)
                .map(|l| {
                    let theta = spec.angle * l as f64;
                    let (s, c) = theta.sin_cos();
                    // x -> x + (c - 1)(a p1 + b p2) + s(a p2 - b p1), with
                    // a = <x, p1>, b = <x, p2>.
                    let mut out = base.clone();
                    for i in 0..n {
                        for j in 0..d {
                            out[(i, j)] += (c - 1.0) * (a[i] * p1[j] + b[i] * p2[j])
                                + s * (a[i] * p2[j] - b[i] * p1[j]);
                        }
                    }
                    to_f32(&out)
                })
                .collect()
        }
    };
    let seq = RepresentationSequence::from_layers(layers, n, d, format!("synth-{:?}", spec.mode).to_lowercase())?;
    let (step_angle, end_to_end_angle) = match spec.mode {
        SynthMode::Identity => (Some(0.0), Some(0.0)),
        SynthMode::Rotation => (
            Some(line_angle(spec.angle)),
            Some(line_angle(spec.angle * spec.depth as f64)),
        ),
        SynthMode::Shuffle => (None, None),
    };
    let truth = SynthTruth {
        spec: spec.clone(),
        rng: crate::config::RNG_NAME.to_string(),
        step_angle,
        end_to_end_angle,
    };
    Ok((seq, truth))
}
