//! Representation stacks, layer-indexed series and the primitives every
//! measurement family builds on.

mod distance;
pub mod io;
pub mod synth;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use distance::{center_columns, cosine_distance};
pub(crate) use distance::{cosine_distance_with_norms, norm};

/// The per-layer representation matrices `X_0 .. X_L` of one model on one
/// task. Every layer has `n_examples` rows and `dim` columns; row `i` is the
/// pooled state of example `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RepresentationSequence {
    layer_count: usize,
    n_examples: usize,
    dim: usize,
    /// Layer-major, row-major.
    data: Vec<f32>,
    source_id: String,
}

impl RepresentationSequence {
    /// Builds a sequence from a flat layer-major, row-major buffer.
    pub fn new(
        layer_count: usize,
        n_examples: usize,
        dim: usize,
        data: Vec<f32>,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if layer_count < 2 {
            return Err(Error::InvalidSequence(format!(
                "need at least 2 layers, found {layer_count}"
            )));
        }
        if n_examples < 2 {
            return Err(Error::InvalidSequence(format!(
                "need at least 2 examples, found {n_examples}"
            )));
        }
        if dim < 1 {
            return Err(Error::InvalidSequence("dimension must be >= 1".into()));
        }
        let expected = layer_count * n_examples * dim;
        if data.len() != expected {
            return Err(Error::Truncated {
                expected,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let per_layer = n_examples * dim;
            return Err(Error::NonFinite {
                layer: pos / per_layer,
                row: (pos % per_layer) / dim,
                col: pos % dim,
            });
        }
        Ok(Self {
            layer_count,
            n_examples,
            dim,
            data,
            source_id: source_id.into(),
        })
    }

    /// Builds a sequence from per-layer row-major `N x d` buffers.
    pub fn from_layers(
        layers: Vec<Vec<f32>>,
        n_examples: usize,
        dim: usize,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidSequence("empty layer list".into()));
        }
        let per_layer = n_examples * dim;
        for (l, layer) in layers.iter().enumerate() {
            if layer.len() != per_layer {
                return Err(Error::DimMismatch(format!(
                    "layer {l} has {} values, expected {n_examples} x {dim}",
                    layer.len()
                )));
            }
        }
        let layer_count = layers.len();
        Self::new(
            layer_count,
            n_examples,
            dim,
            layers.concat(),
            source_id,
        )
    }

    /// Number of stored layers, `L + 1`.
    pub fn layer_count(&self) -> usize {
        self.layer_count
    }

    /// Index of the final layer, `L`.
    pub fn depth(&self) -> usize {
        self.layer_count - 1
    }

    pub fn n_examples(&self) -> usize {
        self.n_examples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn set_source_id(&mut self, id: impl Into<String>) {
        self.source_id = id.into();
    }

    /// Raw flat payload, layer-major and row-major.
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Row-major view of layer `l`.
    pub fn layer(&self, l: usize) -> &[f32] {
        let per_layer = self.n_examples * self.dim;
        &self.data[l * per_layer..(l + 1) * per_layer]
    }

    /// Layer `l` as a dense `N x d` matrix in double precision.
    pub fn layer_matrix(&self, l: usize) -> DMatrix<f64> {
        DMatrix::from_row_iterator(
            self.n_examples,
            self.dim,
            self.layer(l).iter().map(|&v| f64::from(v)),
        )
    }

    pub(crate) fn layer_rows(&self, l: usize) -> Rows {
        Rows {
            data: self.layer(l).iter().map(|&v| f64::from(v)).collect(),
            n: self.n_examples,
            d: self.dim,
        }
    }
}

/// Row-major dense matrix used by the neighbor searches, where contiguous
/// rows matter.
#[derive(Debug, Clone)]
pub(crate) struct Rows {
    data: Vec<f64>,
    pub(crate) n: usize,
    pub(crate) d: usize,
}

impl Rows {
    pub(crate) fn from_matrix(x: &DMatrix<f64>) -> Self {
        let (n, d) = x.shape();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            data.extend(x.row(i).iter().copied());
        }
        Self { data, n, d }
    }

    pub(crate) fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub(crate) fn norms(&self) -> Vec<f64> {
        (0..self.n).map(|i| norm(self.row(i))).collect()
    }
}

/// Which family a [`LayerSeries`] belongs to. Fixes its valid index window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Speed,
    Curvature,
    Nrs,
    Gfmi,
    Custom,
}

impl SeriesKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SeriesKind::Speed => "speed",
            SeriesKind::Curvature => "curvature",
            SeriesKind::Nrs => "nrs",
            SeriesKind::Gfmi => "gfmi",
            SeriesKind::Custom => "custom",
        }
    }

    /// `(first_index, length)` of the valid window for a depth-`L` model.
    /// `None` for [`SeriesKind::Custom`].
    pub fn window(self, depth: usize) -> Option<(usize, usize)> {
        match self {
            SeriesKind::Speed | SeriesKind::Nrs => Some((0, depth)),
            SeriesKind::Curvature => Some((1, depth.saturating_sub(1))),
            SeriesKind::Gfmi => Some((0, depth + 1)),
            SeriesKind::Custom => None,
        }
    }
}

impl std::str::FromStr for SeriesKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "speed" => Ok(SeriesKind::Speed),
            "curvature" => Ok(SeriesKind::Curvature),
            "nrs" => Ok(SeriesKind::Nrs),
            "gfmi" => Ok(SeriesKind::Gfmi),
            "custom" => Ok(SeriesKind::Custom),
            other => Err(Error::IncompatibleSeries(format!("unknown kind {other:?}"))),
        }
    }
}

/// A per-layer scalar sequence with an explicit validity window:
/// `values[j]` belongs to layer `first_index + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSeries {
    values: Vec<f64>,
    first_index: usize,
    kind: SeriesKind,
}

impl LayerSeries {
    /// Builds a series and checks that it fits inside layers `0..=depth`.
    pub fn new(kind: SeriesKind, first_index: usize, values: Vec<f64>, depth: usize) -> Result<Self> {
        if let Some((first, len)) = kind.window(depth) {
            if first != first_index || len != values.len() {
                return Err(Error::IncompatibleSeries(format!(
                    "{} series for L = {depth} must start at {first} with length {len}, \
                     got start {first_index} length {}",
                    kind.as_str(),
                    values.len()
                )));
            }
        } else if !values.is_empty() && first_index + values.len() - 1 > depth {
            return Err(Error::IncompatibleSeries(format!(
                "series ends at layer {} beyond L = {depth}",
                first_index + values.len() - 1
            )));
        }
        Ok(Self {
            values,
            first_index,
            kind,
        })
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn first_index(&self) -> usize {
        self.first_index
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at absolute layer index `l`, if inside the window.
    pub fn get(&self, l: usize) -> Option<f64> {
        l.checked_sub(self.first_index)
            .and_then(|j| self.values.get(j).copied())
    }

    /// `(layer_index, value)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(j, &v)| (self.first_index + j, v))
    }

    /// Same window, new values.
    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            values,
            first_index: self.first_index,
            kind: self.kind,
        }
    }

    /// Arithmetic mean over the valid window; `None` when empty.
    pub fn mean(&self) -> Option<f64> {
        if self.values.is_empty() {
            None
        } else {
            Some(self.values.iter().sum::<f64>() / self.values.len() as f64)
        }
    }
}
