//! Labeled datasets and the leaky-ReLU activation primitive.
//!
//! Features are stored one column per data point (`d × N`), so every
//! downstream construction can use `Xᵀw + b·1` directly.

use std::fmt;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Leaky ReLU: `x` for `x >= 0`, `alpha * x` otherwise.
#[inline]
pub fn leaky_relu(x: f64, alpha: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        alpha * x
    }
}

/// Validated leaky slope. A slope of exactly one makes the activation linear
/// and is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct LeakyRelu {
    alpha: f64,
}

impl LeakyRelu {
    /// The standard ReLU.
    pub const RELU: LeakyRelu = LeakyRelu { alpha: 0.0 };

    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be finite, got {alpha}")));
        }
        if alpha == 1.0 {
            return Err(Error::InvalidConfig(
                "alpha = 1 makes the activation linear and is not supported".into(),
            ));
        }
        Ok(Self { alpha })
    }

    #[inline]
    pub fn alpha(self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        leaky_relu(x, self.alpha)
    }

    /// Slope used by the gradient: the right derivative (1) at exactly zero,
    /// matching `sign(0) = +1`.
    #[inline]
    pub fn slope(self, x: f64) -> f64 {
        if x >= 0.0 {
            1.0
        } else {
            self.alpha
        }
    }
}

impl Default for LeakyRelu {
    fn default() -> Self {
        Self::RELU
    }
}

impl TryFrom<f64> for LeakyRelu {
    type Error = Error;
    fn try_from(alpha: f64) -> Result<Self> {
        LeakyRelu::new(alpha)
    }
}

impl From<LeakyRelu> for f64 {
    fn from(s: LeakyRelu) -> f64 {
        s.alpha
    }
}

impl fmt::Display for LeakyRelu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.alpha)
    }
}

/// `N` labeled points in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    features: DMatrix<f64>,
    labels: DVector<f64>,
}

impl DataSet {
    /// Builds a dataset from a `d × N` feature matrix and `N` labels.
    pub fn new(features: DMatrix<f64>, labels: DVector<f64>) -> Result<Self> {
        let (d, n) = features.shape();
        if d == 0 || n == 0 {
            return Err(Error::InvalidData(format!(
                "need at least one point and one feature (got d={d}, N={n})"
            )));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: labels.len() });
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite feature at point {}, coordinate {}",
                pos / d,
                pos % d
            )));
        }
        if let Some(i) = labels.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite label at point {i}")));
        }
        Ok(Self { features, labels })
    }

    /// Convenience constructor for scalar inputs.
    pub fn from_scalars(xs: &[f64], ys: &[f64]) -> Result<Self> {
        Self::new(
            DMatrix::from_row_slice(1, xs.len(), xs),
            DVector::from_column_slice(ys),
        )
    }

    /// Builds a dataset from a list of points, each of length `d`.
    pub fn from_points(points: &[Vec<f64>], ys: &[f64]) -> Result<Self> {
        let d = points.first().map_or(0, Vec::len);
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: p.len() });
        }
        let flat: Vec<f64> = points.iter().flatten().copied().collect();
        Self::new(
            DMatrix::from_column_slice(d, points.len(), &flat),
            DVector::from_column_slice(ys),
        )
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.features.ncols()
    }

    /// Always false; a valid dataset has at least one point.
    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// The `d × N` feature matrix.
    #[inline]
    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    #[inline]
    pub fn labels(&self) -> &DVector<f64> {
        &self.labels
    }

    /// The `i`-th data point as a column slice.
    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.features.as_slice()[i * d..(i + 1) * d]
    }

    /// Checks that every label is exactly `-1` or `+1`.
    pub fn require_binary_labels(&self) -> Result<()> {
        match self.labels.iter().position(|&y| y != 1.0 && y != -1.0) {
            Some(i) => Err(Error::InvalidData(format!(
                "classification requires labels in {{-1, +1}}; point {i} has label {}",
                self.labels[i]
            ))),
            None => Ok(()),
        }
    }

    /// Returns a copy with labels multiplied by `c`.
    pub fn with_scaled_labels(&self, c: f64) -> Result<Self> {
        Self::new(self.features.clone(), &self.labels * c)
    }

    /// Returns a copy with the labels replaced.
    pub fn with_labels(&self, labels: DVector<f64>) -> Result<Self> {
        Self::new(self.features.clone(), labels)
    }

    /// Reorders the points: point `k` of the result is point `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: perm.len() });
        }
        let features = DMatrix::from_fn(self.dim(), self.len(), |r, c| self.features[(r, perm[c])]);
        let labels = DVector::from_fn(self.len(), |k, _| self.labels[perm[k]]);
        Self::new(features, labels)
    }

    /// Largest Euclidean norm among the data points.
    pub fn max_point_norm(&self) -> f64 {
        self.features.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Pre-activations `Xᵀw + b·1`.
    pub fn affine(&self, w: &[f64], b: f64) -> Result<DVector<f64>> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: w.len() });
        }
        Ok(DVector::from_iterator(
            self.len(),
            self.features.column_iter().map(|x| dot(x.as_slice(), w) + b),
        ))
    }

    /// Hex SHA-256 digest over the shape and the exact bit patterns of features and labels.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.dim() as u64).to_le_bytes());
        h.update((self.len() as u64).to_le_bytes());
        for v in self.features.iter().chain(self.labels.iter()) {
            h.update(v.to_bits().to_le_bytes());
        }
        to_hex(&h.finalize())
    }
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One hidden neuron's outputs on every training input.
#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub alpha: f64,
    pub values: DVector<f64>,
}

/// Evaluates `σ(wᵀxᵢ + b)` at every data point.
pub fn activation_vector(data: &DataSet, w: &[f64], b: f64, act: LeakyRelu) -> Result<Activation> {
    let pre = data.affine(w, b)?;
    Ok(Activation { alpha: act.alpha(), values: pre.map(|z| act.apply(z)) })
}

/// Reads a CSV dataset. Every column other than `label_column` is a feature,
/// in file order.
pub fn load_dataset(path: impl AsRef<Path>, label_column: &str) -> Result<DataSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_dataset(&text, label_column)
}

/// Parses CSV text in the dataset format (header row, feature columns, one label column).
pub fn parse_dataset(text: &str, label_column: &str) -> Result<DataSet> {
    if text.trim().is_empty() {
        return Err(Error::Parse("empty file".into()));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Parse(format!("missing label column `{label_column}`")))?;
    let feature_idx: Vec<usize> = (0..headers.len()).filter(|&i| i != label_idx).collect();
    if feature_idx.is_empty() {
        return Err(Error::Parse("no feature columns".into()));
    }

    let mut flat = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let field = |i: usize| -> Result<f64> {
            let raw = record.get(i).unwrap_or("");
            raw.parse::<f64>().map_err(|_| {
                Error::Parse(format!("row {}: cannot parse `{raw}` in column `{}`", row + 1, &headers[i]))
            })
        };
        for &i in &feature_idx {
            flat.push(field(i)?);
        }
        labels.push(field(label_idx)?);
    }
    if labels.is_empty() {
        return Err(Error::Parse("no data rows".into()));
    }
    DataSet::new(
        DMatrix::from_column_slice(feature_idx.len(), labels.len(), &flat),
        DVector::from_vec(labels),
    )
}

/// The six-point dataset used throughout the experiments.
pub fn six_point_dataset() -> DataSet {
    DataSet::from_scalars(&[-1.0, -0.6, -0.2, 0.2, 0.6, 1.0], &[1.0, -1.0, 1.0, 1.0, -1.0, 1.0])
        .expect("static dataset is valid")
}

/// Four points on the corners of `[-1, 1]²` labeled by the sign of `x1·x2`.
pub fn xor_dataset() -> DataSet {
    DataSet::from_points(
        &[vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]],
        &[1.0, -1.0, -1.0, 1.0],
    )
    .expect("static dataset is valid")
}
