//! The finite convex programs, all in one canonical group-norm form:
//!
//! ```text
//! minimize   Σ_g ‖x_g‖₂
//! subject to A_eq x = b_eq,   A_in x ≥ b_in
//! ```
//!
//! Each sign pattern `sᵢ` owns `2(d+1)` variables laid out as
//! `[wᵢ⁺ (d), bᵢ⁺, wᵢ⁻ (d), bᵢ⁻]`. Both blocks are confined to the cone of
//! their pattern, `sᵢ ⊙ (Xᵀw + b·1) ≥ 0`, where the leaky ReLU acts as the
//! linear map `h(sᵢ) ⊙ (·)`; the minus block enters the data fit negated.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{DataSet, LeakyRelu};
use crate::error::{Error, Result};
use crate::patterns::PatternSet;

/// Which program a [`ConicProgram`] encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulationKind {
    /// Interpolation with `‖w‖₂ ≤ 1` atoms; biases unpenalized.
    WeightsInterp,
    /// Interpolation with `‖(w, b)‖₂ ≤ 1` atoms.
    JointInterp,
    /// Binary classification with margin `yᵢf(xᵢ) ≥ 1`; biases unpenalized.
    MarginClassify,
}

impl FormulationKind {
    pub fn is_interpolation(self) -> bool {
        !matches!(self, FormulationKind::MarginClassify)
    }

    /// Whether the bias belongs to the penalized group.
    pub fn penalizes_bias(self) -> bool {
        matches!(self, FormulationKind::JointInterp)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FormulationKind::WeightsInterp => "weights-interp",
            FormulationKind::JointInterp => "joint-interp",
            FormulationKind::MarginClassify => "margin-classify",
        }
    }
}

impl fmt::Display for FormulationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormulationKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weights" | "weights-interp" => Ok(FormulationKind::WeightsInterp),
            "joint" | "joint-interp" => Ok(FormulationKind::JointInterp),
            "margin" | "margin-classify" => Ok(FormulationKind::MarginClassify),
            other => Err(Error::InvalidConfig(format!(
                "unknown formulation `{other}` (expected weights, joint or margin)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Plus,
    Minus,
}

/// A penalized block: the Euclidean norm of `x[start..start + len]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub pattern: usize,
    pub side: Side,
    pub start: usize,
    pub len: usize,
}

/// Per-point slopes of the leaky ReLU on a pattern: `1` where `s = +1`, `α` where `s = -1`.
#[derive(Debug, Clone, PartialEq)]
pub struct HVector(pub DVector<f64>);

pub fn h_of_s(signs: &[i8], act: LeakyRelu) -> HVector {
    HVector(DVector::from_iterator(
        signs.len(),
        signs.iter().map(|&s| if s == 1 { 1.0 } else { act.alpha() }),
    ))
}

/// Offsets of one pattern's variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub w_plus: usize,
    pub b_plus: usize,
    pub w_minus: usize,
    pub b_minus: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub kind: FormulationKind,
    pub alpha: LeakyRelu,
    pub dim: usize,
    pub n_points: usize,
    pub n_patterns: usize,
    pub groups: Vec<Group>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub in_matrix: DMatrix<f64>,
    pub in_rhs: DVector<f64>,
    /// Maps variables to the network output at every data point.
    pub fit_matrix: DMatrix<f64>,
    /// Labels the program was built for.
    pub labels: DVector<f64>,
    pub data_hash: String,
}

impl ConicProgram {
    pub fn n_vars(&self) -> usize {
        2 * (self.dim + 1) * self.n_patterns
    }

    pub fn block(&self, pattern: usize) -> BlockLayout {
        layout(self.dim, pattern)
    }

    /// Number of sign-cone rows at the top of the inequality system.
    pub fn cone_row_count(&self) -> usize {
        2 * self.n_points * self.n_patterns
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.groups.iter().map(|g| x.rows(g.start, g.len).norm()).sum()
    }

    /// Largest absolute equality violation.
    pub fn eq_violation(&self, x: &DVector<f64>) -> f64 {
        if self.eq_matrix.nrows() == 0 {
            return 0.0;
        }
        (&self.eq_matrix * x - &self.eq_rhs).amax()
    }

    /// Smallest inequality slack `A_in x - b_in` (positive when strictly satisfied).
    pub fn min_slack(&self, x: &DVector<f64>) -> f64 {
        if self.in_matrix.nrows() == 0 {
            return f64::INFINITY;
        }
        (&self.in_matrix * x - &self.in_rhs).min()
    }

    /// Network outputs implied by `x` at the data points.
    pub fn fit_values(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.fit_matrix * x
    }

    /// Dense JSON-friendly dump for cross-checking against external solvers.
    pub fn dump(&self) -> Result<ProgramDump> {
        if self.n_points * self.n_patterns > 10_000 {
            return Err(Error::ResourceLimit(format!(
                "program dump limited to N·|J| ≤ 10⁴ (got {})",
                self.n_points * self.n_patterns
            )));
        }
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            m.row_iter().map(|r| r.iter().copied().collect()).collect()
        };
        Ok(ProgramDump {
            kind: self.kind,
            alpha: self.alpha.alpha(),
            n_vars: self.n_vars(),
            groups: self.groups.clone(),
            eq_matrix: rows(&self.eq_matrix),
            eq_rhs: self.eq_rhs.iter().copied().collect(),
            in_matrix: rows(&self.in_matrix),
            in_rhs: self.in_rhs.iter().copied().collect(),
            data_hash: self.data_hash.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramDump {
    pub kind: FormulationKind,
    pub alpha: f64,
    pub n_vars: usize,
    pub groups: Vec<Group>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub in_matrix: Vec<Vec<f64>>,
    pub in_rhs: Vec<f64>,
    pub data_hash: String,
}

fn layout(d: usize, pattern: usize) -> BlockLayout {
    let base = 2 * (d + 1) * pattern;
    BlockLayout { w_plus: base, b_plus: base + d, w_minus: base + d + 1, b_minus: base + 2 * d + 1 }
}

fn build(
    kind: FormulationKind,
    data: &DataSet,
    patterns: &PatternSet,
    act: LeakyRelu,
) -> Result<ConicProgram> {
    if patterns.is_empty() {
        return Err(Error::EmptyPatterns);
    }
    patterns.ensure_matches(data)?;
    if kind == FormulationKind::MarginClassify {
        data.require_binary_labels()?;
    }

    let d = data.dim();
    let n = data.len();
    let k = patterns.len();
    let n_vars = 2 * (d + 1) * k;
    let x = data.features();

    let mut fit = DMatrix::zeros(n, n_vars);
    let mut cones = DMatrix::zeros(2 * n * k, n_vars);
    let mut groups = Vec::with_capacity(2 * k);
    let group_len = if kind.penalizes_bias() { d + 1 } else { d };

    for (i, p) in patterns.iter().enumerate() {
        let blk = layout(d, i);
        let h = h_of_s(&p.signs, act).0;
        for pt in 0..n {
            let s = f64::from(p.signs[pt]);
            for j in 0..d {
                fit[(pt, blk.w_plus + j)] = h[pt] * x[(j, pt)];
                fit[(pt, blk.w_minus + j)] = -h[pt] * x[(j, pt)];
                cones[(2 * n * i + pt, blk.w_plus + j)] = s * x[(j, pt)];
                cones[(2 * n * i + n + pt, blk.w_minus + j)] = s * x[(j, pt)];
            }
            fit[(pt, blk.b_plus)] = h[pt];
            fit[(pt, blk.b_minus)] = -h[pt];
            cones[(2 * n * i + pt, blk.b_plus)] = s;
            cones[(2 * n * i + n + pt, blk.b_minus)] = s;
        }
        groups.push(Group { pattern: i, side: Side::Plus, start: blk.w_plus, len: group_len });
        groups.push(Group { pattern: i, side: Side::Minus, start: blk.w_minus, len: group_len });
    }

    let y = data.labels().clone();
    let (eq_matrix, eq_rhs, in_matrix, in_rhs) = match kind {
        FormulationKind::WeightsInterp | FormulationKind::JointInterp => {
            let rows = cones.nrows();
            (fit.clone(), y.clone(), cones, DVector::zeros(rows))
        }
        FormulationKind::MarginClassify => {
            // Label-weighted patterns s̃ = y ⊙ s give rows s̃ ⊙ (y ⊙ pre) = s ⊙ pre,
            // and the slope of y·σ(pre) is h(s) with s the pre-activation pattern.
            let mut margins = fit.clone();
            for pt in 0..n {
                margins.row_mut(pt).scale_mut(y[pt]);
            }
            let rows = cones.nrows();
            let mut in_matrix = cones.resize_vertically(rows + n, 0.0);
            in_matrix.rows_mut(rows, n).copy_from(&margins);
            let mut in_rhs = DVector::zeros(rows + n);
            in_rhs.rows_mut(rows, n).fill(1.0);
            (DMatrix::zeros(0, n_vars), DVector::zeros(0), in_matrix, in_rhs)
        }
    };

    Ok(ConicProgram {
        kind,
        alpha: act,
        dim: d,
        n_points: n,
        n_patterns: k,
        groups,
        eq_matrix,
        eq_rhs,
        in_matrix,
        in_rhs,
        fit_matrix: fit,
        labels: y,
        data_hash: patterns.data_hash.clone(),
    })
}

/// Bounded-weights interpolation: `min Σ(‖wᵢ⁺‖ + ‖wᵢ⁻‖)` subject to exact fit and the pattern cones.
pub fn build_weights_interp(data: &DataSet, patterns: &PatternSet, act: LeakyRelu) -> Result<ConicProgram> {
    build(FormulationKind::WeightsInterp, data, patterns, act)
}

/// Jointly bounded weights and biases: groups cover `(wᵢ, bᵢ)`.
pub fn build_joint_interp(data: &DataSet, patterns: &PatternSet, act: LeakyRelu) -> Result<ConicProgram> {
    build(FormulationKind::JointInterp, data, patterns, act)
}

/// Binary classification: margins `yₖ f(xₖ) ≥ 1` replace the interpolation equalities.
pub fn build_margin_classify(data: &DataSet, patterns: &PatternSet, act: LeakyRelu) -> Result<ConicProgram> {
    build(FormulationKind::MarginClassify, data, patterns, act)
}

pub fn build_program(
    kind: FormulationKind,
    data: &DataSet,
    patterns: &PatternSet,
    act: LeakyRelu,
) -> Result<ConicProgram> {
    build(kind, data, patterns, act)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::six_point_dataset;
    use crate::patterns::{enumerate_patterns, EnumerationConfig};

    fn six_points() -> (DataSet, PatternSet) {
        let data = six_point_dataset();
        let pats = enumerate_patterns(&data, &EnumerationConfig::default()).unwrap();
        (data, pats)
    }

    #[test]
    fn h_examples() {
        let alpha0 = LeakyRelu::RELU;
        assert_eq!(h_of_s(&[1, -1], alpha0).0.as_slice(), &[1.0, 0.0]);
        let a = LeakyRelu::new(0.3).unwrap();
        assert_eq!(h_of_s(&[1, 1, 1], a).0.as_slice(), &[1.0, 1.0, 1.0]);
        let a = LeakyRelu::new(0.1).unwrap();
        assert_eq!(h_of_s(&[-1, -1], a).0.as_slice(), &[0.1, 0.1]);
    }

    #[test]
    fn weights_counts() {
        let (data, pats) = six_points();
        let p = build_weights_interp(&data, &pats, LeakyRelu::RELU).unwrap();
        assert_eq!(p.n_vars(), 48);
        assert_eq!(p.eq_matrix.shape(), (6, 48));
        assert_eq!(p.in_matrix.shape(), (144, 48));
        assert_eq!(p.groups.len(), 24);
        assert!(p.groups.iter().all(|g| g.len == 1));
    }

    #[test]
    fn joint_counts_and_rows() {
        let (data, pats) = six_points();
        let w = build_weights_interp(&data, &pats, LeakyRelu::RELU).unwrap();
        let j = build_joint_interp(&data, &pats, LeakyRelu::RELU).unwrap();
        assert_eq!(j.groups.len(), 24);
        assert!(j.groups.iter().all(|g| g.len == 2));
        assert_eq!(w.eq_matrix, j.eq_matrix);
        assert_eq!(w.in_matrix, j.in_matrix);
    }

    #[test]
    fn single_point_counts() {
        let data = DataSet::from_scalars(&[0.0], &[1.0]).unwrap();
        let pats = enumerate_patterns(&data, &EnumerationConfig::default()).unwrap();
        let p = build_weights_interp(&data, &pats, LeakyRelu::RELU).unwrap();
        assert_eq!(p.n_vars(), 8);
        assert_eq!(p.eq_matrix.nrows(), 1);
        assert_eq!(p.in_matrix.nrows(), 4);
    }

    #[test]
    fn margin_counts() {
        let data = DataSet::from_scalars(&[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
        let pats = enumerate_patterns(&data, &EnumerationConfig::default()).unwrap();
        let p = build_margin_classify(&data, &pats, LeakyRelu::RELU).unwrap();
        assert_eq!(p.eq_matrix.nrows(), 0);
        assert_eq!(p.in_matrix.nrows(), 2 * 2 * pats.len() + 2);
        assert_eq!(p.in_rhs.rows(p.cone_row_count(), 2).as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn guards() {
        let (data, pats) = six_points();
        let empty = PatternSet { patterns: vec![], data_hash: pats.data_hash.clone() };
        assert!(matches!(build_weights_interp(&data, &empty, LeakyRelu::RELU), Err(Error::EmptyPatterns)));

        let other = data.with_scaled_labels(2.0).unwrap();
        assert!(matches!(build_weights_interp(&other, &pats, LeakyRelu::RELU), Err(Error::PatternMismatch)));

        let bad = DataSet::from_scalars(&[0.0, 1.0], &[0.5, 1.0]).unwrap();
        let bad_pats = enumerate_patterns(&bad, &EnumerationConfig::default()).unwrap();
        assert!(build_margin_classify(&bad, &bad_pats, LeakyRelu::RELU).is_err());
    }

    #[test]
    fn witness_block_satisfies_its_cone() {
        let (data, pats) = six_points();
        let p = build_weights_interp(&data, &pats, LeakyRelu::RELU).unwrap();
        let mut x = DVector::zeros(p.n_vars());
        for (i, pat) in pats.iter().enumerate() {
            let blk = p.block(i);
            x[blk.w_plus] = pat.witness.w[0];
            x[blk.b_plus] = pat.witness.b;
            x[blk.w_minus] = pat.witness.w[0];
            x[blk.b_minus] = pat.witness.b;
        }
        assert!(p.min_slack(&x) >= 0.0);
    }

    #[test]
    fn dump_shape() {
        let (data, pats) = six_points();
        let p = build_joint_interp(&data, &pats, LeakyRelu::RELU).unwrap();
        let dump = p.dump().unwrap();
        assert_eq!(dump.eq_matrix.len(), 6);
        assert_eq!(dump.in_matrix[0].len(), 48);
        let json = serde_json::to_string(&dump).unwrap();
        assert!(json.contains("\"joint-interp\""));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("weights".parse::<FormulationKind>().unwrap(), FormulationKind::WeightsInterp);
        assert_eq!("margin-classify".parse::<FormulationKind>().unwrap(), FormulationKind::MarginClassify);
        assert!("lasso".parse::<FormulationKind>().is_err());
    }
}
