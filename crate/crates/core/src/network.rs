//! Finite sparse networks `f(x) = Σⱼ vⱼ σ(wⱼᵀx + bⱼ)`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{dot, DataSet, LeakyRelu};
use crate::error::{Error, Result};
use crate::patterns::PatternSet;
use crate::programs::FormulationKind;
use crate::solver::GroupSolution;

pub const DEFAULT_PRUNE_TOL: f64 = 1e-7;

/// Source tag for networks trained by gradient descent.
pub const GD_SOURCE: &str = "gradient-descent";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neuron {
    pub w: Vec<f64>,
    pub b: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Source {
    /// A formulation name (`weights-interp`, `joint-interp`, `margin-classify`)
    /// or [`GD_SOURCE`].
    pub kind: String,
    pub data_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteNetwork {
    pub alpha: LeakyRelu,
    pub neurons: Vec<Neuron>,
    pub source: Source,
}

impl FiniteNetwork {
    pub fn dim(&self) -> Option<usize> {
        self.neurons.first().map(|n| n.w.len())
    }

    pub fn width(&self) -> usize {
        self.neurons.len()
    }

    /// Evaluates the network at one input.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if let Some(d) = self.dim() {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: x.len() });
            }
        }
        Ok(self.predict_unchecked(x))
    }

    #[inline]
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.neurons.iter().map(|n| n.v * self.alpha.apply(dot(&n.w, x) + n.b)).sum()
    }

    /// Predictions at every data point.
    pub fn predict_data(&self, data: &DataSet) -> Result<Vec<f64>> {
        (0..data.len()).map(|i| self.predict(data.point(i))).collect()
    }

    /// `Σⱼ |vⱼ|`.
    pub fn outer_l1(&self) -> f64 {
        self.neurons.iter().map(|n| n.v.abs()).sum()
    }

    /// Total variation of the represented measure under the atom normalization
    /// of the source: `Σ |vⱼ|·‖(wⱼ, bⱼ)‖` for jointly bounded and trained
    /// networks, `Σ |vⱼ|·‖wⱼ‖` otherwise. Bias-only neurons of the
    /// bounded-weights formulations therefore contribute nothing.
    pub fn total_variation(&self) -> f64 {
        let joint = self.source.kind != FormulationKind::WeightsInterp.as_str()
            && self.source.kind != FormulationKind::MarginClassify.as_str();
        self.neurons
            .iter()
            .map(|n| {
                let w2: f64 = n.w.iter().map(|v| v * v).sum();
                let norm = if joint { (w2 + n.b * n.b).sqrt() } else { w2.sqrt() };
                n.v.abs() * norm
            })
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: FiniteNetwork = serde_json::from_str(text)?;
        if let Some(d) = net.dim() {
            if let Some(bad) = net.neurons.iter().find(|n| n.w.len() != d) {
                return Err(Error::DimensionMismatch { expected: d, got: bad.w.len() });
            }
        }
        Ok(net)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }
}

/// Turns each nonzero solution block into a neuron with unit-norm inner
/// weights and the block norm carried by the outer weight.
pub fn reconstruct(
    solution: &GroupSolution,
    patterns: &PatternSet,
    act: LeakyRelu,
    prune_tol: f64,
) -> Result<FiniteNetwork> {
    if !solution.is_optimal() {
        return Err(Error::NotOptimal(solution.status.to_string()));
    }
    if solution.blocks.len() != patterns.len() || solution.data_hash != patterns.data_hash {
        return Err(Error::PatternMismatch);
    }
    let joint = solution.kind == FormulationKind::JointInterp;

    let mut neurons = Vec::new();
    let mut emit = |w: &[f64], b: f64, sign: f64| {
        let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let norm = if joint { w_norm.hypot(b) } else { w_norm };
        if norm > prune_tol {
            neurons.push(Neuron { w: w.iter().map(|v| v / norm).collect(), b: b / norm, v: sign * norm });
        } else if !joint && b.abs() > prune_tol {
            neurons.push(Neuron { w: vec![0.0; w.len()], b, v: sign });
        }
    };
    for block in &solution.blocks {
        emit(&block.w_plus, block.b_plus, 1.0);
        emit(&block.w_minus, block.b_minus, -1.0);
    }
    Ok(FiniteNetwork {
        alpha: act,
        neurons,
        source: Source { kind: solution.kind.to_string(), data_hash: solution.data_hash.clone() },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSample {
    pub x: Vec<f64>,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    pub dim: usize,
    pub rows: Vec<GridSample>,
}

impl GridTable {
    /// CSV with header `x1[,x2],f[,sign]`; `sign` uses `sign(0) = +1`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.dim == 1 {
            out.push_str("x1,f\n");
        } else {
            out.push_str("x1,x2,f,sign\n");
        }
        for r in &self.rows {
            for x in &r.x {
                let _ = write!(out, "{x},");
            }
            if self.dim == 1 {
                let _ = writeln!(out, "{}", r.f);
            } else {
                let _ = writeln!(out, "{},{}", r.f, if r.f >= 0.0 { 1 } else { -1 });
            }
        }
        out
    }

    pub fn values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.f).collect()
    }
}

/// Grid coordinates `lo + k·step` for `k = 0..` while `≤ hi` (with a small slack for rounding).
pub fn axis(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..count).map(|k| lo + k as f64 * step).collect()
}

fn grid_points(lo: &[f64], hi: &[f64], step: f64) -> Result<Vec<Vec<f64>>> {
    if lo.len() != hi.len() {
        return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig(format!("grid step must be positive, got {step}")));
    }
    if lo.iter().zip(hi).any(|(l, h)| !(l < h)) {
        return Err(Error::InvalidConfig("grid requires lo < hi in every coordinate".into()));
    }
    match lo.len() {
        1 => Ok(axis(lo[0], hi[0], step).into_iter().map(|x| vec![x]).collect()),
        2 => {
            let a = axis(lo[0], hi[0], step);
            let b = axis(lo[1], hi[1], step);
            Ok(a.iter().flat_map(|&x1| b.iter().map(move |&x2| vec![x1, x2])).collect())
        }
        d => Err(Error::InvalidConfig(format!("grid output supports d ∈ {{1, 2}}, got d = {d}"))),
    }
}

/// Samples the network on a row-major grid over `[lo, hi]`.
pub fn sample_on_grid(net: &FiniteNetwork, lo: &[f64], hi: &[f64], step: f64) -> Result<GridTable> {
    let points = grid_points(lo, hi, step)?;
    if let Some(d) = net.dim() {
        if d != lo.len() {
            return Err(Error::DimensionMismatch { expected: d, got: lo.len() });
        }
    }
    let rows = points
        .into_iter()
        .map(|x| {
            let f = net.predict_unchecked(&x);
            GridSample { x, f }
        })
        .collect();
    Ok(GridTable { dim: lo.len(), rows })
}

/// Largest absolute difference between two networks over a grid.
pub fn linf_distance(a: &FiniteNetwork, b: &FiniteNetwork, lo: &[f64], hi: &[f64], step: f64) -> Result<f64> {
    let fa = sample_on_grid(a, lo, hi, step)?;
    let fb = sample_on_grid(b, lo, hi, step)?;
    Ok(fa.rows.iter().zip(&fb.rows).map(|(p, q)| (p.f - q.f).abs()).fold(0.0, f64::max))
}

/// Fraction of grid points where both networks have the same sign (`sign(0) = +1`).
pub fn sign_agreement(a: &FiniteNetwork, b: &FiniteNetwork, lo: &[f64], hi: &[f64], step: f64) -> Result<f64> {
    let fa = sample_on_grid(a, lo, hi, step)?;
    let fb = sample_on_grid(b, lo, hi, step)?;
    let agree = fa.rows.iter().zip(&fb.rows).filter(|(p, q)| (p.f >= 0.0) == (q.f >= 0.0)).count();
    Ok(agree as f64 / fa.rows.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{PatternBlock, Residuals, Status};

    fn unit_net(alpha: f64) -> FiniteNetwork {
        FiniteNetwork {
            alpha: LeakyRelu::new(alpha).unwrap(),
            neurons: vec![Neuron { w: vec![1.0], b: 0.0, v: 1.0 }],
            source: Source { kind: GD_SOURCE.into(), data_hash: String::new() },
        }
    }

    fn solution(blocks: Vec<PatternBlock>, kind: FormulationKind) -> (GroupSolution, PatternSet) {
        let pats = PatternSet {
            patterns: blocks
                .iter()
                .map(|_| crate::patterns::SignPattern {
                    signs: vec![1],
                    witness: crate::patterns::Witness { w: vec![0.0], b: 1.0 },
                    strict: true,
                })
                .collect(),
            data_hash: "h".into(),
        };
        let sol = GroupSolution {
            kind,
            blocks,
            objective: 0.0,
            status: Status::Optimal,
            infeasibility: None,
            residuals: Residuals { primal: 0.0, dual: 0.0, gap: 0.0 },
            iterations: 0,
            data_hash: "h".into(),
        };
        (sol, pats)
    }

    #[test]
    fn predict_examples() {
        let net = unit_net(0.0);
        assert_eq!(net.predict(&[2.0]).unwrap(), 2.0);
        assert_eq!(net.predict(&[-2.0]).unwrap(), 0.0);
        let leaky = unit_net(0.1);
        assert!((leaky.predict(&[-2.0]).unwrap() + 0.2).abs() < 1e-15);
        assert!(net.predict(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn normalizes_blocks() {
        let (sol, pats) = solution(
            vec![PatternBlock { w_plus: vec![0.5], b_plus: -0.2, w_minus: vec![0.0], b_minus: 0.0 }],
            FormulationKind::WeightsInterp,
        );
        let net = reconstruct(&sol, &pats, LeakyRelu::RELU, DEFAULT_PRUNE_TOL).unwrap();
        assert_eq!(net.neurons.len(), 1);
        let n = &net.neurons[0];
        assert!((n.w[0] - 1.0).abs() < 1e-15 && (n.b + 0.4).abs() < 1e-15 && (n.v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bias_only_block() {
        let (sol, pats) = solution(
            vec![PatternBlock { w_plus: vec![0.0], b_plus: 0.7, w_minus: vec![0.0], b_minus: 0.0 }],
            FormulationKind::WeightsInterp,
        );
        let net = reconstruct(&sol, &pats, LeakyRelu::RELU, DEFAULT_PRUNE_TOL).unwrap();
        assert_eq!(net.neurons, vec![Neuron { w: vec![0.0], b: 0.7, v: 1.0 }]);
        assert_eq!(net.total_variation(), 0.0);
        assert!((net.predict(&[3.0]).unwrap() - 0.7).abs() < 1e-15);
    }

    #[test]
    fn joint_normalization() {
        let (sol, pats) = solution(
            vec![PatternBlock { w_plus: vec![0.0], b_plus: 0.0, w_minus: vec![0.3], b_minus: 0.4 }],
            FormulationKind::JointInterp,
        );
        let net = reconstruct(&sol, &pats, LeakyRelu::RELU, DEFAULT_PRUNE_TOL).unwrap();
        let n = &net.neurons[0];
        assert!((n.v + 0.5).abs() < 1e-15);
        assert!((n.w[0].hypot(n.b) - 1.0).abs() < 1e-15);
        assert!((net.total_variation() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_solution_is_empty() {
        let (sol, pats) = solution(
            vec![PatternBlock { w_plus: vec![0.0], b_plus: 0.0, w_minus: vec![0.0], b_minus: 0.0 }],
            FormulationKind::WeightsInterp,
        );
        let net = reconstruct(&sol, &pats, LeakyRelu::RELU, DEFAULT_PRUNE_TOL).unwrap();
        assert!(net.neurons.is_empty());
        assert_eq!(net.predict(&[0.3]).unwrap(), 0.0);
    }

    #[test]
    fn non_optimal_rejected() {
        let (mut sol, pats) = solution(vec![], FormulationKind::WeightsInterp);
        sol.status = Status::IterationLimit;
        assert!(matches!(reconstruct(&sol, &pats, LeakyRelu::RELU, 1e-7), Err(Error::NotOptimal(_))));
    }

    #[test]
    fn grid_examples() {
        let (sol, pats) = solution(vec![], FormulationKind::WeightsInterp);
        let empty = reconstruct(&sol, &pats, LeakyRelu::RELU, 1e-7).unwrap();
        let g = sample_on_grid(&empty, &[-1.0], &[1.0], 0.5).unwrap();
        assert_eq!(g.rows.len(), 5);
        assert!(g.rows.iter().all(|r| r.f == 0.0));

        let g = sample_on_grid(&unit_net(0.0), &[-1.0], &[1.0], 1.0).unwrap();
        assert_eq!(g.values(), vec![0.0, 0.0, 1.0]);
        assert!(g.to_csv().starts_with("x1,f\n"));

        assert!(sample_on_grid(&empty, &[0.0; 3], &[1.0; 3], 0.5).is_err());
        assert!(sample_on_grid(&empty, &[1.0], &[0.0], 0.5).is_err());
    }

    #[test]
    fn grid_2d_row_major() {
        let net = FiniteNetwork {
            alpha: LeakyRelu::RELU,
            neurons: vec![Neuron { w: vec![1.0, -1.0], b: 0.0, v: 1.0 }],
            source: Source { kind: GD_SOURCE.into(), data_hash: String::new() },
        };
        let g = sample_on_grid(&net, &[-1.0, -1.0], &[1.0, 1.0], 1.0).unwrap();
        assert_eq!(g.rows.len(), 9);
        assert_eq!(g.rows[1].x, vec![-1.0, 0.0]);
        let csv = g.to_csv();
        assert!(csv.starts_with("x1,x2,f,sign\n"));
        assert_eq!(csv.lines().count(), 10);
    }

    #[test]
    fn agreement_and_distance() {
        let a = unit_net(0.0);
        assert_eq!(linf_distance(&a, &a, &[-1.0], &[1.0], 0.01).unwrap(), 0.0);
        assert_eq!(sign_agreement(&a, &a, &[-1.0], &[1.0], 0.01).unwrap(), 1.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_net() -> impl Strategy<Value = FiniteNetwork> {
            (prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0, -3.0f64..3.0), 0..12), -0.5f64..0.5).prop_map(
                |(ns, alpha)| FiniteNetwork {
                    alpha: LeakyRelu::new(alpha).unwrap(),
                    neurons: ns.into_iter().map(|(w, b, v)| Neuron { w: vec![w], b, v }).collect(),
                    source: Source { kind: GD_SOURCE.into(), data_hash: "abc".into() },
                },
            )
        }

        proptest! {
            #[test]
            fn json_round_trip_is_bit_exact(net in arb_net()) {
                let back = FiniteNetwork::from_json(&net.to_json().unwrap()).unwrap();
                let a = sample_on_grid(&net, &[-5.0], &[5.0], 0.01).unwrap();
                let b = sample_on_grid(&back, &[-5.0], &[5.0], 0.01).unwrap();
                prop_assert!(a.rows.len() >= 1000);
                for (p, q) in a.rows.iter().zip(&b.rows) {
                    prop_assert_eq!(p.f.to_bits(), q.f.to_bits());
                }
            }

            #[test]
            fn positive_rescaling_is_homogeneous(net in arb_net(), c in 0.1f64..10.0, x in -3.0f64..3.0) {
                let scaled = FiniteNetwork {
                    neurons: net.neurons.iter().map(|n| Neuron { w: vec![c * n.w[0]], b: c * n.b, v: n.v }).collect(),
                    ..net.clone()
                };
                let lhs = scaled.predict(&[x]).unwrap();
                let rhs = c * net.predict(&[x]).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
            }
        }
    }
}
