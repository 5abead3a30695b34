//! Small dense linear programs: `max cᵀz  s.t.  Az ≥ b, ‖z‖∞ ≤ box`.
//!
//! Backed by the `minilp` simplex, which returns vertex solutions. Pattern
//! feasibility is decided by comparing an optimal value against a margin of
//! `1e-9`, which needs vertex-exact optima rather than first-order iterates.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub point: DVector<f64>,
    pub objective: f64,
}

/// Maximizes `cᵀz` subject to `Az ≥ b` and `|z_j| ≤ bound` for every `j`.
///
/// Returns `Ok(None)` when the polyhedron is empty. `bound` may be infinite,
/// in which case an unbounded objective is reported as an error.
pub fn lp_feasibility(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    bound: f64,
) -> Result<Option<LpSolution>> {
    let (m, n) = a.shape();
    if b.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: b.len() });
    }
    if c.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: c.len() });
    }
    if bound.is_nan() || bound < 0.0 {
        return Err(Error::InvalidConfig(format!("box bound must be nonnegative, got {bound}")));
    }

    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..n).map(|j| problem.add_var(c[j], (-bound, bound))).collect();
    let mut terms = Vec::with_capacity(n);
    for r in 0..m {
        terms.clear();
        terms.extend((0..n).filter(|&j| a[(r, j)] != 0.0).map(|j| (vars[j], a[(r, j)])));
        if terms.is_empty() {
            // 0 ≥ b_r
            if b[r] > 0.0 {
                return Ok(None);
            }
            continue;
        }
        problem.add_constraint(terms.as_slice(), ComparisonOp::Ge, b[r]);
    }

    match problem.solve() {
        Ok(sol) => {
            let point = DVector::from_iterator(n, vars.iter().map(|&v| sol[v]));
            let objective = c.dot(&point);
            if !objective.is_finite() {
                return Err(Error::Lp("non-finite objective".into()));
            }
            Ok(Some(LpSolution { point, objective }))
        }
        Err(minilp::Error::Infeasible) => Ok(None),
        Err(minilp::Error::Unbounded) => Err(Error::Lp("objective is unbounded".into())),
    }
}
