//! Independent checks of the convex programs.
//!
//! For scalar inputs the atom set can be discretized directly: positive
//! homogeneity reduces bounded-weight atoms to `w = ±1` over a bias grid plus
//! one unpenalized constant, and jointly bounded atoms to the unit circle
//! `(cos θ, sin θ)`. The ℓ₁ norm of the dictionary coefficients is then the
//! total variation of a discrete measure, and minimizing it is an LP solved by
//! simplex, with no shared code path with the splitting solver.

use minilp::{ComparisonOp, OptimizationDirection, Problem, Variable};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{DataSet, LeakyRelu};
use crate::error::{Error, Result};
use crate::patterns::PatternSet;
use crate::programs::{h_of_s, FormulationKind};
use crate::solver::GroupSolution;

pub const DEFAULT_BIAS_STEP: f64 = 1e-3;
pub const DEFAULT_ANGLE_STEP: f64 = 2e-4 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub w: f64,
    pub b: f64,
    /// Unpenalized atoms carry a free coefficient at zero cost.
    pub penalized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomDictionary {
    pub kind: FormulationKind,
    pub atoms: Vec<Atom>,
    /// Column `j` is the (label-weighted, for classification) activation of atom `j`.
    pub columns: DMatrix<f64>,
    pub grid_step: f64,
    /// Bias range `[-B, B]` for bounded-weight dictionaries.
    pub bias_bound: f64,
}

/// Default grid resolution for a formulation.
pub fn default_step(kind: FormulationKind) -> f64 {
    match kind {
        FormulationKind::JointInterp => DEFAULT_ANGLE_STEP,
        _ => DEFAULT_BIAS_STEP,
    }
}

impl AtomDictionary {
    pub fn build(data: &DataSet, kind: FormulationKind, act: LeakyRelu, grid_step: f64) -> Result<Self> {
        if data.dim() != 1 {
            return Err(Error::InvalidConfig(format!(
                "the dictionary oracle needs scalar inputs (d = 1), got d = {}",
                data.dim()
            )));
        }
        if !(grid_step > 0.0 && grid_step.is_finite()) {
            return Err(Error::InvalidConfig(format!("grid step must be positive, got {grid_step}")));
        }
        if kind == FormulationKind::MarginClassify {
            data.require_binary_labels()?;
        }
        let bias_bound = data.max_point_norm() + 1.0;

        let mut atoms = Vec::new();
        match kind {
            FormulationKind::JointInterp => {
                let count = (2.0 * std::f64::consts::PI / grid_step).ceil() as usize;
                for k in 0..count {
                    let theta = k as f64 * grid_step;
                    atoms.push(Atom { w: theta.cos(), b: theta.sin(), penalized: true });
                }
            }
            FormulationKind::WeightsInterp | FormulationKind::MarginClassify => {
                let count = (2.0 * bias_bound / grid_step + 1e-9).floor() as usize + 1;
                for w in [1.0, -1.0] {
                    for k in 0..count {
                        atoms.push(Atom { w, b: -bias_bound + k as f64 * grid_step, penalized: true });
                    }
                }
                atoms.push(Atom { w: 0.0, b: 1.0, penalized: false });
            }
        }

        let xs = data.features();
        let y = data.labels();
        let weight = |i: usize| if kind == FormulationKind::MarginClassify { y[i] } else { 1.0 };
        let columns = DMatrix::from_fn(data.len(), atoms.len(), |i, j| {
            let a = atoms[j];
            weight(i) * act.apply(a.w * xs[(0, i)] + a.b)
        });
        Ok(Self { kind, atoms, columns, grid_step, bias_bound })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveAtom {
    pub w: f64,
    pub b: f64,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub objective: f64,
    pub active_atoms: Vec<ActiveAtom>,
}

struct DictionaryLp {
    problem: Problem,
    /// Per atom: (positive part, negative part) or a single free variable.
    vars: Vec<(Variable, Option<Variable>)>,
}

fn dictionary_lp(dict: &AtomDictionary, cost: f64) -> DictionaryLp {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars = dict
        .atoms
        .iter()
        .map(|a| {
            if a.penalized {
                (problem.add_var(cost, (0.0, f64::INFINITY)), Some(problem.add_var(cost, (0.0, f64::INFINITY))))
            } else {
                (problem.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)), None)
            }
        })
        .collect();
    DictionaryLp { problem, vars }
}

fn add_fit_rows(lp: &mut DictionaryLp, dict: &AtomDictionary, target: &DVector<f64>, op: ComparisonOp) {
    for i in 0..dict.columns.nrows() {
        let mut terms = Vec::with_capacity(2 * dict.len());
        for (j, &(pos, neg)) in lp.vars.iter().enumerate() {
            let a = dict.columns[(i, j)];
            if a == 0.0 {
                continue;
            }
            terms.push((pos, a));
            if let Some(neg) = neg {
                terms.push((neg, -a));
            }
        }
        lp.problem.add_constraint(terms.as_slice(), op, target[i]);
    }
}

fn coefficient(sol: &minilp::Solution, v: (Variable, Option<Variable>)) -> f64 {
    sol[v.0] - v.1.map_or(0.0, |n| sol[n])
}

/// Minimizes the ℓ₁ norm of penalized dictionary coefficients subject to
/// exact interpolation, or to unit margins for classification.
pub fn atomic_lp(data: &DataSet, kind: FormulationKind, act: LeakyRelu, grid_step: f64) -> Result<OracleSolution> {
    let dict = AtomDictionary::build(data, kind, act, grid_step)?;
    solve_dictionary(&dict, data.labels())
}

/// [`atomic_lp`] over a prebuilt dictionary with an arbitrary target.
pub fn solve_dictionary(dict: &AtomDictionary, target: &DVector<f64>) -> Result<OracleSolution> {
    if target.len() != dict.columns.nrows() {
        return Err(Error::DimensionMismatch { expected: dict.columns.nrows(), got: target.len() });
    }
    let mut lp = dictionary_lp(dict, 1.0);
    match dict.kind {
        FormulationKind::MarginClassify => {
            add_fit_rows(&mut lp, dict, &DVector::from_element(target.len(), 1.0), ComparisonOp::Ge)
        }
        _ => add_fit_rows(&mut lp, dict, target, ComparisonOp::Eq),
    }
    let sol = match lp.problem.solve() {
        Ok(sol) => sol,
        Err(minilp::Error::Infeasible) => {
            return Err(Error::DictionaryInfeasible(format!(
                "no combination of {} atoms at step {} fits the targets; try a finer grid",
                dict.len(),
                dict.grid_step
            )))
        }
        Err(minilp::Error::Unbounded) => return Err(Error::Lp("dictionary LP unbounded".into())),
    };

    let mut objective = 0.0;
    let mut active_atoms = Vec::new();
    for (atom, &v) in dict.atoms.iter().zip(&lp.vars) {
        let coef = coefficient(&sol, v);
        if atom.penalized {
            objective += sol[v.0] + v.1.map_or(0.0, |n| sol[n]);
        }
        if coef != 0.0 {
            active_atoms.push(ActiveAtom { w: atom.w, b: atom.b, coef });
        }
    }
    Ok(OracleSolution { objective, active_atoms })
}

/// Tests `z ∈ t·conv(T₁⁺ ∪ T₁⁻)` for the bounded-weights atom set, by LP over
/// the discretized dictionary.
pub fn brute_force_hull_member(data: &DataSet, z: &DVector<f64>, t: f64, act: LeakyRelu, grid_step: f64) -> Result<bool> {
    if z.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), got: z.len() });
    }
    let dict = AtomDictionary::build(data, FormulationKind::WeightsInterp, act, grid_step)?;
    let mut lp = dictionary_lp(&dict, 0.0);
    add_fit_rows(&mut lp, &dict, z, ComparisonOp::Eq);
    let budget: Vec<(Variable, f64)> = lp
        .vars
        .iter()
        .filter_map(|&(p, n)| n.map(|n| [(p, 1.0), (n, 1.0)]))
        .flatten()
        .collect();
    lp.problem.add_constraint(budget.as_slice(), ComparisonOp::Le, t * (1.0 + 1e-9) + 1e-12);
    match lp.problem.solve() {
        Ok(_) => Ok(true),
        Err(minilp::Error::Infeasible) => Ok(false),
        Err(minilp::Error::Unbounded) => Err(Error::Lp("hull membership LP unbounded".into())),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTerm {
    pub pattern: usize,
    /// `true` for an element of `𝒜` (positive part), `false` for `ℬ`.
    pub positive: bool,
    pub coefficient: f64,
    pub atom: DVector<f64>,
}

/// `y = Σ λᵢcᵢ + Σ βᵢdᵢ + offset`, where `offset` collects the bias-only blocks
/// of the bounded-weights formulations (zero-cost limits of atoms).
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicDecomposition {
    pub terms: Vec<DecompositionTerm>,
    pub offset: DVector<f64>,
    pub total: f64,
}

/// Rebuilds the atomic decomposition implied by an interpolation solution
/// and verifies each clause, naming the first one that fails.
pub fn check_decomposition(
    solution: &GroupSolution,
    patterns: &PatternSet,
    data: &DataSet,
    act: LeakyRelu,
) -> Result<AtomicDecomposition> {
    let fail = |clause: &str, detail: String| Err(Error::Decomposition(format!("{clause}: {detail}")));
    if !solution.kind.is_interpolation() {
        return fail("formulation", format!("{} is not an interpolation program", solution.kind));
    }
    if !solution.is_optimal() {
        return fail("status", solution.status.to_string());
    }
    if solution.blocks.len() != patterns.len() {
        return fail("layout", format!("{} blocks for {} patterns", solution.blocks.len(), patterns.len()));
    }
    patterns.ensure_matches(data)?;

    let joint = solution.kind == FormulationKind::JointInterp;
    let y = data.labels();
    let scale = 1.0 + y.amax();
    let cone_tol = 1e-7 * scale;

    let mut terms = Vec::new();
    let mut offset = DVector::zeros(data.len());
    let mut recon = DVector::zeros(data.len());
    let mut cone_failures = Vec::new();
    for (i, (block, pat)) in solution.blocks.iter().zip(patterns.iter()).enumerate() {
        let h = h_of_s(&pat.signs, act).0;
        for (positive, w, b) in [(true, &block.w_plus, block.b_plus), (false, &block.w_minus, block.b_minus)] {
            let pre = data.affine(w, b)?;
            let worst = pre.iter().zip(&pat.signs).map(|(p, &s)| f64::from(s) * p).fold(f64::INFINITY, f64::min);
            if worst < -cone_tol {
                cone_failures.push(format!("pattern {i} ({}) row value {worst:e}", if positive { "+" } else { "-" }));
            }
            let sign = if positive { 1.0 } else { -1.0 };
            let contribution = h.component_mul(&pre) * sign;
            recon += &contribution;

            let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            let coefficient = if joint { w_norm.hypot(b) } else { w_norm };
            if coefficient > 0.0 {
                let param_norm = if joint { 1.0 } else { (w_norm / coefficient).max(0.0) };
                if param_norm > 1.0 + 1e-8 {
                    return fail("norm bound", format!("pattern {i} atom has parameter norm {param_norm}"));
                }
                terms.push(DecompositionTerm { pattern: i, positive, coefficient, atom: contribution / coefficient });
            } else {
                offset += &contribution;
            }
        }
    }

    let fit_err = (&recon - y).amax();
    if fit_err > 1e-6 * scale {
        return fail("equality", format!("Σλc + Σβd + offset differs from y by {fit_err:e}"));
    }
    if let Some(first) = cone_failures.first() {
        return fail("cone membership", first.clone());
    }
    let total: f64 = terms.iter().map(|t| t.coefficient).sum();
    if (total - solution.objective).abs() > 1e-8 * (1.0 + solution.objective) {
        return fail("total", format!("Σ coefficients {total} vs objective {}", solution.objective));
    }
    Ok(AtomicDecomposition { terms, offset, total })
}
