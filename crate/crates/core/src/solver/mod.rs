//! Solvers for the canonical group-norm program and the LP subroutine.

mod admm;
pub mod lp;

use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::programs::{ConicProgram, FormulationKind};

pub use admm::HEURISTIC_INFEASIBILITY_RESIDUAL;
pub use lp::{lp_feasibility, LpSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub tol_primal: f64,
    pub tol_dual: f64,
    pub tol_gap: f64,
    pub max_iterations: usize,
    /// Recorded in run manifests; the iteration itself starts from zero and draws no randomness.
    pub seed: u64,
    /// Project onto the active support at exit.
    pub polish: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tol_primal: 1e-8,
            tol_dual: 1e-8,
            tol_gap: 1e-8,
            max_iterations: 200_000,
            seed: 0,
            polish: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let tols = [self.tol_primal, self.tol_dual, self.tol_gap];
        if tols.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidConfig("solver tolerances must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Sets all three tolerances to `tol`.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol_primal = tol;
        self.tol_dual = tol;
        self.tol_gap = tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Optimal,
    Infeasible,
    /// Never produced for group-norm objectives, which are bounded below by zero.
    Unbounded,
    IterationLimit,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::IterationLimit => "iteration-limit",
        })
    }
}

/// How an infeasible status was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfeasibilityKind {
    /// The multiplier increments converged to a verified Farkas certificate.
    Certified,
    /// The iteration limit was reached with primal residual above
    /// [`HEURISTIC_INFEASIBILITY_RESIDUAL`].
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// `(wᵢ⁺, bᵢ⁺, wᵢ⁻, bᵢ⁻)` for one pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternBlock {
    pub w_plus: Vec<f64>,
    pub b_plus: f64,
    pub w_minus: Vec<f64>,
    pub b_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSolution {
    pub kind: FormulationKind,
    pub blocks: Vec<PatternBlock>,
    /// Group-norm objective recomputed from `blocks`.
    pub objective: f64,
    pub status: Status,
    pub infeasibility: Option<InfeasibilityKind>,
    pub residuals: Residuals,
    pub iterations: usize,
    pub data_hash: String,
}

impl GroupSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Flattens the blocks back into the program's variable layout.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.extend_from_slice(&b.w_plus);
            out.push(b.b_plus);
            out.extend_from_slice(&b.w_minus);
            out.push(b.b_minus);
        }
        DVector::from_vec(out)
    }

    pub(crate) fn from_vector(
        program: &ConicProgram,
        x: &DVector<f64>,
        status: Status,
        infeasibility: Option<InfeasibilityKind>,
        residuals: Residuals,
        iterations: usize,
    ) -> Self {
        let d = program.dim;
        let blocks = (0..program.n_patterns)
            .map(|i| {
                let l = program.block(i);
                PatternBlock {
                    w_plus: x.rows(l.w_plus, d).iter().copied().collect(),
                    b_plus: x[l.b_plus],
                    w_minus: x.rows(l.w_minus, d).iter().copied().collect(),
                    b_minus: x[l.b_minus],
                }
            })
            .collect();
        Self {
            kind: program.kind,
            blocks,
            objective: program.objective(x),
            status,
            infeasibility,
            residuals,
            iterations,
            data_hash: program.data_hash.clone(),
        }
    }
}

/// Solver report written next to every fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub infeasibility: Option<InfeasibilityKind>,
    pub objective: f64,
    pub iterations: usize,
    pub residuals: Residuals,
    pub wall_time_ms: f64,
}

impl SolverReport {
    pub fn new(sol: &GroupSolution, wall: Duration) -> Self {
        Self {
            status: sol.status,
            infeasibility: sol.infeasibility,
            objective: sol.objective,
            iterations: sol.iterations,
            residuals: sol.residuals,
            wall_time_ms: wall.as_secs_f64() * 1e3,
        }
    }
}

/// Solves a group-norm program. Deterministic given `(program, config)`.
pub fn solve(program: &ConicProgram, config: &SolverConfig) -> Result<GroupSolution> {
    config.validate()?;
    let out = admm::run(program, config);
    Ok(GroupSolution::from_vector(
        program,
        &out.x,
        out.status,
        out.infeasibility,
        out.residuals,
        out.iterations,
    ))
}

/// [`solve`] plus its wall-clock time.
pub fn solve_timed(program: &ConicProgram, config: &SolverConfig) -> Result<(GroupSolution, Duration)> {
    let start = Instant::now();
    let sol = solve(program, config)?;
    Ok((sol, start.elapsed()))
}
