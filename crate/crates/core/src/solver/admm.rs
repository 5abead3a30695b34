//! Operator splitting for `min Σ_g ‖x_g‖ s.t. A_eq x = b_eq, A_in x ≥ b_in`.
//!
//! The constraints and the group norms are stacked into one linear map
//! `z = Kx`, with `g(z)` the sum of the equality indicator, the halfspace
//! indicators and the block norms. Each iteration solves one fixed linear
//! system in `x`, applies the proximal map of `g` row-block by row-block, and
//! updates the multiplier `y`. Because `y` is always the image of a proximal
//! step, `y ∈ ∂g(z)` holds exactly and `-bᵀy` is a valid dual value whenever
//! `Kᵀy = 0`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{InfeasibilityKind, Residuals, SolverConfig, Status};
use crate::programs::ConicProgram;

const SIGMA: f64 = 1e-6;
const RELAXATION: f64 = 1.6;
const EQ_RHO_SCALE: f64 = 1e3;
const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const CHECK_EVERY: usize = 5;
const ADAPT_EVERY: usize = 50;
const ADAPT_FACTOR: f64 = 5.0;
const INFEASIBILITY_TOL: f64 = 1e-7;
/// Primal residual (relative to problem scale) above which a run that hits the
/// iteration limit is reported as heuristically infeasible.
pub const HEURISTIC_INFEASIBILITY_RESIDUAL: f64 = 1e-3;

pub(crate) struct AdmmOutcome {
    pub x: DVector<f64>,
    pub status: Status,
    pub infeasibility: Option<InfeasibilityKind>,
    pub residuals: Residuals,
    pub iterations: usize,
}

/// Row-normalized copy of the constraint system plus the group selectors.
struct Stacked {
    k: DMatrix<f64>,
    b: DVector<f64>,
    m_eq: usize,
    m_in: usize,
    /// Per group: (first stacked row, length).
    groups: Vec<(usize, usize)>,
}

impl Stacked {
    fn new(p: &ConicProgram) -> Self {
        let n = p.n_vars();
        let m_eq = p.eq_matrix.nrows();
        let m_in = p.in_matrix.nrows();
        let n_g: usize = p.groups.iter().map(|g| g.len).sum();
        let m = m_eq + m_in + n_g;
        let mut k = DMatrix::zeros(m, n);
        let mut b = DVector::zeros(m);
    
        let mut put = |row: usize, a: nalgebra::DMatrixView<f64>, rhs: f64| {
            let norm = a.norm();
            let s = if norm > 0.0 { 1.0 / norm } else { 1.0 };
            k.row_mut(row).copy_from(&(a * s));
            b[row] = rhs * s;
        };
        for r in 0..m_eq {
            put(r, p.eq_matrix.rows(r, 1), p.eq_rhs[r]);
        }
        for r in 0..m_in {
            put(m_eq + r, p.in_matrix.rows(r, 1), p.in_rhs[r]);
        }

        let mut groups = Vec::with_capacity(p.groups.len());
        let mut row = m_eq + m_in;
        for g in &p.groups {
            groups.push((row, g.len));
            for j in 0..g.len {
                k[(row + j, g.start + j)] = 1.0;
            }
            row += g.len;
        }
        Self { k, b, m_eq, m_in, groups }
    }

    fn m(&self) -> usize {
        self.k.nrows()
    }

    fn rho_vector(&self, rho: f64) -> DVector<f64> {
        DVector::from_fn(self.m(), |r, _| if r < self.m_eq { EQ_RHO_SCALE * rho } else { rho })
    }

    /// `z = prox_{g,R}(v)`.
    fn prox(&self, v: &DVector<f64>, rho: &DVector<f64>, z: &mut DVector<f64>) {
        for r in 0..self.m_eq {
            z[r] = self.b[r];
        }
        for r in self.m_eq..self.m_eq + self.m_in {
            z[r] = v[r].max(self.b[r]);
        }
        for &(start, len) in &self.groups {
            let seg = v.rows(start, len);
            let norm = seg.norm();
            let thresh = 1.0 / rho[start];
            if norm <= thresh {
                z.rows_mut(start, len).fill(0.0);
            } else {
                let shrink = 1.0 - thresh / norm;
                for j in 0..len {
                    z[start + j] = shrink * v[start + j];
                }
            }
        }
    }

    fn factor(&self, rho: &DVector<f64>) -> Cholesky<f64, Dyn> {
        let n = self.k.ncols();
        let mut rk = self.k.clone();
        for (r, mut row) in rk.row_iter_mut().enumerate() {
            row *= rho[r];
        }
        let mut mat = self.k.transpose() * rk;
        for i in 0..n {
            mat[(i, i)] += SIGMA;
        }
        Cholesky::new(mat).expect("σI + KᵀRK is positive definite")
    }
}

struct Measures {
    primal: f64,
    primal_scale: f64,
    dual: f64,
    dual_scale: f64,
    gap: f64,
    objective: f64,
    dual_objective: f64,
}

fn measure(st: &Stacked, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>) -> Measures {
    let kx = &st.k * x;
    let primal = (&kx - z).amax();
    let primal_scale = kx.amax().max(z.amax());

    let kty = st.k.tr_mul(y);
    let dual = kty.amax();
    let split = st.m_eq + st.m_in;
    let cons = st.k.rows(0, split).tr_mul(&y.rows(0, split));
    let grp = &kty - &cons;
    let dual_scale = cons.amax().max(grp.amax());

    let objective: f64 = st.groups.iter().map(|&(s, l)| kx.rows(s, l).norm()).sum();
    let dual_objective = -st.b.rows(0, split).dot(&y.rows(0, split));
    let gap = (objective - dual_objective).abs();
    Measures { primal, primal_scale, dual, dual_scale, gap, objective, dual_objective }
}

/// Checks `δy` for a Farkas certificate of the polyhedral constraints.
fn infeasibility_certificate(st: &Stacked, dy: &DVector<f64>) -> bool {
    let split = st.m_eq + st.m_in;
    let cons = dy.rows(0, split);
    let size = cons.amax();
    if size <= 1e-12 {
        return false;
    }
    // Multipliers: λ = -δy_eq, μ = max(-δy_in, 0).
    let mut cert = DVector::zeros(split);
    for r in 0..split {
        cert[r] = if r < st.m_eq { -cons[r] } else { (-cons[r]).max(0.0) };
    }
    let lhs = st.k.rows(0, split).tr_mul(&cert).amax();
    let value = st.b.rows(0, split).dot(&cert);
    value > INFEASIBILITY_TOL * size && lhs <= INFEASIBILITY_TOL * size
}

pub(crate) fn run(p: &ConicProgram, cfg: &SolverConfig) -> AdmmOutcome {
    let st = Stacked::new(p);
    let n = p.n_vars();
    let m = st.m();

    let mut rho = 1.0;
    let mut rho_vec = st.rho_vector(rho);
    let mut chol = st.factor(&rho_vec);

    let mut x = DVector::zeros(n);
    let mut z = DVector::zeros(m);
    let mut y = DVector::zeros(m);
    let mut z_new = DVector::zeros(m);
    let mut v_arg = DVector::zeros(m);
    let mut y_prev = y.clone();

    let mut last = measure(&st, &x, &z, &y);
    let mut iterations = 0;
    let mut next_adapt = ADAPT_EVERY;
    while iterations < cfg.max_iterations {
        iterations += 1;

        // x-step: (σI + KᵀRK) x̃ = σx + Kᵀ(Rz - y)
        let rz_minus_y = rho_vec.component_mul(&z) - &y;
        let rhs = &x * SIGMA + st.k.tr_mul(&rz_minus_y);
        let x_tilde = chol.solve(&rhs);
        let kx_tilde = &st.k * &x_tilde;
        let v = &kx_tilde * RELAXATION + &z * (1.0 - RELAXATION);
        x = &x_tilde * RELAXATION + &x * (1.0 - RELAXATION);

        // z-step and multiplier update.
        v_arg.copy_from(&v);
        for r in 0..m {
            v_arg[r] += y[r] / rho_vec[r];
        }
        st.prox(&v_arg, &rho_vec, &mut z_new);
        y_prev.copy_from(&y);
        for r in 0..m {
            y[r] += rho_vec[r] * (v[r] - z_new[r]);
        }
        std::mem::swap(&mut z, &mut z_new);

        if iterations % CHECK_EVERY != 0 && iterations != cfg.max_iterations {
            continue;
        }
        last = measure(&st, &x, &z, &y);
        let eps_p = cfg.tol_primal * (1.0 + last.primal_scale);
        let eps_d = cfg.tol_dual * (1.0 + last.dual_scale);
        let eps_g = cfg.tol_gap * (1.0 + last.objective.abs() + last.dual_objective.abs());
        if last.primal <= eps_p && last.dual <= eps_d && last.gap <= eps_g {
            let candidate = finalize(&st, p, &x, &z, cfg);
            if meets_optimality_bounds(p, &candidate, cfg) {
                return AdmmOutcome {
                    x: candidate,
                    status: Status::Optimal,
                    infeasibility: None,
                    residuals: residuals_of(&last),
                    iterations,
                };
            }
        }

        let dy = &y - &y_prev;
        if infeasibility_certificate(&st, &dy) {
            return AdmmOutcome {
                x,
                status: Status::Infeasible,
                infeasibility: Some(InfeasibilityKind::Certified),
                residuals: residuals_of(&last),
                iterations,
            };
        }

        if iterations == next_adapt {
            next_adapt *= 2;
            let pr = last.primal / last.primal_scale.max(1e-12);
            let du = last.dual / last.dual_scale.max(1e-12);
            if pr > 0.0 && du > 0.0 {
                let proposed = (rho * (pr / du).sqrt()).clamp(RHO_MIN, RHO_MAX);
                if proposed > rho * ADAPT_FACTOR || proposed < rho / ADAPT_FACTOR {
                    rho = proposed;
                    rho_vec = st.rho_vector(rho);
                    chol = st.factor(&rho_vec);
                }
            }
        }
    }

    if last.primal > HEURISTIC_INFEASIBILITY_RESIDUAL * (1.0 + last.primal_scale) {
        return AdmmOutcome {
            x,
            status: Status::Infeasible,
            infeasibility: Some(InfeasibilityKind::Heuristic),
            residuals: residuals_of(&last),
            iterations,
        };
    }
    let x = finalize(&st, p, &x, &z, cfg);
    AdmmOutcome { x, status: Status::IterationLimit, infeasibility: None, residuals: residuals_of(&last), iterations }
}

fn residuals_of(m: &Measures) -> Residuals {
    Residuals { primal: m.primal, dual: m.dual, gap: m.gap }
}

/// Projects `x` onto the affine hull of the identified active set: all
/// equalities, inequality rows held at their bound, and zero blocks.
fn polish(st: &Stacked, p: &ConicProgram, x: &DVector<f64>, z: &DVector<f64>) -> Option<DVector<f64>> {
    let n = x.len();
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for r in 0..st.m_eq + st.m_in {
        if r < st.m_eq || z[r] == st.b[r] {
            rows.push((st.k.row(r).iter().copied().collect(), st.b[r]));
        }
    }
    for (gi, &(start, len)) in st.groups.iter().enumerate() {
        if z.rows(start, len).iter().all(|&v| v == 0.0) {
            let g = p.groups[gi];
            for j in 0..g.len {
                let mut e = vec![0.0; n];
                e[g.start + j] = 1.0;
                rows.push((e, 0.0));
            }
        }
    }
    if rows.is_empty() {
        return None;
    }
    let c = DMatrix::from_fn(rows.len(), n, |r, j| rows[r].0[j]);
    let d = DVector::from_fn(rows.len(), |r, _| rows[r].1);
    let resid = &d - &c * x;
    let svd = c.svd(true, true);
    let delta = svd.solve(&resid, 1e-12).ok()?;
    Some(x + delta)
}

fn violation(p: &ConicProgram, x: &DVector<f64>) -> f64 {
    p.eq_violation(x).max((-p.min_slack(x)).max(0.0))
}

/// The bounds every `Optimal` solution satisfies in the program's own units.
pub(crate) fn meets_optimality_bounds(p: &ConicProgram, x: &DVector<f64>, cfg: &SolverConfig) -> bool {
    let eq_ok = p.eq_violation(x) <= cfg.tol_primal * (1.0 + p.labels.norm());
    eq_ok && p.min_slack(x) >= -cfg.tol_primal
}

/// Polishes when that lowers the constraint violation without moving the objective.
fn finalize(st: &Stacked, p: &ConicProgram, x: &DVector<f64>, z: &DVector<f64>, cfg: &SolverConfig) -> DVector<f64> {
    if cfg.polish {
        if let Some(polished) = polish(st, p, x, z) {
            let before = violation(p, x);
            let after = violation(p, &polished);
            let obj_before = p.objective(x);
            let drift = (p.objective(&polished) - obj_before).abs();
            if after < before && drift <= 1e-6 * (1.0 + obj_before) {
                return polished;
            }
        }
    }
    x.clone()
}
