//! Projected problems for `φ ∈ H¹₀`:
//! `Δφ + ρ⁺(e^Wφ/∫e^W − e^W∫e^Wφ/(∫e^W)²) + Vφ = Δh + Σ c_ij e^{w_i} Z_ij`,
//! `∫∇φ·∇PZ_ij = 0`, with `V = Σ e^{w_i}` in partial mode. The tower works in the
//! symmetric class with `V = λe^{−W}` and no multipliers.

use serde::{Deserialize, Serialize};

use crate::bubbles::{project_kernel, ProjectedKernel};
use crate::construction::residual::residual_parts;
use crate::construction::{ApproxSolution, Mode};
use crate::error::{Error, Result};
use crate::fem::{Border, Factor, Field};
use crate::mean_field::linearization;

#[derive(Clone, Debug)]
pub struct ReductionResult {
    pub phi: Field,
    /// `c_ij` per bubble (empty in tower mode).
    pub multipliers: Vec<[f64; 2]>,
    pub phi_norm: f64,
    /// `max |∫∇φ·∇PZ_ij|`.
    pub orthogonality_defect: f64,
    pub iterations: usize,
    /// Energy norm of the last fixed-point increment.
    pub increment: f64,
}

impl ReductionResult {
    pub fn max_multiplier(&self) -> f64 {
        self.multipliers.iter().flat_map(|c| c.iter()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReductionOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ReductionOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100 }
    }
}

/// Factorized saddle-point operator for one assembly.
pub struct ProjectedOperator {
    pub factor: Factor,
    pub kernels: Vec<ProjectedKernel>,
    /// `e^W / ∫e^W` at quadrature points (mesh integral).
    pub exp_w: Vec<f64>,
    /// Potential `V` at quadrature points.
    pub potential: Vec<f64>,
    n: usize,
}

impl ProjectedOperator {
    pub fn new(sol: &ApproxSolution) -> Result<Self> {
        let space = sol.oracle.space();
        let n = space.n_dofs();
        let li = sol.log_int_exp_w_mesh;
        let exp_w: Vec<f64> = sol.qp.w.iter().map(|w| (w - li).exp()).collect();
        let potential: Vec<f64> = match sol.mode {
            Mode::Partial => (0..sol.qp.w.len()).map(|q| sol.qp.log_density.iter().map(|d| d[q].exp()).sum()).collect(),
            Mode::Tower => {
                let ll = sol.lambda.ln();
                sol.qp.w.iter().map(|w| (ll - w).exp()).collect()
            }
        };
        let (mut a, nonlocal) = linearization(space, sol.rho_plus, &exp_w);
        a.axpy(-1.0, &space.weighted_mass(&potential));
        let mut kernels = Vec::new();
        if sol.mode == Mode::Partial {
            for b in &sol.bubbles {
                for j in 1..=2 {
                    kernels.push(project_kernel(b.projection.params, j, space)?);
                }
            }
        }
        let m = 1 + kernels.len();
        let mut cols = nonlocal.cols;
        let mut rows = nonlocal.rows;
        for k in &kernels {
            cols.push(k.load.clone());
            rows.push(k.load.clone());
        }
        let mut corner = vec![0.0; m * m];
        corner[0] = -1.0;
        let factor = Factor::bordered(&a, &Border { cols, rows, corner }).map_err(|e| {
            Error::Solver(format!("projected operator is singular ({e}); lambda too large or configuration degenerate"))
        })?;
        Ok(Self { factor, kernels, exp_w, potential, n })
    }

    /// Solves with interior load `b`; returns `(φ interior, c)`.
    fn solve(&self, b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut rhs = b.to_vec();
        rhs.resize(self.factor.dim(), 0.0);
        let x = self.factor.solve(&rhs);
        // x[n] is the auxiliary nonlocal unknown; the rest are c_ij
        (x[..self.n].to_vec(), x[self.n + 1..].to_vec())
    }

    fn result(&self, sol: &ApproxSolution, phi: Vec<f64>, c: Vec<f64>, iterations: usize, increment: f64) -> Result<ReductionResult> {
        let space = sol.oracle.space();
        let orth = self
            .kernels
            .iter()
            .map(|k| k.load.iter().zip(&phi).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max);
        let phi_norm = space.stiffness().form(&phi, &phi).max(0.0).sqrt();
        let multipliers = c.chunks(2).map(|p| [p[0], p[1]]).collect();
        Ok(ReductionResult {
            phi: Field::new(space.mesh().clone(), space.extend_zero(&phi))?,
            multipliers,
            phi_norm,
            orthogonality_defect: orth,
            iterations,
            increment,
        })
    }

    pub fn max_kernel_norm(&self) -> f64 {
        self.kernels.iter().fold(0.0, |m, k| m.max(k.energy_norm))
    }
}

/// Linear problem with right-hand side `Δh` for `h ∈ H¹₀`.
pub fn projected_linear_solve(sol: &ApproxSolution, op: &ProjectedOperator, h: &Field) -> Result<ReductionResult> {
    let space = sol.oracle.space();
    if h.boundary_max_abs() > 1e-12 {
        return Err(Error::InvalidInput("h must vanish on the boundary".into()));
    }
    // −∫Δh ψ = ∫∇h·∇ψ
    let b = space.apply_stiffness(h.values());
    let (phi, c) = op.solve(&b);
    op.result(sol, phi, c, 1, 0.0)
}

/// Fixed point `φ ← L⁻¹(R + S(φ) + N(φ))` until the energy-norm increment is below `tol`.
pub fn projected_nonlinear_solve(
    sol: &ApproxSolution,
    op: &ProjectedOperator,
    opts: &ReductionOptions,
) -> Result<ReductionResult> {
    let space = sol.oracle.space();
    let nq = sol.qp.w.len();
    let (e1, e2) = residual_parts(sol, &sol.qp, sol.log_int_exp_w_mesh);
    let r: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| a - b).collect();
    let ll = sol.lambda.ln();
    let lam_exp_neg: Vec<f64> = sol.qp.w.iter().map(|w| (ll - w).exp()).collect();
    let e = &op.exp_w;
    let mut phi = vec![0.0; space.n_dofs()];
    let mut c = Vec::new();
    for it in 1..=opts.max_iter {
        let pq = space.interpolate_qp(&space.extend_zero(&phi));
        // normalized pieces of g(W + φ) − g(W) − g'(W)φ with e = e^W/∫e^W
        let a: f64 = space.integrate_qp(&(0..nq).map(|q| e[q] * pq[q].exp()).collect::<Vec<_>>());
        let b: f64 = space.integrate_qp(&(0..nq).map(|q| e[q] * pq[q]).collect::<Vec<_>>());
        let f: Vec<f64> = (0..nq)
            .map(|q| {
                let p = pq[q];
                let s = (lam_exp_neg[q] - op.potential[q]) * p;
                let ng = e[q] * (p.exp() / a - 1.0 - p + b);
                let nf = lam_exp_neg[q] * ((-p).exp_m1() + p);
                r[q] + s + sol.rho_plus * ng - nf
            })
            .collect();
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence(format!("fixed-point iterate overflowed at step {it}")));
        }
        let (next, cn) = op.solve(&space.load(&f));
        let d: Vec<f64> = next.iter().zip(&phi).map(|(a, b)| a - b).collect();
        let inc = space.stiffness().form(&d, &d).max(0.0).sqrt();
        phi = next;
        c = cn;
        if inc < opts.tol {
            return op.result(sol, phi, c, it, inc);
        }
        if !inc.is_finite() || inc > 1e6 {
            return Err(Error::Divergence(format!("fixed-point increments grow ({inc:.3e}); lambda too large")));
        }
    }
    let _ = c;
    Err(Error::Divergence(format!("no contraction after {} iterations; lambda too large", opts.max_iter)))
}
