//! Reduced energy `Λ(ξ) = I_ξ(z) − 32π²(Σ H(ξ_i,ξ_i) + Σ_{i≠j} G(ξ_i,ξ_j))`,
//! its gradient, critical configurations, and the projected problems for `φ`.

pub mod energy;
pub mod projected;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::green::fundamental_grad;
use crate::fem::{Field, GreensOracle};
use crate::mean_field::{solve_mfe, Configuration, MeanFieldSolution, SolveOptions, Sources};

pub use energy::{energy_j, energy_of_field, energy_pairing, energy_report, reduced_energy, EnergyReport, EnergyTerms};
pub use projected::{
    projected_linear_solve, projected_nonlinear_solve, ProjectedOperator, ReductionOptions, ReductionResult,
};

/// `Σ_i H(ξ_i,ξ_i) + Σ_i Σ_{j≠i} G(ξ_i,ξ_j)`.
pub fn interaction(config: &Configuration, oracle: &GreensOracle) -> Result<f64> {
    let pts = config.points();
    let mut s = 0.0;
    for (i, &p) in pts.iter().enumerate() {
        s += oracle.regular_part(p, p)?;
        for (j, &q) in pts.iter().enumerate() {
            if i != j {
                s += oracle.green(p, q)?;
            }
        }
    }
    Ok(s)
}

#[derive(Clone, Debug)]
pub struct LambdaValue {
    pub value: f64,
    /// `I_ξ(z) = ½∫|∇z|² − ρ⁺ log ∫ h e^z`.
    pub mean_field_energy: f64,
    pub interaction: f64,
    pub mean_field: MeanFieldSolution,
}

pub fn lambda_from_solution(mean_field: MeanFieldSolution, oracle: &GreensOracle) -> Result<LambdaValue> {
    let config = match &mean_field.sources {
        Sources::Points(c) => c.clone(),
        Sources::Origin { .. } => return Err(Error::InvalidInput("reduced energy needs point sources".into())),
    };
    let inter = interaction(&config, oracle)?;
    let mfe = mean_field.functional();
    Ok(LambdaValue { value: mfe - 32.0 * PI * PI * inter, mean_field_energy: mfe, interaction: inter, mean_field })
}

pub fn lambda_functional(
    config: &Configuration,
    rho_plus: f64,
    oracle: &GreensOracle,
    opts: &SolveOptions,
    warm: Option<&Field>,
) -> Result<LambdaValue> {
    let mf = solve_mfe(oracle, rho_plus, Sources::Points(config.clone()), opts, warm)?;
    lambda_from_solution(mf, oracle)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// `∂z/∂x(ξ_j)` through the Green representation of `z` over the quadrature points.
    #[default]
    Representation,
    /// `∂z/∂x(ξ_j)` from the least-squares gradient of the nodal field.
    LeastSquares,
}

/// `∂_{ξ_j}Λ = 8π ∂z/∂x(ξ_j) − 64π²(∂₁H(ξ_j,ξ_j) + Σ_{i≠j} ∂₁G(ξ_j,ξ_i))`.
pub fn grad_lambda_from(mean_field: &MeanFieldSolution, oracle: &GreensOracle, method: GradientMethod) -> Result<Vec<[f64; 2]>> {
    let config = match &mean_field.sources {
        Sources::Points(c) => c,
        Sources::Origin { .. } => return Err(Error::InvalidInput("reduced energy needs point sources".into())),
    };
    let pts = config.points();
    let space = mean_field.space();
    let e = mean_field.density_qp();
    let mut out = Vec::with_capacity(pts.len());
    for (j, &p) in pts.iter().enumerate() {
        let dz = match method {
            GradientMethod::LeastSquares => mean_field.z.gradient(p),
            GradientMethod::Representation => {
                // ∂_ξ log h = −8π(∂_ξ Φ(x − ξ) + ∂_ξ H(x, ξ)) and ∂_ξ Φ(x − ξ) = −∇_x Φ
                let dh = oracle.regular_source_grad_at_qp(p)?;
                let mut g = [0.0; 2];
                for (q, (&x, &w)) in space.qp().iter().zip(space.qw()).enumerate() {
                    let f = fundamental_grad(x, p);
                    let c = w * e[q];
                    g[0] += c * (dh[0][q] - f[0]);
                    g[1] += c * (dh[1][q] - f[1]);
                }
                [mean_field.rho * g[0], mean_field.rho * g[1]]
            }
        };
        let mut gi = oracle.robin_grad(p)?;
        for (i, &q) in pts.iter().enumerate() {
            if i != j {
                let g = oracle.green_grad_x(p, q)?;
                gi[0] += 2.0 * g[0];
                gi[1] += 2.0 * g[1];
            }
        }
        out.push([8.0 * PI * dz[0] - 32.0 * PI * PI * gi[0], 8.0 * PI * dz[1] - 32.0 * PI * PI * gi[1]]);
    }
    Ok(out)
}

pub fn grad_lambda(
    config: &Configuration,
    rho_plus: f64,
    oracle: &GreensOracle,
    opts: &SolveOptions,
) -> Result<Vec<[f64; 2]>> {
    let v = lambda_functional(config, rho_plus, oracle, opts, None)?;
    grad_lambda_from(&v.mean_field, oracle, GradientMethod::default())
}

/// Central differences of `Λ` in every coordinate.
pub fn fd_grad_lambda(
    config: &Configuration,
    rho_plus: f64,
    oracle: &GreensOracle,
    opts: &SolveOptions,
    step: f64,
    warm: Option<&Field>,
) -> Result<Vec<[f64; 2]>> {
    let d = oracle.domain();
    let mut out = vec![[0.0; 2]; config.k()];
    for (i, o) in out.iter_mut().enumerate() {
        for c in 0..2 {
            let p = lambda_functional(&config.shifted(i, c, step, d)?, rho_plus, oracle, opts, warm)?.value;
            let m = lambda_functional(&config.shifted(i, c, -step, d)?, rho_plus, oracle, opts, warm)?.value;
            o[c] = (p - m) / (2.0 * step);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalOptions {
    pub grad_tol: f64,
    pub max_descent: usize,
    pub max_newton: usize,
    pub armijo: f64,
    /// Switch from descent to Newton once `‖∇Λ‖` drops below this.
    pub newton_switch: f64,
    pub hessian_step: f64,
}

impl Default for CriticalOptions {
    fn default() -> Self {
        Self { grad_tol: 1e-6, max_descent: 500, max_newton: 30, armijo: 1e-4, newton_switch: 1.0, hessian_step: 1e-5 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub value: f64,
    pub grad_norm: f64,
    pub hessian_eigenvalues: Vec<f64>,
    pub min_abs_eigenvalue: f64,
    pub barrier_active: bool,
    pub descent_steps: usize,
    pub newton_steps: usize,
    pub converged: bool,
}

fn flat(g: &[[f64; 2]]) -> Vec<f64> {
    g.iter().flat_map(|v| v.iter().copied()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn moved(config: &Configuration, dir: &[f64], t: f64, oracle: &GreensOracle) -> Result<Configuration> {
    let pts = config.points().iter().enumerate().map(|(i, p)| [p[0] + t * dir[2 * i], p[1] + t * dir[2 * i + 1]]).collect();
    Configuration::new(pts, oracle.domain())
}

struct Evaluator<'a> {
    oracle: &'a GreensOracle,
    rho: f64,
    opts: SolveOptions,
}

impl Evaluator<'_> {
    fn eval(&self, c: &Configuration, warm: Option<&Field>) -> Result<(LambdaValue, Vec<f64>)> {
        let v = lambda_functional(c, self.rho, self.oracle, &self.opts, warm)?;
        let g = flat(&grad_lambda_from(&v.mean_field, self.oracle, GradientMethod::Representation)?);
        Ok((v, g))
    }

    fn hessian(&self, c: &Configuration, step: f64, warm: &Field) -> Result<DMatrix<f64>> {
        let n = 2 * c.k();
        let mut h = DMatrix::zeros(n, n);
        for a in 0..n {
            let gp = self.eval(&c.shifted(a / 2, a % 2, step, self.oracle.domain())?, Some(warm))?.1;
            let gm = self.eval(&c.shifted(a / 2, a % 2, -step, self.oracle.domain())?, Some(warm))?.1;
            for b in 0..n {
                h[(b, a)] = (gp[b] - gm[b]) / (2.0 * step);
            }
        }
        Ok((&h + h.transpose()) * 0.5)
    }
}

/// Armijo descent on `Λ`, then Newton on the finite-difference Hessian.
pub fn find_critical_config(
    initial: &Configuration,
    rho_plus: f64,
    oracle: &GreensOracle,
    solve: &SolveOptions,
    opts: &CriticalOptions,
) -> Result<(Configuration, Certificate)> {
    let ev = Evaluator { oracle, rho: rho_plus, opts: solve.clone() };
    let mut x = initial.clone();
    let (mut v, mut g) = ev.eval(&x, None)?;
    let mut t = 1e-3;
    let mut descent = 0;
    let mut barrier = false;
    while norm(&g) > opts.newton_switch.max(opts.grad_tol) && descent < opts.max_descent {
        descent += 1;
        let gg = g.iter().map(|a| a * a).sum::<f64>();
        let dir: Vec<f64> = g.iter().map(|a| -a).collect();
        let mut accepted = false;
        for _ in 0..60 {
            match moved(&x, &dir, t, oracle) {
                Ok(trial) => {
                    let (tv, tg) = ev.eval(&trial, Some(&v.mean_field.z))?;
                    if tv.value <= v.value - opts.armijo * t * gg {
                        x = trial;
                        v = tv;
                        g = tg;
                        accepted = true;
                        break;
                    }
                }
                Err(_) => barrier = true,
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::Numerical(if barrier {
                "descent stalled against the separation/clearance barrier".into()
            } else {
                "descent line search exhausted".into()
            }));
        }
        barrier = false;
        t *= 2.0;
    }
    let mut newton = 0;
    let mut hess = ev.hessian(&x, opts.hessian_step, &v.mean_field.z)?;
    while norm(&g) > opts.grad_tol && newton < opts.max_newton {
        newton += 1;
        let eig = hess.clone().symmetric_eigen();
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        // pseudo-inverse: flat directions (rotations of a symmetric domain) are left alone
        let gv = DVector::from_vec(g.clone());
        let mut step = DVector::zeros(g.len());
        for (i, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam.abs() > 1e-8 * scale {
                let u = eig.eigenvectors.column(i);
                step -= u * (u.dot(&gv) / lam);
            }
        }
        let dir: Vec<f64> = step.iter().copied().collect();
        let gn = norm(&g);
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            match moved(&x, &dir, s, oracle) {
                Ok(trial) => {
                    let (tv, tg) = ev.eval(&trial, Some(&v.mean_field.z))?;
                    if norm(&tg) < gn {
                        x = trial;
                        v = tv;
                        g = tg;
                        accepted = true;
                        break;
                    }
                }
                Err(_) => barrier = true,
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
        barrier = false;
        if norm(&g) > opts.grad_tol {
            hess = ev.hessian(&x, opts.hessian_step, &v.mean_field.z)?;
        }
    }
    let hess = ev.hessian(&x, opts.hessian_step, &v.mean_field.z)?;
    let mut eigs: Vec<f64> = hess.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let grad_norm = norm(&g);
    let cert = Certificate {
        value: v.value,
        grad_norm,
        min_abs_eigenvalue: eigs.iter().fold(f64::INFINITY, |m, e| m.min(e.abs())),
        hessian_eigenvalues: eigs,
        barrier_active: barrier,
        descent_steps: descent,
        newton_steps: newton,
        converged: grad_norm <= opts.grad_tol && !barrier,
    };
    Ok((x, cert))
}

/// Configuration with coordinates below `tol` in magnitude set to zero, so that a
/// critical point found at round-off distance from a symmetry center sits on it.
pub fn snap_to_axes(config: &Configuration, tol: f64, oracle: &GreensOracle) -> Result<Configuration> {
    let pts = config.points().iter().map(|p| p.map(|c| if c.abs() < tol { 0.0 } else { c })).collect();
    Configuration::new(pts, oracle.domain())
}
