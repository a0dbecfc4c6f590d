//! `u_λ = W + φ` and its residual in the discrete weak form of
//! `Δu + ρ⁺e^u/∫e^u − λe^{−u} = 0`.

use serde::Serialize;

use super::ApproxSolution;
use crate::error::Result;
use crate::fem::Field;
use crate::reduction::ReductionResult;

/// Multiplier size below which `W + φ` counts as a solution rather than a projected one.
pub const GENUINE_MULTIPLIER: f64 = 1e-8;
pub const GENUINE_RESIDUAL: f64 = 1e-7;

#[derive(Clone, Debug, Serialize)]
pub struct FullSolution {
    #[serde(skip)]
    pub u: Field,
    pub genuine: bool,
    pub label: &'static str,
    /// `‖r‖₂ / ‖λ∫e^{−u}ψ‖₂` over interior test functions.
    pub pde_residual: f64,
    pub max_multiplier: f64,
    pub rho_plus: f64,
    /// `λ∫e^{−u}` by hybrid quadrature.
    pub rho_minus: f64,
    /// Mesh-quadrature gap between `λe^{−u}` and `ρ⁻e^{−u}/∫e^{−u}` as loads.
    pub euler_lagrange_gap: f64,
    pub boundary_defect: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn full_solution(sol: &ApproxSolution, red: &ReductionResult) -> Result<FullSolution> {
    let space = sol.oracle.space();
    let phi = red.phi.values();
    let pq = space.interpolate_qp(phi);
    let uq: Vec<f64> = sol.qp.w.iter().zip(&pq).map(|(w, p)| w + p).collect();
    let ll = sol.lambda.ln();
    let m = uq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let eu: Vec<f64> = uq.iter().map(|u| (u - m).exp()).collect();
    let int_eu = space.integrate_qp(&eu);
    let neg: Vec<f64> = uq.iter().map(|u| (ll - u).exp()).collect();

    let zphi: Vec<f64> = sol.mean_field.z.values().iter().zip(phi).map(|(a, b)| a + b).collect();
    let mut res = space.apply_stiffness(&zphi);
    for (i, b) in sol.bubbles.iter().enumerate() {
        let dens: Vec<f64> = sol.qp.log_density[i].iter().map(|d| d.exp()).collect();
        for (r, l) in res.iter_mut().zip(space.load(&dens)) {
            *r += b.sign * l;
        }
    }
    let plus = space.load(&eu.iter().map(|e| sol.rho_plus * e / int_eu).collect::<Vec<_>>());
    let minus = space.load(&neg);
    for ((r, p), q) in res.iter_mut().zip(&plus).zip(&minus) {
        *r += q - p;
    }
    let pde_residual = norm(&res) / norm(&minus);

    // ρ⁻ e^{−u}/∫e^{−u} with ρ⁻ = λ∫e^{−u} on the same rule
    let rho_minus_mesh = space.integrate_qp(&neg);
    let int_neg = rho_minus_mesh / sol.lambda;
    let el: Vec<f64> = neg.iter().map(|v| rho_minus_mesh * (v / sol.lambda) / int_neg).collect();
    let el_load = space.load(&el);
    let gap = norm(&el_load.iter().zip(&minus).map(|(a, b)| a - b).collect::<Vec<_>>()) / norm(&minus);

    let pv = sol.rule.sites.interp(phi);
    let rho_minus = sol.rule.integrate(&sol.hybrid.w.iter().zip(&pv).map(|(w, p)| (ll - w - p).exp()).collect::<Vec<_>>());
    let w = sol.nodal_w();
    let u: Vec<f64> = w.iter().zip(phi).map(|(a, b)| a + b).collect();
    let mesh = space.mesh().clone();
    let boundary_defect = u.iter().zip(mesh.boundary_mask()).filter(|(_, b)| **b).fold(0.0f64, |m, (v, _)| m.max(v.abs()));
    let max_multiplier = red.max_multiplier();
    let genuine = max_multiplier < GENUINE_MULTIPLIER && pde_residual < GENUINE_RESIDUAL;
    Ok(FullSolution {
        u: Field::new(mesh, u)?,
        genuine,
        label: if genuine { "solution" } else { "projected solution" },
        pde_residual,
        max_multiplier,
        rho_plus: sol.rho_plus,
        rho_minus,
        euler_lagrange_gap: gap,
        boundary_defect,
    })
}
