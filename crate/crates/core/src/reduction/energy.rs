//! `J(u) = ½∫|∇u|² − ρ⁺ log ∫e^u − λ∫e^{−u}` for `u = W + φ`, and the
//! expansion defect against `Λ`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::construction::ApproxSolution;
use crate::error::{Error, Result};
use crate::fem::{Field, Space};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyTerms {
    /// `½∫|∇u|²`.
    pub dirichlet: f64,
    /// `ρ⁺ log ∫e^u`.
    pub log_term: f64,
    /// `λ∫e^{−u}`.
    pub exp_term: f64,
    pub total: f64,
}

impl EnergyTerms {
    fn new(dirichlet: f64, log_term: f64, exp_term: f64) -> Result<Self> {
        let total = dirichlet - log_term - exp_term;
        if !total.is_finite() {
            return Err(Error::Numerical(
                "energy overflow in e^{−u}; check the sign convention or the lambda regime".into(),
            ));
        }
        Ok(Self { dirichlet, log_term, exp_term, total })
    }
}

/// Energy of `W + φ` by hybrid quadrature; `∫∇W·∇φ = ∫∇z·∇φ + Σ s_i ∫dens_i φ`.
pub fn energy_j(sol: &ApproxSolution, phi: Option<&Field>) -> Result<EnergyTerms> {
    let space = sol.oracle.space();
    let mut dirichlet = 0.5 * sol.dirichlet_integral();
    let mut u = sol.hybrid.w.clone();
    if let Some(p) = phi {
        let pv = sol.rule.sites.interp(p.values());
        let pi = space.restrict(p.values());
        let zi = space.restrict(sol.mean_field.z.values());
        let mut cross = space.stiffness().form(&zi, &pi);
        for (i, b) in sol.bubbles.iter().enumerate() {
            let v: Vec<f64> = sol.hybrid.log_density[i].iter().zip(&pv).map(|(d, p)| d.exp() * p).collect();
            cross += b.sign * sol.rule.integrate(&v);
        }
        dirichlet += cross + 0.5 * space.stiffness().form(&pi, &pi);
        for (o, p) in u.iter_mut().zip(&pv) {
            *o += p;
        }
    }
    let ll = sol.lambda.ln();
    let log_term = sol.rho_plus * sol.rule.log_integral_exp(&u);
    let exp_term = sol.rule.integrate(&u.iter().map(|v| (ll - v).exp()).collect::<Vec<_>>());
    EnergyTerms::new(dirichlet, log_term, exp_term)
}

/// Energy of a plain mesh field by mesh quadrature.
pub fn energy_of_field(space: &Space, u: &Field, rho_plus: f64, lambda: f64) -> Result<EnergyTerms> {
    let dirichlet = 0.5 * space.dirichlet_form(u.values(), u.values());
    let uq = space.interpolate_qp(u.values());
    let m = uq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_int = m + space.integrate_qp(&uq.iter().map(|v| (v - m).exp()).collect::<Vec<_>>()).ln();
    let log_term = if rho_plus == 0.0 { 0.0 } else { rho_plus * log_int };
    let exp_term = if lambda == 0.0 { 0.0 } else { lambda * space.integrate_qp(&uq.iter().map(|v| (-v).exp()).collect::<Vec<_>>()) };
    EnergyTerms::new(dirichlet, log_term, exp_term)
}

/// `J(u)` differentiated weakly: `⟨−Δu − ρ⁺e^u/∫e^u + λe^{−u}, v⟩` for mesh fields.
pub fn energy_pairing(space: &Space, u: &Field, v: &Field, rho_plus: f64, lambda: f64) -> f64 {
    let uq = space.interpolate_qp(u.values());
    let vq = space.interpolate_qp(v.values());
    let m = uq.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let eu: Vec<f64> = uq.iter().map(|x| (x - m).exp()).collect();
    let z = space.integrate_qp(&eu);
    let a = space.integrate_qp(&eu.iter().zip(&vq).map(|(e, v)| e * v).collect::<Vec<_>>()) / z;
    let b = space.integrate_qp(&uq.iter().zip(&vq).map(|(u, v)| (-u).exp() * v).collect::<Vec<_>>());
    space.dirichlet_form(u.values(), v.values()) - rho_plus * a + lambda * b
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EnergyReport {
    pub j_value: f64,
    pub lambda_value: f64,
    pub lambda_param: f64,
    pub k: usize,
    /// `J(W) + 8πk log λ + (16π − 24π log 2)k − Λ(ξ)`.
    pub defect: f64,
}

pub fn expansion_constant(k: usize) -> f64 {
    (16.0 * PI - 24.0 * PI * 2f64.ln()) * k as f64
}

impl EnergyReport {
    pub fn new(j_value: f64, lambda_value: f64, lambda_param: f64, k: usize) -> Self {
        let defect = Self::defect_of(j_value, lambda_value, lambda_param, k);
        Self { j_value, lambda_value, lambda_param, k, defect }
    }

    fn defect_of(j: f64, l: f64, lambda: f64, k: usize) -> f64 {
        j + 8.0 * PI * k as f64 * lambda.ln() + expansion_constant(k) - l
    }

    /// Defect recomputed from the stored entries.
    pub fn recomputed_defect(&self) -> f64 {
        Self::defect_of(self.j_value, self.lambda_value, self.lambda_param, self.k)
    }
}

pub fn energy_report(sol: &ApproxSolution, lambda_value: f64) -> Result<EnergyReport> {
    let j = energy_j(sol, None)?;
    Ok(EnergyReport::new(j.total, lambda_value, sol.lambda, sol.k()))
}

/// `J̃(ξ) = J(W_ξ + φ_ξ)`.
pub fn reduced_energy(sol: &ApproxSolution, phi: &Field) -> Result<f64> {
    Ok(energy_j(sol, Some(phi))?.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{triangulate, Domain};
    use std::sync::Arc;

    #[test]
    fn zero_field_energy() {
        let d = Domain::unit_disk(1);
        let s = Space::new(Arc::new(triangulate(&d, 0.1, &[]).unwrap()));
        let area = s.integrate_qp(&vec![1.0; s.qp().len()]);
        let u = Field::zeros(s.mesh().clone());
        let e = energy_of_field(&s, &u, 4.0, 0.5).unwrap();
        assert!((e.total - (-4.0 * area.ln() - 0.5 * area)).abs() < 1e-12);
        let v = Field::from_fn(s.mesh().clone(), |x| 1.0 - x[0] * x[0] - x[1] * x[1]);
        let e = energy_of_field(&s, &v, 0.0, 0.0).unwrap();
        assert!(e.total > 0.0 && (e.total - 0.5 * s.dirichlet_form(v.values(), v.values())).abs() < 1e-15);
    }
}
