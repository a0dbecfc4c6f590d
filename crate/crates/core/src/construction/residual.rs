//! `R = ΔW + ρ⁺e^W/∫e^W − λe^{−W} = E₁ − E₂`, with `ΔW` taken from the
//! equations of its parts: `Δz = −ρ h e^z/∫h e^z` and `ΔPw_i = −|x − ξ_i|^{α_i−2}e^{w_i}`.

use serde::{Deserialize, Serialize};

use super::{ApproxSolution, Mode, SiteValues};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualReport {
    pub p: Vec<f64>,
    pub norm_r: Vec<f64>,
    pub norm_e1: Vec<f64>,
    pub norm_e2: Vec<f64>,
    pub log_int_exp_w: f64,
    /// Tower mode: `|∫e^W − (ρ⁺/ρ₀)∫e^{z−8kπG(·,0)}|` relative to the second term.
    pub int_exp_w_defect: Option<f64>,
}

/// `(E₁, E₂)` at the sites of `vals`, with `log_int` the logarithm of `∫e^W`.
pub fn residual_parts(sol: &ApproxSolution, vals: &SiteValues, log_int: f64) -> (Vec<f64>, Vec<f64>) {
    let n = vals.w.len();
    let ll = sol.lambda.ln();
    let rho_z = sol.mean_field.rho;
    let log_n = sol.mean_field.log_normalization;
    let mut e1 = Vec::with_capacity(n);
    let mut e2 = Vec::with_capacity(n);
    for s in 0..n {
        let w = vals.w[s];
        let mut a = sol.rho_plus * (w - log_int).exp() - rho_z * (vals.log_h[s] + vals.z[s] - log_n).exp();
        let mut b = (ll - w).exp();
        for (i, _) in sol.bubbles.iter().enumerate() {
            let d = vals.log_density[i][s].exp();
            if sol.mode == Mode::Tower && (i + 1) % 2 == 0 {
                a -= d;
            } else {
                b -= d;
            }
        }
        e1.push(a);
        e2.push(b);
    }
    (e1, e2)
}

pub fn residual_decomposition(sol: &ApproxSolution, p: &[f64]) -> Result<ResidualReport> {
    if p.iter().any(|&v| !(v >= 1.0 && v.is_finite())) {
        return Err(Error::InvalidInput("norm exponents must be at least 1".into()));
    }
    let (e1, e2) = residual_parts(sol, &sol.hybrid, sol.log_int_exp_w);
    let r: Vec<f64> = e1.iter().zip(&e2).map(|(a, b)| a - b).collect();
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("residual overflow; check lambda and the sign of W".into()));
    }
    let rule = &sol.rule;
    let int_exp_w_defect = (sol.mode == Mode::Tower).then(|| {
        let reference = sol.rho_plus / sol.mean_field.rho * sol.mean_field.log_normalization.exp();
        (sol.log_int_exp_w.exp() - reference).abs() / reference
    });
    Ok(ResidualReport {
        p: p.to_vec(),
        norm_r: p.iter().map(|&q| rule.lp_norm(&r, q)).collect(),
        norm_e1: p.iter().map(|&q| rule.lp_norm(&e1, q)).collect(),
        norm_e2: p.iter().map(|&q| rule.lp_norm(&e2, q)).collect(),
        log_int_exp_w: sol.log_int_exp_w,
        int_exp_w_defect,
    })
}
