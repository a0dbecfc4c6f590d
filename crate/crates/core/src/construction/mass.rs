//! Local masses `m₊(p, r) = ρ⁺∫_{B_r(p)}e^u / ∫_Ω e^u` and `m₋(p, r) = λ∫_{B_r(p)}e^{−u}`,
//! extrapolated linearly to `r = 0`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fit::affine_fit;
use super::hybrid::{cutoff, HybridOptions};
use super::ApproxSolution;
use crate::error::{Error, Result};
use crate::fem::{Field, Sites};
use crate::geometry::quadrature::AnnularQuadRule;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LocalMass {
    pub center: [f64; 2],
    pub radii: Vec<f64>,
    pub m_plus: Vec<f64>,
    pub m_minus: Vec<f64>,
    pub m_plus_limit: f64,
    pub m_minus_limit: f64,
    /// `|(m₊ − m₋)² − 8π(m₊ + m₋)| / (8π(m₊ + m₋))` at the extrapolated pair.
    pub relation_defect: f64,
    /// Masses nondecreasing in `r`.
    pub monotone_plus: bool,
    pub monotone_minus: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MassReport {
    pub rho_plus_global: f64,
    pub rho_minus_global: f64,
    pub points: Vec<LocalMass>,
    /// Global mass minus the sum of extrapolated local masses.
    pub residual_plus: f64,
    pub residual_minus: f64,
    /// `λ∫e^{−u}` outside the balls of the smallest radius.
    pub far_field_minus: Option<f64>,
    /// `|global − (Σ local + far field)| / global` at the smallest radius.
    pub additivity_defect: Option<f64>,
}

pub fn relation_defect(m_plus: f64, m_minus: f64) -> f64 {
    let lhs = (m_plus - m_minus).powi(2);
    let rhs = 8.0 * PI * (m_plus + m_minus);
    if rhs == 0.0 {
        lhs.abs()
    } else {
        (lhs - rhs).abs() / rhs
    }
}

fn log_u(sol: &ApproxSolution, sites: &Sites, phi: Option<&Field>) -> Result<Vec<f64>> {
    let mut u = sol.evaluate(sites)?.w;
    if let Some(p) = phi {
        for (o, v) in u.iter_mut().zip(sites.interp(p.values())) {
            *o += v;
        }
    }
    Ok(u)
}

/// Mass accounting for `u = W + φ` (`φ = 0` when absent).
pub fn mass_accounting(
    sol: &ApproxSolution,
    phi: Option<&Field>,
    r_list: &[f64],
    opts: &HybridOptions,
) -> Result<MassReport> {
    if r_list.len() < 2 {
        return Err(Error::InvalidInput("mass extrapolation needs at least two radii".into()));
    }
    let mut radii = r_list.to_vec();
    radii.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let largest_scale = sol.bubbles.iter().map(|b| b.projection.params.delta).fold(0.0, f64::max);
    if radii[0] < 10.0 * largest_scale {
        return Err(Error::InvalidInput(format!(
            "radius {} enters the bubble core (10δ = {:.3e})",
            radii[0],
            10.0 * largest_scale
        )));
    }
    let mesh = sol.oracle.space().mesh();
    let ll = sol.lambda.ln();
    let u_h = log_u(sol, &sol.rule.sites, phi)?;
    let log_int_plus = sol.rule.log_integral_exp(&u_h);
    let em: Vec<f64> = u_h.iter().map(|u| (ll - u).exp()).collect();
    let rho_minus_global = sol.rule.integrate(&em);

    let centers = sol.centers();
    let scales = sol.core_scales();
    let mut points = Vec::with_capacity(centers.len());
    for (c, &scale) in centers.iter().zip(&scales) {
        let mut mp = Vec::with_capacity(radii.len());
        let mut mm = Vec::with_capacity(radii.len());
        for &r in &radii {
            let rule =
                AnnularQuadRule::disk(*c, opts.core_fraction * scale, r, opts.radial_order, opts.angular_order)?;
            let (pts, w): (Vec<[f64; 2]>, Vec<f64>) = rule.nodes().unzip();
            let u = log_u(sol, &Sites::locate(mesh, pts), phi)?;
            let plus: f64 = u.iter().zip(&w).map(|(u, w)| w * (u - log_int_plus).exp()).sum();
            let minus: f64 = u.iter().zip(&w).map(|(u, w)| w * (ll - u).exp()).sum();
            mp.push(sol.rho_plus * plus);
            mm.push(minus);
        }
        let m_plus_limit = affine_fit(&radii, &mp)?.intercept;
        let m_minus_limit = affine_fit(&radii, &mm)?.intercept;
        points.push(LocalMass {
            center: *c,
            radii: radii.clone(),
            monotone_plus: mp.windows(2).all(|p| p[1] >= p[0]),
            monotone_minus: mm.windows(2).all(|p| p[1] >= p[0]),
            relation_defect: relation_defect(m_plus_limit, m_minus_limit),
            m_plus: mp,
            m_minus: mm,
            m_plus_limit,
            m_minus_limit,
        });
    }

    // far field at the smallest radius: mesh part of the hybrid rule plus
    // the cut-off patch integrand on each annulus r < |x − p| < R
    let r0 = radii[0];
    let (far_field_minus, additivity_defect) = if sol.rule.patches.iter().all(|p| r0 <= 0.5 * p.radius) {
        let mut far: f64 = em[sol.rule.n_patch..].iter().zip(&sol.rule.weights[sol.rule.n_patch..]).map(|(e, w)| e * w).sum();
        for p in &sol.rule.patches {
            let rule = AnnularQuadRule::new(p.center, r0, p.radius, opts.radial_order, opts.angular_order)?;
            let (pts, w): (Vec<[f64; 2]>, Vec<f64>) = rule.nodes().unzip();
            let chi: Vec<f64> =
                pts.iter().map(|x| cutoff((x[0] - p.center[0]).hypot(x[1] - p.center[1]), p.radius)).collect();
            let u = log_u(sol, &Sites::locate(mesh, pts), phi)?;
            far += u.iter().zip(w.iter().zip(&chi)).map(|(u, (w, c))| w * c * (ll - u).exp()).sum::<f64>();
        }
        let local: f64 = points.iter().map(|p| p.m_minus[0]).sum();
        (Some(far), Some((rho_minus_global - local - far).abs() / rho_minus_global))
    } else {
        (None, None)
    };

    Ok(MassReport {
        rho_plus_global: sol.rho_plus,
        rho_minus_global,
        residual_plus: sol.rho_plus - points.iter().map(|p| p.m_plus_limit).sum::<f64>(),
        residual_minus: rho_minus_global - points.iter().map(|p| p.m_minus_limit).sum::<f64>(),
        points,
        far_field_minus,
        additivity_defect,
    })
}
