use std::f64::consts::PI;

use rayon::prelude::*;
use sgmf_core::construction::{full_solution, mass_accounting, residual_decomposition, scaling_fit, Params};
use sgmf_core::reduction::{projected_nonlinear_solve, ProjectedOperator, ReductionOptions};

use super::{Ctx, Sweep};
use crate::config::ModeKind;
use crate::error::CliError;
use crate::report::{num, write_json, Checks, Table};

const SLOPE_TOL: f64 = 0.1;
const MASS_REL: f64 = 0.05;

struct Point {
    lambda: f64,
    values: Vec<(String, f64)>,
    phi: Option<sgmf_core::fem::Field>,
}

fn evaluate(ctx: &Ctx, sweep: &Sweep, lambda: f64) -> Result<Point, CliError> {
    let run = &ctx.cfg.run;
    let sol = sweep.assemble(ctx, lambda)?;
    let mut values = Vec::new();
    let rep = residual_decomposition(&sol, &run.p_norms)?;
    for (i, p) in rep.p.iter().enumerate() {
        values.push((format!("residual_L{p}"), rep.norm_r[i]));
        values.push((format!("e1_L{p}"), rep.norm_e1[i]));
        values.push((format!("e2_L{p}"), rep.norm_e2[i]));
    }
    values.push(("rho_minus_w".into(), sol.rho_minus()));
    values.push(("boundary_defect".into(), sol.boundary_defect()));
    match &sol.params {
        Params::Partial(p) => {
            values.push(("far_field_defect".into(), sol.far_field_defect(0.2)));
            values.push(("scale_closure_defect".into(), p.closure_defect()));
        }
        Params::Tower(t) => {
            values.push(("recursion_defect".into(), t.recursion_defect()));
            values.push(("tower_far_defect".into(), sol.tower_far_defect(0.3)?));
            values.push(("int_exp_w_defect".into(), rep.int_exp_w_defect.unwrap_or(f64::NAN)));
            values.push(("symmetry_defect".into(), sol.symmetry_defect().unwrap_or(f64::NAN)));
        }
    }
    for (i, d) in sol.core_scales().iter().enumerate() {
        values.push((format!("delta_{}", i + 1), *d));
    }
    let op = ProjectedOperator::new(&sol)?;
    let phi = match projected_nonlinear_solve(&sol, &op, &ReductionOptions::default()) {
        Ok(red) => {
            let full = full_solution(&sol, &red)?;
            values.push(("converged".into(), 1.0));
            values.push(("phi_norm".into(), red.phi_norm));
            values.push(("max_multiplier".into(), red.max_multiplier()));
            values.push(("rho_plus".into(), full.rho_plus));
            values.push(("rho_minus".into(), full.rho_minus));
            values.push(("pde_residual".into(), full.pde_residual));
            values.push(("genuine".into(), if full.genuine { 1.0 } else { 0.0 }));
            Some(red.phi)
        }
        Err(_) => {
            values.push(("converged".into(), 0.0));
            None
        }
    };
    Ok(Point { lambda, values, phi })
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let run = &ctx.cfg.run;
    let sweep = Sweep::new(ctx)?;
    let points: Vec<Point> =
        sweep.lambdas.par_iter().map(|&l| evaluate(ctx, &sweep, l)).collect::<Result<Vec<_>, _>>()?;
    let mode = match run.mode {
        ModeKind::Partial => "partial",
        ModeKind::Tower => "tower",
    };
    let rho = match run.mode {
        ModeKind::Partial => run.rho_plus,
        ModeKind::Tower => run.rho0,
    };
    let mut t = Table::new(
        format!("{mode} blow-up sweep; one row per (lambda, quantity)"),
        &[
            ("mode", "partial or tower"),
            ("k", "number of bubbles"),
            ("rho", "rho_plus (partial) or rho0 (tower)"),
            ("lambda", "coefficient of e^{-u}"),
            ("quantity", "residual_Lp, e1_Lp, e2_Lp: L^p norms of R = E1 − E2 and its parts; rho_minus_w: λ∫e^{-W}; rho_minus: λ∫e^{-u}; phi_norm: energy norm of the correction; delta_i: core scales"),
            ("value", "value of the quantity"),
        ],
    );
    for p in &points {
        for (q, v) in &p.values {
            t.push(vec![mode.into(), run.k.to_string(), num(rho), num(p.lambda), q.clone(), num(*v)]);
        }
    }
    t.write(&ctx.out.join("sweep.csv"))?;

    let get = |name: &str| -> Vec<f64> {
        points.iter().map(|p| p.values.iter().find(|(q, _)| q == name).map_or(f64::NAN, |(_, v)| *v)).collect()
    };
    let mut checks = Checks::default();
    let mut fits = Table::new(
        "log-log slope fits against lambda",
        &[
            ("quantity", "fitted sweep quantity"),
            ("predicted", "predicted exponent"),
            ("slope", "fitted exponent"),
            ("r2", "coefficient of determination"),
            ("decades", "decades of lambda covered"),
            ("pass", "|slope − predicted| within tolerance"),
        ],
    );
    for &p in &run.p_norms {
        let predicted = match run.mode {
            ModeKind::Partial => (2.0 - p) / (2.0 * p),
            ModeKind::Tower => (2.0 - p) / (2.0 * p * (2.0 * run.k as f64 - 1.0)),
        };
        let name = format!("residual_L{p}");
        if let Ok(f) = scaling_fit(&sweep.lambdas, &get(&name), predicted, SLOPE_TOL) {
            fits.push(vec![name.clone(), num(predicted), num(f.slope), num(f.r2), num(f.decades), f.pass.to_string()]);
            if p == 1.0 {
                checks.add(format!("{name} slope"), f.pass, format!("slope {:.3}, predicted {predicted:.3}", f.slope));
            }
        }
    }
    fits.write(&ctx.out.join("fits.csv"))?;

    let k = run.k as f64;
    let last = points.last().expect("nonempty sweep");
    let target = match run.mode {
        ModeKind::Partial => 8.0 * PI * k,
        ModeKind::Tower => 4.0 * PI * k * (k + 1.0),
    };
    let rho_minus = get("rho_minus").last().copied().unwrap_or(f64::NAN);
    checks.add(
        "rho_minus",
        (rho_minus - target).abs() <= MASS_REL * target,
        format!("λ∫e^(-u) = {rho_minus:.5} at λ = {:e}, target {target:.5}", last.lambda),
    );
    let bd = get("boundary_defect").iter().cloned().fold(0.0, f64::max);
    checks.add("boundary", bd < 1e-10, format!("max |W| on the boundary {bd:.2e}"));

    let sol = sweep.assemble(ctx, last.lambda)?;
    let core = 10.0 * sol.bubbles.iter().map(|b| b.projection.params.delta).fold(0.0, f64::max);
    let radii: Vec<f64> = run.mass_radii.iter().copied().filter(|r| *r >= core).collect();
    if run.mode == ModeKind::Tower {
        let rec = get("recursion_defect").iter().cloned().fold(0.0, f64::max);
        checks.add("recursion", rec < 1e-10, format!("max defect {rec:.2e}"));
        let plus = 4.0 * PI * k * (k - 1.0) + run.rho0;
        checks.add("rho_plus", (sol.rho_plus - plus).abs() < 1e-12, format!("ρ⁺ = {}", sol.rho_plus));
    }
    if radii.len() < 2 {
        println!(
            "mass accounting skipped: fewer than two of run.mass_radii clear the bubble core (10δ = {core:.3e}) at λ = {:e}",
            last.lambda
        );
    } else {
        let mass = mass_accounting(&sol, last.phi.as_ref(), &radii, &ctx.cfg.quadrature.options())
            .map_err(|e| CliError::Config(format!("run.mass_radii: {e}")))?;
        write_json(&ctx.out.join("mass.json"), &mass)?;
        if run.mode == ModeKind::Tower {
            let m = &mass.points[0];
            checks.add(
                "mass relation",
                m.relation_defect < MASS_REL,
                format!("m₊ = {:.4}, m₋ = {:.4}, defect {:.2e}", m.m_plus_limit, m.m_minus_limit, m.relation_defect),
            );
        }
    }
    checks.finish(&ctx.out)
}
