use rayon::prelude::*;
use sgmf_core::fem::Field;
use sgmf_core::reduction::{
    energy_report, lambda_from_solution, projected_linear_solve, projected_nonlinear_solve, reduced_energy,
    ProjectedOperator, ReductionOptions,
};

use super::{Ctx, Sweep};
use crate::config::ModeKind;
use crate::error::CliError;
use crate::report::{loglog, num, Checks, Table};

struct Row {
    lambda: f64,
    phi_norm: f64,
    max_c: f64,
    iterations: usize,
    orthogonality: f64,
    j_w: f64,
    j_tilde: f64,
    defect: f64,
    linear_ratio: f64,
    linear_c: f64,
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    if ctx.cfg.run.mode != ModeKind::Partial {
        return Err(CliError::Config("reduce runs in partial mode (run.mode = \"partial\")".into()));
    }
    let sweep = Sweep::new(ctx)?;
    let lv = lambda_from_solution(sweep.mean_field.clone(), &sweep.oracle)?;
    let mesh = sweep.oracle.space().mesh().clone();
    let mask = mesh.boundary_mask();
    let h0 = Field::from_fn(mesh.clone(), |x| (1.0 - x[0] * x[0] - x[1] * x[1]) * (1.0 + x[0]));
    let h = Field::new(mesh.clone(), h0.values().iter().zip(mask).map(|(v, b)| if *b { 0.0 } else { *v }).collect())?;
    let space = sweep.oracle.space();
    let h_norm = space.dirichlet_form(h.values(), h.values()).sqrt();
    let rows: Vec<Row> = sweep
        .lambdas
        .par_iter()
        .map(|&l| -> Result<Row, CliError> {
            let sol = sweep.assemble(ctx, l)?;
            let op = ProjectedOperator::new(&sol)?;
            let lin = projected_linear_solve(&sol, &op, &h)?;
            let red = projected_nonlinear_solve(&sol, &op, &ReductionOptions::default())?;
            let rep = energy_report(&sol, lv.value)?;
            Ok(Row {
                lambda: l,
                phi_norm: red.phi_norm,
                max_c: red.max_multiplier(),
                iterations: red.iterations,
                orthogonality: red.orthogonality_defect,
                j_w: rep.j_value,
                j_tilde: reduced_energy(&sol, &red.phi)?,
                defect: rep.defect,
                linear_ratio: lin.phi_norm / h_norm,
                linear_c: lin.max_multiplier(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut t = Table::new(
        format!(
            "projected problems along the lambda sweep at centers {:?}; reduced energy {:e}",
            sweep.centers, lv.value
        ),
        &[
            ("lambda", "coefficient of e^{-u}"),
            ("phi_norm", "energy norm of the nonlinear correction φ"),
            ("max_c", "largest |c_ij| of the nonlinear projected problem"),
            ("iterations", "fixed-point iterations"),
            ("orthogonality", "max |∫∇φ·∇PZ_ij|"),
            ("j_w", "J(W)"),
            ("j_tilde", "J(W + φ)"),
            ("energy_defect", "J(W) + 8πk log λ + (16π − 24π log 2)k − Λ(ξ)"),
            ("linear_ratio", "‖φ‖/‖h‖ for the linear problem with h = (1 − |x|²)(1 + x₁)"),
            ("linear_max_c", "largest |c_ij| of the linear problem"),
        ],
    );
    for r in &rows {
        t.push(vec![
            num(r.lambda),
            num(r.phi_norm),
            num(r.max_c),
            r.iterations.to_string(),
            num(r.orthogonality),
            num(r.j_w),
            num(r.j_tilde),
            num(r.defect),
            num(r.linear_ratio),
            num(r.linear_c),
        ]);
    }
    t.write(&ctx.out.join("reduction.csv"))?;

    let mut checks = Checks::default();
    if rows.len() >= 2 {
        let ls: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
        let phi = loglog(&ls, &rows.iter().map(|r| r.phi_norm).collect::<Vec<_>>())?;
        checks.add("phi slope", phi.slope >= 0.4, format!("slope {:.3}", phi.slope));
        let c = loglog(&ls, &rows.iter().map(|r| r.linear_c).collect::<Vec<_>>())?;
        checks.add("linear multiplier slope", c.slope >= 0.8, format!("slope {:.3}", c.slope));
        let shrinking = |v: Vec<f64>| v.windows(2).all(|w| w[1].abs() < w[0].abs());
        checks.add(
            "energy defect shrinks",
            shrinking(rows.iter().map(|r| r.defect).collect()),
            format!("{:.2e} → {:.2e}", rows[0].defect, rows[rows.len() - 1].defect),
        );
        checks.add(
            "reduced energy gap shrinks",
            shrinking(rows.iter().map(|r| r.j_tilde - r.j_w).collect()),
            format!("{:.2e} → {:.2e}", rows[0].j_tilde - rows[0].j_w, rows[rows.len() - 1].j_tilde - rows[rows.len() - 1].j_w),
        );
    }
    if let Some(cert) = &sweep.certificate {
        checks.add("critical point", cert.converged, format!("|∇Λ| = {:.2e}", cert.grad_norm));
        let cmax = rows.iter().map(|r| r.max_c).fold(0.0, f64::max);
        checks.add("multipliers vanish", cmax < 1e-8, format!("max |c_ij| = {cmax:.2e}"));
    }
    checks.finish(&ctx.out)
}
