use sgmf_core::bubbles::{entire_kernel_dimension, half_alpha_is_odd, verify_integral_identities, IdentityOptions, KernelOptions};

use super::Ctx;
use crate::error::CliError;
use crate::report::{num, Checks, Table};

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let c = &ctx.cfg.identities;
    if let Some(a) = c.kernel_alphas.iter().find(|a| !half_alpha_is_odd(**a)) {
        return Err(CliError::Config(format!("identities.kernel_alphas: α = {a} rejected, α/2 odd required")));
    }
    if c.alphas.iter().any(|a| !(*a >= 2.0)) {
        return Err(CliError::Config("identities.alphas must be at least 2".into()));
    }
    let opts = IdentityOptions { r_max: c.r_max, r_core: c.r_core, radial_order: c.radial_order };
    let rows = verify_integral_identities(&c.alphas, &opts)?;
    let mut t = Table::new(
        format!("radial identities of the singular bubble profile, truncated at R = {:e} with extrapolation", c.r_max),
        &[
            ("alpha", "bubble exponent α"),
            ("identity", "integrand id"),
            ("computed", "extrapolated integral"),
            ("exact", "closed form (0, −4πα or −4π)"),
            ("abs_error", "|computed − exact|"),
            ("rel_error", "relative error (absolute when exact is 0)"),
        ],
    );
    let mut checks = Checks::default();
    for r in &rows {
        t.push(vec![num(r.alpha), r.identity.id().to_string(), num(r.computed), num(r.exact), num(r.abs_err), num(r.rel_err)]);
        let err = if r.exact == 0.0 { r.abs_err } else { r.rel_err };
        checks.add(format!("identity {} α={}", r.identity.id(), r.alpha), err < c.tolerance, format!("error {err:.2e}"));
    }
    t.write(&ctx.out.join("identities.csv"))?;

    if !c.kernel_alphas.is_empty() {
        let kopts = KernelOptions { radii: c.kernel_radii.clone(), ..KernelOptions::default() };
        let mut k = Table::new(
            format!("near-zero eigenvalues of the linearized entire problem on B_R, symmetry order {}", c.kernel_symmetry),
            &[
                ("alpha", "bubble exponent α"),
                ("radius", "ball radius R"),
                ("vertices", "mesh vertices"),
                ("window", "|μ| below this counts as kernel"),
                ("count", "eigenvalues inside the window"),
                ("smallest_eigenvalue", "μ of smallest magnitude"),
                ("correlation", "weighted correlation of the first mode with (1 − |y|^α)/(1 + |y|^α)"),
            ],
        );
        for &alpha in &c.kernel_alphas {
            let rep = entire_kernel_dimension(alpha, c.kernel_symmetry, &kopts)?;
            for row in &rep.rows {
                let mu = row.eigenvalues.iter().cloned().fold(f64::INFINITY, |m, v| if v.abs() < m.abs() { v } else { m });
                k.push(vec![
                    num(alpha),
                    num(row.radius),
                    row.vertices.to_string(),
                    num(row.window),
                    row.count.to_string(),
                    num(mu),
                    num(row.correlation),
                ]);
            }
            let corr = rep.rows.iter().map(|r| r.correlation).fold(f64::INFINITY, f64::min);
            checks.add(
                format!("kernel α={alpha}"),
                rep.dimension == 1 && rep.stable && corr > 0.99,
                format!("counts {:?}, min correlation {corr:.4}", rep.rows.iter().map(|r| r.count).collect::<Vec<_>>()),
            );
        }
        k.write(&ctx.out.join("kernel.csv"))?;
    }
    checks.finish(&ctx.out)
}
