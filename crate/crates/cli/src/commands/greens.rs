use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgmf_core::fem::green::disk_regular;
use sgmf_core::fem::{GreenMode, GreensOracle, Space};
use sgmf_core::geometry::{triangulate, Domain};

use super::Ctx;
use crate::error::CliError;
use crate::report::{num, Checks, Table};

fn sample(rng: &mut ChaCha8Rng, d: &Domain, margin: f64) -> [f64; 2] {
    let r = d.outer_radius();
    loop {
        let x = [r * (2.0 * rng.random::<f64>() - 1.0), r * (2.0 * rng.random::<f64>() - 1.0)];
        if d.contains(x) && d.distance_to_boundary(x) > margin {
            return x;
        }
    }
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let g = &ctx.cfg.greens;
    if !(g.h > 0.0) || g.pairs == 0 {
        return Err(CliError::Config("greens.h must be positive and greens.pairs nonzero".into()));
    }
    let d = ctx.cfg.domain.build()?;
    let mesh = triangulate(&d, g.h, &[])?;
    let oracle = GreensOracle::new(d.clone(), Space::new(Arc::new(mesh)), GreenMode::Numeric)?;
    let reference = d.disk_radius();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let margin = 0.1 * d.outer_radius();
    let mut table = Table::new(
        format!("regular part H(x, y) of the Dirichlet Green function, {} pairs, mesh h = {}", g.pairs, g.h),
        &[
            ("x0", "first coordinate of x"),
            ("x1", "second coordinate of x"),
            ("y0", "first coordinate of y"),
            ("y1", "second coordinate of y"),
            ("h_numeric", "H(x, y) from the finite element correction"),
            ("h_images", "H(x, y) by the method of images (disk only, empty otherwise)"),
            ("abs_error", "|h_numeric − h_images|"),
            ("symmetry_gap", "|G(x, y) − G(y, x)|"),
        ],
    );
    let (mut worst, mut worst_sym) = (0.0f64, 0.0f64);
    for _ in 0..g.pairs {
        let x = sample(&mut rng, &d, margin);
        let y = sample(&mut rng, &d, margin);
        if (x[0] - y[0]).hypot(x[1] - y[1]) < 1e-3 {
            continue;
        }
        let h = oracle.regular_part(x, y)?;
        let sym = (oracle.green(x, y)? - oracle.green(y, x)?).abs();
        worst_sym = worst_sym.max(sym);
        let (href, err) = match reference {
            Some(r) => {
                let v = disk_regular(r, x, y);
                worst = worst.max((h - v).abs());
                (v, (h - v).abs())
            }
            None => (f64::NAN, f64::NAN),
        };
        table.push(vec![num(x[0]), num(x[1]), num(y[0]), num(y[1]), num(h), num(href), num(err), num(sym)]);
    }
    table.write(&ctx.out.join("greens.csv"))?;
    let mut checks = Checks::default();
    if reference.is_some() {
        checks.add("images", worst < g.tolerance, format!("max |H − H_images| = {worst:.3e} (tolerance {:e})", g.tolerance));
    }
    checks.add("symmetry", worst_sym < g.tolerance, format!("max |G(x,y) − G(y,x)| = {worst_sym:.3e}"));
    checks.finish(&ctx.out)
}
