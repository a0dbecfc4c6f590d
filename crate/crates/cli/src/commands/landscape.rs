use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use sgmf_core::fem::{GreensOracle, Space};
use sgmf_core::geometry::triangulate;
use sgmf_core::mean_field::{Configuration, SolveOptions};
use sgmf_core::reduction::{grad_lambda_from, lambda_functional, GradientMethod};

use super::Ctx;
use crate::error::CliError;
use crate::report::{num, write_json, Table};

#[derive(Serialize)]
struct Summary {
    k: usize,
    rho_plus: f64,
    evaluated: usize,
    invalid: usize,
    minimum_points: Vec<[f64; 2]>,
    minimum_value: f64,
    /// The minimizing sample lies on the edge of the sampled range.
    at_range_edge: bool,
}

struct Sample {
    coords: Vec<f64>,
    points: Vec<[f64; 2]>,
    value: Option<(f64, f64)>,
}

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let c = &ctx.cfg.landscape;
    if c.grid < 2 || !(c.extent > 0.0) {
        return Err(CliError::Config("landscape.grid must be at least 2 and extent positive".into()));
    }
    let d = ctx.cfg.domain.build()?;
    let oracle = GreensOracle::preferred(d.clone(), Space::new(Arc::new(triangulate(&d, ctx.cfg.mesh.h, &[])?)));
    let mut samples: Vec<Sample> = match c.k {
        1 => (0..c.grid * c.grid)
            .map(|n| {
                let (i, j) = (n / c.grid, n % c.grid);
                let s = |m: usize| -c.extent + 2.0 * c.extent * m as f64 / (c.grid - 1) as f64;
                let x = [s(i), s(j)];
                Sample { coords: vec![x[0], x[1]], points: vec![x], value: None }
            })
            .collect(),
        2 => (1..=c.grid)
            .map(|i| {
                let a = c.extent * i as f64 / c.grid as f64;
                Sample { coords: vec![a], points: vec![[a, 0.0], [-a, 0.0]], value: None }
            })
            .collect(),
        k => return Err(CliError::Config(format!("landscape.k must be 1 or 2, got {k}"))),
    };
    let opts = SolveOptions::default();
    let values: Vec<Option<(f64, f64)>> = samples
        .par_iter()
        .map(|s| -> Result<Option<(f64, f64)>, CliError> {
            let valid = s.points.iter().all(|p| d.contains(*p) && d.distance_to_boundary(*p) >= c.min_clearance);
            if !valid {
                return Ok(None);
            }
            let cfg = Configuration::new(s.points.clone(), &d)?;
            let v = lambda_functional(&cfg, c.rho_plus, &oracle, &opts, None)?;
            let g = grad_lambda_from(&v.mean_field, &oracle, GradientMethod::Representation)?;
            let gn = g.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>().sqrt();
            Ok(Some((v.value, gn)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    for (s, v) in samples.iter_mut().zip(values) {
        s.value = v;
    }

    let mut t = if c.k == 1 {
        Table::new(
            format!("reduced energy on a {0}×{0} grid, one point", c.grid),
            &[
                ("x0", "first coordinate of ξ"),
                ("x1", "second coordinate of ξ"),
                ("valid", "1 if the cell clears the boundary and was evaluated"),
                ("lambda", "Λ(ξ), empty when invalid"),
                ("grad_norm", "|∇Λ(ξ)|, empty when invalid"),
            ],
        )
    } else {
        Table::new(
            "reduced energy of antipodal pairs (a, 0), (−a, 0)",
            &[
                ("a", "pair radius"),
                ("valid", "1 if both points clear the boundary and were evaluated"),
                ("lambda", "Λ(ξ), empty when invalid"),
                ("grad_norm", "|∇Λ(ξ)|, empty when invalid"),
            ],
        )
    };
    for s in &samples {
        let mut row: Vec<String> = s.coords.iter().map(|v| num(*v)).collect();
        row.push(if s.value.is_some() { "1" } else { "0" }.into());
        let (v, g) = s.value.unwrap_or((f64::NAN, f64::NAN));
        row.push(num(v));
        row.push(num(g));
        t.push(row);
    }
    t.write(&ctx.out.join("landscape.csv"))?;

    let valid: Vec<(usize, f64)> = samples.iter().enumerate().filter_map(|(i, s)| s.value.map(|v| (i, v.0))).collect();
    let Some(&(imin, vmin)) = valid.iter().min_by(|a, b| a.1.partial_cmp(&b.1).unwrap()) else {
        return Err(CliError::Config("no landscape cell clears the boundary".into()));
    };
    let at_range_edge = match c.k {
        1 => {
            let (i, j) = (imin / c.grid, imin % c.grid);
            let n = c.grid;
            let neighbours = [(i.wrapping_sub(1), j), (i + 1, j), (i, j.wrapping_sub(1)), (i, j + 1)];
            neighbours.iter().any(|&(a, b)| a >= n || b >= n || samples[a * n + b].value.is_none())
        }
        _ => imin == 0 || imin + 1 == samples.len() || samples[imin + 1].value.is_none(),
    };
    let summary = Summary {
        k: c.k,
        rho_plus: c.rho_plus,
        evaluated: valid.len(),
        invalid: samples.len() - valid.len(),
        minimum_points: samples[imin].points.clone(),
        minimum_value: vmin,
        at_range_edge,
    };
    write_json(&ctx.out.join("landscape.json"), &summary)?;
    println!(
        "minimum Λ = {vmin:.6} at {:?}{}",
        summary.minimum_points,
        if at_range_edge { " (edge of the sampled range)" } else { "" }
    );
    Ok(())
}
