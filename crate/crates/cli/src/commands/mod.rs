pub mod construct;
pub mod greens;
pub mod identities;
pub mod landscape;
pub mod reduce;

use std::path::PathBuf;
use std::sync::Arc;

use sgmf_core::construction::{assemble_partial_with, assemble_tower_with, resolving_mesh, ApproxSolution};
use sgmf_core::fem::{GreensOracle, Space};
use sgmf_core::mean_field::{solve_mfe, Configuration, MeanFieldSolution, SolveOptions, Sources};
use sgmf_core::reduction::{find_critical_config, snap_to_axes, Certificate, CriticalOptions};

use crate::config::{ModeKind, RunConfig};
use crate::error::CliError;

pub struct Ctx {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub seed: u64,
}

/// Oracle refined to the smallest core scale of the sweep, with its mean-field solution.
pub struct Sweep {
    pub lambdas: Vec<f64>,
    pub oracle: GreensOracle,
    pub mean_field: MeanFieldSolution,
    pub centers: Vec<[f64; 2]>,
    pub certificate: Option<Certificate>,
}

impl Sweep {
    pub fn new(ctx: &Ctx) -> Result<Self, CliError> {
        let run = &ctx.cfg.run;
        run.validate()?;
        let domain = ctx.cfg.domain.build()?;
        let lambdas = run.sorted_lambdas();
        let h = ctx.cfg.mesh.h;
        let coarse = GreensOracle::preferred(domain.clone(), Space::new(Arc::new(resolving_mesh(&domain, h, &[], 1.0)?)));
        let opts = SolveOptions::default();
        let (sources, rho, centers, certificate) = match run.mode {
            ModeKind::Partial => {
                let cfg = Configuration::new(run.centers.clone(), &domain)
                    .map_err(|e| CliError::Config(format!("run.centers: {e}")))?;
                let (cfg, cert) = if run.find_critical {
                    let (c, cert) = find_critical_config(&cfg, run.rho_plus, &coarse, &opts, &CriticalOptions::default())?;
                    (snap_to_axes(&c, 1e-6, &coarse)?, Some(cert))
                } else {
                    (cfg, None)
                };
                let pts = cfg.points().to_vec();
                (Sources::Points(cfg), run.rho_plus, pts, cert)
            }
            ModeKind::Tower => (Sources::Origin { k: run.k as u32 }, run.rho0, vec![[0.0, 0.0]], None),
        };
        let lmin = *lambdas.last().expect("validated nonempty");
        let coarse_mf = solve_mfe(&coarse, rho, sources.clone(), &opts, None)?;
        let probe = assemble(run.mode, run.k, coarse_mf, lmin, &coarse, &ctx.cfg)?;
        let cores: Vec<([f64; 2], f64)> = probe.centers().into_iter().zip(probe.core_scales()).collect();
        let mesh = resolving_mesh(&domain, h, &cores, ctx.cfg.mesh.resolution)?;
        let oracle = GreensOracle::preferred(domain.clone(), Space::new(Arc::new(mesh)));
        let mean_field = solve_mfe(&oracle, rho, sources, &opts, None)?;
        Ok(Self { lambdas, oracle, mean_field, centers, certificate })
    }

    pub fn assemble(&self, ctx: &Ctx, lambda: f64) -> Result<ApproxSolution<'_>, CliError> {
        assemble(ctx.cfg.run.mode, ctx.cfg.run.k, self.mean_field.clone(), lambda, &self.oracle, &ctx.cfg)
    }
}

fn assemble<'a>(
    mode: ModeKind,
    k: usize,
    mf: MeanFieldSolution,
    lambda: f64,
    oracle: &'a GreensOracle,
    cfg: &RunConfig,
) -> Result<ApproxSolution<'a>, CliError> {
    let q = cfg.quadrature.options();
    Ok(match mode {
        ModeKind::Partial => assemble_partial_with(mf, lambda, oracle, &q)?,
        ModeKind::Tower => assemble_tower_with(k, mf, lambda, oracle, &q)?,
    })
}
