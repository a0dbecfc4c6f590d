//! Approximate solutions `W` built from the mean-field profile and projected
//! bubbles, their residuals, local masses and sweep fits.

pub mod fit;
pub mod full;
pub mod hybrid;
pub mod mass;
pub mod residual;

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bubbles::{project_bubble, BubbleParams, ProjectedBubble};
use crate::error::{Error, Result};
use crate::fem::green::fundamental;
use crate::fem::{GreensOracle, Sites};
use crate::geometry::{triangulate_with, Domain, Mesh, MeshOptions, RefinementCenter};
use crate::mean_field::{solve_mfe, Configuration, MeanFieldSolution, SolveOptions, Sources};

pub use fit::{affine_fit, scaling_fit, AffineFit, ScalingFit};
pub use full::{full_solution, FullSolution};
pub use hybrid::{HybridOptions, HybridRule, Patch};
pub use mass::{mass_accounting, LocalMass, MassReport};
pub use residual::{residual_decomposition, ResidualReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Partial,
    Tower,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Partial => "partial",
            Mode::Tower => "tower",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartialBlowupParams {
    pub k: usize,
    pub rho_plus: f64,
    pub lambda: f64,
    pub config: Configuration,
    pub deltas: Vec<f64>,
    pub log_deltas: Vec<f64>,
    pub d: Vec<f64>,
}

/// `8δ_i² = λ d_i` with `d_i = exp[8π(H(ξ_i,ξ_i) + Σ_{j≠i} G(ξ_i,ξ_j)) − z(ξ_i)]`.
pub fn partial_params(mean_field: &MeanFieldSolution, oracle: &GreensOracle, lambda: f64) -> Result<PartialBlowupParams> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("lambda = {lambda} must be positive")));
    }
    let config = match &mean_field.sources {
        Sources::Points(c) => c.clone(),
        Sources::Origin { .. } => return Err(Error::InvalidInput("partial assembly needs point sources".into())),
    };
    let pts = config.points();
    let mut log_deltas = Vec::with_capacity(pts.len());
    let mut d = Vec::with_capacity(pts.len());
    for (i, &p) in pts.iter().enumerate() {
        let mut s = oracle.regular_part(p, p)?;
        for (j, &q) in pts.iter().enumerate() {
            if j != i {
                s += oracle.green(p, q)?;
            }
        }
        let log_d = 8.0 * PI * s - mean_field.z.eval(p);
        let ld = 0.5 * (lambda.ln() + log_d - 8f64.ln());
        if ld.exp() >= config.boundary_clearance() / 10.0 {
            return Err(Error::InvalidInput(format!(
                "bubble scale {:.3e} at point {i} exceeds a tenth of the boundary clearance; lower lambda",
                ld.exp()
            )));
        }
        log_deltas.push(ld);
        d.push(log_d.exp());
    }
    Ok(PartialBlowupParams {
        k: pts.len(),
        rho_plus: mean_field.rho,
        lambda,
        deltas: log_deltas.iter().map(|v| v.exp()).collect(),
        log_deltas,
        d,
        config,
    })
}

impl PartialBlowupParams {
    /// `max_i |log(8δ_i²) − log(λ d_i)|`.
    pub fn closure_defect(&self) -> f64 {
        self.log_deltas
            .iter()
            .zip(&self.d)
            .map(|(ld, d)| (8f64.ln() + 2.0 * ld - (self.lambda * d).ln()).abs())
            .fold(0.0, f64::max)
    }
}

/// Reduced nonnegative fraction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        let g = gcd(num, den).max(1);
        Self { num: num / g, den: den / g }
    }

    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// `α_i = 4i − 2`.
pub fn tower_alphas(k: usize) -> Vec<u32> {
    (1..=k as u32).map(|i| 4 * i - 2).collect()
}

/// `(k − i + 1)/(4i − 2)`, the power of `λ` in `δ_i`.
pub fn tower_exponents(k: usize) -> Vec<Ratio> {
    (1..=k as u64).map(|i| Ratio::new(k as u64 - i + 1, 4 * i - 2)).collect()
}

/// Checks in integer arithmetic: `α_1 = 2`, `α_i = α_{i−1} + 4`,
/// `(α_i − 2) + Σ_{j<i} (−1)^{j−i} 2α_j = 0` and `Σ (−1)^i α_i = −2k`.
pub fn tower_integer_identities(k: usize) -> bool {
    let a: Vec<i64> = tower_alphas(k).into_iter().map(i64::from).collect();
    let sign = |e: usize| if e % 2 == 0 { 1 } else { -1 };
    let steps = a.first() == Some(&2) && a.windows(2).all(|w| w[1] - w[0] == 4);
    let balance = (1..=k).all(|i| {
        let s: i64 = (1..i).map(|j| sign(i - j) * 2 * a[j - 1]).sum();
        (a[i - 1] - 2) + s == 0
    });
    let total: i64 = (1..=k).map(|i| sign(i) * a[i - 1]).sum();
    steps && balance && total == -2 * k as i64
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TowerParams {
    pub k: usize,
    pub rho0: f64,
    pub rho_plus: f64,
    pub lambda: f64,
    pub alphas: Vec<u32>,
    pub exponents: Vec<Ratio>,
    pub log_deltas: Vec<f64>,
    pub log_d: Vec<f64>,
    /// `ρ₀⁻¹ ∫ e^{z − 8kπG(·,0)}`.
    pub q: f64,
    pub h00: f64,
    pub z0: f64,
}

/// Solves the triangular recursion for `a_i = α_i log δ_i`:
/// `a_k = log λ + 8kπH(0,0) − z(0) − log(2α_k²)` and
/// `a_{i−1} = a_i + log λ − log(4α_i²α_{i−1}²Q)`.
pub fn tower_params(k: usize, rho0: f64, lambda: f64, z0: f64, h00: f64, q: f64) -> Result<TowerParams> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::InvalidInput(format!("tower assembly needs an odd k, got {k}")));
    }
    if !(rho0 > 0.0 && rho0 < 8.0 * PI) {
        return Err(Error::InvalidInput(format!("rho0 = {rho0} must lie in (0, 8π)")));
    }
    if !(lambda > 0.0 && lambda.is_finite() && q > 0.0 && q.is_finite()) {
        return Err(Error::InvalidInput("lambda and Q must be positive".into()));
    }
    let alphas = tower_alphas(k);
    let exponents = tower_exponents(k);
    let al: Vec<f64> = alphas.iter().map(|&a| a as f64).collect();
    let ll = lambda.ln();
    let mut a = vec![0.0; k];
    a[k - 1] = ll + 8.0 * k as f64 * PI * h00 - z0 - (2.0 * al[k - 1] * al[k - 1]).ln();
    for i in (1..k).rev() {
        a[i - 1] = a[i] + ll - (4.0 * al[i] * al[i] * al[i - 1] * al[i - 1] * q).ln();
    }
    let log_deltas: Vec<f64> = a.iter().zip(&al).map(|(ai, alpha)| ai / alpha).collect();
    if log_deltas.windows(2).any(|w| w[0] >= w[1]) || log_deltas[k - 1] >= 0.0 {
        return Err(Error::InvalidInput(format!(
            "scales are not ordered δ_1 < … < δ_k < 1 at lambda = {lambda:e}; lower lambda"
        )));
    }
    let log_d = log_deltas.iter().zip(&exponents).map(|(ld, e)| ld - e.value() * ll).collect();
    Ok(TowerParams {
        k,
        rho0,
        rho_plus: 4.0 * PI * (k * (k - 1)) as f64 + rho0,
        lambda,
        alphas,
        exponents,
        log_deltas,
        log_d,
        q,
        h00,
        z0,
    })
}

impl TowerParams {
    pub fn deltas(&self) -> Vec<f64> {
        self.log_deltas.iter().map(|v| v.exp()).collect()
    }

    /// Largest relative defect of the two defining identities, rebuilding
    /// `α_i log δ_i` from `d_i` and the exponents.
    pub fn recursion_defect(&self) -> f64 {
        let ll = self.lambda.ln();
        let al: Vec<f64> = self.alphas.iter().map(|&a| a as f64).collect();
        let a: Vec<f64> = (0..self.k).map(|i| al[i] * (self.log_d[i] + self.exponents[i].value() * ll)).collect();
        let k = self.k;
        let top = ll + 8.0 * k as f64 * PI * self.h00 - self.z0 - (2.0 * al[k - 1] * al[k - 1]).ln();
        let rel = |x: f64, y: f64| (x - y).abs() / x.abs().max(y.abs()).max(1.0);
        let mut worst = rel(a[k - 1], top);
        for i in 1..k {
            let rhs = a[i] + ll - (4.0 * al[i] * al[i] * al[i - 1] * al[i - 1] * self.q).ln();
            worst = worst.max(rel(a[i - 1], rhs));
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub enum Params {
    Partial(PartialBlowupParams),
    Tower(TowerParams),
}

#[derive(Clone, Debug)]
pub struct Bubble {
    /// `+1` or `−1` in front of `Pw`.
    pub sign: f64,
    pub projection: ProjectedBubble,
}

/// Pointwise pieces of `W` on a set of sites.
#[derive(Clone, Debug)]
pub struct SiteValues {
    pub z: Vec<f64>,
    pub log_h: Vec<f64>,
    /// `Pw_i` per bubble.
    pub pw: Vec<Vec<f64>>,
    /// `log(|x − ξ_i|^{α_i−2} e^{w_i})` per bubble.
    pub log_density: Vec<Vec<f64>>,
    pub w: Vec<f64>,
}

pub struct ApproxSolution<'a> {
    pub mode: Mode,
    pub oracle: &'a GreensOracle,
    pub mean_field: MeanFieldSolution,
    pub rho_plus: f64,
    pub lambda: f64,
    pub params: Params,
    pub bubbles: Vec<Bubble>,
    pub rule: HybridRule,
    /// Values at the hybrid rule sites.
    pub hybrid: SiteValues,
    /// Values at the quadrature points of the oracle's space.
    pub qp: SiteValues,
    pub log_int_exp_w: f64,
    pub log_int_exp_w_mesh: f64,
}

impl fmt::Debug for ApproxSolution<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ApproxSolution")
            .field("mode", &self.mode)
            .field("rho_plus", &self.rho_plus)
            .field("lambda", &self.lambda)
            .field("params", &self.params)
            .finish()
    }
}

/// Mesh of `domain` graded down to `scale / resolution` at every core.
pub fn resolving_mesh(domain: &Domain, h_global: f64, cores: &[([f64; 2], f64)], resolution: f64) -> Result<Mesh> {
    let centers: Vec<RefinementCenter> = cores
        .iter()
        .map(|&(p, s)| RefinementCenter { point: p, target: (s / resolution).min(h_global) })
        .collect();
    triangulate_with(domain, h_global, &centers, &MeshOptions::default())
}

fn patch_radius(domain: &Domain, center: [f64; 2], others: &[[f64; 2]], opts: &HybridOptions) -> f64 {
    let mut r = opts.max_patch_radius.min(0.5 * domain.distance_to_boundary(center));
    for o in others {
        let d = (o[0] - center[0]).hypot(o[1] - center[1]);
        if d > 0.0 {
            r = r.min(0.45 * d);
        }
    }
    r
}

/// Partial blow-up `W = z − Σ Pw_i`, solving the mean-field equation with default options.
pub fn assemble_partial<'a>(
    config: &Configuration,
    rho_plus: f64,
    lambda: f64,
    oracle: &'a GreensOracle,
) -> Result<ApproxSolution<'a>> {
    let mf = solve_mfe(oracle, rho_plus, Sources::Points(config.clone()), &SolveOptions::default(), None)?;
    assemble_partial_with(mf, lambda, oracle, &HybridOptions::default())
}

pub fn assemble_partial_with<'a>(
    mean_field: MeanFieldSolution,
    lambda: f64,
    oracle: &'a GreensOracle,
    opts: &HybridOptions,
) -> Result<ApproxSolution<'a>> {
    let params = partial_params(&mean_field, oracle, lambda)?;
    let pts = params.config.points().to_vec();
    let mut bubbles = Vec::with_capacity(pts.len());
    let mut patches = Vec::with_capacity(pts.len());
    for (i, &p) in pts.iter().enumerate() {
        let b = BubbleParams::from_log_delta(params.log_deltas[i], p, 2.0)?;
        bubbles.push(Bubble { sign: -1.0, projection: project_bubble(b, oracle)? });
        patches.push(Patch { center: p, radius: patch_radius(oracle.domain(), p, &pts, opts), scale: b.delta });
    }
    finish(Mode::Partial, oracle, mean_field, params.rho_plus, lambda, Params::Partial(params), bubbles, patches, opts)
}

/// Tower `W = z + Σ (−1)^i Pw_i` at the origin, `z` solving the mean-field equation
/// with mass `ρ₀` and weight `e^{−8kπG(·,0)}`.
pub fn assemble_tower<'a>(k: usize, rho0: f64, lambda: f64, oracle: &'a GreensOracle) -> Result<ApproxSolution<'a>> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::InvalidInput(format!("tower assembly needs an odd k, got {k}")));
    }
    let mf = solve_mfe(oracle, rho0, Sources::Origin { k: k as u32 }, &SolveOptions::default(), None)?;
    assemble_tower_with(k, mf, lambda, oracle, &HybridOptions::default())
}

pub fn assemble_tower_with<'a>(
    k: usize,
    mean_field: MeanFieldSolution,
    lambda: f64,
    oracle: &'a GreensOracle,
    opts: &HybridOptions,
) -> Result<ApproxSolution<'a>> {
    if mean_field.sources != (Sources::Origin { k: k as u32 }) {
        return Err(Error::InvalidInput("tower assembly needs the origin source of matching k".into()));
    }
    let origin = [0.0, 0.0];
    let rho0 = mean_field.rho;
    let params = tower_params(
        k,
        rho0,
        lambda,
        mean_field.z.eval(origin),
        oracle.regular_part(origin, origin)?,
        mean_field.q_constant(rho0),
    )?;
    let mut bubbles = Vec::with_capacity(k);
    for i in 0..k {
        let b = BubbleParams::from_log_delta(params.log_deltas[i], origin, params.alphas[i] as f64)?;
        let sign = if (i + 1) % 2 == 0 { 1.0 } else { -1.0 };
        bubbles.push(Bubble { sign, projection: project_bubble(b, oracle)? });
    }
    let patches = vec![Patch {
        center: origin,
        radius: patch_radius(oracle.domain(), origin, &[], opts),
        scale: params.log_deltas[0].exp(),
    }];
    let rho_plus = params.rho_plus;
    finish(Mode::Tower, oracle, mean_field, rho_plus, lambda, Params::Tower(params), bubbles, patches, opts)
}

#[allow(clippy::too_many_arguments)]
fn finish<'a>(
    mode: Mode,
    oracle: &'a GreensOracle,
    mean_field: MeanFieldSolution,
    rho_plus: f64,
    lambda: f64,
    params: Params,
    bubbles: Vec<Bubble>,
    patches: Vec<Patch>,
    opts: &HybridOptions,
) -> Result<ApproxSolution<'a>> {
    let space = oracle.space();
    let rule = HybridRule::new(space, patches, opts)?;
    let mut s = ApproxSolution {
        mode,
        oracle,
        mean_field,
        rho_plus,
        lambda,
        params,
        bubbles,
        hybrid: SiteValues { z: vec![], log_h: vec![], pw: vec![], log_density: vec![], w: vec![] },
        qp: SiteValues { z: vec![], log_h: vec![], pw: vec![], log_density: vec![], w: vec![] },
        rule,
        log_int_exp_w: 0.0,
        log_int_exp_w_mesh: 0.0,
    };
    s.hybrid = s.evaluate(&s.rule.sites)?;
    s.qp = s.evaluate(&Sites::quadrature(space))?;
    if s.hybrid.w.iter().chain(&s.qp.w).any(|v| v.is_nan()) {
        return Err(Error::Numerical("W is not a number at some quadrature site".into()));
    }
    s.log_int_exp_w = s.rule.log_integral_exp(&s.hybrid.w);
    let m = s.qp.w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    s.log_int_exp_w_mesh = m + space.integrate_qp(&s.qp.w.iter().map(|v| (v - m).exp()).collect::<Vec<_>>()).ln();
    Ok(s)
}

impl ApproxSolution<'_> {
    pub fn k(&self) -> usize {
        match &self.params {
            Params::Partial(p) => p.k,
            Params::Tower(t) => t.k,
        }
    }

    pub fn centers(&self) -> Vec<[f64; 2]> {
        match &self.params {
            Params::Partial(p) => p.config.points().to_vec(),
            Params::Tower(_) => vec![[0.0, 0.0]],
        }
    }

    /// Smallest bubble scale at each center.
    pub fn core_scales(&self) -> Vec<f64> {
        match &self.params {
            Params::Partial(p) => p.deltas.clone(),
            Params::Tower(t) => vec![t.log_deltas[0].exp()],
        }
    }

    pub fn evaluate(&self, sites: &Sites) -> Result<SiteValues> {
        let n = sites.len();
        let z = sites.interp(self.mean_field.z.values());
        let mut log_h = vec![0.0; n];
        for (y, m) in self.mean_field.sources.weighted_points() {
            let h = self.oracle.regular_at_sites(sites, y)?;
            for ((o, x), hv) in log_h.iter_mut().zip(&sites.points).zip(h) {
                *o -= 8.0 * PI * m * (fundamental(*x, y) + hv);
            }
        }
        let mut w = z.clone();
        let mut pw = Vec::with_capacity(self.bubbles.len());
        let mut log_density = Vec::with_capacity(self.bubbles.len());
        for b in &self.bubbles {
            let p = &b.projection;
            let h = self.oracle.regular_at_sites(sites, p.params.center)?;
            let d = sites.interp(p.remainder.values());
            let s = 4.0 * PI * p.params.alpha;
            let vals: Vec<f64> = sites
                .points
                .iter()
                .zip(h.iter().zip(&d))
                .map(|(&x, (hv, dv))| p.params.eval(x) + p.constant + s * hv + dv)
                .collect();
            for (o, v) in w.iter_mut().zip(&vals) {
                *o += b.sign * v;
            }
            log_density.push(sites.points.iter().map(|&x| p.params.log_density(x)).collect());
            pw.push(vals);
        }
        Ok(SiteValues { z, log_h, pw, log_density, w })
    }

    pub fn evaluate_points(&self, points: Vec<[f64; 2]>) -> Result<SiteValues> {
        self.evaluate(&Sites::locate(self.oracle.space().mesh(), points))
    }

    pub fn w_at(&self, x: [f64; 2]) -> Result<f64> {
        Ok(self.evaluate_points(vec![x])?.w[0])
    }

    pub fn exp_w_at(&self, x: [f64; 2]) -> Result<f64> {
        Ok(self.w_at(x)?.exp())
    }

    /// `e^{−W}`, formed as `exp(−W)` only after the logarithm is known.
    pub fn exp_neg_w_at(&self, x: [f64; 2]) -> Result<f64> {
        Ok((-self.w_at(x)?).exp())
    }

    /// Nodal `W` (bubble profiles evaluated at vertices, `−∞`-free since
    /// `w` is finite at the center).
    pub fn nodal_w(&self) -> Vec<f64> {
        let mesh = self.oracle.space().mesh();
        let mut w = self.mean_field.z.values().to_vec();
        for b in &self.bubbles {
            let p = &b.projection;
            for ((o, x), q) in w.iter_mut().zip(mesh.vertices()).zip(p.correction.values()) {
                *o += b.sign * (p.params.eval(*x) + q);
            }
        }
        w
    }

    /// `max |W|` over boundary vertices.
    pub fn boundary_defect(&self) -> f64 {
        let mesh = self.oracle.space().mesh();
        self.nodal_w().iter().zip(mesh.boundary_mask()).filter(|(_, b)| **b).fold(0.0, |m, (v, _)| m.max(v.abs()))
    }

    /// `max |W(x) − W(Rx)|` over the mesh rotation, if the mesh is symmetric.
    pub fn symmetry_defect(&self) -> Option<f64> {
        let rot = &self.oracle.space().mesh().symmetry()?.rotation;
        let w = self.nodal_w();
        Some((0..w.len()).map(|i| (w[i] - w[rot[i]]).abs()).fold(0.0, f64::max))
    }

    /// `∫|∇W|²` from `½zᵀKz`-type pairings: `∫|∇z|² + 2Σ s_i ∫dens_i z + ΣΣ s_i s_j ∫dens_i Pw_j`.
    pub fn dirichlet_integral(&self) -> f64 {
        let space = self.oracle.space();
        let zi = space.restrict(self.mean_field.z.values());
        let mut s = space.stiffness().form(&zi, &zi);
        for (i, bi) in self.bubbles.iter().enumerate() {
            let dens: Vec<f64> = self.hybrid.log_density[i].iter().map(|v| v.exp()).collect();
            let dz: Vec<f64> = dens.iter().zip(&self.hybrid.z).map(|(a, b)| a * b).collect();
            s += 2.0 * bi.sign * self.rule.integrate(&dz);
            for (j, bj) in self.bubbles.iter().enumerate() {
                let dp: Vec<f64> = dens.iter().zip(&self.hybrid.pw[j]).map(|(a, b)| a * b).collect();
                s += bi.sign * bj.sign * self.rule.integrate(&dp);
            }
        }
        s
    }

    /// `λ ∫ e^{−W}` by hybrid quadrature.
    pub fn rho_minus(&self) -> f64 {
        let ll = self.lambda.ln();
        let v: Vec<f64> = self.hybrid.w.iter().map(|w| (ll - w).exp()).collect();
        self.rule.integrate(&v)
    }

    /// `max |e^W − h e^z|` over vertices at distance at least `eta` from every center.
    pub fn far_field_defect(&self, eta: f64) -> f64 {
        let mesh = self.oracle.space().mesh();
        let centers = self.centers();
        let w = self.nodal_w();
        let mut worst: f64 = 0.0;
        for (v, x) in mesh.vertices().iter().enumerate() {
            if centers.iter().any(|c| (x[0] - c[0]).hypot(x[1] - c[1]) < eta) {
                continue;
            }
            let lh = self.mean_field.weight_log.values()[v] + self.mean_field.z.values()[v];
            worst = worst.max((w[v].exp() - lh.exp()).abs());
        }
        worst
    }

    /// `max |Σ s_i Pw_i + 8kπ G(x, 0)|` over vertices with `|x| ≥ r0` (tower mode).
    pub fn tower_far_defect(&self, r0: f64) -> Result<f64> {
        let k = match &self.params {
            Params::Tower(t) => t.k,
            Params::Partial(_) => return Err(Error::InvalidInput("defined for the tower only".into())),
        };
        let mesh = self.oracle.space().mesh();
        let h = self.oracle.regular_field([0.0, 0.0])?;
        let mut worst: f64 = 0.0;
        for (v, x) in mesh.vertices().iter().enumerate() {
            if x[0].hypot(x[1]) < r0 {
                continue;
            }
            let mut s = 8.0 * PI * k as f64 * (fundamental(*x, [0.0, 0.0]) + h.values()[v]);
            for b in &self.bubbles {
                let p = &b.projection;
                s += b.sign * (p.params.eval(*x) + p.correction.values()[v]);
            }
            worst = worst.max(s.abs());
        }
        Ok(worst)
    }

    /// Sign of `W` at radius `δ_i` on eight rays, per bubble; `(−1)^i` expected in tower mode.
    pub fn sign_pattern(&self) -> Result<Vec<f64>> {
        let centers = self.centers();
        let mut out = Vec::with_capacity(self.bubbles.len());
        for b in &self.bubbles {
            let p = &b.projection.params;
            let c = if self.mode == Mode::Tower { centers[0] } else { p.center };
            let pts: Vec<[f64; 2]> = (0..8)
                .map(|j| {
                    let t = PI * j as f64 / 4.0 + 0.1;
                    [c[0] + p.delta * t.cos(), c[1] + p.delta * t.sin()]
                })
                .collect();
            let v = self.evaluate_points(pts)?;
            let s: f64 = v.w.iter().map(|w| w.signum()).sum::<f64>() / 8.0;
            out.push(s);
        }
        Ok(out)
    }

    /// `Θ_i` (or `T_i` for even tower indices) sampled on `A_i/δ_i`:
    /// the log-ratio between the local nonlinearity and the bubble density.
    pub fn interaction_diagnostics(&self, samples_per_decade: usize) -> Result<Vec<InteractionRow>> {
        let k = self.bubbles.len();
        let ll = self.lambda.ln();
        let mut rows = Vec::with_capacity(k);
        let deltas: Vec<f64> = self.bubbles.iter().map(|b| b.projection.params.delta).collect();
        for i in 0..k {
            let p = &self.bubbles[i].projection.params;
            let patch = self.rule.patches.iter().find(|q| q.center == p.center).copied().unwrap_or(Patch {
                center: p.center,
                radius: 0.4,
                scale: p.delta,
            });
            let lo = if i == 0 || self.mode == Mode::Partial { 1e-2 * deltas[i] } else { (deltas[i - 1] * deltas[i]).sqrt() };
            let hi = if i + 1 == k || self.mode == Mode::Partial {
                patch.radius
            } else {
                (deltas[i] * deltas[i + 1]).sqrt()
            };
            let n = (((hi / lo).log10() * samples_per_decade as f64).ceil() as usize).max(2);
            let mut pts = Vec::new();
            let mut ys = Vec::new();
            for a in 0..=n {
                let r = lo * (hi / lo).powf(a as f64 / n as f64);
                for j in 0..8 {
                    let t = PI * j as f64 / 4.0 + 0.3;
                    pts.push([p.center[0] + r * t.cos(), p.center[1] + r * t.sin()]);
                    ys.push(r / p.delta);
                }
            }
            let v = self.evaluate_points(pts)?;
            let even = self.mode == Mode::Tower && (i + 1) % 2 == 0;
            let mut max_abs: f64 = 0.0;
            let mut c: f64 = 0.0;
            for (s, y) in ys.iter().enumerate() {
                let target = if even {
                    self.rho_plus.ln() + v.w[s] - self.log_int_exp_w
                } else {
                    ll - v.w[s]
                };
                let theta = target - v.log_density[i][s];
                max_abs = max_abs.max(theta.abs());
                c = c.max(theta.abs() / (p.delta * y + self.lambda));
            }
            rows.push(InteractionRow { index: i + 1, even, samples: ys.len(), max_abs, fitted_c: c });
        }
        Ok(rows)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InteractionRow {
    pub index: usize,
    /// `T_i` (even tower index) rather than `Θ_i`.
    pub even: bool,
    pub samples: usize,
    pub max_abs: f64,
    /// `max |Θ_i(y)| / (δ_i|y| + λ)`.
    pub fitted_c: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents_reduce() {
        let e = tower_exponents(3);
        assert_eq!(e, vec![Ratio::new(3, 2), Ratio::new(1, 3), Ratio::new(1, 10)]);
        assert_eq!(e[1].to_string(), "1/3");
        assert_eq!(tower_exponents(1), vec![Ratio { num: 1, den: 2 }]);
    }

    #[test]
    fn integer_identities() {
        for k in [1, 3, 5, 7, 9] {
            assert!(tower_integer_identities(k), "k = {k}");
        }
        // the alternating total is −2k only for odd k
        assert!(!tower_integer_identities(2));
    }

    #[test]
    fn recursion_closes() {
        let t = tower_params(3, 4.0, 1e-4, 0.7, -0.01, 0.05).unwrap();
        assert!(t.recursion_defect() < 1e-12);
        assert!((t.rho_plus - (24.0 * PI + 4.0)).abs() < 1e-12);
        assert!(tower_params(2, 4.0, 1e-4, 0.7, 0.0, 0.05).is_err());
    }

    #[test]
    fn single_tower_scale() {
        // k = 1: δ² = λ e^{8πH(0,0) − z(0)} / 8
        let t = tower_params(1, 4.0, 1e-6, 0.3, 0.0, 1.0).unwrap();
        let d2 = (2.0 * t.log_deltas[0]).exp();
        assert!((d2 - 1e-6 * (-0.3f64).exp() / 8.0).abs() < 1e-20);
    }
}
