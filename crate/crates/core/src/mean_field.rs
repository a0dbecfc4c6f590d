//! Singular mean field equation `Δz + ρ h e^z / ∫ h e^z = 0`, `z = 0` on the
//! boundary, with weight `h = exp(−8π Σ G(·, ξ_i))` or `exp(−8kπ G(·, 0))`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::eigen::nearest_zero;
use crate::fem::green::fundamental;
use crate::fem::{Border, CsrMatrix, Factor, Field, GreensOracle, Space};
use crate::geometry::Domain;

/// Distinct interior points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    points: Vec<[f64; 2]>,
    min_separation: f64,
    boundary_clearance: f64,
}

pub const MIN_SEPARATION: f64 = 1e-6;
pub const MIN_CLEARANCE: f64 = 1e-3;

impl Configuration {
    pub fn new(points: Vec<[f64; 2]>, domain: &Domain) -> Result<Self> {
        let mut sep = f64::INFINITY;
        for i in 0..points.len() {
            for j in 0..i {
                sep = sep.min((points[i][0] - points[j][0]).hypot(points[i][1] - points[j][1]));
            }
        }
        let mut clearance = f64::INFINITY;
        for p in &points {
            if !domain.contains(*p) {
                return Err(Error::InvalidInput(format!("point {p:?} is outside the domain")));
            }
            clearance = clearance.min(domain.distance_to_boundary(*p));
        }
        if sep < MIN_SEPARATION {
            return Err(Error::InvalidInput(format!("points closer than {MIN_SEPARATION:e} (got {sep:e})")));
        }
        if clearance < MIN_CLEARANCE {
            return Err(Error::InvalidInput(format!(
                "point within {MIN_CLEARANCE:e} of the boundary (clearance {clearance:e})"
            )));
        }
        Ok(Self { points, min_separation: sep, boundary_clearance: clearance })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn k(&self) -> usize {
        self.points.len()
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    pub fn boundary_clearance(&self) -> f64 {
        self.boundary_clearance
    }

    /// Copy with coordinate `c` of point `i` shifted by `step`.
    pub fn shifted(&self, i: usize, c: usize, step: f64, domain: &Domain) -> Result<Self> {
        let mut p = self.points.clone();
        p[i][c] += step;
        Self::new(p, domain)
    }
}

/// Singular sources of the weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sources {
    /// Strength `8π` at each point.
    Points(Configuration),
    /// Strength `8kπ` at the origin.
    Origin { k: u32 },
}

impl Sources {
    /// Source locations and strengths divided by `8π`.
    pub fn weighted_points(&self) -> Vec<([f64; 2], f64)> {
        match self {
            Sources::Points(c) => c.points().iter().map(|&p| (p, 1.0)).collect(),
            Sources::Origin { k } => {
                if *k == 0 {
                    Vec::new()
                } else {
                    vec![([0.0, 0.0], *k as f64)]
                }
            }
        }
    }
}

/// `log h(x) = Σ m_i [4 log|x − ξ_i| − 8π H(x, ξ_i)]` at every quadrature point.
pub fn log_weight_qp(sources: &Sources, oracle: &GreensOracle) -> Result<Vec<f64>> {
    let space = oracle.space();
    let mut out = vec![0.0; space.qp().len()];
    for (y, m) in sources.weighted_points() {
        let h = oracle.regular_at_qp(y)?;
        for ((o, x), hv) in out.iter_mut().zip(space.qp()).zip(h) {
            *o += m * (-8.0 * PI * fundamental(*x, y) - 8.0 * PI * hv);
        }
    }
    Ok(out)
}

/// Nodal `log h`; vertices sitting on a source carry `−∞`.
pub fn log_weight(sources: &Sources, oracle: &GreensOracle) -> Result<Field> {
    let mesh = oracle.space().mesh().clone();
    let mut vals = vec![0.0; mesh.n_vertices()];
    for (y, m) in sources.weighted_points() {
        let h = oracle.regular_field(y)?;
        for (v, x) in mesh.vertices().iter().enumerate() {
            vals[v] += m * (-8.0 * PI * fundamental(*x, y) - 8.0 * PI * h.values()[v]);
        }
    }
    Field::new(mesh, vals)
}

/// `log h` at an arbitrary point.
pub fn log_weight_at(sources: &Sources, oracle: &GreensOracle, x: [f64; 2]) -> Result<f64> {
    let mut s = 0.0;
    for (y, m) in sources.weighted_points() {
        s += m * (-8.0 * PI * oracle.green(x, y)?);
    }
    Ok(s)
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub max_rho_step: f64,
    pub tol: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { max_rho_step: PI, tol: 1e-9, max_newton: 60, max_halvings: 50 }
    }
}

#[derive(Clone, Debug)]
pub struct MeanFieldSolution {
    pub z: Field,
    pub rho: f64,
    pub sources: Sources,
    /// Nodal `log h`.
    pub weight_log: Field,
    /// `log h` at quadrature points.
    pub log_weight_qp: Vec<f64>,
    /// Dual-norm residual `√(Fᵀ K⁻¹ F)`.
    pub newton_residual: f64,
    /// `log ∫ h e^z`.
    pub log_normalization: f64,
    pub smallest_singular_value: Option<f64>,
    /// False when `rho` lies outside `(0, 8π)`.
    pub uniqueness_guaranteed: bool,
    space: Arc<Space>,
}

/// Exponential weight at quadrature points divided by its integral, plus `log ∫`.
fn normalized_density(space: &Space, log_h: &[f64], z_full: &[f64]) -> (Vec<f64>, f64) {
    let zq = space.interpolate_qp(z_full);
    let e: Vec<f64> = log_h.iter().zip(&zq).map(|(a, b)| a + b).collect();
    let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = e.iter().map(|v| (v - m).exp()).collect();
    let s = space.integrate_qp(&ex);
    (ex.into_iter().map(|v| v / s).collect(), m + s.ln())
}

struct Newton<'a> {
    space: &'a Space,
    log_h: &'a [f64],
    rho: f64,
}

impl Newton<'_> {
    fn residual(&self, z_int: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let full = self.space.extend_zero(z_int);
        let (e, logn) = normalized_density(self.space, self.log_h, &full);
        let g = self.space.load(&e);
        let kz = self.space.stiffness().matvec(z_int);
        let f = kz.iter().zip(&g).map(|(a, b)| a - self.rho * b).collect();
        (f, e, logn)
    }

    fn dual_norm(&self, f: &[f64]) -> Result<f64> {
        let y = self.space.stiffness_factor()?.solve(f);
        Ok(f.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt())
    }
}

/// Linearization `K − ρ M_e + ρ g gᵀ` as a sparse block plus one border.
pub fn linearization(space: &Space, rho: f64, density_qp: &[f64]) -> (CsrMatrix, Border) {
    let mut a = space.stiffness().clone();
    a.axpy(-rho, &space.weighted_mass(density_qp));
    let g = space.load(density_qp);
    let border = Border { cols: vec![g.iter().map(|v| rho * v).collect()], rows: vec![g], corner: vec![-1.0] };
    (a, border)
}

pub fn solve_mfe(
    oracle: &GreensOracle,
    rho: f64,
    sources: Sources,
    opts: &SolveOptions,
    initial: Option<&Field>,
) -> Result<MeanFieldSolution> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidInput(format!("mass parameter {rho} must be nonnegative")));
    }
    let space = oracle.space().clone();
    let log_h = log_weight_qp(&sources, oracle)?;
    let mut z = match initial {
        Some(f) => space.restrict(f.values()),
        None => vec![0.0; space.n_dofs()],
    };
    // continue from 0 unless a guess is supplied
    let steps: Vec<f64> = if initial.is_some() {
        vec![rho]
    } else {
        let n = ((rho / opts.max_rho_step).ceil() as usize).max(1);
        (1..=n).map(|j| rho * j as f64 / n as f64).collect()
    };
    let mut last_norm = 0.0;
    for &r in &steps {
        let nt = Newton { space: &space, log_h: &log_h, rho: r };
        let (mut f, mut e, _) = nt.residual(&z);
        let mut fnorm = nt.dual_norm(&f)?;
        let mut it = 0;
        while fnorm > opts.tol {
            it += 1;
            if it > opts.max_newton {
                return Err(Error::Divergence(format!(
                    "Newton stalled at rho = {r} with residual {fnorm:.3e}"
                )));
            }
            let (a, border) = linearization(&space, r, &e);
            let fac = Factor::bordered(&a, &border)?;
            let mut rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            rhs.push(0.0);
            let d = fac.solve(&rhs);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..=opts.max_halvings {
                let trial: Vec<f64> = z.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                let (f2, e2, _) = nt.residual(&trial);
                let n2 = nt.dual_norm(&f2)?;
                if n2.is_finite() && n2 < fnorm {
                    z = trial;
                    f = f2;
                    e = e2;
                    fnorm = n2;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                return Err(Error::Divergence(format!(
                    "damping exhausted at rho = {r}; last residual {fnorm:.3e}"
                )));
            }
        }
        last_norm = fnorm;
    }
    let full = space.extend_zero(&z);
    let (_, logn) = normalized_density(&space, &log_h, &full);
    Ok(MeanFieldSolution {
        z: Field::new(space.mesh().clone(), full)?,
        rho,
        weight_log: log_weight(&sources, oracle)?,
        sources,
        log_weight_qp: log_h,
        newton_residual: last_norm,
        log_normalization: logn,
        smallest_singular_value: None,
        uniqueness_guaranteed: rho > 0.0 && rho < 8.0 * PI,
        space,
    })
}

impl MeanFieldSolution {
    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    /// `h e^z / ∫ h e^z` at quadrature points.
    pub fn density_qp(&self) -> Vec<f64> {
        normalized_density(&self.space, &self.log_weight_qp, self.z.values()).0
    }

    /// `½ ∫|∇z|² − ρ log ∫ h e^z`.
    pub fn functional(&self) -> f64 {
        let zi = self.space.restrict(self.z.values());
        0.5 * self.space.stiffness().form(&zi, &zi) - self.rho * self.log_normalization
    }

    /// `ρ₀⁻¹ ∫ h e^z`.
    pub fn q_constant(&self, rho0: f64) -> f64 {
        self.log_normalization.exp() / rho0
    }

    /// `∫ ρ h e^z / ∫ h e^z` recomputed by quadrature.
    pub fn normalization_check(&self) -> f64 {
        self.rho * self.space.integrate_qp(&self.density_qp())
    }

    /// Eigenvalue of smallest magnitude of `A v = μ M v` for the linearized
    /// operator `A` on `H¹₀` and the mass matrix `M`.
    pub fn nondegeneracy_check(&mut self) -> Result<f64> {
        let e = self.density_qp();
        let (a, border) = linearization(&self.space, self.rho, &e);
        let mu = smallest_eigenvalue(&self.space, &a, &border)?;
        self.smallest_singular_value = Some(mu);
        Ok(mu)
    }
}

/// Smallest `|μ|` of `(A + U Vᵀ-style border) v = μ M v` on interior dofs.
pub fn smallest_eigenvalue(space: &Space, a: &CsrMatrix, border: &Border) -> Result<f64> {
    let n = space.n_dofs();
    let m = space.mass();
    let fac = Factor::bordered(a, border)?;
    let nb = border.m();
    let apply_a = |x: &[f64]| {
        // eliminate the auxiliary unknowns: s = Vᵀx / (−corner) for a single scalar border
        let mut y = a.matvec(x);
        for k in 0..nb {
            let s: f64 = -border.rows[k].iter().zip(x).map(|(r, v)| r * v).sum::<f64>() / border.corner[k * nb + k];
            for (yi, c) in y.iter_mut().zip(&border.cols[k]) {
                *yi += c * s;
            }
        }
        y
    };
    let solve = |b: &[f64]| {
        let mut rhs = b.to_vec();
        rhs.extend(std::iter::repeat(0.0).take(nb));
        let mut x = fac.solve(&rhs);
        x.truncate(n);
        x
    };
    let r = nearest_zero(n, 1, apply_a, |x| m.matvec(x), solve, 1e-10, 500)?;
    Ok(r.values[0].abs())
}

/// Central differences `∂z/∂ξ_i^c` with step `1e−4 · clearance`.
pub fn mfe_derivative_wrt_sources(
    solution: &MeanFieldSolution,
    oracle: &GreensOracle,
    opts: &SolveOptions,
) -> Result<Vec<[Field; 2]>> {
    let config = match &solution.sources {
        Sources::Points(c) => c.clone(),
        Sources::Origin { .. } => {
            return Err(Error::InvalidInput("derivative needs movable point sources".into()));
        }
    };
    let step = 1e-4 * config.boundary_clearance();
    let domain = oracle.domain();
    let mesh = solution.z.mesh().clone();
    let mut out = Vec::with_capacity(config.k());
    for i in 0..config.k() {
        let mut pair = Vec::with_capacity(2);
        for c in 0..2 {
            let plus = config.shifted(i, c, step, domain)?;
            let minus = config.shifted(i, c, -step, domain)?;
            let zp = solve_mfe(oracle, solution.rho, Sources::Points(plus), opts, Some(&solution.z))?;
            let zm = solve_mfe(oracle, solution.rho, Sources::Points(minus), opts, Some(&solution.z))?;
            let vals = zp.z.values().iter().zip(zm.z.values()).map(|(a, b)| (a - b) / (2.0 * step)).collect();
            pair.push(Field::new(mesh.clone(), vals)?);
        }
        let [a, b]: [Field; 2] = pair.try_into().expect("two components");
        out.push([a, b]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::triangulate;

    fn oracle(h: f64) -> GreensOracle {
        let d = Domain::unit_disk(1);
        let s = Space::new(Arc::new(triangulate(&d, h, &[]).unwrap()));
        GreensOracle::preferred(d, s)
    }

    #[test]
    fn configuration_limits() {
        let d = Domain::unit_disk(1);
        assert!(Configuration::new(vec![[0.0, 0.0], [0.0, 1e-7]], &d).is_err());
        assert!(Configuration::new(vec![[0.9995, 0.0]], &d).is_err());
        let c = Configuration::new(vec![[0.1, 0.0], [-0.2, 0.3]], &d).unwrap();
        assert!((c.min_separation() - 0.3f64.hypot(0.3)).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_gives_zero() {
        let o = oracle(0.2);
        let s = solve_mfe(&o, 0.0, Sources::Origin { k: 1 }, &SolveOptions::default(), None).unwrap();
        assert!(s.z.max_abs() == 0.0);
    }

    #[test]
    fn origin_weight_on_disk() {
        let o = oracle(0.2);
        let f = log_weight(&Sources::Origin { k: 1 }, &o).unwrap();
        for (p, v) in f.mesh().vertices().iter().zip(f.values()) {
            let r = p[0].hypot(p[1]);
            if r > 0.0 {
                assert!((v - 4.0 * r.ln()).abs() < 1e-12);
            }
        }
        let empty = Configuration::new(vec![], &Domain::unit_disk(1)).unwrap();
        let f = log_weight(&Sources::Points(empty), &o).unwrap();
        assert!(f.max_abs() == 0.0);
    }

    #[test]
    fn normalization_identity() {
        let o = oracle(0.1);
        let s = solve_mfe(&o, 4.0, Sources::Origin { k: 1 }, &SolveOptions::default(), None).unwrap();
        assert!((s.normalization_check() - 4.0).abs() < 1e-10);
        assert!(s.newton_residual < 1e-9);
        assert!(s.z.boundary_max_abs() == 0.0);
    }
}
