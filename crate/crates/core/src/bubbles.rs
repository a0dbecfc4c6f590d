//! Liouville bubbles `w = log(2α²δ^α / (δ^α + |x − ξ|^α)²)`, their Dirichlet
//! projections and the kernel functions of the linearized equation.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::eigen::nearest_zero;
use crate::fem::{Factor, Field, GreensOracle, Space};
use crate::geometry::quadrature::AnnularQuadRule;
use crate::geometry::{triangulate_with, Domain, MeshOptions, RefinementCenter};

/// `log(eᵃ + eᵇ)`.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub delta: f64,
    pub center: [f64; 2],
    pub alpha: f64,
    /// `log δ`, kept separately so that `δ^α` never has to be formed.
    pub log_delta: f64,
}

impl BubbleParams {
    pub fn new(delta: f64, center: [f64; 2], alpha: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidInput(format!("bubble scale {delta} must be positive")));
        }
        Self::from_log_delta(delta.ln(), center, alpha)
    }

    pub fn from_log_delta(log_delta: f64, center: [f64; 2], alpha: f64) -> Result<Self> {
        if !log_delta.is_finite() {
            return Err(Error::InvalidInput("bubble scale must be positive and finite".into()));
        }
        if !(alpha >= 2.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("bubble exponent {alpha} must be at least 2")));
        }
        Ok(Self { delta: log_delta.exp(), center, alpha, log_delta })
    }

    pub fn regular(delta: f64, center: [f64; 2]) -> Result<Self> {
        Self::new(delta, center, 2.0)
    }

    pub fn is_regular(&self) -> bool {
        self.alpha == 2.0
    }

    fn log_r(&self, x: [f64; 2]) -> f64 {
        (x[0] - self.center[0]).hypot(x[1] - self.center[1]).ln()
    }

    /// `log(2α²δ^α)`.
    pub fn log_peak(&self) -> f64 {
        (2.0 * self.alpha * self.alpha).ln() + self.alpha * self.log_delta
    }

    /// `log(δ^α + r^α)`.
    fn log_denominator(&self, log_r: f64) -> f64 {
        log_add_exp(self.alpha * self.log_delta, self.alpha * log_r)
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        self.log_peak() - 2.0 * self.log_denominator(self.log_r(x))
    }

    /// `log(|x − ξ|^{α−2} e^w)`.
    pub fn log_density(&self, x: [f64; 2]) -> f64 {
        let lr = self.log_r(x);
        let singular = if self.is_regular() { 0.0 } else { (self.alpha - 2.0) * lr };
        self.log_peak() + singular - 2.0 * self.log_denominator(lr)
    }

    /// `|x − ξ|^{α−2} e^w`, equal to `−Δw`.
    pub fn density(&self, x: [f64; 2]) -> f64 {
        self.log_density(x).exp()
    }

    /// Five-point Laplacian of `w` plus the density; vanishes up to `O(step²)`.
    pub fn liouville_residual(&self, x: [f64; 2], step: f64) -> f64 {
        let c = self.eval(x);
        let lap = (self.eval([x[0] + step, x[1]])
            + self.eval([x[0] - step, x[1]])
            + self.eval([x[0], x[1] + step])
            + self.eval([x[0], x[1] - step])
            - 4.0 * c)
            / (step * step);
        lap + self.density(x)
    }

    /// `Z⁰ = (δ^α − r^α)/(δ^α + r^α)` for index 0, `(x_i − ξ_i)/(δ² + r²)` for 1, 2.
    pub fn kernel(&self, index: usize, x: [f64; 2]) -> Result<f64> {
        match index {
            0 => {
                let lr = self.log_r(x);
                Ok((0.5 * self.alpha * (self.log_delta - lr)).tanh())
            }
            1 | 2 if self.is_regular() => {
                let d = [x[0] - self.center[0], x[1] - self.center[1]];
                Ok(d[index - 1] / (self.delta * self.delta + d[0] * d[0] + d[1] * d[1]))
            }
            1 | 2 => Err(Error::InvalidInput("singular bubbles only carry the radial kernel".into())),
            _ => Err(Error::InvalidInput(format!("kernel index {index} is not 0, 1 or 2"))),
        }
    }
}

/// `Pw = w + q` with the harmonic correction split as
/// `q = −log(2α²δ^α) + 4πα H(·, ξ) + D`, where `D` is the harmonic extension
/// of `2 log(1 + (δ/|x − ξ|)^α)` and is the whole expansion defect.
#[derive(Clone, Debug)]
pub struct ProjectedBubble {
    pub params: BubbleParams,
    pub constant: f64,
    pub remainder: Field,
    /// Nodal `q`.
    pub correction: Field,
}

fn boundary_remainder(p: &BubbleParams, x: [f64; 2]) -> f64 {
    2.0 * (p.alpha * (p.log_delta - p.log_r(x))).exp().ln_1p()
}

pub fn project_bubble(params: BubbleParams, oracle: &GreensOracle) -> Result<ProjectedBubble> {
    let space = oracle.space();
    let mesh = space.mesh().clone();
    let d = space.harmonic_extension(|x| boundary_remainder(&params, x))?;
    let remainder = Field::new(mesh.clone(), d)?;
    let h = oracle.regular_field(params.center)?;
    let constant = -params.log_peak();
    let scale = 4.0 * PI * params.alpha;
    let q = remainder.values().iter().zip(h.values()).map(|(dv, hv)| constant + scale * hv + dv).collect();
    Ok(ProjectedBubble { params, constant, remainder, correction: Field::new(mesh, q)? })
}

impl ProjectedBubble {
    /// `q(x)` with `H` from the oracle and `D` interpolated.
    pub fn correction_at(&self, oracle: &GreensOracle, x: [f64; 2]) -> Result<f64> {
        Ok(self.constant + 4.0 * PI * self.params.alpha * oracle.regular_part(x, self.params.center)? + self.remainder.eval(x))
    }

    /// `q` at the quadrature points of the oracle's space.
    pub fn correction_qp(&self, oracle: &GreensOracle) -> Result<Vec<f64>> {
        let space = oracle.space();
        let h = oracle.regular_at_qp(self.params.center)?;
        let d = space.interpolate_qp(self.remainder.values());
        let s = 4.0 * PI * self.params.alpha;
        Ok(h.iter().zip(&d).map(|(hv, dv)| self.constant + s * hv + dv).collect())
    }

    pub fn eval(&self, oracle: &GreensOracle, x: [f64; 2]) -> Result<f64> {
        Ok(self.params.eval(x) + self.correction_at(oracle, x)?)
    }

    /// `max |D|` over vertices with `dist(x, ∂Ω) ≥ margin` and `|x − ξ| ≥ margin`.
    pub fn expansion_defect(&self, domain: &Domain, margin: f64) -> f64 {
        let c = self.params.center;
        self.remainder
            .mesh()
            .vertices()
            .iter()
            .zip(self.remainder.values())
            .filter(|(x, _)| domain.distance_to_boundary(**x) >= margin && (x[0] - c[0]).hypot(x[1] - c[1]) >= margin)
            .map(|(_, v)| v.abs())
            .fold(0.0, f64::max)
    }

    /// Defect at the center.
    pub fn center_defect(&self) -> f64 {
        self.remainder.eval(self.params.center)
    }
}

/// Discrete projection `PZ` with `∫∇PZ·∇ψ = ∫ |x − ξ|^{α−2}e^w Z ψ` for all test functions.
#[derive(Clone, Debug)]
pub struct ProjectedKernel {
    pub params: BubbleParams,
    pub index: usize,
    pub field: Field,
    /// Interior load vector; `∫∇φ·∇PZ = φᵀ load` for `φ` in the space.
    pub load: Vec<f64>,
    pub energy_norm: f64,
}

pub fn project_kernel(params: BubbleParams, index: usize, space: &Arc<Space>) -> Result<ProjectedKernel> {
    let mut fq = Vec::with_capacity(space.qp().len());
    for &x in space.qp() {
        fq.push(params.density(x) * params.kernel(index, x)?);
    }
    let load = space.load(&fq);
    let vals = space.solve_dirichlet(&load, |_| 0.0)?;
    let energy_norm = space.energy_norm(&vals);
    Ok(ProjectedKernel { params, index, field: Field::new(space.mesh().clone(), vals)?, load, energy_norm })
}

impl ProjectedKernel {
    /// `max |PZ − Z − c|` over the compact set, with `c = 1` for the radial kernel and 0 otherwise.
    pub fn expansion_defect(&self, domain: &Domain, margin: f64) -> Result<f64> {
        let shift = if self.index == 0 { 1.0 } else { 0.0 };
        let c = self.params.center;
        let mut worst = 0.0f64;
        for (x, v) in self.field.mesh().vertices().iter().zip(self.field.values()) {
            if domain.distance_to_boundary(*x) >= margin && (x[0] - c[0]).hypot(x[1] - c[1]) >= margin {
                worst = worst.max((v - self.params.kernel(self.index, *x)? - shift).abs());
            }
        }
        Ok(worst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Identity {
    /// Weighted radial kernel integrates to 0.
    KernelMoment,
    /// Against `log(1 + |y|^α)²`, equal to `−4πα`.
    LogDenominator,
    /// Against `log|y|`, equal to `−4π`.
    LogRadius,
}

impl Identity {
    pub const ALL: [Identity; 3] = [Identity::KernelMoment, Identity::LogDenominator, Identity::LogRadius];

    pub fn id(&self) -> &'static str {
        match self {
            Identity::KernelMoment => "kernel_moment",
            Identity::LogDenominator => "log_denominator",
            Identity::LogRadius => "log_radius",
        }
    }

    pub fn exact(&self, alpha: f64) -> f64 {
        match self {
            Identity::KernelMoment => 0.0,
            Identity::LogDenominator => -4.0 * PI * alpha,
            Identity::LogRadius => -4.0 * PI,
        }
    }

    /// Radial integrand in `r = |y|`.
    pub fn integrand(&self, alpha: f64, r: f64) -> f64 {
        let s = r.powf(alpha);
        let base = r.powf(alpha - 2.0) / ((1.0 + s) * (1.0 + s)) * (1.0 - s) / (1.0 + s);
        match self {
            Identity::KernelMoment => base,
            Identity::LogDenominator => 2.0 * alpha * alpha * base * 2.0 * s.ln_1p(),
            Identity::LogRadius => 2.0 * alpha * alpha * base * r.ln(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentityRow {
    pub alpha: f64,
    pub identity: Identity,
    pub computed: f64,
    pub exact: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct IdentityOptions {
    pub r_max: f64,
    pub r_core: f64,
    pub radial_order: usize,
}

impl Default for IdentityOptions {
    fn default() -> Self {
        Self { r_max: 1e6, r_core: 1e-6, radial_order: 24 }
    }
}

/// Integral over `B_R` of a radial function, with a geometric inner core.
pub fn radial_integral(f: impl Fn(f64) -> f64, r_core: f64, r_max: f64, radial_order: usize) -> Result<f64> {
    Ok(AnnularQuadRule::disk([0.0, 0.0], r_core, r_max, radial_order, 4)?.integrate_radial(f))
}

/// Each identity at `R` and `2R`, extrapolated assuming a tail `∝ R^{−α}`.
pub fn verify_integral_identities(alphas: &[f64], opts: &IdentityOptions) -> Result<Vec<IdentityRow>> {
    let mut rows = Vec::new();
    for &alpha in alphas {
        if !(alpha >= 2.0) {
            return Err(Error::InvalidInput(format!("exponent {alpha} must be at least 2")));
        }
        for id in Identity::ALL {
            let f = |r: f64| id.integrand(alpha, r);
            let a = radial_integral(f, opts.r_core, opts.r_max, opts.radial_order)?;
            let b = radial_integral(f, opts.r_core, 2.0 * opts.r_max, opts.radial_order)?;
            let q = 2f64.powf(alpha);
            let computed = (q * b - a) / (q - 1.0);
            let exact = id.exact(alpha);
            let abs_err = (computed - exact).abs();
            let rel_err = if exact == 0.0 { abs_err } else { abs_err / exact.abs() };
            rows.push(IdentityRow { alpha, identity: id, computed, exact, abs_err, rel_err });
        }
    }
    Ok(rows)
}

/// `∫_{B_R} 2α²|y|^{α−2}/(1+|y|^α)² dy`, which tends to `4πα`.
pub fn bubble_mass(alpha: f64, r_max: f64, radial_order: usize) -> Result<f64> {
    radial_integral(|r| 2.0 * alpha * alpha * r.powf(alpha - 2.0) / (1.0 + r.powf(alpha)).powi(2), 1e-6, r_max, radial_order)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelSweepRow {
    pub radius: f64,
    pub window: f64,
    /// Eigenvalues of smallest magnitude, sorted by magnitude.
    pub eigenvalues: Vec<f64>,
    pub count: usize,
    /// Density-weighted correlation of the near-zero mode with the radial kernel.
    pub correlation: f64,
    pub vertices: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelDimensionReport {
    pub alpha: f64,
    pub symmetry_order: u32,
    pub rows: Vec<KernelSweepRow>,
    /// Count at the largest radius.
    pub dimension: usize,
    pub stable: bool,
    /// Smallest `|μ|` outside the window at the largest radius.
    pub smallest_nontrivial: f64,
}

#[derive(Clone, Debug)]
pub struct KernelOptions {
    pub radii: Vec<f64>,
    pub core_h: f64,
    pub grading: f64,
    pub window_factor: f64,
    pub eigen_count: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { radii: vec![250.0, 500.0, 1000.0], core_h: 0.02, grading: 0.15, window_factor: 10.0, eigen_count: 6 }
    }
}

/// `true` when `α/2` is an odd integer.
pub fn half_alpha_is_odd(alpha: f64) -> bool {
    let h = alpha / 2.0;
    h.fract() == 0.0 && (h as i64) % 2 == 1
}

/// Near-zero eigenvalues of `−Δ − 2α²|y|^{α−2}/(1+|y|^α)²` on `B_R` with zero
/// Dirichlet data, restricted to `R_ℓ`-invariant functions when `ℓ ≥ 2`.
pub fn entire_kernel_dimension(alpha: f64, symmetry_order: u32, opts: &KernelOptions) -> Result<KernelDimensionReport> {
    if !(alpha >= 2.0) || !half_alpha_is_odd(alpha) {
        return Err(Error::InvalidInput(format!("α/2 odd required, got α = {alpha}")));
    }
    if symmetry_order == 0 || symmetry_order > 6 {
        return Err(Error::InvalidInput(format!("symmetry order {symmetry_order} must lie in 1..=6")));
    }
    let bubble = BubbleParams::new(1.0, [0.0, 0.0], alpha)?;
    let mut rows = Vec::new();
    for &radius in &opts.radii {
        let domain = Domain::disk(radius, symmetry_order)?;
        let mopts = MeshOptions { grading: opts.grading, ..MeshOptions::default() };
        let center = RefinementCenter { point: [0.0, 0.0], target: opts.core_h };
        let mesh = triangulate_with(&domain, radius / 10.0, &[center], &mopts)?;
        let nv = mesh.n_vertices();
        let space = Space::new(Arc::new(mesh));
        let dens = space.map_qp(|x| bubble.density(x));
        let mut a = space.stiffness().clone();
        a.axpy(-1.0, &space.weighted_mass(&dens));
        let m = space.mass();
        let n = space.n_dofs();
        // orbit classes of interior dofs
        let (agg, n_classes) = match (symmetry_order, space.mesh().symmetry()) {
            (1, _) => ((0..n).collect::<Vec<_>>(), n),
            (_, Some(sym)) => {
                let mut agg = vec![usize::MAX; n];
                let mut nc = 0;
                for d in 0..n {
                    if agg[d] != usize::MAX {
                        continue;
                    }
                    let mut v = space.vertex_of(d);
                    loop {
                        let dd = space.dof_of(v).expect("rotation maps interior to interior");
                        if agg[dd] != usize::MAX {
                            break;
                        }
                        agg[dd] = nc;
                        v = sym.rotation[v];
                    }
                    nc += 1;
                }
                (agg, nc)
            }
            (_, None) => return Err(Error::Mesh("ball mesh is not rotation invariant".into())),
        };
        let a_s = a.aggregate(&agg, n_classes);
        let m_s = m.aggregate(&agg, n_classes);
        let fac = Factor::bordered(&a_s, &Default::default())?;
        let count = opts.eigen_count.min(n_classes);
        let pairs = nearest_zero(n_classes, count, |x| a_s.matvec(x), |x| m_s.matvec(x), |b| fac.solve(b), 1e-10, 2000)?;
        let window = opts.window_factor / (radius * radius);
        let inside = pairs.values.iter().filter(|v| v.abs() < window).count();
        let correlation = if inside > 0 {
            // expand the first mode back to dofs and correlate against Z⁰ with the density weight
            let v: Vec<f64> = (0..n).map(|d| pairs.vectors[0][agg[d]]).collect();
            let full = space.extend_zero(&v);
            let vq = space.interpolate_qp(&full);
            let zq = space.map_qp(|x| bubble.kernel(0, x).unwrap_or(0.0));
            let ip = |f: &[f64], g: &[f64]| space.integrate_qp(&f.iter().zip(g).zip(&dens).map(|((a, b), w)| a * b * w).collect::<Vec<_>>());
            ip(&vq, &zq).abs() / (ip(&vq, &vq) * ip(&zq, &zq)).sqrt()
        } else {
            0.0
        };
        rows.push(KernelSweepRow { radius, window, eigenvalues: pairs.values, count: inside, correlation, vertices: nv });
    }
    let last = rows.last().expect("at least one radius");
    let dimension = last.count;
    let stable = rows.iter().all(|r| r.count == dimension);
    let smallest_nontrivial = last.eigenvalues.iter().map(|v| v.abs()).filter(|v| *v >= last.window).fold(f64::INFINITY, f64::min);
    Ok(KernelDimensionReport { alpha, symmetry_order, rows, dimension, stable, smallest_nontrivial })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let b = BubbleParams::regular(1.0, [0.0, 0.0]).unwrap();
        assert!((b.eval([0.0, 0.0]) - 8f64.ln()).abs() < 1e-15);
        let s = BubbleParams::new(1.0, [0.0, 0.0], 6.0).unwrap();
        assert!((s.eval([0.6, 0.8]) - 18f64.ln()).abs() < 1e-14);
        assert_eq!(s.density([0.0, 0.0]), 0.0);
        assert!((b.density([0.0, 0.0]) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn scaling_covariance() {
        let base = BubbleParams::regular(1.0, [0.0, 0.0]).unwrap();
        let (d, xi) = (0.03, [0.2, -0.1]);
        let b = BubbleParams::regular(d, xi).unwrap();
        for x in [[0.21, -0.1], [0.5, 0.3], [-0.4, 0.0]] {
            let y = [(x[0] - xi[0]) / d, (x[1] - xi[1]) / d];
            assert!((b.eval(x) - (base.eval(y) - 2.0 * d.ln())).abs() < 1e-12);
        }
    }

    #[test]
    fn kernels_bounded() {
        let b = BubbleParams::new(0.1, [0.0, 0.0], 6.0).unwrap();
        assert_eq!(b.kernel(0, [0.0, 0.0]).unwrap(), 1.0);
        assert!(b.kernel(1, [0.1, 0.0]).is_err());
        assert!(b.kernel(3, [0.1, 0.0]).is_err());
        let r = BubbleParams::regular(0.1, [0.0, 0.0]).unwrap();
        assert!((r.kernel(1, [0.1, 0.0]).unwrap() - 0.1 / 0.02).abs() < 1e-12);
    }

    #[test]
    fn half_alpha_parity() {
        assert!(half_alpha_is_odd(2.0) && half_alpha_is_odd(6.0) && half_alpha_is_odd(10.0));
        assert!(!half_alpha_is_odd(4.0) && !half_alpha_is_odd(3.0));
        assert!(entire_kernel_dimension(4.0, 2, &KernelOptions::default()).is_err());
    }

    #[test]
    fn tiny_scales_stay_finite() {
        let b = BubbleParams::from_log_delta(-400.0, [0.0, 0.0], 10.0).unwrap();
        assert!(b.eval([0.5, 0.0]).is_finite());
        assert!(b.kernel(0, [0.5, 0.0]).unwrap() == -1.0);
    }
}
