//! Continuous piecewise-linear elements with homogeneous Dirichlet conditions.

use std::sync::{Arc, OnceLock};

use super::sparse::{CsrMatrix, Factor};
use crate::error::{Error, Result};
use crate::geometry::quadrature::TriangleRule;
use crate::geometry::Mesh;

const NO_DOF: usize = usize::MAX;

pub struct Space {
    mesh: Arc<Mesh>,
    dof: Vec<usize>,
    verts: Vec<usize>,
    grads: Vec<[[f64; 2]; 3]>,
    areas: Vec<f64>,
    rule: TriangleRule,
    qp: Vec<[f64; 2]>,
    qw: Vec<f64>,
    stiffness: CsrMatrix,
    /// Per triangle, slot of each local (a, b) pair in the interior pattern.
    slots: Vec<[usize; 9]>,
    /// Interior-row, boundary-column stiffness entries `(dof, vertex, value)`.
    coupling: Vec<(usize, usize, f64)>,
    chol: OnceLock<Factor>,
}

impl std::fmt::Debug for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Space").field("vertices", &self.mesh.n_vertices()).field("dofs", &self.verts.len()).finish()
    }
}

impl Space {
    pub fn new(mesh: Arc<Mesh>) -> Arc<Self> {
        Self::with_rule(mesh, TriangleRule::degree5())
    }

    pub fn with_rule(mesh: Arc<Mesh>, rule: TriangleRule) -> Arc<Self> {
        let nv = mesh.n_vertices();
        let mut dof = vec![NO_DOF; nv];
        let mut verts = Vec::new();
        for v in 0..nv {
            if !mesh.is_boundary(v) {
                dof[v] = verts.len();
                verts.push(v);
            }
        }
        let nt = mesh.n_triangles();
        let mut grads = Vec::with_capacity(nt);
        let mut areas = Vec::with_capacity(nt);
        let mut trip = Vec::with_capacity(9 * nt);
        let mut coupling = Vec::new();
        for t in 0..nt {
            let [a, b, c] = mesh.triangle_points(t);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            let g = [
                [(b[1] - c[1]) / det, (c[0] - b[0]) / det],
                [(c[1] - a[1]) / det, (a[0] - c[0]) / det],
                [(a[1] - b[1]) / det, (b[0] - a[0]) / det],
            ];
            let area = 0.5 * det;
            let tri = mesh.triangles()[t];
            for i in 0..3 {
                for j in 0..3 {
                    let k = area * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                    let (di, dj) = (dof[tri[i]], dof[tri[j]]);
                    if di != NO_DOF && dj != NO_DOF {
                        trip.push((di, dj, k));
                    } else if di != NO_DOF {
                        coupling.push((di, tri[j], k));
                    }
                }
            }
            grads.push(g);
            areas.push(area);
        }
        let stiffness = CsrMatrix::from_triplets(verts.len(), trip);
        let slots = (0..nt)
            .map(|t| {
                let tri = mesh.triangles()[t];
                let mut s = [NO_DOF; 9];
                for i in 0..3 {
                    for j in 0..3 {
                        let (di, dj) = (dof[tri[i]], dof[tri[j]]);
                        if di != NO_DOF && dj != NO_DOF {
                            s[3 * i + j] = stiffness.slot(di, dj).expect("pattern holds element pairs");
                        }
                    }
                }
                s
            })
            .collect();
        let mut qp = Vec::with_capacity(nt * rule.len());
        let mut qw = Vec::with_capacity(nt * rule.len());
        for t in 0..nt {
            for (x, w, _) in rule.on(&mesh.triangle_points(t)) {
                qp.push(x);
                qw.push(w);
            }
        }
        Arc::new(Self {
            mesh,
            dof,
            verts,
            grads,
            areas,
            rule,
            qp,
            qw,
            stiffness,
            slots,
            coupling,
            chol: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn n_dofs(&self) -> usize {
        self.verts.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn dof_of(&self, v: usize) -> Option<usize> {
        (self.dof[v] != NO_DOF).then_some(self.dof[v])
    }

    pub fn vertex_of(&self, d: usize) -> usize {
        self.verts[d]
    }

    pub fn points_per_triangle(&self) -> usize {
        self.rule.len()
    }

    /// Quadrature points, triangle by triangle.
    pub fn qp(&self) -> &[[f64; 2]] {
        &self.qp
    }

    pub fn rule_barycentrics(&self) -> &[[f64; 3]] {
        &self.rule.bary
    }

    pub fn qw(&self) -> &[f64] {
        &self.qw
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn triangle_gradients(&self, t: usize) -> &[[f64; 2]; 3] {
        &self.grads[t]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    /// Cached Cholesky factor of the interior stiffness matrix.
    pub fn stiffness_factor(&self) -> Result<&Factor> {
        if let Some(f) = self.chol.get() {
            return Ok(f);
        }
        let f = Factor::spd(&self.stiffness)?;
        Ok(self.chol.get_or_init(|| f))
    }

    pub fn map_qp(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.qp.iter().map(|&x| f(x)).collect()
    }

    /// P1 interpolant of nodal values at every quadrature point.
    pub fn interpolate_qp(&self, nodal: &[f64]) -> Vec<f64> {
        let nq = self.rule.len();
        let mut out = Vec::with_capacity(self.qp.len());
        for tri in self.mesh.triangles() {
            let u = tri.map(|v| nodal[v]);
            for k in 0..nq {
                let l = self.rule.bary[k];
                out.push(l[0] * u[0] + l[1] * u[1] + l[2] * u[2]);
            }
        }
        out
    }

    pub fn integrate_qp(&self, fq: &[f64]) -> f64 {
        fq.iter().zip(&self.qw).map(|(f, w)| f * w).sum()
    }

    /// `∫ f φ_i` over interior basis functions.
    pub fn load(&self, fq: &[f64]) -> Vec<f64> {
        let nq = self.rule.len();
        let mut b = vec![0.0; self.n_dofs()];
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            for k in 0..nq {
                let q = t * nq + k;
                let fw = fq[q] * self.qw[q];
                if fw == 0.0 {
                    continue;
                }
                let l = self.rule.bary[k];
                for i in 0..3 {
                    let d = self.dof[tri[i]];
                    if d != NO_DOF {
                        b[d] += fw * l[i];
                    }
                }
            }
        }
        b
    }

    /// `∫ f φ_i φ_j` on the interior pattern.
    pub fn weighted_mass(&self, fq: &[f64]) -> CsrMatrix {
        let nq = self.rule.len();
        let mut m = self.stiffness.zeros_like();
        let vals = m.values_mut();
        for t in 0..self.mesh.n_triangles() {
            let mut loc = [0.0; 9];
            for k in 0..nq {
                let q = t * nq + k;
                let fw = fq[q] * self.qw[q];
                let l = self.rule.bary[k];
                for i in 0..3 {
                    for j in 0..3 {
                        loc[3 * i + j] += fw * l[i] * l[j];
                    }
                }
            }
            for (s, v) in self.slots[t].iter().zip(loc) {
                if *s != NO_DOF {
                    vals[*s] += v;
                }
            }
        }
        m
    }

    /// Consistent mass matrix on interior dofs.
    pub fn mass(&self) -> CsrMatrix {
        self.weighted_mass(&vec![1.0; self.qp.len()])
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.verts.iter().map(|&v| full[v]).collect()
    }

    /// Nodal vector from interior values and boundary values.
    pub fn extend(&self, interior: &[f64], boundary: impl Fn(usize) -> f64) -> Vec<f64> {
        (0..self.n_vertices())
            .map(|v| match self.dof_of(v) {
                Some(d) => interior[d],
                None => boundary(v),
            })
            .collect()
    }

    pub fn extend_zero(&self, interior: &[f64]) -> Vec<f64> {
        self.extend(interior, |_| 0.0)
    }

    /// Solves `K u_I = b − K_IB g_B` and returns the full nodal vector.
    pub fn solve_dirichlet(&self, load: &[f64], boundary: impl Fn(usize) -> f64) -> Result<Vec<f64>> {
        if load.len() != self.n_dofs() {
            return Err(Error::InvalidInput("load vector length differs from dof count".into()));
        }
        let g: Vec<f64> = (0..self.n_vertices()).map(|v| if self.dof_of(v).is_none() { boundary(v) } else { 0.0 }).collect();
        let mut rhs = load.to_vec();
        for &(d, v, k) in &self.coupling {
            rhs[d] -= k * g[v];
        }
        let f = self.stiffness_factor()?;
        let u = f.solve(&rhs);
        let res = f.relative_residual(&u, &rhs);
        if !(res < 1e-10) {
            return Err(Error::Solver(format!("Poisson solve residual {res:.3e}")));
        }
        Ok(self.extend(&u, |v| g[v]))
    }

    /// Discrete harmonic function with the given trace on boundary vertices.
    pub fn harmonic_extension(&self, trace: impl Fn([f64; 2]) -> f64) -> Result<Vec<f64>> {
        let vs = self.mesh.vertices();
        self.solve_dirichlet(&vec![0.0; self.n_dofs()], |v| trace(vs[v]))
    }

    /// `√(uᵀ K u)` for a nodal vector vanishing on the boundary.
    pub fn energy_norm(&self, full: &[f64]) -> f64 {
        let u = self.restrict(full);
        self.stiffness.form(&u, &u).max(0.0).sqrt()
    }

    /// `∫ ∇u·∇v` for arbitrary nodal vectors (boundary values included).
    pub fn dirichlet_form(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for (t, tri) in self.mesh.triangles().iter().enumerate() {
            let g = &self.grads[t];
            let mut gu = [0.0; 2];
            let mut gv = [0.0; 2];
            for i in 0..3 {
                gu[0] += u[tri[i]] * g[i][0];
                gu[1] += u[tri[i]] * g[i][1];
                gv[0] += v[tri[i]] * g[i][0];
                gv[1] += v[tri[i]] * g[i][1];
            }
            s += self.areas[t] * (gu[0] * gv[0] + gu[1] * gv[1]);
        }
        s
    }

    /// Interior equation residual `K u_I + K_IB u_B` of a full nodal vector.
    pub fn apply_stiffness(&self, full: &[f64]) -> Vec<f64> {
        let mut r = self.stiffness.matvec(&self.restrict(full));
        for &(d, v, k) in &self.coupling {
            r[d] += k * full[v];
        }
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{triangulate, Domain};

    #[test]
    fn stiffness_annihilates_constants() {
        let mesh = Arc::new(triangulate(&Domain::unit_disk(1), 0.2, &[]).unwrap());
        let s = Space::new(mesh);
        let r = s.apply_stiffness(&vec![1.0; s.n_vertices()]);
        assert!(r.iter().all(|v| v.abs() < 1e-13));
        let area = s.integrate_qp(&vec![1.0; s.qp().len()]);
        let mass_total: f64 = s.mass().values().iter().sum();
        assert!(mass_total < area);
    }

    #[test]
    fn harmonic_linear_is_exact() {
        let mesh = Arc::new(triangulate(&Domain::unit_disk(1), 0.15, &[]).unwrap());
        let s = Space::new(mesh.clone());
        let u = s.harmonic_extension(|x| 2.0 * x[0] - x[1] + 0.5).unwrap();
        for (v, p) in mesh.vertices().iter().enumerate() {
            assert!((u[v] - (2.0 * p[0] - p[1] + 0.5)).abs() < 1e-12);
        }
    }
}
