//! Nodal scalar fields on a mesh.

use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Mesh;

#[derive(Clone, Debug)]
pub struct Field {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::InvalidInput(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.n_vertices()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.n_vertices();
        Self { mesh, values: vec![0.0; n] }
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = mesh.vertices().iter().map(|&x| f(x)).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// P1 interpolant at `x`; points just outside the polygon use the nearest triangle.
    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let (t, l) = self.mesh.locate_nearest(x);
        let tri = self.mesh.triangles()[t];
        l[0] * self.values[tri[0]] + l[1] * self.values[tri[1]] + l[2] * self.values[tri[2]]
    }

    /// Gradient at `x` from a least-squares quadratic fit over the two-ring patch.
    pub fn gradient(&self, x: [f64; 2]) -> [f64; 2] {
        let (t, _) = self.mesh.locate_nearest(x);
        let vt = self.mesh.vertex_triangles();
        let mut patch: Vec<usize> = Vec::new();
        for &v in &self.mesh.triangles()[t] {
            for &s in &vt[v] {
                patch.extend_from_slice(&self.mesh.triangles()[s]);
            }
        }
        patch.sort_unstable();
        patch.dedup();
        let pts = self.mesh.vertices();
        let scale = patch
            .iter()
            .map(|&v| (pts[v][0] - x[0]).hypot(pts[v][1] - x[1]))
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let n = patch.len();
        let a = DMatrix::from_fn(n, 6, |i, j| {
            let dx = (pts[patch[i]][0] - x[0]) / scale;
            let dy = (pts[patch[i]][1] - x[1]) / scale;
            [1.0, dx, dy, dx * dx, dx * dy, dy * dy][j]
        });
        let b = DVector::from_fn(n, |i, _| self.values[patch[i]]);
        let c = a.svd(true, true).solve(&b, 1e-12).expect("svd solve");
        [c[1] / scale, c[2] / scale]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn boundary_max_abs(&self) -> f64 {
        self.values
            .iter()
            .zip(self.mesh.boundary_mask())
            .filter(|(_, &b)| b)
            .fold(0.0, |m, (v, _)| m.max(v.abs()))
    }

    pub fn symmetrize(&self) -> Result<Self> {
        Ok(Self { mesh: self.mesh.clone(), values: self.mesh.symmetrize(&self.values)? })
    }

    /// Largest `|u(x) − u(R x)|` over vertices for the mesh rotation.
    pub fn asymmetry(&self) -> Result<f64> {
        let sym = self
            .mesh
            .symmetry()
            .ok_or_else(|| Error::InvalidInput("mesh carries no rotation".into()))?;
        Ok(sym
            .rotation
            .iter()
            .enumerate()
            .map(|(v, &w)| (self.values[v] - self.values[w]).abs())
            .fold(0.0, f64::max))
    }

    pub fn axpy(&mut self, a: f64, other: &Field) {
        for (s, o) in self.values.iter_mut().zip(&other.values) {
            *s += a * o;
        }
    }

    /// One line per vertex: `x y value`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        for (p, v) in self.mesh.vertices().iter().zip(&self.values) {
            writeln!(w, "{:.17e} {:.17e} {:.17e}", p[0], p[1], v)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{triangulate, Domain};

    #[test]
    fn quadratic_gradient_recovered() {
        let mesh = Arc::new(triangulate(&Domain::unit_disk(1), 0.1, &[]).unwrap());
        let f = Field::from_fn(mesh, |x| 1.0 + 2.0 * x[0] - x[1] + 0.7 * x[0] * x[1] - 0.3 * x[1] * x[1]);
        let x = [0.31, -0.27];
        let g = f.gradient(x);
        assert!((g[0] - (2.0 + 0.7 * x[1])).abs() < 1e-10);
        assert!((g[1] - (-1.0 + 0.7 * x[0] - 0.6 * x[1])).abs() < 1e-10);
        let v = f.eval(x);
        assert!((v - (1.0 + 2.0 * x[0] - x[1] + 0.7 * x[0] * x[1] - 0.3 * x[1] * x[1])).abs() < 5e-3);
    }

    #[test]
    fn symmetrize_examples() {
        let mesh = Arc::new(triangulate(&Domain::unit_disk(2), 0.2, &[]).unwrap());
        let c = Field::from_fn(mesh.clone(), |_| 3.25).symmetrize().unwrap();
        assert!(c.values().iter().all(|&v| v == 3.25));
        let x = Field::from_fn(mesh, |p| p[0]).symmetrize().unwrap();
        assert!(x.max_abs() < 1e-15);
    }
}
