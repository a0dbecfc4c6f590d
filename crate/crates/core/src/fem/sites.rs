//! Point clouds with cached mesh locations, for evaluating P1 fields off the
//! quadrature points of a [`Space`].

use std::sync::Arc;

use super::space::Space;
use crate::geometry::Mesh;

#[derive(Clone, Debug)]
pub struct Sites {
    pub points: Vec<[f64; 2]>,
    loc: Vec<(usize, [f64; 3])>,
    mesh: Arc<Mesh>,
}

impl Sites {
    /// Locates every point; points just outside the polygon use the nearest triangle.
    pub fn locate(mesh: &Arc<Mesh>, points: Vec<[f64; 2]>) -> Self {
        let loc = points.iter().map(|&x| mesh.locate_nearest(x)).collect();
        Self { points, loc, mesh: mesh.clone() }
    }

    /// The quadrature points of `space`, located without searching.
    pub fn quadrature(space: &Space) -> Self {
        let bary = space.rule_barycentrics();
        let nq = bary.len();
        let loc = (0..space.qp().len()).map(|q| (q / nq, bary[q % nq])).collect();
        Self { points: space.qp().to_vec(), loc, mesh: space.mesh().clone() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn interp(&self, nodal: &[f64]) -> Vec<f64> {
        let tris = self.mesh.triangles();
        self.loc
            .iter()
            .map(|&(t, l)| {
                let v = tris[t];
                l[0] * nodal[v[0]] + l[1] * nodal[v[1]] + l[2] * nodal[v[2]]
            })
            .collect()
    }

    pub fn concat(mut self, other: Sites) -> Self {
        debug_assert!(Arc::ptr_eq(&self.mesh, &other.mesh));
        self.points.extend(other.points);
        self.loc.extend(other.loc);
        self
    }
}
