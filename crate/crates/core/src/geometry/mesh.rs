//! Triangle meshes: construction from a domain, point location, quality metrics,
//! rotational symmetry bookkeeping and a plain-text exchange format.

use std::io::{BufRead, Write};
use std::sync::OnceLock;

use rstar::{PointDistance, RTree, RTreeObject, AABB};
use serde::{Deserialize, Serialize};

use super::domain::{rotate, Domain};
use super::mesher::{RawMesh, Refiner, SizeField};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementCenter {
    pub point: [f64; 2],
    /// Requested edge length at the center.
    pub target: f64,
}

#[derive(Clone, Debug)]
pub struct MeshOptions {
    /// Growth rate of the size field away from refinement centers.
    pub grading: f64,
    pub min_angle_deg: f64,
    pub max_vertices: usize,
    /// Mesh one sector and rotate when the domain and centers allow it.
    pub use_symmetry: bool,
    /// Target edge length along the boundary, graded back to `h_global` inward.
    pub boundary_target: Option<f64>,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { grading: 0.3, min_angle_deg: 28.0, max_vertices: 2_000_000, use_symmetry: true, boundary_target: None }
    }
}

#[derive(Clone, Debug)]
struct TriBox {
    idx: usize,
    env: AABB<[f64; 2]>,
}

impl RTreeObject for TriBox {
    type Envelope = AABB<[f64; 2]>;
    fn envelope(&self) -> Self::Envelope {
        self.env
    }
}

impl PointDistance for TriBox {
    fn distance_2(&self, p: &[f64; 2]) -> f64 {
        self.env.distance_2(p)
    }
}

/// Rotation by `2π/order` acting on vertices as a permutation.
#[derive(Clone, Debug)]
pub struct Symmetry {
    pub order: u32,
    pub rotation: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    refinement_centers: Vec<RefinementCenter>,
    symmetry: Option<Symmetry>,
    tree: RTree<TriBox>,
    vertex_triangles: OnceLock<Vec<Vec<usize>>>,
}

impl Mesh {
    pub fn from_parts(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, boundary: Vec<bool>) -> Result<Self> {
        if boundary.len() != vertices.len() {
            return Err(Error::InvalidInput("boundary mask length differs from vertex count".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidInput(format!("triangle {t} references a missing vertex")));
            }
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if !(area2 > 0.0) {
                return Err(Error::InvalidInput(format!("triangle {t} is not positively oriented")));
            }
        }
        let boxes = triangles
            .iter()
            .enumerate()
            .map(|(idx, tri)| {
                let ps = tri.map(|v| vertices[v]);
                let lo = [ps.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), ps.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min)];
                let hi = [ps.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max), ps.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max)];
                TriBox { idx, env: AABB::from_corners(lo, hi) }
            })
            .collect();
        Ok(Self {
            vertices,
            triangles,
            boundary,
            refinement_centers: Vec::new(),
            symmetry: None,
            tree: RTree::bulk_load(boxes),
            vertex_triangles: OnceLock::new(),
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn refinement_centers(&self) -> &[RefinementCenter] {
        &self.refinement_centers
    }

    pub fn symmetry(&self) -> Option<&Symmetry> {
        self.symmetry.as_ref()
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> &[Vec<usize>] {
        self.vertex_triangles.get_or_init(|| {
            let mut vt = vec![Vec::new(); self.vertices.len()];
            for (t, tri) in self.triangles.iter().enumerate() {
                for &v in tri {
                    vt[v].push(t);
                }
            }
            vt
        })
    }

    pub fn triangle_points(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    }

    pub fn min_angle_deg(&self) -> f64 {
        let mut best = 180.0f64;
        for t in 0..self.n_triangles() {
            let p = self.triangle_points(t);
            for i in 0..3 {
                let (a, b, c) = (p[i], p[(i + 1) % 3], p[(i + 2) % 3]);
                let u = [b[0] - a[0], b[1] - a[1]];
                let v = [c[0] - a[0], c[1] - a[1]];
                let ang = (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1]);
                best = best.min(ang.to_degrees());
            }
        }
        best
    }

    /// Longest edge among triangles with a vertex within `radius` of `center`.
    pub fn max_edge_near(&self, center: [f64; 2], radius: f64) -> f64 {
        let mut m = 0.0f64;
        for tri in &self.triangles {
            let p = tri.map(|v| self.vertices[v]);
            if p.iter().any(|q| (q[0] - center[0]).hypot(q[1] - center[1]) <= radius) {
                for i in 0..3 {
                    let (a, b) = (p[i], p[(i + 1) % 3]);
                    m = m.max((a[0] - b[0]).hypot(a[1] - b[1]));
                }
            }
        }
        m
    }

    pub fn max_edge(&self) -> f64 {
        self.max_edge_near([0.0, 0.0], f64::INFINITY)
    }

    pub fn barycentric(&self, t: usize, x: [f64; 2]) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (x[1] - a[1]) * (c[0] - a[0])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (b[1] - a[1]) * (x[0] - a[0])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Triangle containing `x` with its barycentric coordinates.
    pub fn locate(&self, x: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let tol = -1e-12;
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for tb in self.tree.locate_in_envelope_intersecting(AABB::from_point(x)) {
            let l = self.barycentric(tb.idx, x);
            let m = l[0].min(l[1]).min(l[2]);
            if m >= 0.0 {
                return Some((tb.idx, l));
            }
            if best.map_or(true, |b| m > b.2) {
                best = Some((tb.idx, l, m));
            }
        }
        best.filter(|b| b.2 >= tol).map(|b| (b.0, b.1))
    }

    /// Like `locate`, but points slightly outside the polygon snap to the nearest
    /// triangle with clamped barycentric coordinates.
    pub fn locate_nearest(&self, x: [f64; 2]) -> (usize, [f64; 3]) {
        if let Some(r) = self.locate(x) {
            return r;
        }
        let mut best = (0usize, [1.0, 0.0, 0.0], f64::NEG_INFINITY);
        for tb in self.tree.nearest_neighbor_iter(x).take(12) {
            let l = self.barycentric(tb.idx, x);
            let m = l[0].min(l[1]).min(l[2]);
            if m > best.2 {
                best = (tb.idx, l, m);
            }
        }
        let mut l = best.1.map(|v| v.max(0.0));
        let s: f64 = l.iter().sum();
        l.iter_mut().for_each(|v| *v /= s);
        (best.0, l)
    }

    /// Group average over the rotation orbit of each vertex.
    pub fn symmetrize(&self, values: &[f64]) -> Result<Vec<f64>> {
        let sym = self
            .symmetry
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("mesh was not built with rotational symmetry".into()))?;
        if values.len() != self.n_vertices() {
            return Err(Error::InvalidInput("field length differs from vertex count".into()));
        }
        let mut out = vec![0.0; values.len()];
        let mut done = vec![false; values.len()];
        let mut orbit = Vec::new();
        for v in 0..values.len() {
            if done[v] {
                continue;
            }
            orbit.clear();
            let mut w = v;
            loop {
                orbit.push(w);
                w = sym.rotation[w];
                if w == v {
                    break;
                }
            }
            orbit.sort_unstable();
            let first = values[orbit[0]];
            let avg = if orbit.iter().all(|&w| values[w] == first) {
                first
            } else {
                orbit.iter().map(|&w| values[w]).sum::<f64>() / orbit.len() as f64
            };
            for &w in &orbit {
                out[w] = avg;
                done[w] = true;
            }
        }
        Ok(out)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.n_vertices())?;
        for (p, &b) in self.vertices.iter().zip(&self.boundary) {
            writeln!(w, "{:.17e} {:.17e} {}", p[0], p[1], b as u8)?;
        }
        for t in &self.triangles {
            writeln!(w, "{} {} {}", t[0], t[1], t[2])?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let bad = |msg: &str| Error::InvalidInput(format!("mesh file: {msg}"));
        let mut lines = r.lines();
        let n: usize = lines
            .next()
            .ok_or_else(|| bad("empty"))??
            .trim()
            .parse()
            .map_err(|_| bad("vertex count"))?;
        let mut vertices = Vec::with_capacity(n);
        let mut boundary = Vec::with_capacity(n);
        for _ in 0..n {
            let line = lines.next().ok_or_else(|| bad("truncated vertex list"))??;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("vertex line needs x y flag"));
            }
            let x: f64 = f[0].parse().map_err(|_| bad("x"))?;
            let y: f64 = f[1].parse().map_err(|_| bad("y"))?;
            vertices.push([x, y]);
            boundary.push(f[2] == "1");
        }
        let mut triangles = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| bad("triangle index")))
                .collect::<Result<_>>()?;
            if f.len() != 3 {
                return Err(bad("triangle line needs three indices"));
            }
            triangles.push([f[0], f[1], f[2]]);
        }
        Self::from_parts(vertices, triangles, boundary)
    }
}

fn centers_invariant(centers: &[RefinementCenter], order: u32) -> bool {
    centers.iter().all(|c| {
        let r = rotate(c.point, 1, order);
        centers.iter().any(|d| (d.point[0] - r[0]).hypot(d.point[1] - r[1]) < 1e-12 && d.target == c.target)
    })
}

pub fn triangulate(domain: &Domain, h_global: f64, centers: &[RefinementCenter]) -> Result<Mesh> {
    triangulate_with(domain, h_global, centers, &MeshOptions::default())
}

pub fn triangulate_with(domain: &Domain, h_global: f64, centers: &[RefinementCenter], opts: &MeshOptions) -> Result<Mesh> {
    if !(h_global > 0.0 && h_global.is_finite()) {
        return Err(Error::InvalidInput(format!("global edge length {h_global} must be positive")));
    }
    for c in centers {
        if !(c.target > 0.0) {
            return Err(Error::InvalidInput("refinement target must be positive".into()));
        }
        if !domain.contains(c.point) {
            return Err(Error::InvalidInput(format!("refinement center {:?} is not inside the domain", c.point)));
        }
    }
    if let Some(hb) = opts.boundary_target {
        if !(hb > 0.0) {
            return Err(Error::InvalidInput("boundary edge length must be positive".into()));
        }
    }
    if !(opts.min_angle_deg > 0.0 && opts.min_angle_deg <= 30.0) {
        return Err(Error::InvalidInput("minimum angle must lie in (0°, 30°]".into()));
    }
    let size = SizeField {
        h_global,
        centers: centers.iter().map(|c| (c.point, c.target)).collect(),
        grading: opts.grading,
        boundary: opts.boundary_target.map(|hb| (hb, domain.clone())),
    };
    let order = domain.symmetry_order();
    let sectored = opts.use_symmetry && order >= 2 && order <= 6 && centers_invariant(centers, order);
    let mut mesh = if sectored {
        let raw = Refiner::new(domain, &size, opts.min_angle_deg, opts.max_vertices / order as usize, Some(order)).run()?;
        assemble_sectors(raw, order)?
    } else {
        let raw = Refiner::new(domain, &size, opts.min_angle_deg, opts.max_vertices, None).run()?;
        let tris = raw.triangles.iter().map(|t| t.map(|v| v as usize)).collect();
        Mesh::from_parts(raw.points, tris, raw.on_arc)?
    };
    mesh.refinement_centers = centers.to_vec();
    Ok(mesh)
}

/// Copies a sector mesh `order` times, gluing edge 1 of copy k to edge 0 of copy k+1.
fn assemble_sectors(raw: RawMesh, order: u32) -> Result<Mesh> {
    let ns = raw.points.len();
    let l = order as usize;
    let apex = raw.radial[0][0];
    if raw.radial[1][0] != apex || raw.points[apex as usize] != [0.0, 0.0] {
        return Err(Error::Mesh("sector edges do not meet at the origin".into()));
    }
    let mut edge1_pos = vec![usize::MAX; ns];
    for (j, &v) in raw.radial[1].iter().enumerate() {
        if v != apex {
            edge1_pos[v as usize] = j;
        }
    }
    // global id of (copy, sector vertex) for every vertex not on edge 1
    let mut gid = vec![usize::MAX; l * ns];
    let mut vertices = vec![[0.0, 0.0]];
    let mut boundary = vec![raw.on_arc[apex as usize]];
    let mut owner = vec![(0usize, apex as usize)];
    for k in 0..l {
        for v in 0..ns {
            if v == apex as usize || edge1_pos[v] != usize::MAX {
                continue;
            }
            gid[k * ns + v] = vertices.len();
            vertices.push(rotate(raw.points[v], k as u32, order));
            boundary.push(raw.on_arc[v]);
            owner.push((k, v));
        }
        gid[k * ns + apex as usize] = 0;
    }
    for k in 0..l {
        for (j, &v) in raw.radial[1].iter().enumerate() {
            if v == apex {
                continue;
            }
            let twin = raw.radial[0][j] as usize;
            gid[k * ns + v as usize] = gid[((k + 1) % l) * ns + twin];
        }
    }
    let mut triangles = Vec::with_capacity(l * raw.triangles.len());
    for k in 0..l {
        for t in &raw.triangles {
            triangles.push(t.map(|v| gid[k * ns + v as usize]));
        }
    }
    let rotation = owner
        .iter()
        .map(|&(k, v)| if v == apex as usize { 0 } else { gid[((k + 1) % l) * ns + v] })
        .collect();
    let mut mesh = Mesh::from_parts(vertices, triangles, boundary)?;
    mesh.symmetry = Some(Symmetry { order, rotation });
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::domain::Shape;

    fn check_boundary(mesh: &Mesh, domain: &Domain) {
        for (p, &b) in mesh.vertices().iter().zip(mesh.boundary_mask()) {
            if b {
                let r = p[0].hypot(p[1]);
                let rb = domain.boundary_radius(p[1].atan2(p[0]));
                assert!((r - rb).abs() < 1e-12, "boundary vertex off curve by {}", r - rb);
            }
        }
    }

    #[test]
    fn uniform_disk() {
        let d = Domain::unit_disk(1);
        let m = triangulate(&d, 0.1, &[]).unwrap();
        assert!(m.max_edge() <= 0.1 + 1e-12);
        assert!(m.min_angle_deg() >= 20.0);
        check_boundary(&m, &d);
        let area: f64 = (0..m.n_triangles()).map(|t| m.triangle_area(t)).sum();
        assert!((area - std::f64::consts::PI).abs() < 0.01);
    }

    #[test]
    fn graded_symmetric_disk() {
        let d = Domain::unit_disk(2);
        let c = RefinementCenter { point: [0.0, 0.0], target: 0.002 };
        let m = triangulate(&d, 0.1, &[c]).unwrap();
        assert!(m.max_edge_near([0.0, 0.0], 0.0) <= 0.002 + 1e-12);
        assert!(m.min_angle_deg() >= 20.0);
        let sym = m.symmetry().unwrap();
        for (v, &w) in sym.rotation.iter().enumerate() {
            let r = rotate(m.vertices()[v], 1, 2);
            let q = m.vertices()[w];
            assert!((r[0] - q[0]).abs() < 1e-13 && (r[1] - q[1]).abs() < 1e-13);
        }
        check_boundary(&m, &d);
    }

    #[test]
    fn star_and_square() {
        for (shape, l) in [
            (Shape::SmoothedStar { amplitude: 0.15, lobes: 4 }, 4),
            (Shape::Square { half_width: 1.0 }, 4),
            (Shape::Square { half_width: 1.0 }, 1),
        ] {
            let d = Domain::new(shape, l).unwrap();
            let m = triangulate(&d, 0.08, &[]).unwrap();
            assert!(m.min_angle_deg() >= 20.0);
            check_boundary(&m, &d);
        }
    }

    #[test]
    fn nonpositive_size_rejected() {
        assert!(triangulate(&Domain::unit_disk(1), -1.0, &[]).is_err());
    }

    #[test]
    fn text_roundtrip() {
        let m = triangulate(&Domain::unit_disk(1), 0.3, &[]).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let r = Mesh::read_text(&buf[..]).unwrap();
        assert_eq!(r.vertices(), m.vertices());
        assert_eq!(r.triangles(), m.triangles());
        assert_eq!(r.boundary_mask(), m.boundary_mask());
    }
}
