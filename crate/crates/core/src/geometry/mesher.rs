//! Constrained Delaunay refinement with a graded size field.
//!
//! Boundary curves are recovered by midpoint splitting (conforming, not
//! constrained), then Ruppert-style refinement removes skinny and oversized
//! triangles. Curved boundary edges are split at the parameter midpoint of the
//! curve so every boundary vertex lies exactly on it.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;

use robust::{incircle, orient2d, Coord};

use super::domain::{rotate, Domain};
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

fn co(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    orient2d(co(a), co(b), co(c))
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

pub(crate) fn circumcenter(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> [f64; 2] {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}

/// Graded target edge length `min(h, min_i(h_i + g·|x − c_i|))`.
#[derive(Clone, Debug)]
pub struct SizeField {
    pub h_global: f64,
    pub centers: Vec<([f64; 2], f64)>,
    pub grading: f64,
    /// Edge length on the boundary, grown with distance to it.
    pub boundary: Option<(f64, Domain)>,
}

impl SizeField {
    pub fn at(&self, x: [f64; 2]) -> f64 {
        let mut h = self.h_global;
        if let Some((hb, d)) = &self.boundary {
            h = h.min(hb + self.grading * d.distance_to_boundary(x).max(0.0));
        }
        for &(c, hc) in &self.centers {
            h = h.min(hc + self.grading * dist2(x, c).sqrt());
        }
        h
    }
}

#[derive(Clone, Copy)]
struct Tri {
    v: [u32; 3],
    n: [u32; 3],
    alive: bool,
    inside: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum SegKind {
    Arc,
    Radial(u8),
}

/// Boundary piece; `ta`, `tb` are the curve parameters of its endpoints
/// (polar angle for arcs, radius for radial edges).
#[derive(Clone, Copy, Debug)]
struct Seg {
    a: u32,
    b: u32,
    ta: f64,
    tb: f64,
    kind: SegKind,
}

fn key(a: u32, b: u32) -> (u32, u32) {
    (a.min(b), a.max(b))
}

/// Output of the refiner: planar triangulation of either the full domain or one sector.
pub(crate) struct RawMesh {
    pub points: Vec<[f64; 2]>,
    pub triangles: Vec<[u32; 3]>,
    pub on_arc: Vec<bool>,
    /// Per radial edge, vertex ids ordered by radius, starting at the apex.
    pub radial: [Vec<u32>; 2],
}

pub(crate) struct Refiner<'a> {
    domain: &'a Domain,
    size: &'a SizeField,
    min_angle: f64,
    max_vertices: usize,
    /// Symmetry order when meshing one fundamental sector.
    sector: Option<u32>,
    pts: Vec<[f64; 2]>,
    tris: Vec<Tri>,
    free: Vec<u32>,
    segs: HashMap<(u32, u32), Seg>,
    vtri: Vec<u32>,
    mark: Vec<u32>,
    stamp: u32,
    last: u32,
    n_super: u32,
}

enum Walk {
    Found(u32),
    Blocked((u32, u32)),
}

impl<'a> Refiner<'a> {
    pub fn new(
        domain: &'a Domain,
        size: &'a SizeField,
        min_angle_deg: f64,
        max_vertices: usize,
        sector: Option<u32>,
    ) -> Self {
        Self {
            domain,
            size,
            min_angle: min_angle_deg.to_radians(),
            max_vertices,
            sector,
            pts: Vec::new(),
            tris: Vec::new(),
            free: Vec::new(),
            segs: HashMap::new(),
            vtri: Vec::new(),
            mark: Vec::new(),
            stamp: 0,
            last: 0,
            n_super: 3,
        }
    }

    fn edge(&self, t: u32, i: usize) -> (u32, u32) {
        let v = self.tris[t as usize].v;
        (v[(i + 1) % 3], v[(i + 2) % 3])
    }

    fn p(&self, v: u32) -> [f64; 2] {
        self.pts[v as usize]
    }

    fn alloc(&mut self, tri: Tri) -> u32 {
        if let Some(id) = self.free.pop() {
            self.tris[id as usize] = tri;
            self.mark[id as usize] = 0;
            id
        } else {
            self.tris.push(tri);
            self.mark.push(0);
            (self.tris.len() - 1) as u32
        }
    }

    fn any_alive(&self) -> u32 {
        if self.tris[self.last as usize].alive {
            return self.last;
        }
        self.tris.iter().position(|t| t.alive).map(|i| i as u32).unwrap_or(0)
    }

    fn contains(&self, t: u32, x: [f64; 2]) -> bool {
        (0..3).all(|i| {
            let (a, b) = self.edge(t, i);
            orient(self.p(a), self.p(b), x) >= 0.0
        })
    }

    /// Visibility walk; ignores constraints.
    fn locate(&self, x: [f64; 2], start: u32) -> Result<u32> {
        let mut t = if self.tris[start as usize].alive { start } else { self.any_alive() };
        let limit = 4 * self.tris.len() + 100;
        for step in 0..limit {
            let mut moved = false;
            for k in 0..3 {
                let i = (k + step) % 3;
                let (a, b) = self.edge(t, i);
                if orient(self.p(a), self.p(b), x) < 0.0 {
                    let nb = self.tris[t as usize].n[i];
                    if nb == NONE {
                        return Err(Error::Mesh("point outside the enclosing triangle".into()));
                    }
                    t = nb;
                    moved = true;
                    break;
                }
            }
            if !moved {
                return Ok(t);
            }
        }
        (0..self.tris.len() as u32)
            .find(|&t| self.tris[t as usize].alive && self.contains(t, x))
            .ok_or_else(|| Error::Mesh("point location failed".into()))
    }

    /// Walk toward `x` refusing to cross boundary segments.
    fn walk_constrained(&self, x: [f64; 2], start: u32) -> Walk {
        let mut t = start;
        let limit = 4 * self.tris.len() + 100;
        for step in 0..limit {
            let mut moved = false;
            for k in 0..3 {
                let i = (k + step) % 3;
                let (a, b) = self.edge(t, i);
                if orient(self.p(a), self.p(b), x) < 0.0 {
                    if self.segs.contains_key(&key(a, b)) {
                        return Walk::Blocked(key(a, b));
                    }
                    let nb = self.tris[t as usize].n[i];
                    if nb == NONE {
                        return Walk::Blocked(key(a, b));
                    }
                    t = nb;
                    moved = true;
                    break;
                }
            }
            if !moved {
                return Walk::Found(t);
            }
        }
        Walk::Found(t)
    }

    fn in_circle(&self, t: u32, x: [f64; 2]) -> bool {
        let v = self.tris[t as usize].v;
        incircle(co(self.p(v[0])), co(self.p(v[1])), co(self.p(v[2])), co(x)) > 0.0
    }

    /// Triangles whose circumcircle contains `x`, grown from `seeds` without
    /// crossing segments other than `split`.
    fn cavity(&mut self, x: [f64; 2], seeds: &[u32], split: Option<(u32, u32)>) -> Vec<u32> {
        self.stamp = self.stamp.wrapping_add(1);
        if self.stamp == 0 {
            self.mark.iter_mut().for_each(|m| *m = 0);
            self.stamp = 1;
        }
        let mut cav = Vec::new();
        let mut stack = Vec::new();
        for &s in seeds {
            if self.mark[s as usize] != self.stamp {
                self.mark[s as usize] = self.stamp;
                cav.push(s);
                stack.push(s);
            }
        }
        while let Some(t) = stack.pop() {
            for i in 0..3 {
                let nb = self.tris[t as usize].n[i];
                if nb == NONE || self.mark[nb as usize] == self.stamp {
                    continue;
                }
                let (a, b) = self.edge(t, i);
                let k = key(a, b);
                if self.segs.contains_key(&k) && split != Some(k) {
                    continue;
                }
                if self.in_circle(nb, x) {
                    self.mark[nb as usize] = self.stamp;
                    cav.push(nb);
                    stack.push(nb);
                }
            }
        }
        cav
    }

    /// Directed edges on the cavity boundary with the outside neighbor.
    fn cavity_boundary(&self, cav: &[u32]) -> Vec<(u32, u32, u32, bool)> {
        let mut out = Vec::new();
        for &t in cav {
            for i in 0..3 {
                let nb = self.tris[t as usize].n[i];
                if nb == NONE || self.mark[nb as usize] != self.stamp {
                    let (a, b) = self.edge(t, i);
                    out.push((a, b, nb, self.tris[t as usize].inside));
                }
            }
        }
        out
    }

    /// Bowyer–Watson insertion. `split` names the segment that `x` subdivides.
    fn insert(&mut self, x: [f64; 2], seeds: &[u32], split: Option<(u32, u32)>) -> Result<(u32, Vec<u32>)> {
        let cav = self.cavity(x, seeds, split);
        let boundary = self.cavity_boundary(&cav);
        for &(a, b, _, _) in &boundary {
            if orient(self.p(a), self.p(b), x) <= 0.0 {
                return Err(Error::Mesh(format!("cavity not star-shaped around ({}, {})", x[0], x[1])));
            }
        }
        let pid = self.pts.len() as u32;
        self.pts.push(x);
        self.vtri.push(NONE);
        for &t in &cav {
            self.tris[t as usize].alive = false;
            self.free.push(t);
        }
        let mut first: HashMap<u32, u32> = HashMap::with_capacity(boundary.len());
        let mut created = Vec::with_capacity(boundary.len());
        for &(a, b, nb, inside) in &boundary {
            let t = self.alloc(Tri { v: [a, b, pid], n: [NONE, NONE, nb], alive: true, inside });
            if nb != NONE {
                let j = (0..3)
                    .find(|&j| {
                        let (u, v) = self.edge(nb, j);
                        u == b && v == a
                    })
                    .expect("outer neighbor shares the cavity edge");
                self.tris[nb as usize].n[j] = t;
            }
            first.insert(a, t);
            self.vtri[a as usize] = t;
            created.push(t);
        }
        for &t in &created {
            let b = self.tris[t as usize].v[1];
            let s = *first.get(&b).ok_or_else(|| Error::Mesh("open cavity boundary".into()))?;
            self.tris[t as usize].n[0] = s;
            self.tris[s as usize].n[1] = t;
        }
        self.vtri[pid as usize] = created[0];
        self.last = created[0];
        if let Some(k) = split {
            let s = self.segs.remove(&k).expect("split segment exists");
            let tm = 0.5 * (s.ta + s.tb);
            self.segs.insert(key(s.a, pid), Seg { a: s.a, b: pid, ta: s.ta, tb: tm, kind: s.kind });
            self.segs.insert(key(pid, s.b), Seg { a: pid, b: s.b, ta: tm, tb: s.tb, kind: s.kind });
        }
        Ok((pid, created))
    }

    /// Triangle holding the directed edge a→b.
    fn edge_tri(&self, a: u32, b: u32) -> Option<u32> {
        let start = self.vtri[a as usize];
        if start == NONE {
            return None;
        }
        let mut t = start;
        for _ in 0..10_000 {
            let v = self.tris[t as usize].v;
            let i = (0..3).find(|&i| v[i] == a)?;
            if v[(i + 1) % 3] == b {
                return Some(t);
            }
            // rotate clockwise around a: cross edge (v[i+2], a)
            let nb = self.tris[t as usize].n[(i + 1) % 3];
            if nb == NONE || nb == start {
                break;
            }
            t = nb;
        }
        // fan may be open at super vertices; fall back to a scan
        (0..self.tris.len() as u32).find(|&t| {
            let tr = &self.tris[t as usize];
            tr.alive && (0..3).any(|i| tr.v[i] == a && tr.v[(i + 1) % 3] == b)
        })
    }

    fn has_edge(&self, a: u32, b: u32) -> bool {
        self.edge_tri(a, b).is_some() || self.edge_tri(b, a).is_some()
    }

    fn boundary_param_point(&self, kind: SegKind, t: f64) -> [f64; 2] {
        match kind {
            SegKind::Arc => self.domain.boundary_point(t),
            SegKind::Radial(e) => {
                let l = self.sector.expect("radial edges only exist in sector mode");
                rotate([t, 0.0], e as u32, l)
            }
        }
    }

    fn push_vertex_seed(&mut self, x: [f64; 2]) -> Result<u32> {
        let t = self.locate(x, self.last)?;
        Ok(self.insert(x, &[t], None)?.0)
    }

    /// Segment seeds for a split: both adjacent triangles plus the one holding `x`.
    fn split_seeds(&self, s: &Seg, x: [f64; 2]) -> Result<Vec<u32>> {
        let mut seeds = Vec::new();
        if let Some(t) = self.edge_tri(s.a, s.b) {
            seeds.push(t);
        }
        if let Some(t) = self.edge_tri(s.b, s.a) {
            seeds.push(t);
        }
        let start = seeds.first().copied().unwrap_or(self.last);
        seeds.push(self.locate(x, start)?);
        Ok(seeds)
    }

    fn split_segment(&mut self, k: (u32, u32)) -> Result<(u32, Vec<u32>)> {
        let s = self.segs[&k];
        let x = self.boundary_param_point(s.kind, 0.5 * (s.ta + s.tb));
        let seeds = self.split_seeds(&s, x)?;
        self.insert(x, &seeds, Some(k))
    }

    /// Splits a radial segment together with its rotated twin on the other edge.
    fn split_with_twin(&mut self, k: (u32, u32)) -> Result<Vec<u32>> {
        let s = self.segs[&k];
        let mut created = self.split_segment(k)?.1;
        if let SegKind::Radial(e) = s.kind {
            let other = 1 - e;
            let (lo, hi) = (s.ta.min(s.tb), s.ta.max(s.tb));
            let twin = self.segs.iter().find_map(|(tk, ts)| {
                (ts.kind == SegKind::Radial(other) && ts.ta.min(ts.tb) == lo && ts.ta.max(ts.tb) == hi).then_some(*tk)
            });
            match twin {
                Some(tk) => created.extend(self.split_segment(tk)?.1),
                None => return Err(Error::Mesh("radial edges lost their mirror pairing".into())),
            }
        }
        Ok(created)
    }

    fn encroached(&self, k: (u32, u32)) -> bool {
        let s = &self.segs[&k];
        let (pa, pb) = (self.p(s.a), self.p(s.b));
        for (a, b) in [(s.a, s.b), (s.b, s.a)] {
            if let Some(t) = self.edge_tri(a, b) {
                let tr = &self.tris[t as usize];
                if !tr.inside {
                    continue;
                }
                let apex = tr.v.iter().copied().find(|&v| v != a && v != b).unwrap();
                let q = self.p(apex);
                let d = (pa[0] - q[0]) * (pb[0] - q[0]) + (pa[1] - q[1]) * (pb[1] - q[1]);
                if d < 0.0 {
                    return true;
                }
            }
        }
        false
    }

    fn is_bad(&self, t: u32) -> bool {
        let tr = &self.tris[t as usize];
        if !tr.alive || !tr.inside {
            return false;
        }
        let [a, b, c] = tr.v.map(|v| self.p(v));
        let l2 = [dist2(b, c), dist2(c, a), dist2(a, b)];
        let lmin = l2.iter().cloned().fold(f64::INFINITY, f64::min);
        let lmax = l2.iter().cloned().fold(0.0, f64::max);
        let area2 = orient(a, b, c);
        // circumradius R = abc / (2·area2); sin θmin = lmin / (2R)
        let r = (l2[0] * l2[1] * l2[2]).sqrt() / (2.0 * area2);
        let sin_min = lmin.sqrt() / (2.0 * r);
        if sin_min < self.min_angle.sin() {
            // tiny triangles squeezed against a small input angle are left alone
            return lmin.sqrt() > 1e-9 * self.size.h_global;
        }
        let g = [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0];
        let target = [a, b, c, g].iter().map(|&q| self.size.at(q)).fold(f64::INFINITY, f64::min);
        lmax.sqrt() > target
    }

    fn mark_inside(&mut self) -> Result<()> {
        for t in &mut self.tris {
            t.inside = false;
        }
        let mut seed = None;
        for s in self.segs.values() {
            if s.kind == SegKind::Arc {
                // arcs run counterclockwise, interior on the left of a→b
                seed = self.edge_tri(s.a, s.b);
                if seed.is_some() {
                    break;
                }
            }
        }
        let seed = seed.ok_or_else(|| Error::Mesh("boundary not recovered".into()))?;
        let mut stack = vec![seed];
        self.tris[seed as usize].inside = true;
        while let Some(t) = stack.pop() {
            for i in 0..3 {
                let nb = self.tris[t as usize].n[i];
                if nb == NONE || self.tris[nb as usize].inside {
                    continue;
                }
                let (a, b) = self.edge(t, i);
                if self.segs.contains_key(&key(a, b)) {
                    continue;
                }
                self.tris[nb as usize].inside = true;
                stack.push(nb);
            }
        }
        let any_super = self
            .tris
            .iter()
            .any(|t| t.alive && t.inside && t.v.iter().any(|&v| v < self.n_super));
        if any_super {
            return Err(Error::Mesh("interior flood leaked through the boundary".into()));
        }
        Ok(())
    }

    /// Initial boundary polygon: list of (point, parameter) plus segment kinds.
    fn boundary_loop(&self) -> Vec<([f64; 2], SegKind, f64, f64)> {
        // each entry: start point of a segment, its kind, start and end parameters
        let h0 = self.size.h_global;
        let mut out = Vec::new();
        let corners = self.domain.corner_angles();
        let arc = |t0: f64, t1: f64, out: &mut Vec<([f64; 2], SegKind, f64, f64)>| {
            // breakpoints: corners inside (t0, t1)
            let mut bps = vec![t0];
            for &c in &corners {
                for shift in [-2.0 * PI, 0.0, 2.0 * PI] {
                    let cc = c + shift;
                    if cc > t0 + 1e-12 && cc < t1 - 1e-12 {
                        bps.push(cc);
                    }
                }
            }
            bps.push(t1);
            bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in bps.windows(2) {
                let (a, b) = (w[0], w[1]);
                let len = self.domain.outer_radius() * (b - a);
                let n = ((len / (0.5 * h0)).ceil() as usize).clamp(2, 4096);
                let n = n.max(((b - a) / (PI / 8.0)).ceil() as usize);
                for j in 0..n {
                    let t = a + (b - a) * j as f64 / n as f64;
                    let t1 = a + (b - a) * (j + 1) as f64 / n as f64;
                    out.push((self.domain.boundary_point(t), SegKind::Arc, t, t1));
                }
            }
        };
        match self.sector {
            None => arc(0.0, 2.0 * PI, &mut out),
            Some(l) => {
                let ts = 2.0 * PI / l as f64;
                let r0 = self.domain.boundary_radius(0.0);
                let n = ((r0 / h0).ceil() as usize).max(2);
                for j in 0..n {
                    let r = r0 * j as f64 / n as f64;
                    let r1 = r0 * (j + 1) as f64 / n as f64;
                    out.push(([r, 0.0], SegKind::Radial(0), r, r1));
                }
                arc(0.0, ts, &mut out);
                for j in (1..=n).rev() {
                    let r = r0 * j as f64 / n as f64;
                    let r1 = r0 * (j - 1) as f64 / n as f64;
                    out.push((rotate([r, 0.0], 1, l), SegKind::Radial(1), r, r1));
                }
            }
        }
        out
    }

    pub fn run(mut self) -> Result<RawMesh> {
        let loop_ = self.boundary_loop();
        let m = 10.0 * self.domain.outer_radius();
        self.pts = vec![[-m, -m], [m, -m], [0.0, m]];
        self.vtri = vec![0, 0, 0];
        self.tris.push(Tri { v: [0, 1, 2], n: [NONE; 3], alive: true, inside: false });
        self.mark.push(0);

        let mut ids = Vec::with_capacity(loop_.len());
        for &(x, _, _, _) in &loop_ {
            ids.push(self.push_vertex_seed(x)?);
        }
        // register segments, then split until each one appears as a mesh edge
        let n = ids.len();
        let mut pending: VecDeque<(u32, u32)> = VecDeque::new();
        for (i, &(_, kind, ta, tb)) in loop_.iter().enumerate() {
            let (a, b) = (ids[i], ids[(i + 1) % n]);
            self.segs.insert(key(a, b), Seg { a, b, ta, tb, kind });
            pending.push_back(key(a, b));
        }
        let mut guard = 0usize;
        while let Some(k) = pending.pop_front() {
            guard += 1;
            if guard > 200_000 {
                return Err(Error::Mesh("boundary recovery did not terminate".into()));
            }
            let Some(s) = self.segs.get(&k).copied() else { continue };
            if self.has_edge(s.a, s.b) {
                continue;
            }
            // temporarily unregister so the split cavity may cross it freely
            let x = self.boundary_param_point(s.kind, 0.5 * (s.ta + s.tb));
            let t = self.locate(x, self.last)?;
            let (pid, _) = self.insert(x, &[t], None)?;
            self.segs.remove(&k);
            let tm = 0.5 * (s.ta + s.tb);
            self.segs.insert(key(s.a, pid), Seg { a: s.a, b: pid, ta: s.ta, tb: tm, kind: s.kind });
            self.segs.insert(key(pid, s.b), Seg { a: pid, b: s.b, ta: tm, tb: s.tb, kind: s.kind });
            pending.push_back(key(s.a, pid));
            pending.push_back(key(pid, s.b));
            // radial twins must stay paired
            if let SegKind::Radial(e) = s.kind {
                let other = SegKind::Radial(1 - e);
                let (lo, hi) = (s.ta.min(s.tb), s.ta.max(s.tb));
                if let Some(tk) = self
                    .segs
                    .iter()
                    .find_map(|(tk, ts)| (ts.kind == other && ts.ta.min(ts.tb) == lo && ts.ta.max(ts.tb) == hi).then_some(*tk))
                {
                    pending.push_front(tk);
                    let ts = self.segs[&tk];
                    let x = self.boundary_param_point(ts.kind, tm);
                    let t = self.locate(x, self.last)?;
                    let (q, _) = self.insert(x, &[t], None)?;
                    self.segs.remove(&tk);
                    self.segs.insert(key(ts.a, q), Seg { a: ts.a, b: q, ta: ts.ta, tb: tm, kind: ts.kind });
                    self.segs.insert(key(q, ts.b), Seg { a: q, b: ts.b, ta: tm, tb: ts.tb, kind: ts.kind });
                    pending.push_back(key(ts.a, q));
                    pending.push_back(key(q, ts.b));
                }
            }
        }
        self.mark_inside()?;
        self.refine()?;
        self.extract()
    }

    fn sorted_seg_keys(&self) -> Vec<(u32, u32)> {
        let mut ks: Vec<_> = self.segs.keys().copied().collect();
        ks.sort_unstable();
        ks
    }

    fn refine(&mut self) -> Result<()> {
        let mut seg_queue: VecDeque<(u32, u32)> = self.sorted_seg_keys().into_iter().collect();
        let mut tri_queue: VecDeque<u32> = (0..self.tris.len() as u32).filter(|&t| self.is_bad(t)).collect();
        loop {
            if self.pts.len() > self.max_vertices {
                return Err(Error::Mesh(format!(
                    "vertex budget {} exhausted before reaching the target edge length",
                    self.max_vertices
                )));
            }
            if let Some(k) = seg_queue.pop_front() {
                if !self.segs.contains_key(&k) || !self.encroached(k) {
                    continue;
                }
                let s = self.segs[&k];
                if dist2(self.p(s.a), self.p(s.b)).sqrt() < 1e-10 * self.size.h_global {
                    continue;
                }
                let created = self.split_with_twin(k)?;
                self.enqueue(&created, &mut seg_queue, &mut tri_queue);
                continue;
            }
            let Some(t) = tri_queue.pop_front() else { break };
            if !self.is_bad(t) {
                continue;
            }
            let v = self.tris[t as usize].v;
            let c = circumcenter(self.p(v[0]), self.p(v[1]), self.p(v[2]));
            match self.walk_constrained(c, t) {
                Walk::Blocked(k) => {
                    let created = self.split_with_twin(k)?;
                    self.enqueue(&created, &mut seg_queue, &mut tri_queue);
                    tri_queue.push_back(t);
                }
                Walk::Found(tc) => {
                    if !self.tris[tc as usize].inside {
                        continue;
                    }
                    let cav = self.cavity(c, &[tc], None);
                    let mut hit = Vec::new();
                    for (a, b, _, _) in self.cavity_boundary(&cav) {
                        let k = key(a, b);
                        if self.segs.contains_key(&k) {
                            let (pa, pb) = (self.p(a), self.p(b));
                            let d = (pa[0] - c[0]) * (pb[0] - c[0]) + (pa[1] - c[1]) * (pb[1] - c[1]);
                            if d < 0.0 {
                                hit.push(k);
                            }
                        }
                    }
                    if hit.is_empty() {
                        let (_, created) = self.insert(c, &[tc], None)?;
                        self.enqueue(&created, &mut seg_queue, &mut tri_queue);
                    } else {
                        hit.sort_unstable();
                        hit.dedup();
                        for k in hit {
                            if self.segs.contains_key(&k) {
                                let created = self.split_with_twin(k)?;
                                self.enqueue(&created, &mut seg_queue, &mut tri_queue);
                            }
                        }
                        if self.tris[t as usize].alive {
                            tri_queue.push_back(t);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn enqueue(&self, created: &[u32], segq: &mut VecDeque<(u32, u32)>, triq: &mut VecDeque<u32>) {
        for &t in created {
            if !self.tris[t as usize].alive {
                continue;
            }
            for i in 0..3 {
                let (a, b) = self.edge(t, i);
                let k = key(a, b);
                if self.segs.contains_key(&k) {
                    segq.push_back(k);
                }
            }
            if self.is_bad(t) {
                triq.push_back(t);
            }
        }
    }

    fn extract(self) -> Result<RawMesh> {
        let mut map = vec![NONE; self.pts.len()];
        let mut points = Vec::new();
        let mut triangles = Vec::new();
        for t in &self.tris {
            if !(t.alive && t.inside) {
                continue;
            }
            let mut tri = [0u32; 3];
            for (j, &v) in t.v.iter().enumerate() {
                if map[v as usize] == NONE {
                    map[v as usize] = points.len() as u32;
                    points.push(self.pts[v as usize]);
                }
                tri[j] = map[v as usize];
            }
            triangles.push(tri);
        }
        let mut on_arc = vec![false; points.len()];
        let mut radial: [Vec<(f64, u32)>; 2] = [Vec::new(), Vec::new()];
        for s in self.segs.values() {
            let (a, b) = (map[s.a as usize], map[s.b as usize]);
            if a == NONE || b == NONE {
                return Err(Error::Mesh("segment endpoint missing from the interior".into()));
            }
            match s.kind {
                SegKind::Arc => {
                    on_arc[a as usize] = true;
                    on_arc[b as usize] = true;
                }
                SegKind::Radial(e) => {
                    radial[e as usize].push((s.ta, a));
                    radial[e as usize].push((s.tb, b));
                }
            }
        }
        let radial = radial.map(|mut r| {
            r.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
            r.dedup_by_key(|x| x.1);
            r.into_iter().map(|x| x.1).collect::<Vec<_>>()
        });
        if radial[0].len() != radial[1].len() {
            return Err(Error::Mesh("sector edges were split asymmetrically".into()));
        }
        Ok(RawMesh { points, triangles, on_arc, radial })
    }
}
