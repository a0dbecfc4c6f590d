//! Dirichlet Green's function `G(x, y) = (1/2π) log(1/|x − y|) + H(x, y)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::field::Field;
use super::sites::Sites;
use super::space::Space;
use crate::error::{Error, Result};
use crate::geometry::Domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GreenMode {
    /// Method of images on a disk centered at the origin.
    AnalyticDisk,
    /// Harmonic extension of `(1/2π) log|x − y|` on the mesh.
    Numeric,
}

pub struct GreensOracle {
    domain: Domain,
    space: Arc<Space>,
    mode: GreenMode,
    cache: RwLock<HashMap<(i64, i64), Arc<Field>>>,
}

impl std::fmt::Debug for GreensOracle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GreensOracle").field("mode", &self.mode).finish()
    }
}

fn quantize(y: [f64; 2]) -> (i64, i64) {
    ((y[0] * 1e12).round() as i64, (y[1] * 1e12).round() as i64)
}

/// `(1/2π) log(1/|x − y|)`.
pub fn fundamental(x: [f64; 2], y: [f64; 2]) -> f64 {
    -(x[0] - y[0]).hypot(x[1] - y[1]).ln() / (2.0 * PI)
}

/// Gradient in `x` of the fundamental solution.
pub fn fundamental_grad(x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
    let d = [x[0] - y[0], x[1] - y[1]];
    let r2 = d[0] * d[0] + d[1] * d[1];
    [-d[0] / (2.0 * PI * r2), -d[1] / (2.0 * PI * r2)]
}

impl GreensOracle {
    pub fn new(domain: Domain, space: Arc<Space>, mode: GreenMode) -> Result<Self> {
        if mode == GreenMode::AnalyticDisk && domain.disk_radius().is_none() {
            return Err(Error::InvalidInput("closed-form Green's function needs a disk".into()));
        }
        Ok(Self { domain, space, mode, cache: RwLock::new(HashMap::new()) })
    }

    /// Analytic mode on disks, numeric otherwise.
    pub fn preferred(domain: Domain, space: Arc<Space>) -> Self {
        let mode = if domain.disk_radius().is_some() { GreenMode::AnalyticDisk } else { GreenMode::Numeric };
        Self::new(domain, space, mode).expect("mode matches domain")
    }

    pub fn mode(&self) -> GreenMode {
        self.mode
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    fn check_source(&self, y: [f64; 2]) -> Result<()> {
        if !self.domain.contains(y) {
            return Err(Error::InvalidInput(format!("source {y:?} is not inside the domain")));
        }
        if self.mode == GreenMode::Numeric {
            let mesh = self.space.mesh();
            let (t, _) = mesh.locate_nearest(y);
            let p = mesh.triangle_points(t);
            let h = (0..3)
                .map(|i| (p[i][0] - p[(i + 1) % 3][0]).hypot(p[i][1] - p[(i + 1) % 3][1]))
                .fold(0.0, f64::max);
            if self.domain.distance_to_boundary(y) < h {
                return Err(Error::InvalidInput(format!(
                    "source {y:?} lies within one mesh layer of the boundary"
                )));
            }
        }
        Ok(())
    }

    /// Nodal field of `H(·, y)` (numeric mode caches it by source).
    pub fn regular_field(&self, y: [f64; 2]) -> Result<Arc<Field>> {
        self.check_source(y)?;
        let key = quantize(y);
        if let Some(f) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(f.clone());
        }
        let mesh = self.space.mesh().clone();
        let field = match self.mode {
            GreenMode::AnalyticDisk => {
                let r = self.domain.disk_radius().unwrap();
                Field::from_fn(mesh, |x| disk_regular(r, x, y))
            }
            GreenMode::Numeric => {
                let vals = self.space.harmonic_extension(|x| -fundamental(x, y))?;
                Field::new(mesh, vals)?
            }
        };
        let field = Arc::new(field);
        self.cache.write().expect("cache lock").entry(key).or_insert_with(|| field.clone());
        Ok(field)
    }

    pub fn regular_part(&self, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
        match self.mode {
            GreenMode::AnalyticDisk => {
                self.check_source(y)?;
                Ok(disk_regular(self.domain.disk_radius().unwrap(), x, y))
            }
            GreenMode::Numeric => Ok(self.regular_field(y)?.eval(x)),
        }
    }

    pub fn green(&self, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
        Ok(fundamental(x, y) + self.regular_part(x, y)?)
    }

    /// `∇_x H(x, y)`.
    pub fn regular_grad_x(&self, x: [f64; 2], y: [f64; 2]) -> Result<[f64; 2]> {
        match self.mode {
            GreenMode::AnalyticDisk => {
                self.check_source(y)?;
                Ok(disk_regular_grad(self.domain.disk_radius().unwrap(), x, y))
            }
            GreenMode::Numeric => Ok(self.regular_field(y)?.gradient(x)),
        }
    }

    pub fn green_grad_x(&self, x: [f64; 2], y: [f64; 2]) -> Result<[f64; 2]> {
        let g = fundamental_grad(x, y);
        let h = self.regular_grad_x(x, y)?;
        Ok([g[0] + h[0], g[1] + h[1]])
    }

    /// Gradient of `x ↦ H(x, x)`; twice `∇_x H(x, y)|_{y=x}` by symmetry.
    pub fn robin_grad(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let g = self.regular_grad_x(x, x)?;
        Ok([2.0 * g[0], 2.0 * g[1]])
    }

    /// `H(·, y)` at every quadrature point of the space.
    pub fn regular_at_qp(&self, y: [f64; 2]) -> Result<Vec<f64>> {
        match self.mode {
            GreenMode::AnalyticDisk => {
                self.check_source(y)?;
                let r = self.domain.disk_radius().unwrap();
                Ok(self.space.map_qp(|x| disk_regular(r, x, y)))
            }
            GreenMode::Numeric => Ok(self.space.interpolate_qp(self.regular_field(y)?.values())),
        }
    }

    /// `H(·, y)` at arbitrary located points.
    pub fn regular_at_sites(&self, sites: &Sites, y: [f64; 2]) -> Result<Vec<f64>> {
        match self.mode {
            GreenMode::AnalyticDisk => {
                self.check_source(y)?;
                let r = self.domain.disk_radius().unwrap();
                Ok(sites.points.iter().map(|&x| disk_regular(r, x, y)).collect())
            }
            GreenMode::Numeric => Ok(sites.interp(self.regular_field(y)?.values())),
        }
    }

    /// `∇_y H(x, y)` at every quadrature point. Numeric mode differentiates the
    /// discrete fields in the source with central differences of step `1e−5`.
    pub fn regular_source_grad_at_qp(&self, y: [f64; 2]) -> Result<[Vec<f64>; 2]> {
        match self.mode {
            GreenMode::AnalyticDisk => {
                self.check_source(y)?;
                let r = self.domain.disk_radius().unwrap();
                // H is symmetric, so ∇_y H(x, y) = ∇_1 H(y, x)
                let g: Vec<[f64; 2]> = self.space.qp().iter().map(|&x| disk_regular_grad(r, y, x)).collect();
                Ok([g.iter().map(|v| v[0]).collect(), g.iter().map(|v| v[1]).collect()])
            }
            GreenMode::Numeric => {
                let e = 1e-5;
                let mut out = [Vec::new(), Vec::new()];
                for (c, o) in out.iter_mut().enumerate() {
                    let mut yp = y;
                    let mut ym = y;
                    yp[c] += e;
                    ym[c] -= e;
                    let hp = self.regular_at_qp(yp)?;
                    let hm = self.regular_at_qp(ym)?;
                    *o = hp.iter().zip(&hm).map(|(a, b)| (a - b) / (2.0 * e)).collect();
                }
                Ok(out)
            }
        }
    }
}

/// Regular part on the disk of radius `r` centered at the origin, written
/// symmetrically as `(1/4π) log((|x|²|y|² − 2r² x·y + r⁴)/r²)`.
pub fn disk_regular(r: f64, x: [f64; 2], y: [f64; 2]) -> f64 {
    let r2 = r * r;
    let xx = x[0] * x[0] + x[1] * x[1];
    let yy = y[0] * y[0] + y[1] * y[1];
    let xy = x[0] * y[0] + x[1] * y[1];
    ((xx * yy - 2.0 * r2 * xy + r2 * r2) / r2).ln() / (4.0 * PI)
}

pub fn disk_regular_grad(r: f64, x: [f64; 2], y: [f64; 2]) -> [f64; 2] {
    let r2 = r * r;
    let xx = x[0] * x[0] + x[1] * x[1];
    let yy = y[0] * y[0] + y[1] * y[1];
    let xy = x[0] * y[0] + x[1] * y[1];
    let q = xx * yy - 2.0 * r2 * xy + r2 * r2;
    let c = 1.0 / (4.0 * PI * q);
    [c * (2.0 * yy * x[0] - 2.0 * r2 * y[0]), c * (2.0 * yy * x[1] - 2.0 * r2 * y[1])]
}
