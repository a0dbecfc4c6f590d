//! Polar patches around concentration points blended with the mesh rule through
//! a smooth partition of unity: `∫f = Σ_i ∫_{patch i} f χ_i + ∫_mesh f (1 − Σχ_i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Sites, Space};
use crate::geometry::quadrature::AnnularQuadRule;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HybridOptions {
    pub radial_order: usize,
    pub angular_order: usize,
    /// Inner core radius of each patch as a fraction of the smallest scale there.
    pub core_fraction: f64,
    pub max_patch_radius: f64,
}

impl Default for HybridOptions {
    fn default() -> Self {
        Self { radial_order: 16, angular_order: 32, core_fraction: 1e-3, max_patch_radius: 0.4 }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Patch {
    pub center: [f64; 2],
    pub radius: f64,
    /// Smallest concentration scale inside the patch.
    pub scale: f64,
}

fn smooth_step(t: f64) -> f64 {
    let psi = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
    let (a, b) = (psi(t), psi(1.0 - t));
    a / (a + b)
}

/// Cutoff equal to 1 on `r ≤ R/2`, 0 on `r ≥ R`, C^∞ in between.
pub fn cutoff(r: f64, radius: f64) -> f64 {
    let h = 0.5 * radius;
    if r <= h {
        1.0
    } else if r >= radius {
        0.0
    } else {
        1.0 - smooth_step((r - h) / h)
    }
}

#[derive(Clone, Debug)]
pub struct HybridRule {
    pub sites: Sites,
    pub weights: Vec<f64>,
    pub patches: Vec<Patch>,
    /// Sites `0..n_patch` belong to the polar patches, the rest are mesh quadrature points.
    pub n_patch: usize,
}

impl HybridRule {
    pub fn new(space: &Space, patches: Vec<Patch>, opts: &HybridOptions) -> Result<Self> {
        for (i, p) in patches.iter().enumerate() {
            if !(p.radius > 0.0 && p.scale > 0.0 && p.scale < p.radius) {
                return Err(Error::InvalidInput(format!("patch {i} needs 0 < scale < radius")));
            }
            for q in &patches[..i] {
                let d = (p.center[0] - q.center[0]).hypot(p.center[1] - q.center[1]);
                if d < p.radius + q.radius {
                    return Err(Error::InvalidInput("quadrature patches overlap".into()));
                }
            }
        }
        let mesh = space.mesh();
        let mut pts = Vec::new();
        let mut weights = Vec::new();
        for p in &patches {
            let rule = AnnularQuadRule::disk(
                p.center,
                opts.core_fraction * p.scale,
                p.radius,
                opts.radial_order,
                opts.angular_order,
            )?;
            for (x, w) in rule.nodes() {
                let r = (x[0] - p.center[0]).hypot(x[1] - p.center[1]);
                pts.push(x);
                weights.push(w * cutoff(r, p.radius));
            }
        }
        let n_patch = pts.len();
        let qsites = Sites::quadrature(space);
        for (x, w) in qsites.points.iter().zip(space.qw()) {
            let chi: f64 = patches
                .iter()
                .map(|p| cutoff((x[0] - p.center[0]).hypot(x[1] - p.center[1]), p.radius))
                .sum();
            weights.push(w * (1.0 - chi));
        }
        let sites = Sites::locate(mesh, pts).concat(qsites);
        Ok(Self { sites, weights, patches, n_patch })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.sites.points
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| if *w == 0.0 { 0.0 } else { v * w }).sum()
    }

    /// `log ∫ e^f` without overflow.
    pub fn log_integral_exp(&self, log_values: &[f64]) -> f64 {
        let m = log_values
            .iter()
            .zip(&self.weights)
            .filter(|(_, w)| **w != 0.0)
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = log_values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| if *w == 0.0 { 0.0 } else { w * (v - m).exp() })
            .sum();
        m + s.ln()
    }

    /// `(∫|f|^p)^{1/p}`.
    pub fn lp_norm(&self, values: &[f64], p: f64) -> f64 {
        let s: f64 = values.iter().zip(&self.weights).map(|(v, w)| if *w == 0.0 { 0.0 } else { w * v.abs().powf(p) }).sum();
        s.powf(1.0 / p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{triangulate, Domain, RefinementCenter};
    use std::f64::consts::PI;
    use std::sync::Arc;

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.1, 0.4), 1.0);
        assert_eq!(cutoff(0.4, 0.4), 0.0);
        assert!((cutoff(0.3, 0.4) - 0.5).abs() < 1e-15);
        let mut last = 1.0;
        for i in 0..100 {
            let c = cutoff(0.2 + 0.2 * i as f64 / 100.0, 0.4);
            assert!(c <= last);
            last = c;
        }
    }

    #[test]
    fn concentrated_mass() {
        let d = Domain::unit_disk(1);
        let c = [0.2, -0.1];
        let delta: f64 = 1e-3;
        let mesh = triangulate(&d, 0.1, &[RefinementCenter { point: c, target: 0.05 }]).unwrap();
        let space = Space::new(Arc::new(mesh));
        let rule = HybridRule::new(&space, vec![Patch { center: c, radius: 0.3, scale: delta }], &HybridOptions::default()).unwrap();
        // bubble density 8δ²/(δ²+r²)² over the disk; mass 8π minus the tail outside
        let vals: Vec<f64> = rule
            .points()
            .iter()
            .map(|x| {
                let r2 = (x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2);
                8.0 * delta * delta / (delta * delta + r2).powi(2)
            })
            .collect();
        let m = rule.integrate(&vals);
        assert!((m - 8.0 * PI).abs() < 1e-4, "{m}");
        let ones = vec![1.0; rule.len()];
        let gap = (rule.integrate(&ones) - space.integrate_qp(&vec![1.0; space.qp().len()])).abs();
        // only the mesh-rule error on the cutoff χ remains
        assert!(gap < 1e-5, "{gap}");
    }
}
