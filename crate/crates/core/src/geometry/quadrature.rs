//! Gauss–Legendre, triangle and annulus quadrature rules.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if n == 1 {
            z = 0.0;
            dp = 1.0;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n == 1 {
        w[0] = 2.0;
    }
    (x, w)
}

/// `∫_a^b f` with an `n`-point Gauss rule.
pub fn gauss_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(m + h * xi)).sum::<f64>() * h
}

/// Rule on the reference triangle in barycentric coordinates; weights sum to 1.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    pub bary: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    /// Seven-point rule exact for degree 5.
    pub fn degree5() -> Self {
        let s = 15f64.sqrt();
        let a1 = (6.0 - s) / 21.0;
        let a2 = (6.0 + s) / 21.0;
        let w1 = (155.0 - s) / 1200.0;
        let w2 = (155.0 + s) / 1200.0;
        let mut bary = vec![[1.0 / 3.0; 3]];
        let mut weights = vec![9.0 / 40.0];
        for (a, w) in [(a1, w1), (a2, w2)] {
            let b = 1.0 - 2.0 * a;
            bary.extend([[b, a, a], [a, b, a], [a, a, b]]);
            weights.extend([w; 3]);
        }
        Self { bary, weights }
    }

    /// Collapsed tensor Gauss rule with `n²` points, exact for degree `2n − 2`.
    pub fn collapsed(n: usize) -> Self {
        let (x, w) = gauss_legendre(n);
        let mut bary = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for i in 0..n {
            let u = 0.5 * (x[i] + 1.0);
            for j in 0..n {
                let v = 0.5 * (x[j] + 1.0);
                let l1 = u;
                let l2 = (1.0 - u) * v;
                bary.push([1.0 - l1 - l2, l1, l2]);
                // Jacobian (1 − u)/4 relative to [-1,1]², reference area 1/2
                weights.push(w[i] * w[j] * (1.0 - u) * 0.5);
            }
        }
        Self { bary, weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical points and weights on triangle `p`.
    pub fn on(&self, p: &[[f64; 2]; 3]) -> impl Iterator<Item = ([f64; 2], f64, [f64; 3])> + '_ {
        let [a, b, c] = *p;
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
        self.bary.iter().zip(&self.weights).map(move |(l, &w)| {
            let x = [l[0] * a[0] + l[1] * b[0] + l[2] * c[0], l[0] * a[1] + l[1] * b[1] + l[2] * c[1]];
            (x, w * area, *l)
        })
    }
}

/// Tensor rule on concentric annuli with geometric radii.
#[derive(Clone, Debug)]
pub struct AnnularQuadRule {
    pub center: [f64; 2],
    pub radii: Vec<f64>,
    pub radial_order: usize,
    pub angular_order: usize,
    /// Radial nodes and weights (weight includes the Jacobian `r`).
    radial: Vec<(f64, f64)>,
}

pub const DEFAULT_RADIAL_ORDER: usize = 16;
pub const DEFAULT_ANGULAR_ORDER: usize = 32;

impl AnnularQuadRule {
    /// Annuli between `r_min` and `r_max` with ratio at most 2.
    pub fn new(center: [f64; 2], r_min: f64, r_max: f64, radial_order: usize, angular_order: usize) -> Result<Self> {
        if !(r_min > 0.0 && r_min < r_max && r_max.is_finite()) {
            return Err(Error::InvalidInput(format!("annulus needs 0 < r_min < r_max, got {r_min}, {r_max}")));
        }
        if radial_order < 4 || angular_order < 4 {
            return Err(Error::InvalidInput("quadrature orders must be at least 4".into()));
        }
        let n = ((r_max / r_min).log2().ceil() as usize).max(1);
        let q = (r_max / r_min).powf(1.0 / n as f64);
        let mut radii: Vec<f64> = (0..=n).map(|i| r_min * q.powi(i as i32)).collect();
        radii[n] = r_max;
        Ok(Self::from_radii(center, radii, radial_order, angular_order))
    }

    /// Full disk of radius `r_max`: a central disk of radius `r_core` plus annuli.
    pub fn disk(center: [f64; 2], r_core: f64, r_max: f64, radial_order: usize, angular_order: usize) -> Result<Self> {
        let mut rule = Self::new(center, r_core, r_max, radial_order, angular_order)?;
        rule.radii.insert(0, 0.0);
        Ok(Self::from_radii(center, rule.radii, radial_order, angular_order))
    }

    /// Rule over arbitrary breakpoints `0 ≤ r_0 < … < r_M`.
    pub fn from_radii(center: [f64; 2], radii: Vec<f64>, radial_order: usize, angular_order: usize) -> Self {
        let (x, w) = gauss_legendre(radial_order);
        let mut radial = Vec::with_capacity((radii.len() - 1) * radial_order);
        for win in radii.windows(2) {
            let (a, b) = (win[0], win[1]);
            let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
            for (&xi, &wi) in x.iter().zip(&w) {
                let r = m + h * xi;
                radial.push((r, wi * h * r));
            }
        }
        Self { center, radii, radial_order, angular_order, radial }
    }

    pub fn r_min(&self) -> f64 {
        self.radii[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.radii.last().unwrap()
    }

    /// Radial nodes `r` with weights `w` so that `∫ f(|x|) dx ≈ 2π Σ w f(r)`.
    pub fn radial_nodes(&self) -> &[(f64, f64)] {
        &self.radial
    }

    pub fn len(&self) -> usize {
        self.radial.len() * self.angular_order
    }

    pub fn is_empty(&self) -> bool {
        self.radial.is_empty()
    }

    /// All nodes with area weights.
    pub fn nodes(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        let m = self.angular_order;
        let dt = 2.0 * PI / m as f64;
        let c = self.center;
        self.radial.iter().flat_map(move |&(r, wr)| {
            (0..m).map(move |j| {
                let t = (j as f64 + 0.5) * dt;
                ([c[0] + r * t.cos(), c[1] + r * t.sin()], wr * dt)
            })
        })
    }

    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.nodes().map(|(x, w)| w * f(x)).sum()
    }

    /// Integral of a function of the distance to the center.
    pub fn integrate_radial(&self, f: impl Fn(f64) -> f64) -> f64 {
        2.0 * PI * self.radial.iter().map(|&(r, w)| w * f(r)).sum::<f64>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_exactness() {
        for n in 1..20 {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for d in 0..2 * n {
                let exact = if d % 2 == 1 { 0.0 } else { 2.0 / (d + 1) as f64 };
                let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(d as i32)).sum();
                assert!((got - exact).abs() < 1e-13, "n={n} d={d}");
            }
        }
    }

    #[test]
    fn triangle_rules_exact() {
        let tri = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        // ∫ x^a y^b over the reference triangle = a! b! / (a + b + 2)!
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>();
        for rule in [TriangleRule::degree5(), TriangleRule::collapsed(4)] {
            for a in 0..=3u32 {
                for b in 0..=(5 - a).min(3) {
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    let got: f64 = rule.on(&tri).map(|(x, w, _)| w * x[0].powi(a as i32) * x[1].powi(b as i32)).sum();
                    assert!((got - exact).abs() < 1e-15, "{a} {b}");
                }
            }
        }
    }

    #[test]
    fn annulus_area() {
        let r = AnnularQuadRule::new([0.3, -0.1], 1e-6, 1.0, 16, 32).unwrap();
        let got = r.integrate(|_| 1.0);
        let exact = PI * (1.0 - 1e-12);
        assert!(((got - exact) / exact).abs() < 1e-12);
        assert!(r.radii.windows(2).all(|w| w[1] / w[0] <= 2.0 + 1e-12));
        for (x, _) in r.nodes() {
            let d = (x[0] - 0.3).hypot(x[1] + 0.1);
            assert!((1e-6..=1.0).contains(&d));
        }
    }

    #[test]
    fn bad_annulus() {
        assert!(AnnularQuadRule::new([0.0; 2], 1.0, 1.0, 16, 32).is_err());
        assert!(AnnularQuadRule::new([0.0; 2], 0.1, 1.0, 3, 32).is_err());
    }
}
