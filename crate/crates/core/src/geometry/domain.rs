//! Star-shaped planar domains described by a polar boundary radius.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Shape of the boundary curve. Every supported shape is star-shaped about the origin,
/// so the boundary is described by a radius function of the polar angle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Disk { radius: f64 },
    Square { half_width: f64 },
    /// `r(θ) = 1 + amplitude·cos(lobes·θ)`.
    SmoothedStar { amplitude: f64, lobes: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    shape: Shape,
    symmetry_order: u32,
}

impl Domain {
    pub fn new(shape: Shape, symmetry_order: u32) -> Result<Self> {
        if symmetry_order == 0 {
            return Err(Error::InvalidInput("symmetry order must be at least 1".into()));
        }
        match shape {
            Shape::Disk { radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidInput(format!("disk radius {radius} must be positive")));
                }
            }
            Shape::Square { half_width } => {
                if !(half_width > 0.0 && half_width.is_finite()) {
                    return Err(Error::InvalidInput(format!("square half width {half_width} must be positive")));
                }
                if ![1, 2, 4].contains(&symmetry_order) {
                    return Err(Error::InvalidInput(format!(
                        "a square is not invariant under rotation by 2π/{symmetry_order}"
                    )));
                }
            }
            Shape::SmoothedStar { amplitude, lobes } => {
                if !(0.0..1.0).contains(&amplitude) {
                    return Err(Error::InvalidInput(format!(
                        "star amplitude {amplitude} must lie in [0, 1); larger values self-intersect"
                    )));
                }
                if lobes == 0 {
                    return Err(Error::InvalidInput("star needs at least one lobe".into()));
                }
                if lobes % symmetry_order != 0 {
                    return Err(Error::InvalidInput(format!(
                        "a star with {lobes} lobes is not invariant under rotation by 2π/{symmetry_order}"
                    )));
                }
            }
        }
        Ok(Self { shape, symmetry_order })
    }

    pub fn unit_disk(symmetry_order: u32) -> Self {
        Self::new(Shape::Disk { radius: 1.0 }, symmetry_order).expect("unit disk is valid")
    }

    pub fn disk(radius: f64, symmetry_order: u32) -> Result<Self> {
        Self::new(Shape::Disk { radius }, symmetry_order)
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn symmetry_order(&self) -> u32 {
        self.symmetry_order
    }

    /// Same shape with another declared symmetry order.
    pub fn with_symmetry(&self, symmetry_order: u32) -> Result<Self> {
        Self::new(self.shape.clone(), symmetry_order)
    }

    pub fn disk_radius(&self) -> Option<f64> {
        match self.shape {
            Shape::Disk { radius } => Some(radius),
            _ => None,
        }
    }

    /// Boundary radius in direction `theta`.
    pub fn boundary_radius(&self, theta: f64) -> f64 {
        match self.shape {
            Shape::Disk { radius } => radius,
            Shape::Square { half_width } => half_width / theta.cos().abs().max(theta.sin().abs()),
            Shape::SmoothedStar { amplitude, lobes } => 1.0 + amplitude * (lobes as f64 * theta).cos(),
        }
    }

    pub fn boundary_point(&self, theta: f64) -> [f64; 2] {
        let r = self.boundary_radius(theta);
        [r * theta.cos(), r * theta.sin()]
    }

    /// Polar angles of boundary corners in `[0, 2π)`.
    pub fn corner_angles(&self) -> Vec<f64> {
        match self.shape {
            Shape::Square { .. } => (0..4).map(|i| PI / 4.0 + i as f64 * PI / 2.0).collect(),
            _ => Vec::new(),
        }
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return true;
        }
        r < self.boundary_radius(x[1].atan2(x[0]))
    }

    /// Euclidean distance from an interior point to the boundary curve.
    pub fn distance_to_boundary(&self, x: [f64; 2]) -> f64 {
        match self.shape {
            Shape::Disk { radius } => radius - x[0].hypot(x[1]),
            Shape::Square { half_width } => (half_width - x[0].abs()).min(half_width - x[1].abs()),
            Shape::SmoothedStar { .. } => {
                let dist = |t: f64| {
                    let b = self.boundary_point(t);
                    (b[0] - x[0]).hypot(b[1] - x[1])
                };
                let n = 720;
                let (mut best_t, mut best) = (0.0, f64::INFINITY);
                for i in 0..n {
                    let t = 2.0 * PI * i as f64 / n as f64;
                    let d = dist(t);
                    if d < best {
                        best = d;
                        best_t = t;
                    }
                }
                // golden-section polish on the bracketing interval
                let step = 2.0 * PI / n as f64;
                let (mut a, mut b) = (best_t - step, best_t + step);
                let g = 0.5 * (5f64.sqrt() - 1.0);
                for _ in 0..60 {
                    let c = b - g * (b - a);
                    let d = a + g * (b - a);
                    if dist(c) < dist(d) {
                        b = d;
                    } else {
                        a = c;
                    }
                }
                best.min(dist(0.5 * (a + b)))
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self.shape {
            Shape::Disk { radius } => PI * radius * radius,
            Shape::Square { half_width } => 4.0 * half_width * half_width,
            Shape::SmoothedStar { amplitude, .. } => PI * (1.0 + 0.5 * amplitude * amplitude),
        }
    }

    /// Radius of a disk about the origin containing the domain.
    pub fn outer_radius(&self) -> f64 {
        match self.shape {
            Shape::Disk { radius } => radius,
            Shape::Square { half_width } => half_width * 2f64.sqrt(),
            Shape::SmoothedStar { amplitude, .. } => 1.0 + amplitude,
        }
    }
}

/// Rotation of `x` by `2π·steps/order`.
pub fn rotate(x: [f64; 2], steps: u32, order: u32) -> [f64; 2] {
    let t = 2.0 * PI * steps as f64 / order as f64;
    let (s, c) = t.sin_cos();
    [c * x[0] - s * x[1], s * x[0] + c * x[1]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_rejects_self_intersection() {
        let err = Domain::new(Shape::SmoothedStar { amplitude: 1.2, lobes: 4 }, 4);
        assert!(err.is_err());
    }

    #[test]
    fn square_symmetry_orders() {
        assert!(Domain::new(Shape::Square { half_width: 1.0 }, 4).is_ok());
        assert!(Domain::new(Shape::Square { half_width: 1.0 }, 3).is_err());
    }

    #[test]
    fn distances() {
        let d = Domain::unit_disk(1);
        assert!((d.distance_to_boundary([0.3, 0.4]) - 0.5).abs() < 1e-15);
        let s = Domain::new(Shape::SmoothedStar { amplitude: 0.0, lobes: 4 }, 4).unwrap();
        assert!((s.distance_to_boundary([0.3, 0.4]) - 0.5).abs() < 1e-9);
        let q = Domain::new(Shape::Square { half_width: 1.0 }, 4).unwrap();
        assert!((q.distance_to_boundary([0.5, -0.2]) - 0.5).abs() < 1e-15);
        assert!(q.contains([0.99, 0.99]) && !q.contains([1.01, 0.0]));
    }

    #[test]
    fn boundary_points_lie_on_curve() {
        let q = Domain::new(Shape::Square { half_width: 2.0 }, 1).unwrap();
        for i in 0..100 {
            let p = q.boundary_point(0.0628 * i as f64);
            assert!((p[0].abs().max(p[1].abs()) - 2.0).abs() < 1e-12);
        }
    }
}
