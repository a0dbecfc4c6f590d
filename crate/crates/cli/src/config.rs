//! Declarative run configuration (TOML). Every section is optional; unknown keys are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sgmf_core::construction::HybridOptions;
use sgmf_core::geometry::{Domain, Shape};

use crate::error::CliError;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    pub domain: DomainConfig,
    pub mesh: MeshConfig,
    pub quadrature: QuadratureConfig,
    pub run: SweepConfig,
    pub greens: GreensConfig,
    pub identities: IdentitiesConfig,
    pub landscape: LandscapeConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Disk,
    Square,
    Star,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub shape: ShapeKind,
    pub radius: f64,
    pub half_width: f64,
    pub amplitude: f64,
    pub lobes: u32,
    pub symmetry: u32,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { shape: ShapeKind::Disk, radius: 1.0, half_width: 1.0, amplitude: 0.1, lobes: 4, symmetry: 2 }
    }
}

impl DomainConfig {
    pub fn build(&self) -> Result<Domain, CliError> {
        let shape = match self.shape {
            ShapeKind::Disk => Shape::Disk { radius: self.radius },
            ShapeKind::Square => Shape::Square { half_width: self.half_width },
            ShapeKind::Star => Shape::SmoothedStar { amplitude: self.amplitude, lobes: self.lobes },
        };
        Domain::new(shape, self.symmetry).map_err(|e| CliError::Config(format!("domain: {e}")))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshConfig {
    /// Global element size.
    pub h: f64,
    /// Elements per core scale at the bubble centers.
    pub resolution: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { h: 0.05, resolution: 4.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub radial_order: usize,
    pub angular_order: usize,
    pub core_fraction: f64,
    pub max_patch_radius: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let d = HybridOptions::default();
        Self {
            radial_order: d.radial_order,
            angular_order: d.angular_order,
            core_fraction: d.core_fraction,
            max_patch_radius: d.max_patch_radius,
        }
    }
}

impl QuadratureConfig {
    pub fn options(&self) -> HybridOptions {
        HybridOptions {
            radial_order: self.radial_order,
            angular_order: self.angular_order,
            core_fraction: self.core_fraction,
            max_patch_radius: self.max_patch_radius,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    Partial,
    Tower,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: ModeKind,
    pub k: usize,
    /// Mass of `e^u` in partial mode.
    pub rho_plus: f64,
    /// Mean-field mass `ρ₀` in tower mode.
    pub rho0: f64,
    /// Blow-up points in partial mode (one per bubble).
    pub centers: Vec<[f64; 2]>,
    /// Replace `centers` by the critical configuration reached from them.
    pub find_critical: bool,
    pub lambdas: Vec<f64>,
    pub p_norms: Vec<f64>,
    pub mass_radii: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            mode: ModeKind::Partial,
            k: 1,
            rho_plus: 4.0,
            rho0: 4.0,
            centers: vec![[0.3, 0.2]],
            find_critical: false,
            lambdas: vec![1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6],
            p_norms: vec![1.0, 2.0],
            mass_radii: vec![0.2, 0.1, 0.05],
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.lambdas.is_empty() || self.lambdas.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(CliError::Config("run.lambdas must be a nonempty list of positive values".into()));
        }
        if self.p_norms.iter().any(|p| *p < 1.0) {
            return Err(CliError::Config("run.p_norms must be at least 1".into()));
        }
        match self.mode {
            ModeKind::Tower => {
                if self.k == 0 || self.k % 2 == 0 {
                    return Err(CliError::Config(format!("tower mode needs an odd k (k must be odd), got {}", self.k)));
                }
            }
            ModeKind::Partial => {
                if self.centers.len() != self.k {
                    return Err(CliError::Config(format!(
                        "run.centers has {} points but k = {}",
                        self.centers.len(),
                        self.k
                    )));
                }
            }
        }
        Ok(())
    }

    /// Lambdas sorted from largest to smallest.
    pub fn sorted_lambdas(&self) -> Vec<f64> {
        let mut l = self.lambdas.clone();
        l.sort_by(|a, b| b.partial_cmp(a).unwrap());
        l.dedup();
        l
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreensConfig {
    pub h: f64,
    pub pairs: usize,
    pub tolerance: f64,
}

impl Default for GreensConfig {
    fn default() -> Self {
        Self { h: 0.02, pairs: 100, tolerance: 1e-4 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitiesConfig {
    pub alphas: Vec<f64>,
    pub r_max: f64,
    pub r_core: f64,
    pub radial_order: usize,
    pub tolerance: f64,
    /// Exponents for the symmetric kernel count; `α/2` must be odd.
    pub kernel_alphas: Vec<f64>,
    pub kernel_symmetry: u32,
    pub kernel_radii: Vec<f64>,
}

impl Default for IdentitiesConfig {
    fn default() -> Self {
        Self {
            alphas: vec![2.0, 6.0, 10.0],
            r_max: 1e6,
            r_core: 1e-6,
            radial_order: 24,
            tolerance: 1e-6,
            kernel_alphas: vec![2.0, 6.0, 10.0],
            kernel_symmetry: 2,
            kernel_radii: vec![250.0, 500.0, 1000.0],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    pub k: usize,
    pub rho_plus: f64,
    /// Grid points per axis (k = 1) or radii sampled (k = 2).
    pub grid: usize,
    /// Half-width of the sampled square, or the largest pair radius.
    pub extent: f64,
    /// Cells closer than this to the boundary are marked invalid.
    pub min_clearance: f64,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self { k: 1, rho_plus: 4.0, grid: 21, extent: 0.9, min_clearance: 0.05 }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
