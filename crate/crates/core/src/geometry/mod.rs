pub mod domain;
pub mod mesh;
mod mesher;
pub mod quadrature;

pub use domain::{rotate, Domain, Shape};
pub use mesh::{triangulate, triangulate_with, Mesh, MeshOptions, RefinementCenter, Symmetry};
