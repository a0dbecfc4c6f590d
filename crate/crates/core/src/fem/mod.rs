pub mod eigen;
pub mod field;
pub mod green;
pub mod sites;
pub mod space;
pub mod sparse;

pub use field::Field;
pub use green::{GreenMode, GreensOracle};
pub use sites::Sites;
pub use space::Space;
pub use sparse::{Border, CsrMatrix, Factor};
