pub mod error;
pub mod hypomono;
pub mod moduli;
pub mod norm;
pub mod planar;
pub mod psi;
pub mod sets;
pub mod suite;
pub mod vector;

pub use error::{Error, Result};
pub use moduli::{Direction, ModulusCurve, SearchBudget};
pub use norm::NormSpec;
pub use vector::Vector;
