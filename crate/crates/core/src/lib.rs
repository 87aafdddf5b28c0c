pub mod charts;
pub mod error;
pub mod expansion;
pub mod functionals;
pub mod isoperimetry;
pub mod jet;
pub mod moments;
pub mod mu_solver;
pub mod ode;
pub mod quadrature;
pub mod rigidity;
pub mod spaceform;
pub mod tensor;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
