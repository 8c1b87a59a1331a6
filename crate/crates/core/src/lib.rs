pub mod analytic_oracle;
pub mod constraint_chain;
pub mod dynamics;
pub mod error;
pub mod framework;
pub mod gauge_lab;
pub mod io;
pub mod linalg;
pub mod reduced_model;
pub mod tolerances;

pub use error::{Error, Result};
pub use framework::{Configuration, PhasePoint, RodFramework};
pub use tolerances::Tolerances;
