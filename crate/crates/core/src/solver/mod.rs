//! Forward conjugate heat-transfer solver.

pub mod bdf;
pub mod linsolve;
pub mod params;
pub mod step;
pub mod velocity;
pub mod weno;

pub use bdf::{bdf2opt_coefficients, BdfCoefficients, CHI_DEFAULT};
pub use params::{sample_parameters, ParameterSample};
pub use step::{run_case, ForwardSolver, History, Snapshot, SolverSettings, StepOutcome};
pub use velocity::{build_velocity_field, VelocityField};
