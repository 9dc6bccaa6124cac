//! Finite-volume solver for nonlocal ionic-fluid models with structural
//! guarantees: nonnegative concentrations, exact mass conservation under
//! no-flux boundaries, and a non-increasing discrete free energy.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the common choice.

// `!(x > 0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod grid;
pub mod kernels;
pub mod model;
pub mod num;
pub mod scenario;
pub mod solver;

pub use diagnostics::{
    discrete_dissipation, discrete_energy, energy_rate, maximal_density, potential_flatness,
    record, second_moment, second_moment_bound_constant, DiagnosticsError, DiagnosticsRecord,
    EnergyParts,
};
pub use grid::{
    error_norms, restrict, total_mass, Dim, ErrorNorms, Grid, GridError, SpeciesField, State,
};
pub use kernels::{convolve, double_convolve, KernelError, KernelSpec, KernelTable};
pub use model::{
    chemical_potential, Correlation, ExternalPotential, ModelConfig, ModelError, ModelTables,
};
pub use num::Real;
pub use solver::{
    cfl_dt, face_velocities, fluxes, run, step_forward_euler, BoundaryCondition, GaussianPulse,
    RunOutput, RunSettings, SolverError, StepSettings,
};

pub type Grid64 = Grid<f64>;
pub type State64 = State<f64>;
pub type ModelConfig64 = ModelConfig<f64>;
pub type KernelSpec64 = KernelSpec<f64>;
pub type Grid32 = Grid<f32>;
pub type State32 = State<f32>;
pub type ModelConfig32 = ModelConfig<f32>;
pub type KernelSpec32 = KernelSpec<f32>;
