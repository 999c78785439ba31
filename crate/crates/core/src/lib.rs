//! Fractional-order optimal control of a cancer-obesity model.
//!
//! The crate integrates a Caputo-derivative tumor/immune/fat/drug system with
//! the L1 scheme, solves the matching adjoint system backwards in time, and
//! searches for optimal chemo- and immunotherapy schedules with a projected
//! forward-backward sweep. [`equilibria`] covers the tumor-free and
//! coexisting steady states and their fractional-order stability.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

pub mod equilibria;
pub mod fracops;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod scalar;
pub mod solver;

pub use scalar::Real;

pub use equilibria::{EquilibriumKind, Verdict};
pub use fracops::StencilError;
pub use optimizer::Scenario;
pub use solver::SolverError;

pub type L1Stencil = fracops::L1Stencil<f64>;
pub type ModelParams = model::ModelParams<f64>;
pub type Rates = model::Rates<f64>;
pub type StatePoint = model::StatePoint<f64>;
pub type ControlPoint = model::ControlPoint<f64>;
pub type AdjointPoint = model::AdjointPoint<f64>;
pub type Grid = solver::Grid<f64>;
pub type NewtonConfig = solver::NewtonConfig<f64>;
pub type StateTrajectory = solver::StateTrajectory<f64>;
pub type AdjointTrajectory = solver::AdjointTrajectory<f64>;
pub type ControlSchedule = optimizer::ControlSchedule<f64>;
pub type SweepConfig = optimizer::SweepConfig<f64>;
pub type OptimalSolution = optimizer::OptimalSolution<f64>;
pub type SweepError = optimizer::SweepError<f64>;
pub type EquilibriumPoint = equilibria::EquilibriumPoint<f64>;
pub type StabilityReport = equilibria::StabilityReport<f64>;
pub type CoexistingAnalysis = equilibria::CoexistingAnalysis<f64>;
