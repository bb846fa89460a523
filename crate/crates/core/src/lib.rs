//! Finite-difference lab for the singular diffusion problem
//! `u_t = (u^{m-1} u_x)_x + u^p` on `(0, 1)` with `u_x(0) = 0` and
//! `u_x(1) = -u^alpha`, `-1 < m < 0`, `0 < p < 1`, `alpha > 2 - m`.
//!
//! The pipeline: validate parameters ([`model`]), evaluate closed-form
//! envelopes ([`bounds`]), regularize the diffusivity inside a corridor
//! `[delta, M_bar]` ([`regularization`]), integrate with an implicit
//! finite-difference scheme ([`solver`]) and compare the computed
//! trajectories with the envelopes ([`verify`]).

pub mod bounds;
pub mod error;
pub mod io;
pub mod model;
pub mod regularization;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use model::{make_initial, mass, validate_params, Field, Grid, InitialKind, InitialSpec, ProblemParams, RawParams};
pub use regularization::{corridor_schedule, mollify_initial, RegularizationSpec};
pub use solver::{solve_regularized, solve_singular, SolveOptions, StepConfig, Trajectory};
pub use verify::{epsilon_grid, EstimateReport, Lemma};
