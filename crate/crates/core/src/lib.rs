//! Distributed adaptive leaderless consensus for networks of Euler-Lagrange agents.
//!
//! The crate simulates groups of two-link revolute arms that exchange only
//! local neighbor information over a directed (possibly switching) graph and
//! run one of five distributed control laws:
//!
//! * `baseline` — sliding-variable adaptive consensus, no disturbance term;
//! * `fixed` — integral-augmented sliding variable with an adaptive
//!   disturbance-rejection term; the consensus equilibrium is the weighted
//!   average of initial positions predicted by the Laplacian left null vector;
//! * `fixed-novel` — same auxiliary variables but no neighbor velocity
//!   measurements; the feedback gain is adapted online;
//! * `switching` — model-reference consensus for switching graph sequences
//!   using relative positions and velocities;
//! * `switching-novel` — model-reference consensus for switching graphs
//!   without neighbor velocity measurements.
//!
//! Modules follow the data flow: [`graphs`] holds topology and spectral
//! machinery, [`dynamics`] the arm plant, [`controllers`] the control laws,
//! [`sim`] the closed-loop integrator and metrics, and [`scenario`] the
//! configuration format, presets, and verification thresholds.

pub mod controllers;
pub mod dynamics;
pub mod graphs;
pub mod scenario;
pub mod sim;

pub use controllers::{AdaptiveState, ControllerGains, ControllerVariant, NeighborView};
pub use dynamics::{ArmParameters, DisturbanceModel, PlantState};
pub use graphs::{DirectedGraphSpec, LeftNullVector, QTransform, SwitchingSchedule};
pub use scenario::PresetId;
pub use sim::{Scenario, SimulationTrace, Topology};

/// Shorthand used across the crate for the two joint coordinates.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 2x2 gain / inertia-sized matrix.
pub type Mat2 = nalgebra::Matrix2<f64>;
/// Lumped-parameter vector.
pub type Vec5 = nalgebra::Vector5<f64>;
/// Adaptation gain matrix.
pub type Mat5 = nalgebra::Matrix5<f64>;
/// Regressor matrix mapping lumped parameters to joint torques.
pub type Regressor = nalgebra::Matrix2x5<f64>;
