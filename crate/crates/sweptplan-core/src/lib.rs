//! Trajectory optimization with differentiable collision-avoidance
//! certificates for planar convex shapes.
//!
//! The crate is organized bottom-up:
//!
//! - [`geom`]: convex shapes, poses, support/cost functions.
//! - [`sdcalc`]: a signed-distance oracle used for audits and tests; it is
//!   deliberately independent of the certificate machinery.
//! - [`dynamics`]: kinematic car model and its fixed-step integrators.
//! - [`sweptfit`]: per-interval swept-volume deviation radius, sampled and
//!   fitted as a one-sided polynomial bound.
//! - [`certify`]: differentiable certificate rows encoding "signed distance
//!   at least gamma" for discrete poses and swept intervals.
//! - [`nlp`]: a dense augmented-Lagrangian solver with a damped Gauss-Newton
//!   inner loop and a finite-difference gradient auditor.
//! - [`transcribe`]: scenario description, OCP assembly, solve, and audit.

pub mod certify;
pub mod dynamics;
pub mod geom;
mod lp;
pub mod nlp;
pub mod sdcalc;
pub mod sweptfit;
pub mod transcribe;

pub use geom::{ConvexShape, PlacedShape, Pose2, Rot2, SymMat2, Vec2};

pub use dynamics::{CarInput, CarParams, CarState};

pub use sdcalc::{signed_distance, SignedDistanceResult};

pub use sweptfit::{RadiusModel, RadiusSample};

pub use certify::{CertProblem, CertificateVars, ObstacleSpec, ResidualBlock};

pub use nlp::{NlpProblem, SolveReport, SolveStatus, SolverOptions};

pub use transcribe::{Scenario, Trajectory};
