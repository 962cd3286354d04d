//! Command-line surface for the planner: scenario runs with artifact
//! emission, swept-radius fitting, signed-distance queries, and gradient
//! audits.
//!
//! Everything here is deterministic by construction: artifact files carry no
//! timestamps, floating-point output uses fixed formats, and reruns with the
//! same inputs produce byte-identical files.

pub mod artifact;
pub mod commands;
pub mod fitcfg;
pub mod plot;
