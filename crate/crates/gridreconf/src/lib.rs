//! Joint distributed-generation dispatch and radial network reconfiguration.
//!
//! The crate solves the reconfiguration optimal power flow (ROPF) problem for
//! radial distribution networks: choose a radial switch configuration together
//! with inverter set points so that total distributed generation is maximized
//! (or losses minimized) subject to DistFlow physics, voltage and current
//! limits, inverter capability and a switch-change budget.
//!
//! The exact model is a mixed-integer program with bilinear equality
//! constraints; it is solved to certified optimality by a spatial
//! branch-and-bound engine built on LP relaxations with McCormick envelopes.
//! A rotated-cone relaxation and a LinDistFlow approximation of the same
//! problem are available as comparison modes, and the [`audit`] module
//! quantifies where they break down (relaxation tightness, posterior load-flow
//! violations, Pareto trade-offs and hosting-capacity scans).
//!
//! Modules:
//! - [`netcase`]: case parsing, validation, per-unit normalization.
//! - [`radiality`]: single-commodity-flow radiality encoding and oracles.
//! - [`model`]: ROPF model assembly (exact / conic / LinDistFlow).
//! - [`lp`]: bounded-variable LP interface used by the engine.
//! - [`sbb`]: the spatial branch-and-bound engine.
//! - [`loadflow`]: backward/forward sweep load flow and violation reports.
//! - [`audit`]: tightness, Pareto and hosting-capacity studies.
//! - [`report`]: JSON/CSV/SVG emission.
//! - [`cli`]: command-line front end.

pub mod audit;
pub mod cli;
pub mod loadflow;
pub mod lp;
pub mod model;
pub mod netcase;
pub mod radiality;
pub mod report;
pub mod sbb;

pub use netcase::{BusData, DgRating, LineData, NetworkCase, PhaseMode};
pub use radiality::SwitchTopology;
pub use model::{ModelInstance, Objective, OperatingPoint, Variant};
pub use sbb::{SolveParams, SolveResult};
