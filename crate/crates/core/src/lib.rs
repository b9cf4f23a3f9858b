//! Core-shell enhanced single particle model for LFP/graphite cells.
//!
//! The crate provides the electrochemical model (electrolyte transport,
//! fixed-sphere negative particle, moving-boundary two-phase positive
//! particle), a tolerance-controlled stiff integrator, cost-based parameter
//! identification with particle swarm optimization, and the solver-setting
//! sensitivity tooling built on top of the simulator.

pub mod anode;
pub mod cathode;
pub mod config;
pub mod constants;
pub mod electrolyte;
pub mod error;
pub mod ident;
pub mod io;
pub mod params;
pub mod quadrature;
pub mod senstool;
pub mod simulator;

pub use error::{Error, Result};
pub use params::{CellParameters, Electrode, ParameterBounds};
pub use simulator::{SimulationInput, SimulationResult, SolverSettings};
