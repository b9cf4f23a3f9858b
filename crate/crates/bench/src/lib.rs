//! Shared helpers for the benchmark targets.

use espm_core::anode::OcpTable;
use espm_core::params::{theoretical_capacity, Electrode};
use espm_core::simulator::{SimulationInput, SolverSettings};
use espm_core::CellParameters;

/// Benchmark fixture: illustrative cell, recommended solver setting, the
/// placeholder anode table, and a C/12-scale constant current.
pub fn fixture() -> (CellParameters, SolverSettings, OcpTable, f64) {
    let params = CellParameters::illustrative_lfp();
    let settings = SolverSettings::default();
    let ocp = OcpTable::graphite_placeholder();
    let q = theoretical_capacity(&params, Electrode::Positive);
    (params, settings, ocp, q / 12.0)
}

/// A short input covering a handful of hold intervals.
pub fn short_input(current: f64, intervals: usize, dt: f64) -> SimulationInput {
    SimulationInput::constant_current(current, intervals as f64 * dt, dt, 0.9)
}
