//! Sweep framework and parameter-sensitivity behavior on desk-scale grids.

use espm_core::anode::OcpTable;
use espm_core::ident::Weights;
use espm_core::io::Dataset;
use espm_core::params::{theoretical_capacity, ParameterBounds};
use espm_core::senstool::{
    parameter_sensitivity, sweep_step1, sweep_step2, tradeoff_selection, SweepGrid,
    FICTITIOUS_COST,
};
use espm_core::simulator::{integrate, SimulationInput, SolverSettings};
use espm_core::{CellParameters, Electrode};

fn synthetic_dataset(duration: f64) -> (CellParameters, Dataset) {
    let params = CellParameters::illustrative_lfp();
    let settings = SolverSettings::default();
    let ocp = OcpTable::graphite_placeholder();
    let q = theoretical_capacity(&params, Electrode::Positive);
    let input = SimulationInput::constant_current(q / 12.0, duration, settings.dt, 1.0);
    let sim = integrate(&input, &params, &settings, &ocp).expect("synthetic run");
    assert!(sim.converged);
    (
        params,
        Dataset {
            time_s: sim.time_s.clone(),
            current_a: sim.current_a.clone(),
            voltage_v: sim.voltage_v.clone(),
        },
    )
}

#[test]
fn single_point_grid_yields_single_record() {
    let (params, ds) = synthetic_dataset(1800.0);
    let ocp = OcpTable::graphite_placeholder();
    let grid = SweepGrid {
        n_r: vec![20],
        dt: vec![50.0],
        reltol: vec![1e-5],
        abstol_scale: vec![0.001],
    };
    let records = sweep_step1(&params, &grid, &ds, &ocp, &Weights::default(), 1).unwrap();
    assert_eq!(records.len(), 1);
    let r = &records[0];
    assert!(r.converged);
    assert!(r.j < FICTITIOUS_COST);
    assert!(r.t_sim > 0.0);
}

#[test]
fn probability_map_invariants_on_reduced_grid() {
    let (base, ds) = synthetic_dataset(3600.0);
    let ocp = OcpTable::graphite_placeholder();
    let bounds = ParameterBounds::default();
    let grid = SweepGrid {
        n_r: vec![10, 40],
        dt: vec![50.0],
        reltol: vec![1e-6, 1e-5],
        abstol_scale: vec![0.001],
    };
    let map = sweep_step2(
        &bounds,
        &base,
        6,
        &grid,
        &ds,
        &ocp,
        &Weights::default(),
        123,
    )
    .unwrap();
    assert!((map.total_probability() - 100.0).abs() < 1e-9);
    for p in &map.probability_pct {
        assert!(*p >= 0.0);
    }
    let by_reltol = map.cumulative_by_reltol();
    assert!((by_reltol.iter().sum::<f64>() - 100.0).abs() < 1e-9);

    // trade-off selection works on the produced map
    let curve = tradeoff_selection(&map, 1e-5, 1.0).unwrap();
    assert!(map.n_r.contains(&curve.chosen_n_r));
    assert_eq!(curve.score.len(), map.n_r.len());
}

#[test]
fn sensitivity_zero_current_kills_resistance_column() {
    let params = CellParameters::illustrative_lfp();
    let settings = SolverSettings {
        n_r: 10,
        ..Default::default()
    };
    let ocp = OcpTable::graphite_placeholder();
    // zero-current profile: the ohmic term never acts
    let n = 20;
    let ds = Dataset {
        time_s: (0..=n).map(|k| k as f64 * settings.dt).collect(),
        current_a: vec![0.0; n + 1],
        voltage_v: vec![3.26; n + 1],
    };
    let report = parameter_sensitivity(&params, &ds, &settings, &ocp, 0.01).unwrap();
    let idx = report.names.iter().position(|n| *n == "r_l").unwrap();
    assert!(
        report.norms[idx].abs() < 1e-12,
        "r_l norm = {}",
        report.norms[idx]
    );
    // the full-charge stoichiometry sets the rest voltage, so it registers
    let idx_theta = report.names.iter().position(|n| *n == "theta_p_100").unwrap();
    assert!(report.norms[idx_theta] > 0.0);

    // correlation matrix structure
    let p = report.names.len();
    for i in 0..p {
        assert!((report.correlation[(i, i)] - 1.0).abs() < 1e-9);
        for j in 0..p {
            let rho = report.correlation[(i, j)];
            assert!((-1.0 - 1e-9..=1.0 + 1e-9).contains(&rho));
            assert!((rho - report.correlation[(j, i)]).abs() < 1e-12);
        }
    }
}

#[test]
fn sensitivity_on_discharge_segment() {
    let (params, ds) = synthetic_dataset(1800.0);
    let settings = SolverSettings {
        n_r: 10,
        ..Default::default()
    };
    let ocp = OcpTable::graphite_placeholder();
    let report = parameter_sensitivity(&params, &ds, &settings, &ocp, 0.01).unwrap();
    // under load the lumped resistance has a visible effect
    let idx = report.names.iter().position(|n| *n == "r_l").unwrap();
    assert!(report.norms[idx] > 0.0);
}
