use espm_core::anode::OcpTable;
use espm_core::ident::Weights;
use espm_core::io::Dataset;
use espm_core::params::{sample_within_bounds, theoretical_capacity, ParameterBounds};
use espm_core::senstool::evaluate_setting;
use espm_core::simulator::{integrate, SimulationInput, SolverSettings};
use espm_core::{CellParameters, Electrode};

#[test]
#[ignore]
fn probe_sweep_corner_costs() {
    let params = CellParameters::illustrative_lfp();
    let settings = SolverSettings::default();
    let ocp = OcpTable::graphite_placeholder();
    let q = theoretical_capacity(&params, Electrode::Positive);
    let input = SimulationInput::constant_current(q / 12.0, 12.0 * 3600.0, 50.0, 1.0);
    let sim = integrate(&input, &params, &settings, &ocp).unwrap();
    let ds = Dataset {
        time_s: sim.time_s.clone(),
        current_a: sim.current_a.clone(),
        voltage_v: sim.voltage_v.clone(),
    };
    let bounds = ParameterBounds::default();
    let w = Weights::default();
    for seed in [100u64, 101, 102] {
        let theta = sample_within_bounds(&bounds, &params, seed).unwrap();
        for (n_r, reltol) in [(10usize, 1e-5f64), (70, 1e-5), (100, 1e-5), (100, 1e-8), (40, 1e-8)] {
            let s = SolverSettings { n_r, reltol, ..Default::default() };
            let t0 = std::time::Instant::now();
            let r = evaluate_setting(&theta, &s, &ds, &ocp, &w);
            eprintln!(
                "seed={seed} n_r={n_r} reltol={reltol:e}: J={:.3e} converged={} wall={:.1}s",
                r.j, r.converged, t0.elapsed().as_secs_f64()
            );
        }
    }
}
