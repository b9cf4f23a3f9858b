//! Hot-path benchmarks: subsystem assembly, one hold interval of the stiff
//! integrator, and a swarm iteration on an analytic objective.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use espm_bench::{fixture, short_input};
use espm_core::cathode::{self, CathodeState, Mode, Regime};
use espm_core::electrolyte::{self, ElectrolyteGrid, ElectrolyteState};
use espm_core::ident::{pso_minimize, PsoConfig};
use espm_core::simulator::integrate;

fn bench_electrolyte_assembly(c: &mut Criterion) {
    let (params, _, _, _) = fixture();
    let grid = ElectrolyteGrid::with_defaults(&params).unwrap();
    let state = ElectrolyteState::uniform(&grid, params.c0);
    c.bench_function("electrolyte_apply", |b| {
        b.iter(|| {
            electrolyte::apply_electrolyte_system(
                black_box(&state),
                &grid,
                &params,
                black_box(2.7e-5),
            )
            .unwrap()
        })
    });
}

fn bench_two_phase_apply(c: &mut Criterion) {
    let (params, settings, _, current) = fixture();
    let phase = cathode::PhaseConstants::new(&params);
    let mut state =
        CathodeState::one_phase_uniform(settings.n_r, phase.c_beta, Mode::Discharge);
    state.regime = Regime::TwoPhase;
    state.r_p = 0.5 * params.r_p;
    state.boundary_conc = phase.c_beta;
    c.bench_function("two_phase_apply", |b| {
        b.iter(|| {
            cathode::apply_two_phase(black_box(&state), &params, current, settings.n_r).unwrap()
        })
    });
}

fn bench_hold_interval(c: &mut Criterion) {
    let (params, settings, ocp, current) = fixture();
    let input = short_input(current, 4, settings.dt);
    c.bench_function("integrate_four_holds", |b| {
        b.iter(|| integrate(black_box(&input), &params, &settings, &ocp).unwrap())
    });
}

fn bench_pso_iterations(c: &mut Criterion) {
    let config = PsoConfig {
        swarm_size: 24,
        iterations: 20,
        seed: 3,
        ..Default::default()
    };
    let objective = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
    c.bench_function("pso_sphere_20_iters", |b| {
        b.iter(|| pso_minimize(objective, &[(-5.0, 5.0); 4], None, black_box(&config)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_electrolyte_assembly,
    bench_two_phase_apply,
    bench_hold_interval,
    bench_pso_iterations
);
criterion_main!(benches);
