//! Parameter identification: the voltage/SOC cost function, constraint
//! handling, global-best particle swarm optimization, and the sequential
//! multi-rate identification workflow.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anode::OcpTable;
use crate::cathode::{Mode, EXIT_THRESHOLD_FRACTION};
use crate::error::{Error, Result};
use crate::io::Dataset;
use crate::params::{theoretical_capacity, CellParameters, Electrode, Interval, ParameterBounds};
use crate::simulator::{coulomb_counting_soc, integrate, SimulationInput, SimulationResult, SolverSettings};

/// Cost assigned to solver settings or parameter vectors whose simulation
/// does not converge.
pub const FICTITIOUS_COST: f64 = 100.0;

/// Cost weights; all default to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            w1: 1.0,
            w2: 1.0,
            w3: 1.0,
        }
    }
}

/// Cost terms of one (or a sum over) constant-current segment(s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub j_v: f64,
    pub j_soc_n: f64,
    pub j_soc_p: f64,
    pub j: f64,
}

impl CostBreakdown {
    pub fn accumulate(&mut self, other: &CostBreakdown) {
        self.j_v += other.j_v;
        self.j_soc_n += other.j_soc_n;
        self.j_soc_p += other.j_soc_p;
        self.j += other.j;
    }
}

/// Reference series a simulation is scored against.
#[derive(Debug, Clone)]
pub struct ReferenceSeries {
    pub voltage_v: Vec<f64>,
    pub soc: Vec<f64>,
}

impl ReferenceSeries {
    /// Build from a uniform-dt dataset: the SOC reference comes from
    /// Coulomb counting over the segment's own capacity; discharge starts
    /// at SOC 1, charge at 0.
    pub fn from_dataset(ds: &Dataset, dt: f64) -> Result<ReferenceSeries> {
        ds.validate()?;
        let capacity = ds.capacity_ah();
        if !(capacity > 0.0) {
            return Err(Error::Input("dataset carries no charge throughput".into()));
        }
        let soc0 = match ds.mode() {
            Mode::Discharge => 1.0,
            Mode::Charge => 0.0,
        };
        Ok(ReferenceSeries {
            voltage_v: ds.voltage_v.clone(),
            soc: coulomb_counting_soc(&ds.current_a, dt, capacity, soc0),
        })
    }
}

/// RMS cost terms of a simulated run against a reference.
pub fn cost_terms(
    sim_voltage: &[f64],
    sim_soc_n: &[f64],
    sim_soc_p: &[f64],
    reference: &ReferenceSeries,
    weights: &Weights,
) -> Result<CostBreakdown> {
    let n = reference.voltage_v.len();
    if sim_voltage.len() != n
        || sim_soc_n.len() != n
        || sim_soc_p.len() != n
        || reference.soc.len() != n
    {
        return Err(Error::Input(format!(
            "cost series length mismatch: sim {} vs reference {n}",
            sim_voltage.len()
        )));
    }
    let mut sv = 0.0;
    let mut sn = 0.0;
    let mut sp = 0.0;
    for j in 0..n {
        let v_exp = reference.voltage_v[j];
        if v_exp == 0.0 {
            return Err(Error::Input(format!(
                "reference voltage is zero at sample {j}"
            )));
        }
        let rv = (v_exp - sim_voltage[j]) / v_exp;
        sv += rv * rv;
        let rn = reference.soc[j] - sim_soc_n[j];
        sn += rn * rn;
        let rp = reference.soc[j] - sim_soc_p[j];
        sp += rp * rp;
    }
    let m = n as f64;
    let j_v = weights.w1 * (sv / m).sqrt();
    let j_soc_n = weights.w2 * (sn / m).sqrt();
    let j_soc_p = weights.w3 * (sp / m).sqrt();
    Ok(CostBreakdown {
        j_v,
        j_soc_n,
        j_soc_p,
        j: j_v + j_soc_n + j_soc_p,
    })
}

/// Feasibility report of the identification constraints.
#[derive(Debug, Clone, Default)]
pub struct ConstraintReport {
    pub feasible: bool,
    pub penalty: f64,
    pub violations: Vec<String>,
}

/// Evaluate the stoichiometric-window, moving-boundary, and (optionally)
/// capacity constraints; violations become additive quadratic penalties.
pub fn evaluate_constraints(
    params: &CellParameters,
    sims: &[&SimulationResult],
    capacity_ref_ah: Option<f64>,
    penalty_weight: f64,
) -> ConstraintReport {
    let mut report = ConstraintReport {
        feasible: true,
        penalty: 0.0,
        violations: Vec::new(),
    };
    let add = |report: &mut ConstraintReport, violation: f64, label: String| {
        report.feasible = false;
        report.penalty += penalty_weight * violation * violation;
        report.violations.push(label);
    };

    // (b) theta_p_beta <= theta_p_0
    if params.theta_p_beta > params.theta_p_0 {
        let v = params.theta_p_beta - params.theta_p_0;
        add(&mut report, v, format!("(b) theta_p_beta exceeds theta_p_0 by {v:.3e}"));
    }
    // (c) theta_p_alpha >= theta_p_100
    if params.theta_p_alpha < params.theta_p_100 {
        let v = params.theta_p_100 - params.theta_p_alpha;
        add(&mut report, v, format!("(c) theta_p_alpha below theta_p_100 by {v:.3e}"));
    }
    // (d) moving boundary nonnegative throughout, depleted at the end
    for (k, sim) in sims.iter().enumerate() {
        if !sim.converged {
            report.feasible = false;
            report.penalty += FICTITIOUS_COST;
            report
                .violations
                .push(format!("segment {k}: simulation did not converge"));
            continue;
        }
        if sim.rp_over_rp.iter().any(|&r| r < 0.0) {
            add(&mut report, 1.0, format!("segment {k}: (d) negative moving boundary"));
        }
        if let Some(&last) = sim.rp_over_rp.last() {
            // exact zero is unreachable; the exit threshold is the
            // practical "depleted" criterion
            if last > EXIT_THRESHOLD_FRACTION {
                add(
                    &mut report,
                    last,
                    format!("segment {k}: (d) core not depleted at profile end (rp/Rp = {last:.3e})"),
                );
            }
        }
    }
    // (e) capacity window, active only when a reference is given
    if let Some(q_ref) = capacity_ref_ah {
        for electrode in [Electrode::Positive, Electrode::Negative] {
            let q = theoretical_capacity(params, electrode);
            let lo = 0.99 * q_ref;
            let hi = 1.01 * q_ref;
            if q < lo || q > hi {
                let v = if q < lo { (lo - q) / q_ref } else { (q - hi) / q_ref };
                add(
                    &mut report,
                    v,
                    format!(
                        "(e) {:?} electrode capacity {q:.3} Ah outside [{lo:.3}, {hi:.3}] Ah",
                        electrode
                    ),
                );
            }
        }
    }
    report
}

/// Particle swarm hyperparameters. Inertia follows a linear schedule from
/// `inertia` down to `inertia_end` over the run, trading early exploration
/// for a contracting endgame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub inertia_end: f64,
    pub cognitive: f64,
    pub social: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            swarm_size: 24,
            iterations: 60,
            inertia: 0.9,
            inertia_end: 0.4,
            cognitive: 1.49445,
            social: 1.49445,
            seed: 0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm_size < 10 {
            return Err(Error::InvalidParameter(format!(
                "swarm size must be at least 10, got {}",
                self.swarm_size
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iteration count must be positive".into()));
        }
        Ok(())
    }
}

/// Result of a swarm run: best position, its cost, and the best-so-far
/// trace per iteration.
#[derive(Debug, Clone)]
pub struct PsoOutcome {
    pub best: Vec<f64>,
    pub cost: f64,
    pub progress: Vec<f64>,
}

/// Global-best PSO with bound clipping. Deterministic for a fixed seed and
/// fixed evaluation order; objective evaluations run in parallel.
pub fn pso_minimize<F>(
    objective: F,
    bounds: &[(f64, f64)],
    initial_guess: Option<&[f64]>,
    config: &PsoConfig,
) -> Result<PsoOutcome>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let dim = bounds.len();
    if dim == 0 {
        return Err(Error::InvalidParameter("empty search space".into()));
    }
    for (i, (lo, hi)) in bounds.iter().enumerate() {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "bounds for dimension {i} must be finite with lower < upper, got [{lo}, {hi}]"
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.swarm_size;

    let mut positions: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            bounds
                .iter()
                .map(|(lo, hi)| rng.random_range(*lo..=*hi))
                .collect()
        })
        .collect();
    if let Some(guess) = initial_guess {
        if guess.len() == dim {
            positions[0] = guess
                .iter()
                .zip(bounds)
                .map(|(g, (lo, hi))| g.clamp(*lo, *hi))
                .collect();
        }
    }
    let mut velocities = vec![vec![0.0; dim]; n];

    let mut costs: Vec<f64> = positions.par_iter().map(|p| objective(p)).collect();
    let mut pbest = positions.clone();
    let mut pbest_cost = costs.clone();
    let mut gbest_idx = argmin(&pbest_cost);
    let mut gbest = pbest[gbest_idx].clone();
    let mut gbest_cost = pbest_cost[gbest_idx];
    let mut progress = vec![gbest_cost];

    for iter in 0..config.iterations {
        let frac = if config.iterations > 1 {
            iter as f64 / (config.iterations - 1) as f64
        } else {
            1.0
        };
        let inertia = config.inertia + frac * (config.inertia_end - config.inertia);
        // draw all randomness serially so thread count cannot change results
        for i in 0..n {
            for d in 0..dim {
                let r1: f64 = rng.random_range(0.0..1.0);
                let r2: f64 = rng.random_range(0.0..1.0);
                velocities[i][d] = inertia * velocities[i][d]
                    + config.cognitive * r1 * (pbest[i][d] - positions[i][d])
                    + config.social * r2 * (gbest[d] - positions[i][d]);
                positions[i][d] =
                    (positions[i][d] + velocities[i][d]).clamp(bounds[d].0, bounds[d].1);
            }
        }
        costs = positions.par_iter().map(|p| objective(p)).collect();
        for i in 0..n {
            if costs[i] < pbest_cost[i] {
                pbest_cost[i] = costs[i];
                pbest[i] = positions[i].clone();
            }
        }
        gbest_idx = argmin(&pbest_cost);
        if pbest_cost[gbest_idx] < gbest_cost {
            gbest_cost = pbest_cost[gbest_idx];
            gbest = pbest[gbest_idx].clone();
        }
        progress.push(gbest_cost);
    }
    Ok(PsoOutcome {
        best: gbest,
        cost: gbest_cost,
        progress,
    })
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

/// C-rate stages of the sequential identification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StageLabel {
    C12,
    C10,
    C6,
    C3,
}

impl StageLabel {
    pub const ALL: [StageLabel; 4] = [StageLabel::C12, StageLabel::C10, StageLabel::C6, StageLabel::C3];

    pub fn as_str(&self) -> &'static str {
        match self {
            StageLabel::C12 => "C/12",
            StageLabel::C10 => "C/10",
            StageLabel::C6 => "C/6",
            StageLabel::C3 => "C/3",
        }
    }

    pub fn parse(text: &str) -> Result<StageLabel> {
        match text.trim() {
            "C/12" | "c/12" | "C12" | "c12" => Ok(StageLabel::C12),
            "C/10" | "c/10" | "C10" | "c10" => Ok(StageLabel::C10),
            "C/6" | "c/6" | "C6" | "c6" => Ok(StageLabel::C6),
            "C/3" | "c/3" | "C3" | "c3" => Ok(StageLabel::C3),
            other => Err(Error::Input(format!("unknown stage label '{other}'"))),
        }
    }

    /// Parameters freed at this stage, in a fixed order.
    pub fn free_parameters(&self) -> &'static [&'static str] {
        match self {
            StageLabel::C12 => &[
                "r_n",
                "r_p",
                "a_cell",
                "d_s_n",
                "d_s_p",
                "theta_n_100",
                "theta_n_0",
                "theta_p_100",
                "theta_p_0",
                "theta_p_alpha",
                "theta_p_beta",
                "r_l",
            ],
            StageLabel::C10 => &["d_s_n", "d_s_p", "r_l"],
            StageLabel::C6 | StageLabel::C3 => &["d_s_n", "d_s_p", "r_l", "k_n", "k_p"],
        }
    }

    /// The capacity-conservation constraint is active only at C/12.
    pub fn capacity_constraint_active(&self) -> bool {
        matches!(self, StageLabel::C12)
    }
}

pub fn get_parameter(params: &CellParameters, name: &str) -> f64 {
    match name {
        "r_n" => params.r_n,
        "r_p" => params.r_p,
        "a_cell" => params.a_cell,
        "d_s_n" => params.d_s_n,
        "d_s_p" => params.d_s_p,
        "theta_n_100" => params.theta_n_100,
        "theta_n_0" => params.theta_n_0,
        "theta_p_100" => params.theta_p_100,
        "theta_p_0" => params.theta_p_0,
        "theta_p_alpha" => params.theta_p_alpha,
        "theta_p_beta" => params.theta_p_beta,
        "r_l" => params.r_l,
        "k_n" => params.k_n,
        "k_p" => params.k_p,
        other => panic!("unknown parameter name {other}"),
    }
}

pub fn set_parameter(params: &mut CellParameters, name: &str, value: f64) {
    match name {
        "r_n" => params.r_n = value,
        "r_p" => params.r_p = value,
        "a_cell" => params.a_cell = value,
        "d_s_n" => params.d_s_n = value,
        "d_s_p" => params.d_s_p = value,
        "theta_n_100" => params.theta_n_100 = value,
        "theta_n_0" => params.theta_n_0 = value,
        "theta_p_100" => params.theta_p_100 = value,
        "theta_p_0" => params.theta_p_0 = value,
        "theta_p_alpha" => params.theta_p_alpha = value,
        "theta_p_beta" => params.theta_p_beta = value,
        "r_l" => params.r_l = value,
        "k_n" => params.k_n = value,
        "k_p" => params.k_p = value,
        other => panic!("unknown parameter name {other}"),
    }
}

fn bound_for(bounds: &ParameterBounds, name: &str) -> Interval {
    bounds
        .entries()
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, iv)| *iv)
        .expect("bounded parameter")
}

/// Everything one identification stage needs.
#[derive(Debug, Clone)]
pub struct StageResult {
    pub label: StageLabel,
    pub free: Vec<&'static str>,
    pub values: Vec<f64>,
    pub params: CellParameters,
    pub cost: CostBreakdown,
    pub feasibility: ConstraintReport,
    pub progress: Vec<f64>,
}

/// Score a parameter vector against every segment of a stage: simulate each
/// dataset's current profile and sum the cost terms plus constraint
/// penalties. Non-converged simulations receive the fictitious cost.
pub fn stage_objective(
    params: &CellParameters,
    segments: &[(Dataset, ReferenceSeries)],
    settings: &SolverSettings,
    ocp: &OcpTable,
    weights: &Weights,
    capacity_ref: Option<f64>,
    penalty_weight: f64,
) -> (f64, CostBreakdown, ConstraintReport, Vec<SimulationResult>) {
    let mut total = CostBreakdown::default();
    let mut sims = Vec::with_capacity(segments.len());
    for (ds, reference) in segments {
        let soc0 = match ds.mode() {
            Mode::Discharge => 1.0,
            Mode::Charge => 0.0,
        };
        let input = SimulationInput {
            current: ds.current_a.clone(),
            temperature: params.temperature,
            initial_soc: soc0,
            v_min: None,
            v_max: None,
            initial_mode: Some(ds.mode()),
        };
        match integrate(&input, params, settings, ocp) {
            Ok(sim) => {
                if sim.converged && sim.len() == reference.voltage_v.len() {
                    match cost_terms(&sim.voltage_v, &sim.soc_n, &sim.soc_p, reference, weights) {
                        Ok(c) => total.accumulate(&c),
                        Err(_) => {
                            total.j += FICTITIOUS_COST;
                        }
                    }
                } else {
                    total.j += FICTITIOUS_COST;
                }
                sims.push(sim);
            }
            Err(_) => {
                total.j += FICTITIOUS_COST;
            }
        }
    }
    let sim_refs: Vec<&SimulationResult> = sims.iter().collect();
    let report = evaluate_constraints(params, &sim_refs, capacity_ref, penalty_weight);
    // non-convergence is already charged through the fictitious cost; the
    // constraint penalty covers window/boundary/capacity violations
    let feasibility_penalty: f64 = report.penalty
        - report
            .violations
            .iter()
            .filter(|v| v.contains("did not converge"))
            .count() as f64
            * FICTITIOUS_COST;
    (total.j + feasibility_penalty, total, report, sims)
}

/// Run the staged identification over the datasets present, in rate order.
/// Later stages seed from the previous optimum and raise the transport and
/// kinetic lower bounds to the previously identified values.
#[allow(clippy::too_many_arguments)]
pub fn sequential_identification(
    datasets: &[(StageLabel, Vec<Dataset>)],
    base: &CellParameters,
    bounds: &ParameterBounds,
    settings: &SolverSettings,
    ocp: &OcpTable,
    weights: &Weights,
    pso: &PsoConfig,
    penalty_weight: f64,
) -> Result<Vec<StageResult>> {
    if !datasets.iter().any(|(l, _)| *l == StageLabel::C12) {
        return Err(Error::Input("a C/12 dataset is required".into()));
    }
    let mut requested: Vec<StageLabel> = datasets.iter().map(|(l, _)| *l).collect();
    requested.sort();
    requested.dedup();

    let mut current = base.clone();
    // the reference values of k are fixed at the low-rate stages
    current.k_n = 1e-11;
    current.k_p = 1e-11;

    let mut results: Vec<StageResult> = Vec::new();
    let mut raised: Vec<(&'static str, f64)> = Vec::new();

    for (stage_idx, label) in requested.iter().enumerate() {
        let segments_raw = &datasets
            .iter()
            .find(|(l, _)| l == label)
            .ok_or_else(|| Error::Input(format!("missing dataset for stage {}", label.as_str())))?
            .1;
        if segments_raw.is_empty() {
            return Err(Error::Input(format!(
                "stage {} has no data segments",
                label.as_str()
            )));
        }
        // resample every segment onto the solver sampling grid
        let mut segments = Vec::with_capacity(segments_raw.len());
        let mut capacity_ref = None;
        for ds in segments_raw {
            let resampled = ds.resample(settings.dt);
            let reference = ReferenceSeries::from_dataset(&resampled, settings.dt)?;
            if label.capacity_constraint_active()
                && resampled.mode() == Mode::Discharge
                && capacity_ref.is_none()
            {
                capacity_ref = Some(resampled.capacity_ah());
            }
            segments.push((resampled, reference));
        }
        if label.capacity_constraint_active() && capacity_ref.is_none() {
            // charge-only stage: use the first segment's throughput
            capacity_ref = Some(segments[0].0.capacity_ah());
        }

        let free = label.free_parameters().to_vec();
        let mut stage_bounds: Vec<(f64, f64)> = Vec::with_capacity(free.len());
        for name in &free {
            let mut iv = bound_for(bounds, name);
            for (raised_name, value) in &raised {
                if raised_name == name {
                    iv.lower = iv.lower.max(*value).min(iv.upper * 0.999999);
                }
            }
            stage_bounds.push((iv.lower, iv.upper));
        }
        let guess: Vec<f64> = free.iter().map(|n| get_parameter(&current, n)).collect();

        let base_params = current.clone();
        let free_ref = &free;
        let segments_ref = &segments;
        let objective = |x: &[f64]| -> f64 {
            let mut candidate = base_params.clone();
            for (name, value) in free_ref.iter().zip(x) {
                set_parameter(&mut candidate, name, *value);
            }
            if crate::params::validate(candidate.clone()).is_err() {
                return FICTITIOUS_COST;
            }
            stage_objective(
                &candidate,
                segments_ref,
                settings,
                ocp,
                weights,
                if label.capacity_constraint_active() {
                    capacity_ref
                } else {
                    None
                },
                penalty_weight,
            )
            .0
        };

        let mut stage_pso = pso.clone();
        stage_pso.seed = pso.seed.wrapping_add(stage_idx as u64);
        let outcome = pso_minimize(&objective, &stage_bounds, Some(&guess), &stage_pso)?;

        let mut best_params = base_params.clone();
        for (name, value) in free.iter().zip(&outcome.best) {
            set_parameter(&mut best_params, name, *value);
        }
        let (_, cost, feasibility, _) = stage_objective(
            &best_params,
            &segments,
            settings,
            ocp,
            weights,
            if label.capacity_constraint_active() {
                capacity_ref
            } else {
                None
            },
            penalty_weight,
        );

        // physical-consistency floors for the next stage
        for name in ["d_s_n", "d_s_p", "k_n", "k_p"] {
            if free.contains(&name) {
                let v = get_parameter(&best_params, name);
                if let Some(entry) = raised.iter_mut().find(|(n, _)| *n == name) {
                    entry.1 = v;
                } else {
                    raised.push((name, v));
                }
            }
        }

        current = best_params.clone();
        results.push(StageResult {
            label: *label,
            free,
            values: outcome.best,
            params: best_params,
            cost,
            feasibility,
            progress: outcome.progress,
        });
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cost_of_identical_series_is_zero() {
        let reference = ReferenceSeries {
            voltage_v: vec![3.3, 3.2, 3.1],
            soc: vec![1.0, 0.5, 0.0],
        };
        let c = cost_terms(
            &[3.3, 3.2, 3.1],
            &[1.0, 0.5, 0.0],
            &[1.0, 0.5, 0.0],
            &reference,
            &Weights::default(),
        )
        .unwrap();
        assert_eq!(c.j, 0.0);
    }

    #[test]
    fn constant_relative_voltage_error() {
        let v_exp = vec![3.3; 10];
        let v_sim: Vec<f64> = v_exp.iter().map(|v| v * (1.0 + 1e-3)).collect();
        let soc = vec![0.5; 10];
        let reference = ReferenceSeries {
            voltage_v: v_exp,
            soc: soc.clone(),
        };
        let c = cost_terms(&v_sim, &soc, &soc, &reference, &Weights::default()).unwrap();
        assert_relative_eq!(c.j_v, 1e-3, max_relative = 1e-9);
        assert_eq!(c.j_soc_n, 0.0);
    }

    #[test]
    fn constant_soc_offset() {
        let v = vec![3.3; 8];
        let soc_exp = vec![0.7; 8];
        let soc_sim = vec![0.71; 8];
        let reference = ReferenceSeries {
            voltage_v: v.clone(),
            soc: soc_exp,
        };
        let c = cost_terms(&v, &soc_sim, &soc_sim, &reference, &Weights::default()).unwrap();
        assert_relative_eq!(c.j_soc_n, 0.01, max_relative = 1e-12);
        assert_relative_eq!(c.j_soc_p, 0.01, max_relative = 1e-12);
    }

    #[test]
    fn length_mismatch_and_zero_voltage_error() {
        let reference = ReferenceSeries {
            voltage_v: vec![3.3, 3.2],
            soc: vec![1.0, 0.9],
        };
        assert!(cost_terms(&[3.3], &[1.0], &[1.0], &reference, &Weights::default()).is_err());
        let reference0 = ReferenceSeries {
            voltage_v: vec![3.3, 0.0],
            soc: vec![1.0, 0.9],
        };
        assert!(cost_terms(
            &[3.3, 3.2],
            &[1.0, 0.9],
            &[1.0, 0.9],
            &reference0,
            &Weights::default()
        )
        .is_err());
    }

    #[test]
    fn cost_invariant_under_pair_preserving_reindex() {
        // reversing both series together leaves every RMS term unchanged
        let v_exp = vec![3.4, 3.3, 3.25, 3.2];
        let v_sim = vec![3.39, 3.31, 3.24, 3.21];
        let soc_exp = vec![1.0, 0.7, 0.4, 0.1];
        let soc_sim = vec![0.99, 0.71, 0.39, 0.12];
        let fwd = cost_terms(
            &v_sim,
            &soc_sim,
            &soc_sim,
            &ReferenceSeries {
                voltage_v: v_exp.clone(),
                soc: soc_exp.clone(),
            },
            &Weights::default(),
        )
        .unwrap();
        let rev = cost_terms(
            &v_sim.iter().rev().copied().collect::<Vec<_>>(),
            &soc_sim.iter().rev().copied().collect::<Vec<_>>(),
            &soc_sim.iter().rev().copied().collect::<Vec<_>>(),
            &ReferenceSeries {
                voltage_v: v_exp.iter().rev().copied().collect(),
                soc: soc_exp.iter().rev().copied().collect(),
            },
            &Weights::default(),
        )
        .unwrap();
        assert_relative_eq!(fwd.j, rev.j, max_relative = 1e-12);
    }

    #[test]
    fn weight_scaling_scales_cost() {
        let v_exp = vec![3.4, 3.3, 3.25, 3.2];
        let v_sim = vec![3.39, 3.31, 3.24, 3.21];
        let soc = vec![1.0, 0.7, 0.4, 0.1];
        let reference = ReferenceSeries {
            voltage_v: v_exp,
            soc: soc.clone(),
        };
        let base = cost_terms(&v_sim, &soc, &soc, &reference, &Weights::default()).unwrap();
        let scaled = cost_terms(
            &v_sim,
            &soc,
            &soc,
            &reference,
            &Weights {
                w1: 3.0,
                w2: 3.0,
                w3: 3.0,
            },
        )
        .unwrap();
        assert_relative_eq!(scaled.j, 3.0 * base.j, max_relative = 1e-12);
    }

    #[test]
    fn table_column_is_feasible() {
        let params = CellParameters::illustrative_lfp();
        let q = theoretical_capacity(&params, Electrode::Positive);
        let report = evaluate_constraints(&params, &[], Some(q), 1e3);
        assert!(report.feasible, "violations: {:?}", report.violations);
        assert_eq!(report.penalty, 0.0);
    }

    #[test]
    fn window_violation_is_penalized() {
        let mut params = CellParameters::illustrative_lfp();
        params.theta_p_beta = 0.9; // above theta_p_0 = 0.8821
        let report = evaluate_constraints(&params, &[], None, 1e3);
        assert!(!report.feasible);
        assert!(report.penalty > 0.0);
        assert!(report.violations.iter().any(|v| v.contains("(b)")));
    }

    #[test]
    fn pso_sphere_benchmark() {
        let config = PsoConfig {
            swarm_size: 30,
            iterations: 200,
            seed: 1,
            ..Default::default()
        };
        let objective = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let bounds = [(-5.0, 5.0); 3];
        let outcome = pso_minimize(objective, &bounds, None, &config).unwrap();
        for v in &outcome.best {
            assert!(v.abs() < 1e-3, "best = {:?}", outcome.best);
        }
    }

    #[test]
    fn pso_rosenbrock_benchmark() {
        let config = PsoConfig {
            swarm_size: 40,
            iterations: 400,
            seed: 2,
            ..Default::default()
        };
        let objective = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            (1.0 - a) * (1.0 - a) + 100.0 * (b - a * a) * (b - a * a)
        };
        let bounds = [(-2.0, 2.0); 2];
        let outcome = pso_minimize(objective, &bounds, None, &config).unwrap();
        assert!(outcome.cost < 1e-4, "cost = {}", outcome.cost);
        assert!((outcome.best[0] - 1.0).abs() < 0.1);
    }

    #[test]
    fn pso_constant_objective_stays_in_bounds() {
        let config = PsoConfig {
            swarm_size: 12,
            iterations: 5,
            seed: 3,
            ..Default::default()
        };
        let outcome = pso_minimize(|_| 7.5, &[(1.0, 2.0), (-1.0, 0.0)], None, &config).unwrap();
        assert_eq!(outcome.cost, 7.5);
        assert!((1.0..=2.0).contains(&outcome.best[0]));
        assert!((-1.0..=0.0).contains(&outcome.best[1]));
    }

    #[test]
    fn pso_is_deterministic_per_seed() {
        let config = PsoConfig {
            swarm_size: 15,
            iterations: 30,
            seed: 9,
            ..Default::default()
        };
        let objective = |x: &[f64]| (x[0] - 0.3).powi(2) + (x[1] + 0.8).powi(2);
        let bounds = [(-2.0, 2.0); 2];
        let a = pso_minimize(objective, &bounds, None, &config).unwrap();
        let b = pso_minimize(objective, &bounds, None, &config).unwrap();
        assert_eq!(a.best, b.best);
        assert_eq!(a.progress, b.progress);
    }

    #[test]
    fn pso_progress_never_increases() {
        let config = PsoConfig {
            swarm_size: 12,
            iterations: 40,
            seed: 4,
            ..Default::default()
        };
        let objective = |x: &[f64]| x[0].cos() + x[1].sin() + x[0] * x[0] * 0.1;
        let outcome =
            pso_minimize(objective, &[(-4.0, 4.0), (-4.0, 4.0)], None, &config).unwrap();
        for w in outcome.progress.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn stage_definitions() {
        assert_eq!(StageLabel::C12.free_parameters().len(), 12);
        assert_eq!(StageLabel::C10.free_parameters(), &["d_s_n", "d_s_p", "r_l"]);
        assert_eq!(
            StageLabel::C6.free_parameters(),
            &["d_s_n", "d_s_p", "r_l", "k_n", "k_p"]
        );
        assert_eq!(StageLabel::C6.free_parameters(), StageLabel::C3.free_parameters());
        assert!(StageLabel::C12.capacity_constraint_active());
        assert!(!StageLabel::C10.capacity_constraint_active());
        assert_eq!(StageLabel::parse("c/10").unwrap(), StageLabel::C10);
        assert!(StageLabel::parse("C/7").is_err());
    }
}
