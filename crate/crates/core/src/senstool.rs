//! Solver-setting sensitivity tooling: tolerance feasibility arithmetic,
//! the two-step sweep over solver settings with its probabilistic optimum
//! selection, the probability/runtime trade-off, and parameter sensitivity
//! with correlation analysis.

use nalgebra::DMatrix;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::anode::OcpTable;
use crate::cathode::Mode;
use crate::error::{Error, Result};
use crate::ident::{cost_terms, ReferenceSeries, Weights};

pub use crate::ident::FICTITIOUS_COST;
use crate::io::Dataset;
use crate::params::{sample_with_rng, CellParameters, ParameterBounds};
use crate::simulator::{integrate, SimulationInput, SolverSettings};

/// Grid of solver settings to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n_r: Vec<usize>,
    pub dt: Vec<f64>,
    pub reltol: Vec<f64>,
    pub abstol_scale: Vec<f64>,
}

impl Default for SweepGrid {
    /// The full first-step grid (1320 combinations).
    fn default() -> Self {
        SweepGrid {
            n_r: vec![5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100],
            dt: vec![1.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            reltol: vec![1e-9, 1e-8, 1e-7, 1e-6, 1e-5],
            abstol_scale: vec![0.001, 0.01, 0.1, 1.0],
        }
    }
}

impl SweepGrid {
    /// Second-step grid: sampling time and tolerance scaling fixed from
    /// step one.
    pub fn step2_default() -> Self {
        SweepGrid {
            dt: vec![50.0],
            abstol_scale: vec![0.001],
            ..Default::default()
        }
    }

    pub fn cells(&self) -> Vec<(usize, f64, f64, f64)> {
        let mut out = Vec::new();
        for &n_r in &self.n_r {
            for &dt in &self.dt {
                for &reltol in &self.reltol {
                    for &scale in &self.abstol_scale {
                        out.push((n_r, dt, reltol, scale));
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_r.is_empty() || self.dt.is_empty() || self.reltol.is_empty() || self.abstol_scale.is_empty() {
            return Err(Error::Input("sweep grid has an empty axis".into()));
        }
        Ok(())
    }
}

/// One sweep cell outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub n_r: usize,
    pub dt: f64,
    pub reltol: f64,
    pub abstol_scale: f64,
    pub j: f64,
    pub converged: bool,
    pub t_sim: f64,
}

/// Feasibility of the tolerance pair for one state class.
#[derive(Debug, Clone)]
pub struct ClassFeasibility {
    pub class: &'static str,
    /// |y| reltol at the smallest admissible magnitude.
    pub threshold_min: f64,
    /// |y| reltol at the largest admissible magnitude.
    pub threshold_max: f64,
    pub abstol: f64,
    pub pass: bool,
}

/// Tolerance feasibility report across the four state classes.
#[derive(Debug, Clone)]
pub struct FeasibilityReport {
    pub classes: Vec<ClassFeasibility>,
    pub reltol: f64,
    pub abstol_scale: f64,
    /// Set when reltol exceeds the 1e-5 accuracy bound.
    pub reltol_flagged: bool,
}

impl FeasibilityReport {
    pub fn all_pass(&self) -> bool {
        self.classes.iter().all(|c| c.pass) && !self.reltol_flagged
    }
}

/// Check |y| reltol > abstol at the admissible extremes of every state
/// class. The moving boundary is compared on the picometer scale.
pub fn tolerance_feasibility(
    params: &CellParameters,
    bounds: &ParameterBounds,
    reltol: f64,
    abstol_scale: f64,
) -> FeasibilityReport {
    let abstol = reltol * abstol_scale;
    let mut classes = Vec::with_capacity(4);
    let mut push = |class: &'static str, y_min: f64, y_max: f64, abstol: f64| {
        let threshold_min = y_min.abs() * reltol;
        let threshold_max = y_max.abs() * reltol;
        classes.push(ClassFeasibility {
            class,
            threshold_min,
            threshold_max,
            abstol,
            pass: threshold_min > abstol && threshold_max > abstol,
        });
    };
    push(
        "cathode solid concentration",
        bounds.theta_p_100.lower * params.c_s_p_max,
        bounds.theta_p_0.upper * params.c_s_p_max,
        abstol,
    );
    push(
        "anode solid concentration",
        bounds.theta_n_0.lower * params.c_s_n_max,
        bounds.theta_n_100.upper * params.c_s_n_max,
        abstol,
    );
    push("electrolyte concentration", params.c0, params.c0, abstol);
    // picometer scale for the moving boundary
    push(
        "moving boundary",
        bounds.r_p.lower * 1e12,
        bounds.r_p.upper * 1e12,
        abstol,
    );
    FeasibilityReport {
        classes,
        reltol,
        abstol_scale,
        reltol_flagged: reltol > 1e-5,
    }
}

/// Simulate the dataset's current profile at one solver setting and score
/// it; failures of any kind become the fictitious cost.
pub fn evaluate_setting(
    params: &CellParameters,
    setting: &SolverSettings,
    dataset: &Dataset,
    ocp: &OcpTable,
    weights: &Weights,
) -> SweepRecord {
    let record = |j: f64, converged: bool, t_sim: f64| SweepRecord {
        n_r: setting.n_r,
        dt: setting.dt,
        reltol: setting.reltol,
        abstol_scale: setting.abstol_scale,
        j,
        converged,
        t_sim,
    };
    let resampled = dataset.resample(setting.dt);
    let reference = match ReferenceSeries::from_dataset(&resampled, setting.dt) {
        Ok(r) => r,
        Err(_) => return record(FICTITIOUS_COST, false, 0.0),
    };
    let soc0 = match resampled.mode() {
        Mode::Discharge => 1.0,
        Mode::Charge => 0.0,
    };
    let input = SimulationInput {
        current: resampled.current_a.clone(),
        temperature: params.temperature,
        initial_soc: soc0,
        v_min: None,
        v_max: None,
        initial_mode: Some(resampled.mode()),
    };
    match integrate(&input, params, setting, ocp) {
        Ok(sim) => {
            if sim.converged && sim.len() == reference.voltage_v.len() {
                match cost_terms(&sim.voltage_v, &sim.soc_n, &sim.soc_p, &reference, weights) {
                    Ok(c) => record(c.j, true, sim.t_sim),
                    Err(_) => record(FICTITIOUS_COST, false, sim.t_sim),
                }
            } else {
                record(FICTITIOUS_COST, false, sim.t_sim)
            }
        }
        Err(_) => record(FICTITIOUS_COST, false, 0.0),
    }
}

/// Step 1: sweep every grid cell for one parameter vector. Timing per cell
/// is the median over `timing_repeats` identical runs.
pub fn sweep_step1(
    theta1: &CellParameters,
    grid: &SweepGrid,
    dataset: &Dataset,
    ocp: &OcpTable,
    weights: &Weights,
    timing_repeats: usize,
) -> Result<Vec<SweepRecord>> {
    grid.validate()?;
    let repeats = timing_repeats.max(1);
    let cells = grid.cells();
    let records: Vec<SweepRecord> = cells
        .par_iter()
        .map(|&(n_r, dt, reltol, abstol_scale)| {
            let setting = SolverSettings {
                n_r,
                dt,
                reltol,
                abstol_scale,
                ..Default::default()
            };
            let mut timings = Vec::with_capacity(repeats);
            let mut record = evaluate_setting(theta1, &setting, dataset, ocp, weights);
            timings.push(record.t_sim);
            for _ in 1..repeats {
                let again = evaluate_setting(theta1, &setting, dataset, ocp, weights);
                timings.push(again.t_sim);
            }
            timings.sort_by(|a, b| a.partial_cmp(b).unwrap());
            record.t_sim = timings[timings.len() / 2];
            record
        })
        .collect();
    Ok(records)
}

/// Pick the minimum-cost setting among records at a fixed (dt, scale);
/// ties prefer cheaper settings: smaller n_r, then larger reltol.
pub fn select_best(
    records: &[SweepRecord],
    dt: f64,
    abstol_scale: f64,
) -> Result<(usize, f64, f64)> {
    let mut best: Option<&SweepRecord> = None;
    for r in records
        .iter()
        .filter(|r| r.dt == dt && r.abstol_scale == abstol_scale && r.converged)
    {
        best = match best {
            None => Some(r),
            Some(b) => {
                let better = r.j < b.j
                    || (r.j == b.j && (r.n_r < b.n_r || (r.n_r == b.n_r && r.reltol > b.reltol)));
                if better {
                    Some(r)
                } else {
                    Some(b)
                }
            }
        };
    }
    match best {
        Some(r) => Ok((r.n_r, r.reltol, r.j)),
        None => Err(Error::Analysis(
            "no converging setting at the requested (dt, abstol_scale)".into(),
        )),
    }
}

/// Optimality frequency of each (n_r, reltol) cell plus its average
/// converged runtime.
#[derive(Debug, Clone)]
pub struct ProbabilityMap {
    pub n_r: Vec<usize>,
    pub reltol: Vec<f64>,
    /// Row-major [n_r x reltol] optimality percentage.
    pub probability_pct: Vec<f64>,
    /// Row-major average simulation time over converged runs [s].
    pub avg_t_sim: Vec<f64>,
    pub realizations: usize,
}

impl ProbabilityMap {
    pub fn index(&self, i_nr: usize, i_rt: usize) -> usize {
        i_nr * self.reltol.len() + i_rt
    }

    pub fn total_probability(&self) -> f64 {
        self.probability_pct.iter().sum()
    }

    /// Cumulative probability per reltol, summed over n_r.
    pub fn cumulative_by_reltol(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.reltol.len()];
        for i_nr in 0..self.n_r.len() {
            for i_rt in 0..self.reltol.len() {
                out[i_rt] += self.probability_pct[self.index(i_nr, i_rt)];
            }
        }
        out
    }
}

/// Step 2: repeat the sweep over random parameter realizations at fixed
/// (dt, scale) and count how often each (n_r, reltol) pair is optimal.
#[allow(clippy::too_many_arguments)]
pub fn sweep_step2(
    bounds: &ParameterBounds,
    base: &CellParameters,
    realizations: usize,
    grid: &SweepGrid,
    dataset: &Dataset,
    ocp: &OcpTable,
    weights: &Weights,
    seed: u64,
) -> Result<ProbabilityMap> {
    grid.validate()?;
    if grid.dt.len() != 1 || grid.abstol_scale.len() != 1 {
        return Err(Error::Input(
            "the probabilistic step requires dt and abstol_scale fixed to single values".into(),
        ));
    }
    if realizations == 0 {
        return Err(Error::Input("realization count must be positive".into()));
    }
    let dt = grid.dt[0];
    let scale = grid.abstol_scale[0];

    // deterministic realization list, independent of thread count
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut thetas = Vec::with_capacity(realizations);
    for _ in 0..realizations {
        thetas.push(sample_with_rng(bounds, base, &mut rng)?);
    }

    struct RealizationOutcome {
        best: Option<(usize, usize)>,
        timings: Vec<(usize, f64, bool)>, // flat cell index, t_sim, converged
    }

    let outcomes: Vec<RealizationOutcome> = thetas
        .par_iter()
        .map(|theta| {
            let mut best: Option<(usize, usize, f64, usize, f64)> = None;
            let mut timings = Vec::with_capacity(grid.n_r.len() * grid.reltol.len());
            for (i_nr, &n_r) in grid.n_r.iter().enumerate() {
                for (i_rt, &reltol) in grid.reltol.iter().enumerate() {
                    let setting = SolverSettings {
                        n_r,
                        dt,
                        reltol,
                        abstol_scale: scale,
                        ..Default::default()
                    };
                    let record = evaluate_setting(theta, &setting, dataset, ocp, weights);
                    let flat = i_nr * grid.reltol.len() + i_rt;
                    timings.push((flat, record.t_sim, record.converged));
                    if record.converged {
                        let better = match &best {
                            None => true,
                            Some((_, _, bj, bnr, brt)) => {
                                record.j < *bj
                                    || (record.j == *bj
                                        && (n_r < *bnr || (n_r == *bnr && reltol > *brt)))
                            }
                        };
                        if better {
                            best = Some((i_nr, i_rt, record.j, n_r, reltol));
                        }
                    }
                }
            }
            RealizationOutcome {
                best: best.map(|(i_nr, i_rt, _, _, _)| (i_nr, i_rt)),
                timings,
            }
        })
        .collect();

    let cells = grid.n_r.len() * grid.reltol.len();
    let mut counts = vec![0usize; cells];
    let mut time_sum = vec![0.0; cells];
    let mut time_n = vec![0usize; cells];
    let mut effective = 0usize;
    for outcome in &outcomes {
        if let Some((i_nr, i_rt)) = outcome.best {
            counts[i_nr * grid.reltol.len() + i_rt] += 1;
            effective += 1;
        }
        for &(flat, t, converged) in &outcome.timings {
            if converged {
                time_sum[flat] += t;
                time_n[flat] += 1;
            }
        }
    }
    if effective == 0 {
        return Err(Error::Analysis(
            "no realization produced a converging setting".into(),
        ));
    }
    // frequencies over realizations that produced an optimum, so the map
    // always totals one hundred percent
    let probability_pct: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / effective as f64 * 100.0)
        .collect();
    let avg_t_sim: Vec<f64> = time_sum
        .iter()
        .zip(&time_n)
        .map(|(s, n)| if *n > 0 { s / *n as f64 } else { f64::NAN })
        .collect();
    Ok(ProbabilityMap {
        n_r: grid.n_r.clone(),
        reltol: grid.reltol.clone(),
        probability_pct,
        avg_t_sim,
        realizations,
    })
}

/// Probability/runtime trade-off curve at one relative tolerance.
#[derive(Debug, Clone)]
pub struct TradeoffCurve {
    pub n_r: Vec<usize>,
    pub probability_pct: Vec<f64>,
    pub t_norm: Vec<f64>,
    pub score: Vec<f64>,
    pub chosen_n_r: usize,
}

/// Choose the radial resolution maximizing probability minus
/// lambda-weighted normalized runtime at the given tolerance.
pub fn tradeoff_selection(
    map: &ProbabilityMap,
    reltol: f64,
    lambda: f64,
) -> Result<TradeoffCurve> {
    let i_rt = map
        .reltol
        .iter()
        .position(|&r| r == reltol)
        .ok_or_else(|| Error::Input(format!("reltol {reltol:e} is not on the map")))?;
    let mut probability = Vec::with_capacity(map.n_r.len());
    let mut times = Vec::with_capacity(map.n_r.len());
    for i_nr in 0..map.n_r.len() {
        probability.push(map.probability_pct[map.index(i_nr, i_rt)]);
        times.push(map.avg_t_sim[map.index(i_nr, i_rt)]);
    }
    let t_max = times
        .iter()
        .copied()
        .filter(|t| t.is_finite())
        .fold(0.0f64, f64::max);
    let t_norm: Vec<f64> = times
        .iter()
        .map(|t| if t_max > 0.0 && t.is_finite() { t / t_max } else { 1.0 })
        .collect();
    // probability is normalized to [0, 1] so the weighting is on a common scale
    let score: Vec<f64> = probability
        .iter()
        .zip(&t_norm)
        .map(|(p, t)| p / 100.0 - lambda * t)
        .collect();
    let mut best = 0;
    for i in 0..score.len() {
        if score[i] > score[best] {
            best = i;
        }
    }
    Ok(TradeoffCurve {
        chosen_n_r: map.n_r[best],
        n_r: map.n_r.clone(),
        probability_pct: probability,
        t_norm,
        score,
    })
}

/// Per-parameter sensitivity norms and the pairwise correlation matrix of
/// the sensitivity columns.
#[derive(Debug, Clone)]
pub struct SensitivityReport {
    pub names: Vec<&'static str>,
    pub norms: Vec<f64>,
    pub correlation: DMatrix<f64>,
    /// Pairs with |correlation| above 0.8.
    pub high_pairs: Vec<(usize, usize, f64)>,
}

/// Central-difference helper: (f(+h) - f(-h)) / (2h), elementwise.
pub fn central_difference(plus: &[f64], minus: &[f64], step: f64) -> Vec<f64> {
    plus.iter()
        .zip(minus)
        .map(|(p, m)| (p - m) / (2.0 * step))
        .collect()
}

/// Sensitivity of the normalized voltage response to relative perturbations
/// of each identifiable parameter, plus the correlation analysis of the
/// sensitivity columns.
pub fn parameter_sensitivity(
    nominal: &CellParameters,
    dataset: &Dataset,
    settings: &SolverSettings,
    ocp: &OcpTable,
    relative_step: f64,
) -> Result<SensitivityReport> {
    let names: Vec<&'static str> = crate::ident::StageLabel::C12.free_parameters().to_vec();
    let resampled = dataset.resample(settings.dt);
    let soc0 = match resampled.mode() {
        Mode::Discharge => 1.0,
        Mode::Charge => 0.0,
    };
    let run = |params: &CellParameters| -> Result<Vec<f64>> {
        let input = SimulationInput {
            current: resampled.current_a.clone(),
            temperature: params.temperature,
            initial_soc: soc0,
            v_min: None,
            v_max: None,
            initial_mode: Some(resampled.mode()),
        };
        let sim = integrate(&input, params, settings, ocp)?;
        if !sim.converged {
            return Err(Error::Analysis(
                "perturbed simulation did not converge".into(),
            ));
        }
        Ok(sim.voltage_v)
    };
    let v_nominal = run(nominal)?;
    let n_samples = v_nominal.len();

    let columns: Vec<Vec<f64>> = names
        .par_iter()
        .map(|name| -> Result<Vec<f64>> {
            let base = crate::ident::get_parameter(nominal, name);
            let delta = relative_step * base.abs();
            let mut plus = nominal.clone();
            crate::ident::set_parameter(&mut plus, name, base + delta);
            let mut minus = nominal.clone();
            crate::ident::set_parameter(&mut minus, name, base - delta);
            let v_plus = run(&plus)?;
            let v_minus = run(&minus)?;
            // normalized response: relative voltage deviation per unit
            // relative parameter change
            let col: Vec<f64> = (0..n_samples)
                .map(|j| (v_plus[j] - v_minus[j]) / (2.0 * relative_step) / v_nominal[j])
                .collect();
            Ok(col)
        })
        .collect::<Result<Vec<_>>>()?;

    let norms: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let p = names.len();
    let mut correlation = DMatrix::zeros(p, p);
    let mut high_pairs = Vec::new();
    for i in 0..p {
        for j in 0..p {
            let rho = pearson(&columns[i], &columns[j]);
            correlation[(i, j)] = rho;
            if i < j && rho.abs() > 0.8 {
                high_pairs.push((i, j, rho));
            }
        }
    }
    Ok(SensitivityReport {
        names,
        norms,
        correlation,
        high_pairs,
    })
}

/// Pearson correlation of two equal-length series; zero-variance columns
/// correlate as zero except with themselves.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma) * (x - ma);
        vb += (y - mb) * (y - mb);
    }
    if va == 0.0 && vb == 0.0 && std::ptr::eq(a, b) {
        return 1.0;
    }
    if va == 0.0 || vb == 0.0 {
        if std::ptr::eq(a, b) || a == b {
            return 1.0;
        }
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn feasibility_appendix_arithmetic() {
        let params = CellParameters::illustrative_lfp();
        let bounds = ParameterBounds::default();
        // reltol 1e-5, scale 0.001: the electrolyte threshold at c0 = 1200
        // mol/m^3 is 0.012, far above abstol = 1e-8
        let mut p1200 = params.clone();
        p1200.c0 = 1200.0;
        let report = tolerance_feasibility(&p1200, &bounds, 1e-5, 0.001);
        let electro = report
            .classes
            .iter()
            .find(|c| c.class.contains("electrolyte"))
            .unwrap();
        assert_relative_eq!(electro.threshold_min, 0.012, max_relative = 1e-12);
        assert_eq!(electro.abstol, 1e-8);
        assert!(electro.pass);
        assert!(report.all_pass());

        // the tightest scaling still passes for the electrolyte
        let report = tolerance_feasibility(&p1200, &bounds, 1e-5, 1.0);
        assert!(report
            .classes
            .iter()
            .find(|c| c.class.contains("electrolyte"))
            .unwrap()
            .pass);

        // reltol above 1e-5 is flagged
        let report = tolerance_feasibility(&p1200, &bounds, 1e-4, 0.001);
        assert!(report.reltol_flagged);
        assert!(!report.all_pass());
    }

    #[test]
    fn feasibility_is_monotone_in_abstol() {
        let params = CellParameters::illustrative_lfp();
        let bounds = ParameterBounds::default();
        let mut last_passes = 0;
        for scale in [1.0, 0.1, 0.01, 0.001] {
            let report = tolerance_feasibility(&params, &bounds, 1e-5, scale);
            let passes = report.classes.iter().filter(|c| c.pass).count();
            assert!(passes >= last_passes, "lowering abstol flipped a pass to fail");
            last_passes = passes;
        }
    }

    #[test]
    fn select_best_prefers_cheaper_on_ties() {
        let mk = |n_r: usize, reltol: f64, j: f64, converged: bool| SweepRecord {
            n_r,
            dt: 50.0,
            reltol,
            abstol_scale: 0.001,
            j,
            converged,
            t_sim: 1.0,
        };
        let records = vec![
            mk(70, 1e-6, 0.5, true),
            mk(40, 1e-5, 0.5, true),
            mk(40, 1e-6, 0.5, true),
            mk(100, 1e-9, 0.1, false),
        ];
        let (n_r, reltol, j) = select_best(&records, 50.0, 0.001).unwrap();
        assert_eq!((n_r, reltol, j), (40, 1e-5, 0.5));

        let only_failed = vec![mk(70, 1e-6, FICTITIOUS_COST, false)];
        assert!(select_best(&only_failed, 50.0, 0.001).is_err());

        let single = vec![mk(20, 1e-7, 2.0, true)];
        assert_eq!(select_best(&single, 50.0, 0.001).unwrap(), (20, 1e-7, 2.0));
    }

    #[test]
    fn tradeoff_prefers_small_n_r_when_probability_is_flat() {
        let map = ProbabilityMap {
            n_r: vec![10, 40, 70],
            reltol: vec![1e-5],
            probability_pct: vec![33.0, 33.0, 34.0],
            avg_t_sim: vec![1.0, 2.0, 4.0],
            realizations: 100,
        };
        let curve = tradeoff_selection(&map, 1e-5, 1.0).unwrap();
        assert_eq!(curve.chosen_n_r, 10);
        // with lambda = 0 the pure probability argmax wins
        let curve0 = tradeoff_selection(&map, 1e-5, 0.0).unwrap();
        assert_eq!(curve0.chosen_n_r, 70);
    }

    #[test]
    fn pearson_properties() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        let b: Vec<f64> = a.iter().map(|x| 2.0 * x + 1.0).collect();
        assert_relative_eq!(pearson(&a, &b), 1.0, max_relative = 1e-12);
        let c: Vec<f64> = a.iter().map(|x| -x).collect();
        assert_relative_eq!(pearson(&a, &c), -1.0, max_relative = 1e-12);
        assert_relative_eq!(pearson(&a, &a), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn central_difference_of_linear_map_is_exact() {
        let h = 0.01;
        let x0 = vec![1.0, 2.0, -0.5];
        let slope = [3.0, -1.5, 0.25];
        let plus: Vec<f64> = x0.iter().zip(&slope).map(|(x, s)| x + s * h).collect();
        let minus: Vec<f64> = x0.iter().zip(&slope).map(|(x, s)| x - s * h).collect();
        let d = central_difference(&plus, &minus, h);
        for (got, want) in d.iter().zip(&slope) {
            assert!((got - want).abs() < 1e-10);
        }
    }
}
