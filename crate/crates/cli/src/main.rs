//! Batch command line for the core-shell single particle model.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use espm_core::anode::OcpTable;
use espm_core::config::Config;
use espm_core::ident::{
    sequential_identification, PsoConfig, StageLabel, Weights,
};
use espm_core::io;
use espm_core::senstool::{
    parameter_sensitivity, select_best, sweep_step1, sweep_step2, tolerance_feasibility,
    tradeoff_selection, SweepGrid,
};
use espm_core::simulator::{integrate, SimulationInput};

#[derive(Parser)]
#[command(
    name = "espm",
    about = "Core-shell single particle model for LFP/graphite cells",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Cell/solver configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; created when missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for every random draw the command makes.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker thread cap for parallel work.
    #[arg(long)]
    jobs: Option<usize>,
    /// Override a config value: section.key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a current profile and write the result series.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Current profile CSV (time_s, current_A).
        #[arg(long)]
        profile: PathBuf,
    },
    /// Sequential parameter identification from datasets per C-rate.
    Identify {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset per stage: LABEL=PATH, e.g. C/12=data/c12.csv (repeatable;
        /// charge/discharge is inferred from the current sign).
        #[arg(long = "data", value_name = "LABEL=PATH", required = true)]
        data: Vec<String>,
    },
    /// Solver-setting sweep: step 1 over the full grid, step 2 over random
    /// parameter realizations at fixed dt and tolerance scaling.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Reference dataset CSV (time_s, current_A, voltage_V).
        #[arg(long)]
        data: PathBuf,
        /// Which sweep step to run.
        #[arg(long, default_value_t = 1)]
        step: u8,
        /// Realization count for step 2 (defaults to the config value).
        #[arg(long)]
        realizations: Option<usize>,
        /// Timing repeats per cell for step 1 (defaults to the config value).
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Check the tolerance pair against the admissible state magnitudes.
    Tolcheck {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Parameter sensitivity norms and correlation matrix.
    Senscorr {
        #[command(flatten)]
        common: CommonArgs,
        /// Reference dataset CSV providing the current profile.
        #[arg(long)]
        data: PathBuf,
        /// Relative perturbation for the central differences.
        #[arg(long, default_value_t = 0.01)]
        perturbation: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn parse_overrides(raw: &[String]) -> anyhow::Result<Vec<(String, String)>> {
    raw.iter()
        .map(|entry| {
            entry
                .split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .with_context(|| format!("--set '{entry}' is not of the form key=value"))
        })
        .collect()
}

fn setup(common: &CommonArgs) -> anyhow::Result<(Config, OcpTable)> {
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .ok();
    }
    let overrides = parse_overrides(&common.set)?;
    let config = Config::load(&common.config, &overrides)?;
    let ocp = match &config.ocp.anode_table {
        Some(path) => {
            let resolved = resolve_relative(&common.config, path);
            io::read_ocp_table(&resolved)
                .with_context(|| format!("anode OCP table {}", resolved.display()))?
        }
        None => OcpTable::graphite_placeholder(),
    };
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("cannot create output directory {}", common.out.display()))?;
    Ok((config, ocp))
}

/// Paths inside the config file resolve relative to the config location.
fn resolve_relative(config_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        config_path.parent().unwrap_or(Path::new(".")).join(p)
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Simulate { common, profile } => cmd_simulate(&common, &profile),
        Command::Identify { common, data } => cmd_identify(&common, &data),
        Command::Sweep {
            common,
            data,
            step,
            realizations,
            repeats,
        } => cmd_sweep(&common, &data, step, realizations, repeats),
        Command::Tolcheck { common } => cmd_tolcheck(&common),
        Command::Senscorr {
            common,
            data,
            perturbation,
        } => cmd_senscorr(&common, &data, perturbation),
    }
}

fn cmd_simulate(common: &CommonArgs, profile: &Path) -> anyhow::Result<ExitCode> {
    let (config, ocp) = setup(common)?;
    let params = config.cell_parameters()?;
    let settings = config.solver_settings()?;
    let (times, current) = io::read_profile(profile)?;

    // the profile must sit on the configured sampling grid
    let dt = settings.dt;
    for (k, t) in times.iter().enumerate() {
        let expected = times[0] + k as f64 * dt;
        if (t - expected).abs() > 1e-6 * dt {
            bail!(
                "{}: line {}: sample at t = {t} s is off the dt = {dt} s grid",
                profile.display(),
                k + 2
            );
        }
    }

    let input = SimulationInput {
        current,
        temperature: params.temperature,
        initial_soc: config.simulation.initial_soc,
        v_min: config.simulation.v_min,
        v_max: config.simulation.v_max,
        initial_mode: None,
    };
    let result = integrate(&input, &params, &settings, &ocp)?;

    io::write_results(&common.out.join("results.csv"), &result)?;
    io::write_events(&common.out.join("events.csv"), &result)?;

    let v_min = result.voltage_v.iter().cloned().fold(f64::INFINITY, f64::min);
    let v_max = result.voltage_v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let summary = format!(
        "samples: {}\nconverged: {}\nfinal_soc_n: {}\nfinal_soc_p: {}\nv_min: {}\nv_max: {}\nevents: {}\nsteps_accepted: {}\nt_sim_s: {:.3}\n",
        result.len(),
        result.converged,
        result.soc_n.last().copied().unwrap_or(f64::NAN),
        result.soc_p.last().copied().unwrap_or(f64::NAN),
        v_min,
        v_max,
        result.events.len(),
        result.stats.accepted,
        result.t_sim,
    );
    std::fs::write(common.out.join("summary.txt"), &summary)?;
    print!("{summary}");

    Ok(if result.converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_identify(common: &CommonArgs, data: &[String]) -> anyhow::Result<ExitCode> {
    let (config, ocp) = setup(common)?;
    let params = config.cell_parameters()?;
    let settings = config.solver_settings()?;
    let bounds = config.parameter_bounds()?;

    let mut datasets: Vec<(StageLabel, Vec<io::Dataset>)> = Vec::new();
    for entry in data {
        let (label_raw, path_raw) = entry
            .split_once('=')
            .with_context(|| format!("--data '{entry}' is not of the form LABEL=PATH"))?;
        let label = StageLabel::parse(label_raw)?;
        let ds = io::read_dataset(Path::new(path_raw))?;
        match datasets.iter_mut().find(|(l, _)| *l == label) {
            Some((_, v)) => v.push(ds),
            None => datasets.push((label, vec![ds])),
        }
    }

    let ident = &config.identify;
    let weights = Weights {
        w1: ident.w1,
        w2: ident.w2,
        w3: ident.w3,
    };
    let pso = PsoConfig {
        swarm_size: ident.swarm_size,
        iterations: ident.iterations,
        inertia: ident.inertia,
        inertia_end: ident.inertia_end,
        cognitive: ident.cognitive,
        social: ident.social,
        seed: common.seed,
    };
    let results = sequential_identification(
        &datasets,
        &params,
        &bounds,
        &settings,
        &ocp,
        &weights,
        &pso,
        ident.penalty_weight,
    )?;

    let mut report = String::new();
    let mut csv = String::from("stage,parameter,value\n");
    for r in &results {
        report.push_str(&format!("== stage {} ==\n", r.label.as_str()));
        report.push_str("free parameters:\n");
        for (name, value) in r.free.iter().zip(&r.values) {
            report.push_str(&format!("  {name} = {value:e}\n"));
            csv.push_str(&format!("{},{name},{value:e}\n", r.label.as_str()));
        }
        report.push_str(&format!(
            "cost: J = {:e} (J_V = {:e}, J_SOC_n = {:e}, J_SOC_p = {:e})\n",
            r.cost.j, r.cost.j_v, r.cost.j_soc_n, r.cost.j_soc_p
        ));
        report.push_str(&format!("feasible: {}\n", r.feasibility.feasible));
        for v in &r.feasibility.violations {
            report.push_str(&format!("  violation: {v}\n"));
        }
        report.push_str("swarm best-so-far trace:\n");
        for (i, j) in r.progress.iter().enumerate() {
            report.push_str(&format!("  iter {i}: {j:e}\n"));
        }
    }
    std::fs::write(common.out.join("identify_report.txt"), &report)?;
    std::fs::write(common.out.join("identify_parameters.csv"), &csv)?;
    println!("{report}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(
    common: &CommonArgs,
    data: &Path,
    step: u8,
    realizations: Option<usize>,
    repeats: Option<usize>,
) -> anyhow::Result<ExitCode> {
    let (config, ocp) = setup(common)?;
    let params = config.cell_parameters()?;
    let dataset = io::read_dataset(data)?;
    let weights = Weights {
        w1: config.identify.w1,
        w2: config.identify.w2,
        w3: config.identify.w3,
    };

    match step {
        1 => {
            let grid = SweepGrid {
                n_r: config.sweep.n_r.clone(),
                dt: config.sweep.dt.clone(),
                reltol: config.sweep.reltol.clone(),
                abstol_scale: config.sweep.abstol_scale.clone(),
            };
            let timing_repeats = repeats.unwrap_or(config.sweep.timing_repeats);
            let records = sweep_step1(&params, &grid, &dataset, &ocp, &weights, timing_repeats)?;
            let mut out = String::from("n_r,dt,reltol,abstol_scale,j,converged,t_sim_s\n");
            for r in &records {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    r.n_r, r.dt, r.reltol, r.abstol_scale, r.j, r.converged, r.t_sim
                ));
            }
            std::fs::write(common.out.join("sweep_records.csv"), &out)?;
            // best setting per (dt, scale) combination
            for &dt in &grid.dt {
                for &scale in &grid.abstol_scale {
                    match select_best(&records, dt, scale) {
                        Ok((n_r, reltol, j)) => println!(
                            "dt = {dt} s, abstol_scale = {scale}: best n_r = {n_r}, reltol = {reltol:e} (J = {j:e})"
                        ),
                        Err(e) => println!("dt = {dt} s, abstol_scale = {scale}: {e}"),
                    }
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        2 => {
            let grid = SweepGrid {
                n_r: config.sweep.n_r.clone(),
                dt: vec![50.0],
                reltol: config.sweep.reltol.clone(),
                abstol_scale: vec![0.001],
            };
            let bounds = config.parameter_bounds()?;
            let n = realizations.unwrap_or(config.sweep.realizations);
            let map = sweep_step2(
                &bounds,
                &params,
                n,
                &grid,
                &dataset,
                &ocp,
                &weights,
                common.seed,
            )?;
            let mut out = String::from("n_r,reltol,probability_pct,avg_t_sim_s\n");
            for (i_nr, &n_r) in map.n_r.iter().enumerate() {
                for (i_rt, &reltol) in map.reltol.iter().enumerate() {
                    let idx = map.index(i_nr, i_rt);
                    out.push_str(&format!(
                        "{n_r},{reltol},{},{}\n",
                        map.probability_pct[idx], map.avg_t_sim[idx]
                    ));
                }
            }
            std::fs::write(common.out.join("probability_map.csv"), &out)?;

            let by_reltol = map.cumulative_by_reltol();
            for (reltol, p) in map.reltol.iter().zip(&by_reltol) {
                println!("reltol = {reltol:e}: cumulative probability {p:.1}%");
            }
            // trade-off at the most probable tolerance
            let best_rt = map
                .reltol
                .iter()
                .zip(&by_reltol)
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(r, _)| *r)
                .unwrap();
            let curve = tradeoff_selection(&map, best_rt, 1.0)?;
            let mut tout = String::from("n_r,probability_pct,t_norm,score\n");
            for i in 0..curve.n_r.len() {
                tout.push_str(&format!(
                    "{},{},{},{}\n",
                    curve.n_r[i], curve.probability_pct[i], curve.t_norm[i], curve.score[i]
                ));
            }
            std::fs::write(common.out.join("tradeoff.csv"), &tout)?;
            println!(
                "recommended setting: n_r = {}, dt = 50 s, reltol = {best_rt:e}, abstol_scale = 0.001",
                curve.chosen_n_r
            );
            Ok(ExitCode::SUCCESS)
        }
        other => bail!("unknown sweep step {other}; use 1 or 2"),
    }
}

fn cmd_tolcheck(common: &CommonArgs) -> anyhow::Result<ExitCode> {
    let (config, _) = setup(common)?;
    let params = config.cell_parameters()?;
    let bounds = config.parameter_bounds()?;
    let settings = config.solver_settings()?;
    let report = tolerance_feasibility(&params, &bounds, settings.reltol, settings.abstol_scale);
    println!(
        "reltol = {:e}, abstol_scale = {} (abstol = {:e})",
        report.reltol,
        report.abstol_scale,
        report.reltol * report.abstol_scale
    );
    for c in &report.classes {
        println!(
            "{}: |y| reltol in [{:e}, {:e}] vs abstol {:e} -> {}",
            c.class,
            c.threshold_min,
            c.threshold_max,
            c.abstol,
            if c.pass { "pass" } else { "FAIL" }
        );
    }
    if report.reltol_flagged {
        println!("reltol exceeds the 1e-5 accuracy bound -> FAIL");
    }
    println!(
        "overall: {}",
        if report.all_pass() { "pass" } else { "FAIL" }
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_senscorr(common: &CommonArgs, data: &Path, perturbation: f64) -> anyhow::Result<ExitCode> {
    let (config, ocp) = setup(common)?;
    let params = config.cell_parameters()?;
    let settings = config.solver_settings()?;
    let dataset = io::read_dataset(data)?;
    let report = parameter_sensitivity(&params, &dataset, &settings, &ocp, perturbation)?;

    let mut norms = String::from("parameter,norm\n");
    for (name, norm) in report.names.iter().zip(&report.norms) {
        norms.push_str(&format!("{name},{norm}\n"));
        println!("{name}: sensitivity norm {norm:e}");
    }
    std::fs::write(common.out.join("sensitivity_norms.csv"), &norms)?;

    let mut corr = String::from("parameter");
    for name in &report.names {
        corr.push_str(&format!(",{name}"));
    }
    corr.push('\n');
    for (i, name) in report.names.iter().enumerate() {
        corr.push_str(name);
        for j in 0..report.names.len() {
            corr.push_str(&format!(",{}", report.correlation[(i, j)]));
        }
        corr.push('\n');
    }
    std::fs::write(common.out.join("correlation_matrix.csv"), &corr)?;

    for (i, j, rho) in &report.high_pairs {
        println!(
            "high correlation: {} vs {} ({rho:.3})",
            report.names[*i], report.names[*j]
        );
    }
    Ok(ExitCode::SUCCESS)
}

