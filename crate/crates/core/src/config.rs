//! TOML configuration schema and dotted-key overrides.
//!
//! Sections mirror the way the parameters enter the model: geometry,
//! stoichiometry, transport, kinetics, solver, simulation. Unknown keys are
//! rejected everywhere so typos cannot silently fall back to defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{validate, CellParameters, Interval, ParameterBounds};
use crate::simulator::SolverSettings;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    pub r_n: f64,
    pub r_p: f64,
    pub a_cell: f64,
    pub l_n: f64,
    pub l_s: f64,
    pub l_p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoichiometrySection {
    pub c_s_n_max: f64,
    pub c_s_p_max: f64,
    pub theta_n_100: f64,
    pub theta_n_0: f64,
    pub theta_p_100: f64,
    pub theta_p_0: f64,
    pub theta_p_alpha: f64,
    pub theta_p_beta: f64,
    pub nu_n: f64,
    pub nu_p: f64,
    pub nu_n_filler: f64,
    pub nu_p_filler: f64,
    pub eps_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransportSection {
    pub d_s_n: f64,
    pub d_s_p: f64,
    pub t_plus: f64,
    pub brugg: f64,
    pub c0: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticsSection {
    pub k_n: f64,
    pub k_p: f64,
    pub r_l: f64,
    pub temperature: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub n_r: usize,
    pub dt: f64,
    pub reltol: f64,
    pub abstol_scale: f64,
    pub n_x: [usize; 3],
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSettings::default();
        SolverSection {
            n_r: s.n_r,
            dt: s.dt,
            reltol: s.reltol,
            abstol_scale: s.abstol_scale,
            n_x: s.n_x,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OcpSection {
    /// Anode OCP table CSV; when absent the built-in placeholder is used.
    pub anode_table: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub initial_soc: f64,
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            initial_soc: 1.0,
            v_min: None,
            v_max: None,
        }
    }
}

/// Optional per-parameter [lower, upper] overrides of the default bounds.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct BoundsSection {
    pub r_n: Option<[f64; 2]>,
    pub r_p: Option<[f64; 2]>,
    pub a_cell: Option<[f64; 2]>,
    pub d_s_n: Option<[f64; 2]>,
    pub d_s_p: Option<[f64; 2]>,
    pub theta_n_100: Option<[f64; 2]>,
    pub theta_n_0: Option<[f64; 2]>,
    pub theta_p_100: Option<[f64; 2]>,
    pub theta_p_0: Option<[f64; 2]>,
    pub theta_p_alpha: Option<[f64; 2]>,
    pub theta_p_beta: Option<[f64; 2]>,
    pub r_l: Option<[f64; 2]>,
    pub k_n: Option<[f64; 2]>,
    pub k_p: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub n_r: Vec<usize>,
    pub dt: Vec<f64>,
    pub reltol: Vec<f64>,
    pub abstol_scale: Vec<f64>,
    /// Realization count for the probabilistic step.
    pub realizations: usize,
    /// Wall-clock repeats per cell for timing medians.
    pub timing_repeats: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            n_r: vec![5, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100],
            dt: vec![1.0, 10.0, 20.0, 30.0, 40.0, 50.0],
            reltol: vec![1e-9, 1e-8, 1e-7, 1e-6, 1e-5],
            abstol_scale: vec![0.001, 0.01, 0.1, 1.0],
            realizations: 600,
            timing_repeats: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IdentifySection {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub inertia_end: f64,
    pub cognitive: f64,
    pub social: f64,
    pub penalty_weight: f64,
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for IdentifySection {
    fn default() -> Self {
        IdentifySection {
            swarm_size: 24,
            iterations: 60,
            inertia: 0.9,
            inertia_end: 0.4,
            cognitive: 1.49445,
            social: 1.49445,
            penalty_weight: 1e3,
            w1: 1.0,
            w2: 1.0,
            w3: 1.0,
        }
    }
}

/// Whole configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub geometry: GeometrySection,
    pub stoichiometry: StoichiometrySection,
    pub transport: TransportSection,
    pub kinetics: KineticsSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub ocp: OcpSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub bounds: BoundsSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub identify: IdentifySection,
}

impl Config {
    /// Parse from TOML text, applying dotted-key overrides (`a.b = value`)
    /// before deserialization; overrides always win over file values.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Config> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::Config(format!("TOML parse error: {e}")))?;
        let mut value = toml::Value::Table(table);
        for (key, raw) in overrides {
            apply_override(&mut value, key, raw)?;
        }
        let config: Config = value
            .try_into()
            .map_err(|e| Error::Config(format!("config error: {e}")))?;
        Ok(config)
    }

    /// Serialize back to TOML text.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("serialize error: {e}")))
    }

    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text, overrides)
    }

    /// Assemble and validate the cell parameters. Electrode porosities are
    /// derived from the volume fractions.
    pub fn cell_parameters(&self) -> Result<CellParameters> {
        let g = &self.geometry;
        let s = &self.stoichiometry;
        let t = &self.transport;
        let k = &self.kinetics;
        let eps_n = crate::params::porosity(s.nu_n, s.nu_n_filler)?;
        let eps_p = crate::params::porosity(s.nu_p, s.nu_p_filler)?;
        validate(CellParameters {
            r_n: g.r_n,
            r_p: g.r_p,
            a_cell: g.a_cell,
            l_n: g.l_n,
            l_s: g.l_s,
            l_p: g.l_p,
            c_s_n_max: s.c_s_n_max,
            c_s_p_max: s.c_s_p_max,
            d_s_n: t.d_s_n,
            d_s_p: t.d_s_p,
            theta_n_100: s.theta_n_100,
            theta_n_0: s.theta_n_0,
            theta_p_100: s.theta_p_100,
            theta_p_0: s.theta_p_0,
            theta_p_alpha: s.theta_p_alpha,
            theta_p_beta: s.theta_p_beta,
            nu_n: s.nu_n,
            nu_p: s.nu_p,
            nu_n_filler: s.nu_n_filler,
            nu_p_filler: s.nu_p_filler,
            eps_n,
            eps_s: s.eps_s,
            eps_p,
            t_plus: t.t_plus,
            brugg: t.brugg,
            k_n: k.k_n,
            k_p: k.k_p,
            r_l: k.r_l,
            temperature: k.temperature,
            c0: t.c0,
        })
    }

    pub fn solver_settings(&self) -> Result<SolverSettings> {
        let s = SolverSettings {
            n_r: self.solver.n_r,
            dt: self.solver.dt,
            reltol: self.solver.reltol,
            abstol_scale: self.solver.abstol_scale,
            n_x: self.solver.n_x,
        };
        s.validate()?;
        Ok(s)
    }

    /// Identification bounds: defaults overridden per-parameter.
    pub fn parameter_bounds(&self) -> Result<ParameterBounds> {
        let mut b = ParameterBounds::default();
        let o = &self.bounds;
        let set = |iv: &mut Interval, ov: &Option<[f64; 2]>| {
            if let Some([lo, hi]) = ov {
                *iv = Interval::new(*lo, *hi);
            }
        };
        set(&mut b.r_n, &o.r_n);
        set(&mut b.r_p, &o.r_p);
        set(&mut b.a_cell, &o.a_cell);
        set(&mut b.d_s_n, &o.d_s_n);
        set(&mut b.d_s_p, &o.d_s_p);
        set(&mut b.theta_n_100, &o.theta_n_100);
        set(&mut b.theta_n_0, &o.theta_n_0);
        set(&mut b.theta_p_100, &o.theta_p_100);
        set(&mut b.theta_p_0, &o.theta_p_0);
        set(&mut b.theta_p_alpha, &o.theta_p_alpha);
        set(&mut b.theta_p_beta, &o.theta_p_beta);
        set(&mut b.r_l, &o.r_l);
        set(&mut b.k_n, &o.k_n);
        set(&mut b.k_p, &o.k_p);
        b.validate()?;
        Ok(b)
    }

    /// Example configuration matching [`CellParameters::illustrative_lfp`].
    pub fn example() -> Config {
        let p = CellParameters::illustrative_lfp();
        Config {
            geometry: GeometrySection {
                r_n: p.r_n,
                r_p: p.r_p,
                a_cell: p.a_cell,
                l_n: p.l_n,
                l_s: p.l_s,
                l_p: p.l_p,
            },
            stoichiometry: StoichiometrySection {
                c_s_n_max: p.c_s_n_max,
                c_s_p_max: p.c_s_p_max,
                theta_n_100: p.theta_n_100,
                theta_n_0: p.theta_n_0,
                theta_p_100: p.theta_p_100,
                theta_p_0: p.theta_p_0,
                theta_p_alpha: p.theta_p_alpha,
                theta_p_beta: p.theta_p_beta,
                nu_n: p.nu_n,
                nu_p: p.nu_p,
                nu_n_filler: p.nu_n_filler,
                nu_p_filler: p.nu_p_filler,
                eps_s: p.eps_s,
            },
            transport: TransportSection {
                d_s_n: p.d_s_n,
                d_s_p: p.d_s_p,
                t_plus: p.t_plus,
                brugg: p.brugg,
                c0: p.c0,
            },
            kinetics: KineticsSection {
                k_n: p.k_n,
                k_p: p.k_p,
                r_l: p.r_l,
                temperature: p.temperature,
            },
            solver: SolverSection::default(),
            ocp: OcpSection::default(),
            simulation: SimulationSection::default(),
            bounds: BoundsSection::default(),
            sweep: SweepSection::default(),
            identify: IdentifySection::default(),
        }
    }
}

fn apply_override(value: &mut toml::Value, dotted: &str, raw: &str) -> Result<()> {
    let parts: Vec<&str> = dotted.split('.').collect();
    if parts.len() < 2 {
        return Err(Error::Config(format!(
            "override key '{dotted}' must be section.key"
        )));
    }
    let mut cursor = value;
    for part in &parts[..parts.len() - 1] {
        if cursor.get(part).is_none() {
            cursor
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("'{dotted}' does not address a table")))?
                .insert(part.to_string(), toml::Value::Table(Default::default()));
        }
        cursor = cursor.get_mut(part).unwrap();
    }
    let leaf = parts[parts.len() - 1];
    // parse the raw value as TOML so numbers, arrays, and strings all work
    let parsed: toml::Value = match raw.parse::<toml::Value>() {
        Ok(v) => v,
        Err(_) => toml::Value::String(raw.to_string()),
    };
    cursor
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("'{dotted}' does not address a table")))?
        .insert(leaf.to_string(), parsed);
    Ok(())
}
