//! Whole-cell simulation: state packing, the coupled right-hand side,
//! event handling (phase transitions, core depletion, voltage cutoffs),
//! tolerance-contracted integration, and voltage reconstruction.

pub mod integrator;

use std::cell::RefCell;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::anode::{self, AnodeState, OcpTable};
use crate::cathode::{
    self, CathodeState, Mode, PhaseConstants, Regime, EXIT_THRESHOLD_FRACTION,
};
use crate::constants::{FARADAY, GAS_CONSTANT, SECONDS_PER_HOUR};
use crate::electrolyte::{
    self, ElectrolyteGrid, ElectrolyteState, REGION_NEGATIVE, REGION_POSITIVE,
};
use crate::error::{Error, Result};
use crate::params::{validate, CellParameters, Electrode};

pub use integrator::{ErrorModel, StepFail, StepOutcome, StepStats, TrBdf2};

/// Solver setting tuple: radial points (shared by both particles), input
/// sampling time, relative tolerance, and absolute-tolerance scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Radial discretization points for both particles.
    pub n_r: usize,
    /// Input current sampling time [s]; integrator steps never cross holds.
    pub dt: f64,
    /// Relative tolerance.
    pub reltol: f64,
    /// Absolute tolerance as a fraction of reltol (mol/m^3 for
    /// concentrations, pm for the moving boundary).
    pub abstol_scale: f64,
    /// Electrolyte cells per region; the default 10 per region is kept out
    /// of the sweepable setting tuple.
    #[serde(default = "default_n_x")]
    pub n_x: [usize; 3],
}

fn default_n_x() -> [usize; 3] {
    [10, 10, 10]
}

impl Default for SolverSettings {
    /// The recommended setting {70, 50 s, 1e-5, 0.001}.
    fn default() -> Self {
        SolverSettings {
            n_r: 70,
            dt: 50.0,
            reltol: 1e-5,
            abstol_scale: 0.001,
            n_x: default_n_x(),
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_r < 3 {
            return Err(Error::InvalidParameter(format!(
                "n_r must be at least 3, got {}",
                self.n_r
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(1e-9..=1e-3).contains(&self.reltol) {
            return Err(Error::InvalidParameter(format!(
                "reltol must lie in [1e-9, 1e-3], got {}",
                self.reltol
            )));
        }
        if !(self.abstol_scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "abstol_scale must be positive, got {}",
                self.abstol_scale
            )));
        }
        Ok(())
    }
}

/// Zero-order-held current profile and its initial/termination conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationInput {
    /// Current at each sample time [A]; sample k holds over
    /// [k dt, (k+1) dt). The last sample closes the horizon.
    pub current: Vec<f64>,
    /// Cell temperature [K], constant over the run.
    pub temperature: f64,
    /// Initial state of charge in [0, 1].
    pub initial_soc: f64,
    /// Optional lower voltage cutoff [V].
    pub v_min: Option<f64>,
    /// Optional upper voltage cutoff [V].
    pub v_max: Option<f64>,
    /// Operating-mode hint used before the first nonzero current sample.
    pub initial_mode: Option<Mode>,
}

impl SimulationInput {
    /// Constant-current profile of the given duration.
    pub fn constant_current(current: f64, duration: f64, dt: f64, initial_soc: f64) -> Self {
        let n = (duration / dt).round() as usize;
        SimulationInput {
            current: vec![current; n + 1],
            temperature: 298.15,
            initial_soc,
            v_min: None,
            v_max: None,
            initial_mode: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.current.len() < 2 {
            return Err(Error::Input(format!(
                "current profile needs at least 2 samples, got {}",
                self.current.len()
            )));
        }
        if self.current.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("current profile contains non-finite samples".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_soc) {
            return Err(Error::Input(format!(
                "initial SOC must lie in [0,1], got {}",
                self.initial_soc
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Input("temperature must be positive".into()));
        }
        Ok(())
    }

    fn initial_mode(&self) -> Mode {
        if let Some(m) = self.initial_mode {
            return m;
        }
        for &i in &self.current {
            if let Some(m) = Mode::from_current(i) {
                return m;
            }
        }
        Mode::Discharge
    }
}

/// Unpacked view of the full cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub electrolyte: ElectrolyteState,
    pub anode: AnodeState,
    pub cathode: CathodeState,
}

/// Index layout of the packed ODE vector:
/// [electrolyte cells | anode radial nodes | r_p | cathode shell nodes].
#[derive(Debug, Clone, Copy)]
pub struct Layout {
    pub n_e: usize,
    pub n_solid: usize, // N_r - 1 per particle
}

impl Layout {
    pub fn total(&self) -> usize {
        self.n_e + 2 * self.n_solid + 1
    }

    pub fn rp_index(&self) -> usize {
        self.n_e + self.n_solid
    }

    pub fn pack(&self, state: &CellState) -> DVector<f64> {
        let mut y = DVector::zeros(self.total());
        y.rows_mut(0, self.n_e).copy_from(&state.electrolyte.c);
        y.rows_mut(self.n_e, self.n_solid)
            .copy_from(&state.anode.c_s_n);
        y[self.rp_index()] = state.cathode.r_p;
        y.rows_mut(self.rp_index() + 1, self.n_solid)
            .copy_from(&state.cathode.c_shell);
        y
    }

    /// Rebuild a full state, taking the discrete tags (regime, mode,
    /// boundary pin) from the template.
    pub fn unpack(&self, y: &DVector<f64>, template: &CathodeState) -> CellState {
        CellState {
            electrolyte: ElectrolyteState {
                c: y.rows(0, self.n_e).into_owned(),
            },
            anode: AnodeState {
                c_s_n: y.rows(self.n_e, self.n_solid).into_owned(),
            },
            cathode: CathodeState {
                regime: template.regime,
                r_p: y[self.rp_index()],
                c_shell: y.rows(self.rp_index() + 1, self.n_solid).into_owned(),
                mode: template.mode,
                boundary_conc: template.boundary_conc,
            },
        }
    }
}

/// Simulation event kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    PhaseEntry,
    PhaseExit,
    CutoffMin,
    CutoffMax,
    ModeConflict,
    Clamp,
    NonConvergence,
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::PhaseEntry => "phase_entry",
            EventKind::PhaseExit => "phase_exit",
            EventKind::CutoffMin => "cutoff_min",
            EventKind::CutoffMax => "cutoff_max",
            EventKind::ModeConflict => "mode_conflict",
            EventKind::Clamp => "clamp",
            EventKind::NonConvergence => "non_convergence",
        }
    }
}

/// One logged event.
#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub time_s: f64,
    pub kind: EventKind,
    pub detail: String,
    /// Relative bulk-stoichiometry jump across a regime transition.
    pub theta_jump_rel: Option<f64>,
}

/// Per-sample output series plus the event log and run diagnostics.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub time_s: Vec<f64>,
    pub current_a: Vec<f64>,
    pub voltage_v: Vec<f64>,
    pub soc_n: Vec<f64>,
    pub soc_p: Vec<f64>,
    pub rp_over_rp: Vec<f64>,
    pub theta_p_surf: Vec<f64>,
    pub theta_n_surf: Vec<f64>,
    /// Electrolyte concentration snapshot at each sample.
    pub electrolyte: Vec<Vec<f64>>,
    pub events: Vec<SimEvent>,
    pub converged: bool,
    /// Wall-clock simulation time [s].
    pub t_sim: f64,
    pub stats: StepStats,
}

impl SimulationResult {
    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }
}

/// Butler-Volmer overpotential of one electrode [V]. The surface
/// concentration is clamped a hair inside (0, c_max) before entering the
/// exchange-current square root.
pub fn overpotential(
    current: f64,
    params: &CellParameters,
    electrode: Electrode,
    c_e_avg: f64,
    c_surf: f64,
    temperature: f64,
) -> Result<f64> {
    let (k, l_i, c_max) = match electrode {
        Electrode::Negative => (params.k_n, params.l_n, params.c_s_n_max),
        Electrode::Positive => (params.k_p, params.l_p, params.c_s_p_max),
    };
    if c_e_avg <= 0.0 {
        return Err(Error::Domain(format!(
            "electrolyte average concentration must be positive, got {c_e_avg}"
        )));
    }
    let a_i = params.specific_area(electrode);
    let c_clamped = c_surf.clamp(1e-6 * c_max, (1.0 - 1e-6) * c_max);
    let i0 = k * FARADAY * (c_e_avg * c_clamped * (c_max - c_clamped)).sqrt();
    if !(i0 > 0.0) {
        return Err(Error::Domain("zero exchange current".into()));
    }
    let arg = current / (2.0 * params.a_cell * a_i * l_i * i0);
    Ok(GAS_CONSTANT * temperature / (0.5 * FARADAY) * arg.asinh())
}

/// Voltage chain pieces, reported alongside the terminal voltage.
#[derive(Debug, Clone, Copy)]
pub struct VoltageBreakdown {
    pub u_p: f64,
    pub u_n: f64,
    pub eta_p: f64,
    pub eta_n: f64,
    pub delta_phi_e: f64,
    pub r_el: f64,
    pub v: f64,
    pub theta_p_surf: f64,
    pub theta_n_surf: f64,
    /// True when a surface stoichiometry had to be clamped into the valid
    /// OCP range (only possible when clamping was requested).
    pub clamped: bool,
}

fn voltage_breakdown(
    cell: &CellState,
    params: &CellParameters,
    grid: &ElectrolyteGrid,
    ocp_n: &OcpTable,
    current: f64,
    clamp_ocp: bool,
) -> Result<VoltageBreakdown> {
    let temperature = params.temperature;
    let c_e = &cell.electrolyte;
    let n_cells = grid.total();
    let c_first = c_e.c[0];
    let c_last = c_e.c[n_cells - 1];

    let theta_n_surf = cell.anode.c_s_n[cell.anode.c_s_n.len() - 1] / params.c_s_n_max;
    let theta_p_surf = match cell.cathode.regime {
        Regime::OnePhase => cell.cathode.c_shell[cell.cathode.c_shell.len() - 1] / params.c_s_p_max,
        Regime::TwoPhase => {
            cathode::surface_ghost_value(&cell.cathode, params, current)? / params.c_s_p_max
        }
    };

    let mut clamped = false;
    let theta_p_ocp = if clamp_ocp {
        let t = theta_p_surf.clamp(0.0, 1.0);
        if t != theta_p_surf {
            clamped = true;
        }
        t
    } else {
        theta_p_surf
    };
    let theta_n_ocp = if clamp_ocp {
        let t = theta_n_surf.clamp(ocp_n.theta_min(), ocp_n.theta_max());
        if t != theta_n_surf {
            clamped = true;
        }
        t
    } else {
        theta_n_surf
    };

    let u_p = cathode::ocp_p(theta_p_ocp, cell.cathode.mode)?;
    let u_n = anode::ocp_lookup(ocp_n, theta_n_ocp)?;

    let c_e_neg = grid.region_mean(&c_e.c, REGION_NEGATIVE);
    let c_e_pos = grid.region_mean(&c_e.c, REGION_POSITIVE);
    let eta_n = overpotential(
        -current,
        params,
        Electrode::Negative,
        c_e_neg,
        theta_n_surf * params.c_s_n_max,
        temperature,
    )?;
    let eta_p = overpotential(
        current,
        params,
        Electrode::Positive,
        c_e_pos,
        theta_p_surf * params.c_s_p_max,
        temperature,
    )?;

    let v_factor = electrolyte::thermodynamic_factor(grid.domain_mean(&c_e.c), temperature);
    let delta_phi_e =
        electrolyte::diffusion_overpotential(v_factor, temperature, c_first, c_last)?;
    let r_el = electrolyte::electrolyte_resistance(c_e, grid, params)?;

    let v = (u_p + eta_p) - (u_n + eta_n) + delta_phi_e - current * (params.r_l + r_el);
    Ok(VoltageBreakdown {
        u_p,
        u_n,
        eta_p,
        eta_n,
        delta_phi_e,
        r_el,
        v,
        theta_p_surf,
        theta_n_surf,
        clamped,
    })
}

/// Terminal voltage of the cell at the given state and current. OCP range
/// errors propagate.
pub fn cell_voltage(
    cell: &CellState,
    params: &CellParameters,
    grid: &ElectrolyteGrid,
    ocp_n: &OcpTable,
    current: f64,
) -> Result<f64> {
    Ok(voltage_breakdown(cell, params, grid, ocp_n, current, false)?.v)
}

/// SOC reference series by integrating current over the rated capacity.
/// Discharge current (positive) decreases SOC.
pub fn coulomb_counting_soc(current: &[f64], dt: f64, capacity_ah: f64, soc0: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(current.len());
    let mut soc = soc0;
    out.push(soc);
    for &i in current.iter().take(current.len().saturating_sub(1)) {
        soc -= i * dt / (SECONDS_PER_HOUR * capacity_ah);
        out.push(soc);
    }
    out
}

/// Interior model shared by the rhs closure and the event/observable code.
pub struct CellModel {
    pub params: CellParameters,
    pub grid: ElectrolyteGrid,
    pub phase: PhaseConstants,
    pub settings: SolverSettings,
    pub layout: Layout,
    anode_sys: anode::AnodeSystem,
    cathode_one: cathode::OnePhaseSystem,
}

/// Discrete (non-ODE) part of the cathode state during integration.
#[derive(Debug, Clone, Copy, PartialEq)]
struct DiscreteTags {
    regime: Regime,
    mode: Mode,
    boundary_conc: f64,
}

impl DiscreteTags {
    fn template(&self, n_solid: usize) -> CathodeState {
        CathodeState {
            regime: self.regime,
            r_p: 0.0,
            c_shell: DVector::zeros(n_solid),
            mode: self.mode,
            boundary_conc: self.boundary_conc,
        }
    }
}

impl CellModel {
    pub fn new(params: CellParameters, settings: SolverSettings) -> Result<Self> {
        let params = validate(params)?;
        settings.validate()?;
        let grid = ElectrolyteGrid::new(&params, settings.n_x)?;
        let anode_sys = anode::assemble_anode_system(&params, settings.n_r)?;
        let cathode_one = cathode::assemble_one_phase_system(&params, settings.n_r)?;
        let layout = Layout {
            n_e: grid.total(),
            n_solid: settings.n_r - 1,
        };
        let phase = PhaseConstants::new(&params);
        Ok(CellModel {
            params,
            grid,
            phase,
            settings,
            layout,
            anode_sys,
            cathode_one,
        })
    }

    /// Uniform-profile state at the given SOC (one-phase cathode).
    pub fn initial_state(&self, initial_soc: f64, mode: Mode) -> CellState {
        let p = &self.params;
        let theta_n = p.theta_n_0 + initial_soc * (p.theta_n_100 - p.theta_n_0);
        let theta_p = p.theta_p_0 - initial_soc * (p.theta_p_0 - p.theta_p_100);
        let n_r = self.settings.n_r;
        CellState {
            electrolyte: ElectrolyteState::uniform(&self.grid, p.c0),
            anode: AnodeState::uniform(n_r, theta_n * p.c_s_n_max),
            cathode: CathodeState::one_phase_uniform(n_r, theta_p * p.c_s_p_max, mode),
        }
    }

    /// Per-component absolute tolerances: reltol x scale in mol/m^3 for all
    /// concentration states, and the same figure read in picometers for the
    /// moving boundary (hence a 1e-12 m factor).
    pub fn error_model(&self) -> ErrorModel {
        let n = self.layout.total();
        let conc = self.settings.reltol * self.settings.abstol_scale;
        let mut abstol = DVector::from_element(n, conc);
        abstol[self.layout.rp_index()] = conc * 1e-12;
        ErrorModel {
            reltol: self.settings.reltol,
            abstol,
        }
    }

    /// Typical scales for finite-difference perturbations.
    fn typical(&self) -> DVector<f64> {
        let n = self.layout.total();
        let mut typ = DVector::from_element(n, 1.0); // mol/m^3
        typ[self.layout.rp_index()] = 1e-12; // m
        typ
    }

    /// Full right-hand side at the given packed state.
    fn rhs(&self, y: &DVector<f64>, tags: &DiscreteTags, current: f64) -> Result<DVector<f64>> {
        let lay = &self.layout;
        let mut dy = DVector::zeros(lay.total());

        // electrolyte block
        let c_e = ElectrolyteState {
            c: y.rows(0, lay.n_e).into_owned(),
        };
        let source_scale = (1.0 - self.params.t_plus) / (self.params.a_cell * FARADAY);
        let dc_e = electrolyte::apply_electrolyte_system(
            &c_e,
            &self.grid,
            &self.params,
            source_scale * current,
        )?;
        dy.rows_mut(0, lay.n_e).copy_from(&dc_e);

        // anode block (precomputed constant system)
        let c_n = y.rows(lay.n_e, lay.n_solid);
        let dc_n = &self.anode_sys.a * c_n + &self.anode_sys.b * current;
        dy.rows_mut(lay.n_e, lay.n_solid).copy_from(&dc_n);

        // cathode block
        match tags.regime {
            Regime::OnePhase => {
                let c_p = y.rows(lay.rp_index() + 1, lay.n_solid);
                let dc_p = &self.cathode_one.a * c_p + &self.cathode_one.b * current;
                dy.rows_mut(lay.rp_index() + 1, lay.n_solid).copy_from(&dc_p);
                dy[lay.rp_index()] = 0.0;
            }
            Regime::TwoPhase => {
                let template = tags.template(lay.n_solid);
                let cath = CathodeState {
                    r_p: y[lay.rp_index()],
                    c_shell: y.rows(lay.rp_index() + 1, lay.n_solid).into_owned(),
                    ..template
                };
                let dx = cathode::apply_two_phase(&cath, &self.params, current, self.settings.n_r)?;
                dy.rows_mut(lay.rp_index(), lay.n_solid + 1).copy_from(&dx);
            }
        }
        Ok(dy)
    }

    /// Structured Jacobian: the electrolyte block by finite differences of
    /// its own evaluation (the transport coefficients depend on every local
    /// concentration), the anode block exactly, and the two-phase cathode
    /// block as the assembled operator with its r_p and first-node columns
    /// corrected by finite differences (the coefficients depend on the
    /// state only through those two entries).
    fn jacobian(
        &self,
        y: &DVector<f64>,
        tags: &DiscreteTags,
        current: f64,
    ) -> Result<nalgebra::DMatrix<f64>> {
        let lay = &self.layout;
        let n = lay.total();
        let mut jac = nalgebra::DMatrix::zeros(n, n);
        let sqrt_eps = f64::EPSILON.sqrt();

        // electrolyte block by finite differences
        let source_scale = (1.0 - self.params.t_plus) / (self.params.a_cell * FARADAY);
        let scaled = source_scale * current;
        let mut c_e = ElectrolyteState {
            c: y.rows(0, lay.n_e).into_owned(),
        };
        let f0_e =
            electrolyte::apply_electrolyte_system(&c_e, &self.grid, &self.params, scaled)?;
        for j in 0..lay.n_e {
            let base = c_e.c[j];
            let delta = sqrt_eps * base.abs().max(1.0);
            c_e.c[j] = base + delta;
            let f1 = electrolyte::apply_electrolyte_system(&c_e, &self.grid, &self.params, scaled)?;
            c_e.c[j] = base;
            for i in 0..lay.n_e {
                jac[(i, j)] = (f1[i] - f0_e[i]) / delta;
            }
        }

        // anode block exactly
        jac.view_mut((lay.n_e, lay.n_e), (lay.n_solid, lay.n_solid))
            .copy_from(&self.anode_sys.a);

        // cathode block
        let rp = lay.rp_index();
        match tags.regime {
            Regime::OnePhase => {
                jac.view_mut((rp + 1, rp + 1), (lay.n_solid, lay.n_solid))
                    .copy_from(&self.cathode_one.a);
            }
            Regime::TwoPhase => {
                let template = tags.template(lay.n_solid);
                let mut cath = CathodeState {
                    r_p: y[rp],
                    c_shell: y.rows(rp + 1, lay.n_solid).into_owned(),
                    ..template
                };
                let sys = cathode::assemble_two_phase_system(
                    &cath,
                    &self.params,
                    current,
                    self.settings.n_r,
                )?;
                jac.view_mut((rp, rp), (lay.n_solid + 1, lay.n_solid + 1))
                    .copy_from(&sys.m);
                let f0_c =
                    cathode::apply_two_phase(&cath, &self.params, current, self.settings.n_r)?;
                // coefficient feedback enters only through r_p and c_1
                let delta_rp = sqrt_eps * cath.r_p.abs().max(1e-12);
                cath.r_p += delta_rp;
                let f_rp =
                    cathode::apply_two_phase(&cath, &self.params, current, self.settings.n_r)?;
                cath.r_p -= delta_rp;
                let delta_c1 = sqrt_eps * cath.c_shell[0].abs().max(1.0);
                cath.c_shell[0] += delta_c1;
                let f_c1 =
                    cathode::apply_two_phase(&cath, &self.params, current, self.settings.n_r)?;
                cath.c_shell[0] -= delta_c1;
                for i in 0..=lay.n_solid {
                    jac[(rp + i, rp)] = (f_rp[i] - f0_c[i]) / delta_rp;
                    jac[(rp + i, rp + 1)] = (f_c1[i] - f0_c[i]) / delta_c1;
                }
            }
        }
        Ok(jac)
    }
}

/// Tolerance-test helper mirroring the integrator acceptance rule: true iff
/// every component of `e` passes max(|y| reltol, abstol).
pub fn error_norm_accepts(
    e: &DVector<f64>,
    y: &DVector<f64>,
    model: &CellModel,
) -> bool {
    model.error_model().norm(e, y) <= 1.0
}

struct SeriesRecorder {
    result: SimulationResult,
    r_total: f64,
}

impl SeriesRecorder {
    fn new(r_total: f64) -> Self {
        SeriesRecorder {
            result: SimulationResult {
                time_s: Vec::new(),
                current_a: Vec::new(),
                voltage_v: Vec::new(),
                soc_n: Vec::new(),
                soc_p: Vec::new(),
                rp_over_rp: Vec::new(),
                theta_p_surf: Vec::new(),
                theta_n_surf: Vec::new(),
                electrolyte: Vec::new(),
                events: Vec::new(),
                converged: true,
                t_sim: 0.0,
                stats: StepStats::default(),
            },
            r_total,
        }
    }

    fn push(
        &mut self,
        t: f64,
        current: f64,
        cell: &CellState,
        vb: &VoltageBreakdown,
        params: &CellParameters,
    ) -> Result<()> {
        let theta_n_bulk = anode::bulk_stoichiometry(&cell.anode, params);
        let theta_p_bulk = cathode::bulk_stoichiometry_cathode(&cell.cathode, params);
        let r = &mut self.result;
        r.time_s.push(t);
        r.current_a.push(current);
        r.voltage_v.push(vb.v);
        r.soc_n.push(anode::soc_n(theta_n_bulk, params)?);
        r.soc_p.push(cathode::soc_p(theta_p_bulk, params)?);
        r.rp_over_rp.push(cell.cathode.r_p / self.r_total);
        r.theta_p_surf.push(vb.theta_p_surf);
        r.theta_n_surf.push(vb.theta_n_surf);
        r.electrolyte.push(cell.electrolyte.c.iter().copied().collect());
        Ok(())
    }

    fn event(&mut self, t: f64, kind: EventKind, detail: impl Into<String>) {
        self.result.events.push(SimEvent {
            time_s: t,
            kind,
            detail: detail.into(),
            theta_jump_rel: None,
        });
    }

    fn transition_event(
        &mut self,
        t: f64,
        kind: EventKind,
        detail: impl Into<String>,
        theta_before: f64,
        theta_after: f64,
    ) {
        self.result.events.push(SimEvent {
            time_s: t,
            kind,
            detail: detail.into(),
            theta_jump_rel: Some(((theta_after - theta_before) / theta_before).abs()),
        });
    }
}

/// Integrate the cell over the input profile. Non-convergence is reported
/// through `converged = false` in the result, not as an error; `Err` is
/// reserved for invalid configuration or inputs.
pub fn integrate(
    input: &SimulationInput,
    params: &CellParameters,
    settings: &SolverSettings,
    ocp_n: &OcpTable,
) -> Result<SimulationResult> {
    input.validate()?;
    let mut params = params.clone();
    params.temperature = input.temperature;
    let model = CellModel::new(params, settings.clone())?;
    let started = Instant::now();

    let mode0 = input.initial_mode();
    let cell0 = model.initial_state(input.initial_soc, mode0);
    let lay = model.layout;
    let y0 = lay.pack(&cell0);

    let tags = RefCell::new(DiscreteTags {
        regime: cell0.cathode.regime,
        mode: cell0.cathode.mode,
        boundary_conc: cell0.cathode.boundary_conc,
    });
    let current_now = std::cell::Cell::new(input.current[0]);

    let n_intervals = input.current.len() - 1;
    let dt = settings.dt;
    let budget = 60 * n_intervals + 6_000;

    let mut recorder = SeriesRecorder::new(model.params.r_p);

    // record the initial sample
    {
        let tags0 = tags.borrow();
        let template = tags0.template(lay.n_solid);
        let cell = lay.unpack(&y0, &template);
        match voltage_breakdown(&cell, &model.params, &model.grid, ocp_n, input.current[0], true) {
            Ok(vb) => {
                if vb.clamped {
                    recorder.event(0.0, EventKind::Clamp, "surface stoichiometry clamped for OCP");
                }
                recorder.push(0.0, input.current[0], &cell, &vb, &model.params)?;
            }
            Err(e) => return Err(e),
        }
    }

    let rhs = |_t: f64, y: &DVector<f64>| -> Result<DVector<f64>> {
        model.rhs(y, &tags.borrow(), current_now.get())
    };
    let jac = |_t: f64, y: &DVector<f64>, _f: &DVector<f64>| {
        model.jacobian(y, &tags.borrow(), current_now.get())
    };
    // The stepper runs on a segment-local clock (rebased at every hold
    // boundary and event) so post-transition microsteps keep full floating
    // point resolution late in long runs.
    let mut stepper = TrBdf2::new(
        rhs,
        model.error_model(),
        model.typical(),
        0.0,
        y0,
        dt,
        budget,
    )
    .with_jacobian(Box::new(jac));
    let mut t_base;

    let mut clamp_logged = false;
    let mut theta_p_prev = cathode::bulk_stoichiometry_cathode(&cell0.cathode, &model.params);
    let mut v_prev: Option<f64> = None;

    'intervals: for j in 0..n_intervals {
        let current = input.current[j];
        current_now.set(current);
        let t_end = (j + 1) as f64 * dt;

        // refresh latches at the hold boundary
        {
            let mut tg = tags.borrow_mut();
            match tg.regime {
                Regime::OnePhase => {
                    if let Some(m) = Mode::from_current(current) {
                        tg.mode = m;
                    }
                }
                Regime::TwoPhase => {
                    if let Some(m) = Mode::from_current(current) {
                        if m != tg.mode {
                            recorder.event(
                                j as f64 * dt,
                                EventKind::ModeConflict,
                                "current sign reversed inside the two-phase window; \
                                 mode latch retained",
                            );
                        }
                    }
                    tg.boundary_conc =
                        cathode::boundary_concentration(current, &model.phase, tg.boundary_conc);
                }
            }
        }
        stepper.invalidate_derivative();
        stepper.rebase_time();
        t_base = j as f64 * dt;

        while t_base + stepper.t < t_end - 1e-9 * dt {
            let outcome = stepper.advance(t_end - t_base);
            let (t_prev, y_prev) = match outcome {
                StepOutcome::Accepted { t_prev, y_prev } => (t_prev, y_prev),
                StepOutcome::Failed(fail) => {
                    recorder.event(t_base + stepper.t, EventKind::NonConvergence, fail.describe());
                    recorder.result.converged = false;
                    break 'intervals;
                }
            };

            let tg = *tags.borrow();
            let template = tg.template(lay.n_solid);
            let cell_new = lay.unpack(&stepper.y, &template);

            match tg.regime {
                Regime::OnePhase => {
                    let theta_now =
                        cathode::bulk_stoichiometry_cathode(&cell_new.cathode, &model.params);
                    if let Some(frac) = cathode::detect_phase_entry(
                        theta_p_prev,
                        theta_now,
                        tg.mode,
                        &model.phase,
                    ) {
                        let t_event = t_base + t_prev + frac * (stepper.t - t_prev);
                        let y_event = &y_prev + (&stepper.y - &y_prev) * frac;
                        let cell_event = lay.unpack(&y_event, &template);
                        let two = cathode::enter_two_phase(
                            &cell_event.cathode,
                            tg.mode,
                            &model.params,
                            current,
                        );
                        let theta_before =
                            cathode::bulk_stoichiometry_cathode(&cell_event.cathode, &model.params);
                        let theta_after = cathode::bulk_stoichiometry_cathode(&two, &model.params);
                        recorder.transition_event(
                            t_event,
                            EventKind::PhaseEntry,
                            format!("two-phase entry at theta_p_bulk = {theta_after:.6}"),
                            theta_before,
                            theta_after,
                        );
                        let mut tg_mut = tags.borrow_mut();
                        tg_mut.regime = Regime::TwoPhase;
                        tg_mut.boundary_conc = two.boundary_conc;
                        drop(tg_mut);
                        let cell_two = CellState {
                            cathode: two,
                            ..cell_event
                        };
                        let y_new = lay.pack(&cell_two);
                        t_base = t_event;
                        stepper.reset_state(y_new);
                        theta_p_prev =
                            cathode::bulk_stoichiometry_cathode(&cell_two.cathode, &model.params);
                        continue;
                    }
                    theta_p_prev = theta_now;
                }
                Regime::TwoPhase => {
                    let rp_new = stepper.y[lay.rp_index()];
                    let threshold = EXIT_THRESHOLD_FRACTION * model.params.r_p;
                    if rp_new <= threshold {
                        let rp_prev = y_prev[lay.rp_index()];
                        let frac = if rp_prev > rp_new {
                            ((rp_prev - threshold) / (rp_prev - rp_new)).clamp(0.0, 1.0)
                        } else {
                            1.0
                        };
                        let t_event = t_base + t_prev + frac * (stepper.t - t_prev);
                        let y_event = &y_prev + (&stepper.y - &y_prev) * frac;
                        let cell_event = lay.unpack(&y_event, &template);
                        let one = cathode::exit_two_phase(&cell_event.cathode, &model.params);
                        let theta_before = cathode::bulk_stoichiometry_cathode(
                            &cell_event.cathode,
                            &model.params,
                        );
                        let theta_after = cathode::bulk_stoichiometry_cathode(&one, &model.params);
                        recorder.transition_event(
                            t_event,
                            EventKind::PhaseExit,
                            format!("core depleted; one-phase at theta_p_bulk = {theta_after:.6}"),
                            theta_before,
                            theta_after,
                        );
                        let mut tg_mut = tags.borrow_mut();
                        tg_mut.regime = Regime::OnePhase;
                        drop(tg_mut);
                        let cell_one = CellState {
                            cathode: one,
                            ..cell_event
                        };
                        let y_new = lay.pack(&cell_one);
                        t_base = t_event;
                        stepper.reset_state(y_new);
                        theta_p_prev =
                            cathode::bulk_stoichiometry_cathode(&cell_one.cathode, &model.params);
                        continue;
                    }
                    // runaway growth of the boundary is unphysical; treat as
                    // failed numerics rather than panicking downstream
                    if rp_new >= model.params.r_p * (1.0 - 1e-7) {
                        recorder.event(
                            t_base + stepper.t,
                            EventKind::NonConvergence,
                            "moving boundary reached the particle surface",
                        );
                        recorder.result.converged = false;
                        break 'intervals;
                    }
                    theta_p_prev =
                        cathode::bulk_stoichiometry_cathode(&cell_new.cathode, &model.params);
                }
            }

            // voltage cutoffs, checked on accepted steps
            if input.v_min.is_some() || input.v_max.is_some() {
                let vb = voltage_breakdown(
                    &cell_new,
                    &model.params,
                    &model.grid,
                    ocp_n,
                    current,
                    true,
                );
                match vb {
                    Ok(vb) => {
                        if let Some(vmin) = input.v_min {
                            if vb.v <= vmin {
                                let frac = match v_prev {
                                    Some(vp) if vp > vb.v => {
                                        ((vp - vmin) / (vp - vb.v)).clamp(0.0, 1.0)
                                    }
                                    _ => 1.0,
                                };
                                let t_event = t_base + t_prev + frac * (stepper.t - t_prev);
                                recorder.event(
                                    t_event,
                                    EventKind::CutoffMin,
                                    format!("lower voltage cutoff {vmin} V reached"),
                                );
                                break 'intervals;
                            }
                        }
                        if let Some(vmax) = input.v_max {
                            if vb.v >= vmax {
                                let frac = match v_prev {
                                    Some(vp) if vp < vb.v => {
                                        ((vmax - vp) / (vb.v - vp)).clamp(0.0, 1.0)
                                    }
                                    _ => 1.0,
                                };
                                let t_event = t_base + t_prev + frac * (stepper.t - t_prev);
                                recorder.event(
                                    t_event,
                                    EventKind::CutoffMax,
                                    format!("upper voltage cutoff {vmax} V reached"),
                                );
                                break 'intervals;
                            }
                        }
                        v_prev = Some(vb.v);
                    }
                    Err(e) => {
                        recorder.event(
                            t_base + stepper.t,
                            EventKind::NonConvergence,
                            format!("voltage evaluation failed: {e}"),
                        );
                        recorder.result.converged = false;
                        break 'intervals;
                    }
                }
            }
        }

        // sample at the hold boundary
        let tg = *tags.borrow();
        let template = tg.template(lay.n_solid);
        let cell = lay.unpack(&stepper.y, &template);
        let next_current = input.current[(j + 1).min(input.current.len() - 1)];
        match voltage_breakdown(&cell, &model.params, &model.grid, ocp_n, current, true) {
            Ok(vb) => {
                if vb.clamped && !clamp_logged {
                    recorder.event(
                        stepper.t,
                        EventKind::Clamp,
                        "surface stoichiometry clamped for OCP",
                    );
                    clamp_logged = true;
                }
                recorder.push(t_end, next_current, &cell, &vb, &model.params)?;
            }
            Err(e) => {
                recorder.event(
                    t_base + stepper.t,
                    EventKind::NonConvergence,
                    format!("voltage evaluation failed: {e}"),
                );
                recorder.result.converged = false;
                break;
            }
        }
    }

    recorder.result.stats = stepper.stats().clone();
    recorder.result.t_sim = started.elapsed().as_secs_f64();
    Ok(recorder.result)
}
