//! Positive particle with the core-shell two-phase description.
//!
//! One-phase operation uses the same fixed-grid spherical scheme as the
//! negative particle (with the opposite boundary-flux sign). When the bulk
//! stoichiometry reaches a phase boundary, the particle switches to a
//! moving-boundary representation: a uniform core at the old phase
//! concentration and a diffusing shell on the normalized coordinate
//! chi = (r - r_p)/(R_p - r_p), with the core radius r_p as an extra state.

use nalgebra::{DMatrix, DVector};

use crate::constants::FARADAY;
use crate::error::{Error, Result};
use crate::params::CellParameters;
use crate::quadrature::{radial_moment_integral, segment_moment_weights};

/// Fraction of R_p used to seed the moving boundary at the one-phase to
/// two-phase transition; keeps the shell coefficients finite.
pub const ENTRY_EPSILON_FRACTION: f64 = 1e-4;

/// Fraction of R_p below which the core counts as depleted and the particle
/// returns to the one-phase description.
pub const EXIT_THRESHOLD_FRACTION: f64 = 1e-3;

/// Operating direction. Latched over each two-phase window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Charge,
    Discharge,
}

impl Mode {
    pub fn from_current(current: f64) -> Option<Mode> {
        if current > 0.0 {
            Some(Mode::Discharge)
        } else if current < 0.0 {
            Some(Mode::Charge)
        } else {
            None
        }
    }
}

/// Phase description of the positive particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseConstants {
    pub theta_alpha: f64,
    pub theta_beta: f64,
    /// Lithium-poor phase concentration theta_alpha c_max [mol/m^3].
    pub c_alpha: f64,
    /// Lithium-rich phase concentration theta_beta c_max [mol/m^3].
    pub c_beta: f64,
}

impl PhaseConstants {
    pub fn new(params: &CellParameters) -> Self {
        PhaseConstants {
            theta_alpha: params.theta_p_alpha,
            theta_beta: params.theta_p_beta,
            c_alpha: params.theta_p_alpha * params.c_s_p_max,
            c_beta: params.theta_p_beta * params.c_s_p_max,
        }
    }
}

/// Which description the particle currently uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    OnePhase,
    TwoPhase,
}

/// Positive particle state.
///
/// In `OnePhase`, `c_shell` holds radial node concentrations on the full
/// sphere (same layout as the negative particle) and `r_p` is zero. In
/// `TwoPhase`, `c_shell` holds the chi-grid shell concentrations (nodes
/// chi_1..chi_{N-1}; the chi_0 value is pinned to `boundary_conc` and is
/// not a state).
#[derive(Debug, Clone, PartialEq)]
pub struct CathodeState {
    pub regime: Regime,
    pub r_p: f64,
    pub c_shell: DVector<f64>,
    pub mode: Mode,
    /// Latched concentration pinned at the moving boundary (g value). Holds
    /// its previous value while the current is exactly zero.
    pub boundary_conc: f64,
}

impl CathodeState {
    /// One-phase state with a uniform concentration profile.
    pub fn one_phase_uniform(n_r: usize, c: f64, mode: Mode) -> Self {
        CathodeState {
            regime: Regime::OnePhase,
            r_p: 0.0,
            c_shell: DVector::from_element(n_r - 1, c),
            mode,
            boundary_conc: c,
        }
    }

    pub fn n_r(&self) -> usize {
        self.c_shell.len() + 1
    }
}

/// Concentration pinned at the moving boundary for the given current.
/// At exactly zero current the previously latched value is held instead of
/// the discontinuous zero of the printed case split.
pub fn boundary_concentration(current: f64, phase: &PhaseConstants, latched: f64) -> f64 {
    if current > 0.0 {
        phase.c_beta
    } else if current < 0.0 {
        phase.c_alpha
    } else {
        latched
    }
}

/// Uniform core concentration installed at the one-phase to two-phase
/// transition.
pub fn core_initial_concentration(mode: Mode, phase: &PhaseConstants) -> f64 {
    match mode {
        Mode::Discharge => phase.c_alpha,
        Mode::Charge => phase.c_beta,
    }
}

/// Scalar and per-node coefficients of the discretized shell equations.
#[derive(Debug, Clone)]
pub struct CoreShellCoefficients {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    /// Per-node convective coefficient; entry l-1 belongs to node chi_l.
    pub m4: Vec<f64>,
    pub eta1: f64,
    /// Per-node eta2 = M4_l / dchi.
    pub eta2: Vec<f64>,
    pub eta3: f64,
    pub eta4: f64,
    pub dchi: f64,
}

impl CoreShellCoefficients {
    /// Evaluate the coefficients at the given boundary position and first
    /// shell node value. `g` is the pinned boundary concentration.
    pub fn new(
        params: &CellParameters,
        phase: &PhaseConstants,
        r_p: f64,
        c_first: f64,
        g: f64,
        current: f64,
        n_r: usize,
    ) -> Result<Self> {
        if n_r < 3 {
            return Err(Error::Assembly(format!(
                "shell discretization needs at least 3 points, got {n_r}"
            )));
        }
        // Transient Newton iterates may probe past the entry offset; the
        // shell width is floored well below any physically reachable state
        // (the boundary is seeded at R_p (1 - 1e-4) and only recedes) so the
        // iteration sees smooth coefficients instead of a hard error.
        let gap_floor = ENTRY_EPSILON_FRACTION * 0.1 * params.r_p;
        let gap = (params.r_p - r_p).max(gap_floor);
        if !gap.is_finite() || !r_p.is_finite() {
            return Err(Error::Assembly(format!(
                "moving boundary r_p = {r_p} is not finite"
            )));
        }
        let d = params.d_s_p;
        let dchi = 1.0 / (n_r as f64 - 1.0);
        let sign = if current > 0.0 {
            1.0
        } else if current < 0.0 {
            -1.0
        } else {
            0.0
        };
        let m1 = sign * d / ((phase.c_alpha - phase.c_beta) * gap);
        let a_p = 3.0 * params.nu_p / params.r_p;
        let m2 = gap * dchi / (d * a_p * params.a_cell * FARADAY * params.l_p);
        let m3 = d / (gap * gap);
        let eta1 = m3 / (dchi * dchi);
        let eta4 = m1 / dchi;
        let drp_dt = eta4 * (c_first - g);
        let n_nodes = n_r - 1;
        let mut m4 = Vec::with_capacity(n_nodes);
        let mut eta2 = Vec::with_capacity(n_nodes);
        for l in 1..=n_nodes {
            let chi = l as f64 * dchi;
            let radius = chi * gap + r_p;
            let convective = 2.0 * d / (radius * gap) - (chi - 1.0) / gap * drp_dt;
            m4.push(convective);
            eta2.push(convective / dchi);
        }
        // The surface row folds the one-sided flux ghost into the current
        // term; its M4 is evaluated at chi = 1 where the mesh-motion part
        // vanishes.
        let m4_surface = m4[n_nodes - 1];
        let eta3 = m2 / dchi * (m4_surface + m3 / dchi);
        Ok(CoreShellCoefficients {
            m1,
            m2,
            m3,
            m4,
            eta1,
            eta2,
            eta3,
            eta4,
            dchi,
        })
    }
}

/// Diffusive coupling matrix of the two-phase state vector x = [r_p; c].
/// Scaled by eta1 in the assembled system; the first row carries
/// eta4/eta1 so eta1 A1 x reproduces the boundary-motion equation.
pub fn two_phase_a1(n_r: usize, eta4_over_eta1: f64) -> DMatrix<f64> {
    let n = n_r;
    let mut a = DMatrix::zeros(n, n);
    a[(0, 1)] = eta4_over_eta1;
    for row in 1..n - 1 {
        a[(row, row)] = -2.0;
        a[(row, row + 1)] = 1.0;
        if row > 1 {
            a[(row, row - 1)] = 1.0;
        }
    }
    // surface row with the one-sided flux ghost eliminated: (1, -1) on the
    // last two shell nodes
    a[(n - 1, n - 2)] = 1.0;
    a[(n - 1, n - 1)] = -1.0;
    a
}

/// Convective coupling matrix (right-sided first difference); first and
/// surface rows are zero.
pub fn two_phase_a2(n_r: usize) -> DMatrix<f64> {
    let n = n_r;
    let mut a = DMatrix::zeros(n, n);
    for row in 1..n - 1 {
        a[(row, row)] = -1.0;
        a[(row, row + 1)] = 1.0;
    }
    a
}

/// Current injection vector: only the surface row, scaled by eta3.
pub fn two_phase_b(n_r: usize) -> DVector<f64> {
    let mut b = DVector::zeros(n_r);
    b[n_r - 1] = 1.0;
    b
}

/// Boundary source vector, scaled by eta1 in the assembled system.
pub fn two_phase_g(n_r: usize, eta4_over_eta1: f64, g: f64) -> DVector<f64> {
    let mut v = DVector::zeros(n_r);
    v[0] = -eta4_over_eta1 * g;
    v[1] = g;
    v
}

/// Ready-to-evaluate affine form dx/dt = m x + k of the two-phase system.
pub struct TwoPhaseSystem {
    pub m: DMatrix<f64>,
    pub k: DVector<f64>,
    pub coeffs: CoreShellCoefficients,
}

/// Assemble the two-phase system at the given state and current.
pub fn assemble_two_phase_system(
    state: &CathodeState,
    params: &CellParameters,
    current: f64,
    n_r: usize,
) -> Result<TwoPhaseSystem> {
    debug_assert_eq!(state.regime, Regime::TwoPhase);
    if state.r_p >= params.r_p {
        return Err(Error::Assembly(format!(
            "moving boundary r_p = {} reached the particle radius {}",
            state.r_p, params.r_p
        )));
    }
    let phase = PhaseConstants::new(params);
    let g = state.boundary_conc;
    let coeffs = CoreShellCoefficients::new(
        params,
        &phase,
        state.r_p,
        state.c_shell[0],
        g,
        current,
        n_r,
    )?;
    let eta4_over_eta1 = coeffs.eta4 / coeffs.eta1;
    let a1 = two_phase_a1(n_r, eta4_over_eta1);
    let a2 = two_phase_a2(n_r);
    let mut m = a1 * coeffs.eta1;
    // per-row convective scaling: row i (i >= 1) belongs to node chi_i
    for row in 1..n_r - 1 {
        let scale = coeffs.eta2[row - 1];
        for col in 0..n_r {
            m[(row, col)] += scale * a2[(row, col)];
        }
    }
    let mut k = two_phase_g(n_r, eta4_over_eta1, g) * coeffs.eta1;
    k += two_phase_b(n_r) * (coeffs.eta3 * current);
    Ok(TwoPhaseSystem { m, k, coeffs })
}

/// Evaluate d[r_p; c]/dt of the two-phase system directly from the stencil,
/// matching [`assemble_two_phase_system`] without building matrices.
pub fn apply_two_phase(
    state: &CathodeState,
    params: &CellParameters,
    current: f64,
    n_r: usize,
) -> Result<DVector<f64>> {
    let phase = PhaseConstants::new(params);
    let g = state.boundary_conc;
    let coeffs = CoreShellCoefficients::new(
        params,
        &phase,
        state.r_p,
        state.c_shell[0],
        g,
        current,
        n_r,
    )?;
    let c = &state.c_shell;
    let n = n_r - 1;
    let mut dx = DVector::zeros(n_r);
    dx[0] = coeffs.eta4 * (c[0] - g);
    for l in 1..=n {
        let idx = l - 1;
        let left = if l == 1 { g } else { c[idx - 1] };
        if l < n {
            let diff = coeffs.eta1 * (c[idx + 1] - 2.0 * c[idx] + left);
            let conv = coeffs.eta2[idx] * (c[idx + 1] - c[idx]);
            dx[l] = diff + conv;
        } else {
            // surface node: flux ghost folded into the current term
            dx[l] = coeffs.eta1 * (left - c[idx]) + coeffs.eta3 * current;
        }
    }
    Ok(dx)
}

/// Ghost concentration just outside the last shell node, from the surface
/// flux condition: c_ghost = c_{N-1} + M2 I.
pub fn surface_ghost_value(state: &CathodeState, params: &CellParameters, current: f64) -> Result<f64> {
    let phase = PhaseConstants::new(params);
    let n_r = state.n_r();
    let coeffs = CoreShellCoefficients::new(
        params,
        &phase,
        state.r_p,
        state.c_shell[0],
        state.boundary_conc,
        current,
        n_r,
    )?;
    Ok(state.c_shell[n_r - 2] + coeffs.m2 * current)
}

/// One-phase system: the same fixed-sphere scheme as the negative particle
/// with the positive electrode's boundary-flux sign.
pub struct OnePhaseSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

pub fn assemble_one_phase_system(params: &CellParameters, n_r: usize) -> Result<OnePhaseSystem> {
    let dr = params.r_p / (n_r as f64 - 1.0);
    let a_p = 3.0 * params.nu_p / params.r_p;
    let diff_scale = params.d_s_p / (dr * dr);
    let flux_scale = 1.0 / (params.a_cell * params.l_p * FARADAY * a_p * dr);
    let a = crate::anode::radial_diffusion_matrix(n_r)? * diff_scale;
    let b = crate::anode::radial_flux_vector(n_r)? * flux_scale;
    Ok(OnePhaseSystem { a, b })
}

/// Bulk stoichiometry of the positive particle in either regime.
pub fn bulk_stoichiometry_cathode(state: &CathodeState, params: &CellParameters) -> f64 {
    let n_r = state.n_r();
    let r = params.r_p;
    match state.regime {
        Regime::OnePhase => {
            let n = n_r - 1;
            let dr = r / n as f64;
            let mut radii = Vec::with_capacity(n + 1);
            let mut values = Vec::with_capacity(n + 1);
            radii.push(0.0);
            values.push(state.c_shell[0]);
            for l in 1..=n {
                radii.push(l as f64 * dr);
                values.push(state.c_shell[l - 1]);
            }
            let integral = radial_moment_integral(&radii, &values);
            3.0 / (params.c_s_p_max * r.powi(3)) * integral
        }
        Regime::TwoPhase => {
            let phase = PhaseConstants::new(params);
            let c_core = core_initial_concentration(state.mode, &phase);
            let shell = shell_moment_integral(state, r);
            let core = c_core * state.r_p.powi(3) / 3.0;
            3.0 / (params.c_s_p_max * r.powi(3)) * (core + shell)
        }
    }
}

/// Integral of c r^2 dr over the shell [r_p, R_p], including the pinned
/// chi_0 value.
fn shell_moment_integral(state: &CathodeState, r_total: f64) -> f64 {
    let n = state.c_shell.len(); // nodes chi_1..chi_{n}
    let gap = r_total - state.r_p;
    let dchi = 1.0 / n as f64;
    let mut radii = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    radii.push(state.r_p);
    values.push(state.boundary_conc);
    for l in 1..=n {
        radii.push(state.r_p + l as f64 * dchi * gap);
        values.push(state.c_shell[l - 1]);
    }
    radial_moment_integral(&radii, &values)
}

/// Check whether the bulk stoichiometry crossed the relevant phase boundary
/// between two accepted integrator states. Returns the linear-interpolation
/// fraction of the step at which the crossing happened.
pub fn detect_phase_entry(
    theta_prev: f64,
    theta_now: f64,
    mode: Mode,
    phase: &PhaseConstants,
) -> Option<f64> {
    match mode {
        Mode::Discharge => {
            // entering the plateau from below
            if theta_prev <= phase.theta_alpha && theta_now >= phase.theta_alpha {
                if theta_now > theta_prev {
                    Some((phase.theta_alpha - theta_prev) / (theta_now - theta_prev))
                } else if theta_now == phase.theta_alpha {
                    Some(0.0)
                } else {
                    None
                }
            } else {
                None
            }
        }
        Mode::Charge => {
            // entering the plateau from above
            if theta_prev >= phase.theta_beta && theta_now <= phase.theta_beta {
                if theta_now < theta_prev {
                    Some((theta_prev - phase.theta_beta) / (theta_prev - theta_now))
                } else if theta_now == phase.theta_beta {
                    Some(0.0)
                } else {
                    None
                }
            } else {
                None
            }
        }
    }
}

/// Switch a one-phase state into the two-phase description.
///
/// The boundary starts at R_p (1 - 1e-4); the shell is set to a uniform
/// value equal to the core initial concentration, then adjusted by the
/// closed-form correction that keeps the bulk stoichiometry unchanged by
/// the pinned boundary value.
pub fn enter_two_phase(
    state: &CathodeState,
    mode: Mode,
    params: &CellParameters,
    current: f64,
) -> CathodeState {
    debug_assert_eq!(state.regime, Regime::OnePhase);
    let phase = PhaseConstants::new(params);
    let n_r = state.n_r();
    let r_total = params.r_p;
    let r_p = r_total * (1.0 - ENTRY_EPSILON_FRACTION);
    let ic = core_initial_concentration(mode, &phase);
    let g = boundary_concentration(current, &phase, ic);

    let theta_before = bulk_stoichiometry_cathode(state, params);
    let target_integral = theta_before * params.c_s_p_max * r_total.powi(3) / 3.0;

    // Solve for the uniform shell value u such that
    //   ic r_p^3/3 + S_g g + S_u u = target_integral
    // where the first chi segment ramps from g to u and all others sit at u.
    let gap = r_total - r_p;
    let n = n_r - 1;
    let dchi = 1.0 / n as f64;
    let r0 = r_p;
    let r1 = r_p + dchi * gap;
    let (w_g, w_u_first) = segment_moment_weights(r0, r1);
    let rest = (r_total.powi(3) - r1.powi(3)) / 3.0;
    let s_u = w_u_first + rest;
    let core = ic * r_p.powi(3) / 3.0;
    let u = (target_integral - core - w_g * g) / s_u;

    CathodeState {
        regime: Regime::TwoPhase,
        r_p,
        c_shell: DVector::from_element(n, u),
        mode,
        boundary_conc: g,
    }
}

/// Switch a two-phase state whose core has depleted back to the one-phase
/// description. The shell profile is resampled onto the full-sphere radial
/// grid by linear interpolation and rescaled by a single factor so the bulk
/// stoichiometry is preserved exactly.
pub fn exit_two_phase(state: &CathodeState, params: &CellParameters) -> CathodeState {
    debug_assert_eq!(state.regime, Regime::TwoPhase);
    let phase = PhaseConstants::new(params);
    let n_r = state.n_r();
    let r_total = params.r_p;
    let c_core = core_initial_concentration(state.mode, &phase);
    let theta_before = bulk_stoichiometry_cathode(state, params);

    let n = n_r - 1;
    let gap = r_total - state.r_p;
    let dchi = 1.0 / n as f64;
    let dr = r_total / n as f64;
    let mut resampled = DVector::zeros(n);
    for j in 1..=n {
        let radius = j as f64 * dr;
        let value = if radius <= state.r_p {
            c_core
        } else {
            let chi = (radius - state.r_p) / gap;
            let pos = chi / dchi; // in units of chi nodes, 0 = pinned value
            let idx = pos.floor() as usize;
            let frac = pos - idx as f64;
            let lower = if idx == 0 {
                state.boundary_conc
            } else {
                state.c_shell[idx - 1]
            };
            let upper = state.c_shell[(idx).min(n - 1)];
            lower + frac * (upper - lower)
        };
        resampled[j - 1] = value;
    }

    let raw = CathodeState {
        regime: Regime::OnePhase,
        r_p: 0.0,
        c_shell: resampled,
        mode: state.mode,
        boundary_conc: state.boundary_conc,
    };
    let theta_raw = bulk_stoichiometry_cathode(&raw, params);
    let factor = if theta_raw != 0.0 {
        theta_before / theta_raw
    } else {
        1.0
    };
    CathodeState {
        c_shell: raw.c_shell * factor,
        ..raw
    }
}

/// Positive electrode open circuit potential; separate charge/discharge fits.
pub fn ocp_p(theta_surf: f64, mode: Mode) -> Result<f64> {
    if !(0.0..=1.0).contains(&theta_surf) {
        return Err(Error::OcpRange(format!(
            "positive OCP requested at theta = {theta_surf}, valid range is [0, 1]"
        )));
    }
    let x = 1.0 - theta_surf;
    let u = match mode {
        Mode::Discharge => {
            3.382 - 0.2955 * (-44.99 * x.powf(0.8707)).exp()
                + 10f64.powf(-20.71) * (14.17 * x.powf(8.128)).exp()
                + 10f64.powf(-40.82) * (100.0 * x.powf(1.213)).exp()
        }
        Mode::Charge => {
            3.442 - 0.1774 * (-127.7 * x.powf(0.7921)).exp()
                + 10f64.powf(-2.123) * (16.56 * x.powf(24.08)).exp()
                + 10f64.powf(-10.29) * (99.91 * x.powf(22.17)).exp()
        }
    };
    Ok(u)
}

/// Positive electrode SOC from bulk stoichiometry (affine, decreasing).
pub fn soc_p(theta_bulk: f64, params: &CellParameters) -> Result<f64> {
    let window = params.theta_p_0 - params.theta_p_100;
    if window == 0.0 {
        return Err(Error::InvalidParameter(
            "degenerate cathode stoichiometric window".into(),
        ));
    }
    Ok((params.theta_p_0 - theta_bulk) / window)
}
