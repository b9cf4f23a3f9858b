//! Adaptive implicit integrator for the stiff cell ODE system.
//!
//! One-step TR-BDF2 scheme: a trapezoidal stage to t + gamma h followed by
//! a BDF2 stage to t + h, with gamma = 2 - sqrt(2) so both stages share the
//! same iteration matrix I - (gamma/2) h J. The scheme is L-stable and
//! carries an embedded third-order error estimate, which is filtered
//! through the iteration matrix before the tolerance test.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Stage offset gamma = 2 - sqrt(2).
fn gamma() -> f64 {
    2.0 - SQRT2
}

/// Newton matrix coefficient d = gamma/2 = (1 - gamma)/(2 - gamma).
fn dcoef() -> f64 {
    (2.0 - SQRT2) / 2.0
}

/// Per-component tolerance model: accept a local error e against state y iff
/// |e_i| <= max(|y_i| reltol, abstol_i) for every component.
#[derive(Debug, Clone)]
pub struct ErrorModel {
    pub reltol: f64,
    pub abstol: DVector<f64>,
}

impl ErrorModel {
    /// Scaled max-norm of `e`; values <= 1 satisfy the tolerance contract.
    pub fn norm(&self, e: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..e.len() {
            let tol = (y[i].abs() * self.reltol).max(self.abstol[i]);
            let r = e[i].abs() / tol;
            if r > worst {
                worst = r;
            }
        }
        worst
    }

    /// Same norm but weighting each component by the larger of two states,
    /// used for the step acceptance test.
    pub fn norm2(&self, e: &DVector<f64>, ya: &DVector<f64>, yb: &DVector<f64>) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..e.len() {
            let mag = ya[i].abs().max(yb[i].abs());
            let tol = (mag * self.reltol).max(self.abstol[i]);
            let r = e[i].abs() / tol;
            if r > worst {
                worst = r;
            }
        }
        worst
    }
}

/// Why a segment could not be completed.
#[derive(Debug, Clone, PartialEq)]
pub enum StepFail {
    /// Required step size fell below the representable/configured floor.
    StepSizeUnderflow { t: f64, h: f64 },
    /// The shared step-attempt budget ran out.
    BudgetExhausted { t: f64 },
    /// The right-hand side failed at the current accepted state.
    RhsError { t: f64, message: String },
}

impl StepFail {
    pub fn describe(&self) -> String {
        match self {
            StepFail::StepSizeUnderflow { t, h } => {
                format!("step size underflow at t = {t:.6} s (h = {h:.3e} s)")
            }
            StepFail::BudgetExhausted { t } => {
                format!("step budget exhausted at t = {t:.6} s")
            }
            StepFail::RhsError { t, message } => {
                format!("model evaluation failed at t = {t:.6} s: {message}")
            }
        }
    }
}

/// Outcome of one driver call.
pub enum StepOutcome {
    /// A step was accepted; the previous state is returned for event checks.
    Accepted { t_prev: f64, y_prev: DVector<f64> },
    /// Failure; the stepper state is the last accepted point.
    Failed(StepFail),
}

/// Counters accumulated over a run.
#[derive(Debug, Default, Clone)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub newton_iterations: usize,
    pub jacobians: usize,
    pub factorizations: usize,
    pub attempts: usize,
}

enum NewtonOutcome {
    Converged(DVector<f64>, DVector<f64>),
    NotConverged,
    RhsFailed,
}

/// Jacobian supplier: given (t, y, f(t,y)), return df/dy. When absent the
/// stepper falls back to dense finite differences of the rhs.
pub type JacobianFn<'a> =
    Box<dyn FnMut(f64, &DVector<f64>, &DVector<f64>) -> Result<DMatrix<f64>> + 'a>;

/// TR-BDF2 stepper over a user rhs f(t, y).
pub struct TrBdf2<'a, F>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    rhs: F,
    jac_fn: Option<JacobianFn<'a>>,
    em: ErrorModel,
    pub t: f64,
    pub y: DVector<f64>,
    h: f64,
    h_cap: f64,
    /// Perturbation scales for the finite-difference Jacobian.
    typ: DVector<f64>,
    f_curr: Option<DVector<f64>>,
    jac: Option<DMatrix<f64>>,
    jac_age: usize,
    force_refresh: bool,
    /// Largest step the Newton iteration is currently trusted with;
    /// lowered on convergence failures, relaxed on successes.
    h_conv_limit: f64,
    lu: Option<(f64, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
    pub stats: StepStats,
    budget: usize,
}

/// Newton iteration limit per stage.
const MAX_NEWTON: usize = 12;
/// Convergence threshold for the Newton update in tolerance-weighted norm.
/// Kept well below 1 so the residual leak into linear invariants (salt and
/// lithium conservation) stays far inside the step tolerance.
const NEWTON_TOL: f64 = 1e-3;
/// Accepted steps between mandatory Jacobian refreshes.
const MAX_JAC_AGE: usize = 25;

impl<'a, F> TrBdf2<'a, F>
where
    F: FnMut(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    pub fn new(
        rhs: F,
        em: ErrorModel,
        typ: DVector<f64>,
        t0: f64,
        y0: DVector<f64>,
        h_cap: f64,
        budget: usize,
    ) -> Self {
        TrBdf2 {
            rhs,
            jac_fn: None,
            em,
            t: t0,
            y: y0,
            h: h_cap * 1e-3,
            h_cap,
            typ,
            f_curr: None,
            jac: None,
            jac_age: 0,
            force_refresh: false,
            h_conv_limit: f64::INFINITY,
            lu: None,
            stats: StepStats::default(),
            budget,
        }
    }

    /// Install a structured Jacobian supplier in place of dense finite
    /// differences.
    pub fn with_jacobian(mut self, jac_fn: JacobianFn<'a>) -> Self {
        self.jac_fn = Some(jac_fn);
        self
    }

    /// Restart the local clock at a hold boundary; state, step size, and
    /// Jacobian survive. Keeping segment-local time preserves resolution
    /// for the very small steps taken right after phase transitions.
    pub fn rebase_time(&mut self) {
        self.t = 0.0;
    }

    /// Replace the state after a discontinuous transition (event). Cached
    /// derivatives and Jacobians no longer apply; the next step restarts
    /// from a small trial size chosen from the new derivative magnitude.
    pub fn reset_state(&mut self, y: DVector<f64>) {
        self.t = 0.0;
        self.y = y;
        self.f_curr = None;
        self.jac = None;
        self.lu = None;
        self.h = -1.0; // request re-initialization from the derivative scale
    }

    /// Drop the cached derivative after the forcing changed discontinuously
    /// (a new current hold); step size and Jacobian are kept.
    pub fn invalidate_derivative(&mut self) {
        self.f_curr = None;
    }

    pub fn stats(&self) -> &StepStats {
        &self.stats
    }

    fn h_min(&self) -> f64 {
        // local segment time keeps eps t tiny; the cap-relative floor must
        // leave room for the post-transition boundary-layer steps even at
        // the tightest tolerances
        (self.h_cap * 1e-16).max(16.0 * f64::EPSILON * self.t.abs())
    }

    /// Pick a conservative starting step from the current derivative scale.
    fn initial_step(&mut self) -> f64 {
        let f = self.f_curr.as_ref().expect("f_curr set before initial_step");
        let rate = self.em.norm(f, &self.y); // tolerance units per second
        if rate <= 0.0 {
            self.h_cap
        } else {
            (0.01 / rate).clamp(self.h_min(), self.h_cap)
        }
    }

    fn ensure_jacobian(&mut self) -> std::result::Result<(), StepFail> {
        if self.jac.is_some() && self.jac_age <= MAX_JAC_AGE && !self.force_refresh {
            return Ok(());
        }
        let f0 = self.f_curr.as_ref().unwrap().clone();
        let jac = if let Some(jf) = self.jac_fn.as_mut() {
            (jf)(self.t, &self.y, &f0).map_err(|e| StepFail::RhsError {
                t: self.t,
                message: format!("jacobian evaluation: {e}"),
            })?
        } else {
            let n = self.y.len();
            let mut jac = DMatrix::zeros(n, n);
            let sqrt_eps = f64::EPSILON.sqrt();
            let mut y_pert = self.y.clone();
            for j in 0..n {
                let delta = sqrt_eps * self.y[j].abs().max(self.typ[j]);
                y_pert[j] = self.y[j] + delta;
                let f1 = (self.rhs)(self.t, &y_pert).map_err(|e| StepFail::RhsError {
                    t: self.t,
                    message: format!("jacobian column {j}: {e}"),
                })?;
                let inv = 1.0 / delta;
                for i in 0..n {
                    jac[(i, j)] = (f1[i] - f0[i]) * inv;
                }
                y_pert[j] = self.y[j];
            }
            jac
        };
        self.jac = Some(jac);
        self.jac_age = 0;
        self.force_refresh = false;
        self.lu = None;
        self.stats.jacobians += 1;
        Ok(())
    }

    fn ensure_factorization(&mut self, h: f64) {
        if let Some((fh, _)) = &self.lu {
            if *fh == h {
                return;
            }
        }
        let jac = self.jac.as_ref().unwrap();
        let n = self.y.len();
        let mut m = -jac * (dcoef() * h);
        for i in 0..n {
            m[(i, i)] += 1.0;
        }
        self.lu = Some((h, m.lu()));
        self.stats.factorizations += 1;
    }

    /// Solve z - coef h f(t_s, z) = rhs_const by modified Newton with the
    /// shared iteration matrix.
    fn newton_solve(
        &mut self,
        t_stage: f64,
        coef_h: f64,
        rhs_const: &DVector<f64>,
        z0: DVector<f64>,
    ) -> NewtonOutcome {
        let mut z = z0;
        let mut last_norm = f64::INFINITY;
        let mut weak = 0;
        for _ in 0..MAX_NEWTON {
            self.stats.newton_iterations += 1;
            let f = match (self.rhs)(t_stage, &z) {
                Ok(f) => f,
                Err(_) => return NewtonOutcome::RhsFailed,
            };
            let residual = &z - &f * coef_h - rhs_const;
            let (_, lu) = self.lu.as_ref().unwrap();
            let delta = match lu.solve(&(-&residual)) {
                Some(d) => d,
                None => return NewtonOutcome::NotConverged,
            };
            z += &delta;
            let norm = self.em.norm(&delta, &z);
            if !norm.is_finite() {
                return NewtonOutcome::NotConverged;
            }
            if norm <= NEWTON_TOL {
                let f_final = match (self.rhs)(t_stage, &z) {
                    Ok(f) => f,
                    Err(_) => return NewtonOutcome::RhsFailed,
                };
                return NewtonOutcome::Converged(z, f_final);
            }
            if last_norm.is_finite() {
                if norm > 2.0 * last_norm {
                    return NewtonOutcome::NotConverged; // diverging
                }
                if norm > 0.95 * last_norm {
                    weak += 1;
                    if weak >= 2 {
                        return NewtonOutcome::NotConverged; // stalled
                    }
                } else {
                    weak = 0;
                }
            }
            last_norm = norm;
        }
        NewtonOutcome::NotConverged
    }

    /// Advance by one accepted step, not crossing `t_stop`.
    pub fn advance(&mut self, t_stop: f64) -> StepOutcome {
        debug_assert!(t_stop > self.t);
        if self.f_curr.is_none() {
            match (self.rhs)(self.t, &self.y) {
                Ok(f) => self.f_curr = Some(f),
                Err(e) => {
                    return StepOutcome::Failed(StepFail::RhsError {
                        t: self.t,
                        message: e.to_string(),
                    })
                }
            }
            if self.h <= 0.0 {
                self.h = self.initial_step();
            }
        }

        let g = gamma();
        let d = dcoef();
        let e1 = (SQRT2 - 1.0) / 3.0;
        let e2 = -1.0 / 3.0;
        let e3 = (2.0 - SQRT2) / 3.0;

        loop {
            self.stats.attempts += 1;
            if self.stats.attempts > self.budget {
                return StepOutcome::Failed(StepFail::BudgetExhausted { t: self.t });
            }
            let h_min = self.h_min();
            if self.h < h_min {
                self.h = h_min;
            }
            let mut h = self.h.min(t_stop - self.t).min(self.h_cap);
            if t_stop - self.t < h_min {
                // remaining gap below resolution: snap to the stop time
                h = t_stop - self.t;
            }
            if self.t + h == self.t {
                return StepOutcome::Failed(StepFail::StepSizeUnderflow { t: self.t, h });
            }

            if let Err(fail) = self.ensure_jacobian() {
                return StepOutcome::Failed(fail);
            }
            self.ensure_factorization(h);

            let newton_before = self.stats.newton_iterations;
            let f_n = self.f_curr.as_ref().unwrap().clone();
            // Stage 1: trapezoidal to t + gamma h.
            let rhs1 = &self.y + &f_n * (g * h / 2.0);
            let z1_guess = &self.y + &f_n * (g * h);
            let stage1 = self.newton_solve(self.t + g * h, g * h / 2.0, &rhs1, z1_guess);
            let (z1, f1) = match stage1 {
                NewtonOutcome::Converged(z, f) => (z, f),
                NewtonOutcome::NotConverged | NewtonOutcome::RhsFailed => {
                    if self.jac_age > 0 {
                        self.jac = None; // force refresh, retry same h
                        continue;
                    }
                    self.h_conv_limit = h * 0.7;
                    self.h = h * 0.3;
                    if self.h < h_min {
                        return StepOutcome::Failed(StepFail::StepSizeUnderflow {
                            t: self.t,
                            h: self.h,
                        });
                    }
                    self.stats.rejected += 1;
                    continue;
                }
            };

            // Stage 2: BDF2 to t + h using y_n and z1.
            let c1 = 1.0 / (g * (2.0 - g));
            let c2 = -(1.0 - g) * (1.0 - g) / (g * (2.0 - g));
            let rhs2 = &z1 * c1 + &self.y * c2;
            let z2_guess = &z1 + &f1 * ((1.0 - g) * h);
            let stage2 = self.newton_solve(self.t + h, d * h, &rhs2, z2_guess);
            let (z2, f2) = match stage2 {
                NewtonOutcome::Converged(z, f) => (z, f),
                NewtonOutcome::NotConverged | NewtonOutcome::RhsFailed => {
                    if self.jac_age > 0 {
                        self.jac = None;
                        continue;
                    }
                    self.h_conv_limit = h * 0.7;
                    self.h = h * 0.3;
                    if self.h < h_min {
                        return StepOutcome::Failed(StepFail::StepSizeUnderflow {
                            t: self.t,
                            h: self.h,
                        });
                    }
                    self.stats.rejected += 1;
                    continue;
                }
            };

            let newton_this_step = self.stats.newton_iterations - newton_before;
            // Embedded error estimate, filtered by the iteration matrix.
            let est_raw = (&f_n * e1 + &f1 * e2 + &f2 * e3) * h;
            let (_, lu) = self.lu.as_ref().unwrap();
            let est = lu.solve(&est_raw).unwrap_or(est_raw);
            let norm = self.em.norm2(&est, &self.y, &z2);

            if !norm.is_finite() || !z2.iter().all(|v| v.is_finite()) {
                self.h = h * 0.1;
                if self.h < h_min {
                    return StepOutcome::Failed(StepFail::StepSizeUnderflow {
                        t: self.t,
                        h: self.h,
                    });
                }
                self.stats.rejected += 1;
                continue;
            }

            // set ESPM_STEP_TRACE=1 to watch the step controller work
            if std::env::var_os("ESPM_STEP_TRACE").is_some() {
                eprintln!(
                    "t={:.6e} h={:.3e} norm={:.3e} newton={} {}",
                    self.t,
                    h,
                    norm,
                    newton_this_step,
                    if norm <= 1.0 { "ACC" } else { "REJ" }
                );
            }
            if norm <= 1.0 {
                let t_prev = self.t;
                let y_prev = std::mem::replace(&mut self.y, z2);
                self.t = t_prev + h;
                self.f_curr = Some(f2);
                self.jac_age += 1;
                self.stats.accepted += 1;
                // slow Newton progress this step: coefficients drifted, so
                // refresh the Jacobian before the next attempt
                if newton_this_step > 8 {
                    self.force_refresh = true;
                }
                // slow recovery: repeated probing of the Newton-infeasible
                // step region wastes whole attempts
                self.h_conv_limit *= 1.05;
                // step-size update with a dead band (each resize forces a
                // refactorization, so marginal changes are not worth it)
                let factor = (0.9 * norm.powf(-1.0 / 3.0)).clamp(0.2, 5.0);
                if !(0.85..1.4).contains(&factor) {
                    self.h = (h * factor).min(self.h_cap).min(self.h_conv_limit);
                }
                return StepOutcome::Accepted { t_prev, y_prev };
            }

            self.stats.rejected += 1;
            let factor = (0.9 * norm.powf(-1.0 / 3.0)).clamp(0.1, 0.5);
            self.h = h * factor;
            if self.h < h_min {
                return StepOutcome::Failed(StepFail::StepSizeUnderflow {
                    t: self.t,
                    h: self.h,
                });
            }
        }
    }
}
