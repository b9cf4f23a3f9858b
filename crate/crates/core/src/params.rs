//! Cell parameters, their bounds, and derived geometric quantities.
//!
//! Everything is SI: lengths in m, areas in m^2, concentrations in mol/m^3,
//! diffusivities in m^2/s, reaction rates in m^2.5/(mol^0.5 s), resistances
//! in ohm, temperature in K.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{FARADAY, SECONDS_PER_HOUR};
use crate::error::{Error, Result};

/// Electrode selector (negative = graphite anode, positive = LFP cathode).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Electrode {
    Negative,
    Positive,
}

/// Complete parameter set of the cell model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParameters {
    /// Negative particle radius [m].
    pub r_n: f64,
    /// Positive particle radius [m].
    pub r_p: f64,
    /// Cell cross-section area [m^2].
    pub a_cell: f64,
    /// Negative electrode thickness [m].
    pub l_n: f64,
    /// Separator thickness [m].
    pub l_s: f64,
    /// Positive electrode thickness [m].
    pub l_p: f64,
    /// Maximum solid concentration, negative electrode [mol/m^3].
    pub c_s_n_max: f64,
    /// Maximum solid concentration, positive electrode [mol/m^3].
    pub c_s_p_max: f64,
    /// Solid diffusivity, negative electrode [m^2/s].
    pub d_s_n: f64,
    /// Solid diffusivity, positive electrode [m^2/s].
    pub d_s_p: f64,
    /// Negative stoichiometry at 100% SOC.
    pub theta_n_100: f64,
    /// Negative stoichiometry at 0% SOC.
    pub theta_n_0: f64,
    /// Positive stoichiometry at 100% SOC.
    pub theta_p_100: f64,
    /// Positive stoichiometry at 0% SOC.
    pub theta_p_0: f64,
    /// Lithium-poor phase stoichiometry of the positive particle.
    pub theta_p_alpha: f64,
    /// Lithium-rich phase stoichiometry of the positive particle.
    pub theta_p_beta: f64,
    /// Active volume fraction, negative electrode.
    pub nu_n: f64,
    /// Active volume fraction, positive electrode.
    pub nu_p: f64,
    /// Filler volume fraction, negative electrode.
    pub nu_n_filler: f64,
    /// Filler volume fraction, positive electrode.
    pub nu_p_filler: f64,
    /// Porosity, negative electrode (must equal 1 - nu_n - nu_n_filler).
    pub eps_n: f64,
    /// Porosity, separator.
    pub eps_s: f64,
    /// Porosity, positive electrode (must equal 1 - nu_p - nu_p_filler).
    pub eps_p: f64,
    /// Transference number.
    pub t_plus: f64,
    /// Bruggeman exponent.
    pub brugg: f64,
    /// Reaction rate constant, negative electrode [m^2.5/(mol^0.5 s)].
    pub k_n: f64,
    /// Reaction rate constant, positive electrode [m^2.5/(mol^0.5 s)].
    pub k_p: f64,
    /// Lumped contact resistance [ohm].
    pub r_l: f64,
    /// Cell temperature [K].
    pub temperature: f64,
    /// Initial electrolyte concentration [mol/m^3].
    pub c0: f64,
}

impl CellParameters {
    /// Illustrative LFP/graphite parameter set used by tests, examples, and
    /// the shipped example configuration.
    ///
    /// Thicknesses, maximum concentrations, volume fractions, porosities,
    /// transference number, and Bruggeman exponent are plausible placeholder
    /// values, not measurements of any particular cell. They are tuned so
    /// the positive and negative electrode capacities are both close to
    /// 49.999 Ah.
    pub fn illustrative_lfp() -> Self {
        CellParameters {
            r_n: 1.03e-6,
            r_p: 4.32e-8,
            a_cell: 1.491,
            l_n: 1.0e-4,
            l_s: 2.5e-5,
            l_p: 1.0e-4,
            c_s_n_max: 31370.0,
            c_s_p_max: 22806.0,
            d_s_n: 6.93e-12,
            d_s_p: 3.11e-17,
            theta_n_100: 0.835,
            theta_n_0: 0.0095,
            theta_p_100: 0.0696,
            theta_p_0: 0.8821,
            theta_p_alpha: 0.198,
            theta_p_beta: 0.8,
            nu_n: 0.4832,
            nu_p: 0.6752,
            nu_n_filler: 0.0868,
            nu_p_filler: 0.0748,
            eps_n: 1.0 - (0.4832 + 0.0868),
            eps_s: 0.45,
            eps_p: 1.0 - (0.6752 + 0.0748),
            t_plus: 0.363,
            brugg: 1.5,
            k_n: 1.0e-11,
            k_p: 1.0e-11,
            r_l: 0.001,
            temperature: 298.15,
            // The electrolyte diffusivity fit decays roughly a decade per
            // 190 mol/m^3; 1000 mol/m^3 leaves the salt balance a wide
            // stability margin at the C-rates exercised here.
            c0: 1000.0,
        }
    }

    /// Specific interfacial area of the chosen electrode [1/m].
    pub fn specific_area(&self, electrode: Electrode) -> f64 {
        match electrode {
            Electrode::Negative => 3.0 * self.nu_n / self.r_n,
            Electrode::Positive => 3.0 * self.nu_p / self.r_p,
        }
    }

    /// Stoichiometric window endpoints (theta at 0% and 100% SOC).
    pub fn soc_window(&self, electrode: Electrode) -> (f64, f64) {
        match electrode {
            Electrode::Negative => (self.theta_n_0, self.theta_n_100),
            Electrode::Positive => (self.theta_p_0, self.theta_p_100),
        }
    }
}

/// Validate every parameter invariant, returning the set unchanged on
/// success. The first violated invariant is reported by name.
pub fn validate(params: CellParameters) -> Result<CellParameters> {
    let p = &params;
    let positives: [(&str, f64); 14] = [
        ("r_n", p.r_n),
        ("r_p", p.r_p),
        ("a_cell", p.a_cell),
        ("l_n", p.l_n),
        ("l_s", p.l_s),
        ("l_p", p.l_p),
        ("c_s_n_max", p.c_s_n_max),
        ("c_s_p_max", p.c_s_p_max),
        ("d_s_n", p.d_s_n),
        ("d_s_p", p.d_s_p),
        ("k_n", p.k_n),
        ("k_p", p.k_p),
        ("temperature", p.temperature),
        ("c0", p.c0),
    ];
    for (name, v) in positives {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be strictly positive, got {v}"
            )));
        }
    }
    if p.r_l < 0.0 || !p.r_l.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "r_l must be nonnegative, got {}",
            p.r_l
        )));
    }
    let ordered = 0.0 < p.theta_p_100
        && p.theta_p_100 < p.theta_p_alpha
        && p.theta_p_alpha < p.theta_p_beta
        && p.theta_p_beta < p.theta_p_0
        && p.theta_p_0 < 1.0;
    if !ordered {
        return Err(Error::InvalidParameter(format!(
            "phase ordering violated: need 0 < theta_p_100 < theta_p_alpha < theta_p_beta \
             < theta_p_0 < 1, got {} {} {} {}",
            p.theta_p_100, p.theta_p_alpha, p.theta_p_beta, p.theta_p_0
        )));
    }
    if !(0.0 < p.theta_n_0 && p.theta_n_0 < p.theta_n_100 && p.theta_n_100 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "anode stoichiometric window violated: need 0 < theta_n_0 < theta_n_100 < 1, \
             got {} {}",
            p.theta_n_0, p.theta_n_100
        )));
    }
    if !(0.0 < p.t_plus && p.t_plus < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "transference number must lie in (0,1), got {}",
            p.t_plus
        )));
    }
    for (name, nu, filler, eps) in [
        ("negative", p.nu_n, p.nu_n_filler, p.eps_n),
        ("positive", p.nu_p, p.nu_p_filler, p.eps_p),
    ] {
        if nu < 0.0 || filler < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{name} electrode volume fractions must be nonnegative"
            )));
        }
        let derived = porosity(nu, filler)?;
        if (derived - eps).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "{name} electrode porosity {eps} inconsistent with 1 - nu - nu_filler = {derived}"
            )));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "{name} electrode porosity must lie in (0,1), got {eps}"
            )));
        }
    }
    if !(p.eps_s > 0.0 && p.eps_s < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "separator porosity must lie in (0,1), got {}",
            p.eps_s
        )));
    }
    if p.brugg < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "brugg must be nonnegative, got {}",
            p.brugg
        )));
    }
    Ok(params)
}

/// Specific interfacial area 3 nu / R of a spherical-particle electrode [1/m].
pub fn active_area(radius: f64, nu: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "radius must be strictly positive, got {radius}"
        )));
    }
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::InvalidParameter(format!(
            "volume fraction must lie in [0,1], got {nu}"
        )));
    }
    Ok(3.0 * nu / radius)
}

/// Electrode porosity 1 - nu - nu_filler.
pub fn porosity(nu: f64, nu_filler: f64) -> Result<f64> {
    if nu < 0.0 || nu_filler < 0.0 {
        return Err(Error::InvalidParameter(
            "volume fractions must be nonnegative".into(),
        ));
    }
    let sum = nu + nu_filler;
    if sum > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "solid volume fractions sum to {sum} > 1"
        )));
    }
    Ok(1.0 - sum)
}

/// Theoretical electrode capacity over its stoichiometric window [Ah].
pub fn theoretical_capacity(params: &CellParameters, electrode: Electrode) -> f64 {
    let (nu, l, c_max) = match electrode {
        Electrode::Negative => (params.nu_n, params.l_n, params.c_s_n_max),
        Electrode::Positive => (params.nu_p, params.l_p, params.c_s_p_max),
    };
    let (theta_0, theta_100) = params.soc_window(electrode);
    nu * FARADAY * l * params.a_cell * c_max * (theta_100 - theta_0).abs() / SECONDS_PER_HOUR
}

/// Closed lower/upper interval for one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Interval { lower, upper }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }
}

/// Per-parameter search bounds for the identifiable parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    pub r_n: Interval,
    pub r_p: Interval,
    pub a_cell: Interval,
    pub d_s_n: Interval,
    pub d_s_p: Interval,
    pub theta_n_100: Interval,
    pub theta_n_0: Interval,
    pub theta_p_100: Interval,
    pub theta_p_0: Interval,
    pub theta_p_alpha: Interval,
    pub theta_p_beta: Interval,
    pub r_l: Interval,
    pub k_n: Interval,
    pub k_p: Interval,
}

impl Default for ParameterBounds {
    fn default() -> Self {
        ParameterBounds {
            r_n: Interval::new(1e-6, 2e-5),
            r_p: Interval::new(1e-8, 1e-5),
            a_cell: Interval::new(1.41, 1.73),
            d_s_n: Interval::new(1e-15, 1e-10),
            d_s_p: Interval::new(1e-18, 1e-11),
            theta_n_100: Interval::new(0.7, 0.95),
            theta_n_0: Interval::new(1e-4, 0.2),
            theta_p_100: Interval::new(0.05, 0.15),
            theta_p_0: Interval::new(0.8, 1.0),
            theta_p_alpha: Interval::new(0.1, 0.2),
            theta_p_beta: Interval::new(0.8, 0.9),
            r_l: Interval::new(1e-3, 0.01),
            k_n: Interval::new(1e-14, 1e-8),
            k_p: Interval::new(1e-14, 1e-8),
        }
    }
}

impl ParameterBounds {
    /// Check lower < upper for every entry.
    pub fn validate(&self) -> Result<()> {
        for (name, iv) in self.entries() {
            if !(iv.lower < iv.upper) {
                return Err(Error::InvalidParameter(format!(
                    "bounds for {name}: lower {} must be < upper {}",
                    iv.lower, iv.upper
                )));
            }
        }
        Ok(())
    }

    /// Named access to all intervals, in a fixed order.
    pub fn entries(&self) -> [(&'static str, Interval); 14] {
        [
            ("r_n", self.r_n),
            ("r_p", self.r_p),
            ("a_cell", self.a_cell),
            ("d_s_n", self.d_s_n),
            ("d_s_p", self.d_s_p),
            ("theta_n_100", self.theta_n_100),
            ("theta_n_0", self.theta_n_0),
            ("theta_p_100", self.theta_p_100),
            ("theta_p_0", self.theta_p_0),
            ("theta_p_alpha", self.theta_p_alpha),
            ("theta_p_beta", self.theta_p_beta),
            ("r_l", self.r_l),
            ("k_n", self.k_n),
            ("k_p", self.k_p),
        ]
    }
}

/// Maximum rejection-resampling attempts before giving up on an ordered
/// stoichiometry tuple. Bounded to avoid silently biased sampling loops.
const MAX_SAMPLE_ATTEMPTS: usize = 1000;

/// Draw a parameter set uniformly inside `bounds`, keeping every field not
/// covered by the bounds at its value in `base`. Ordered stoichiometry
/// tuples are enforced by rejection resampling; the draw is deterministic
/// for a fixed seed.
pub fn sample_within_bounds(
    bounds: &ParameterBounds,
    base: &CellParameters,
    seed: u64,
) -> Result<CellParameters> {
    bounds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(bounds, base, &mut rng)
}

/// Same as [`sample_within_bounds`] but drawing from a caller-owned RNG,
/// so a sweep can derive many realizations from one seed.
pub fn sample_with_rng(
    bounds: &ParameterBounds,
    base: &CellParameters,
    rng: &mut impl Rng,
) -> Result<CellParameters> {
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let mut p = base.clone();
        p.r_n = draw(rng, bounds.r_n);
        p.r_p = draw(rng, bounds.r_p);
        p.a_cell = draw(rng, bounds.a_cell);
        p.d_s_n = draw(rng, bounds.d_s_n);
        p.d_s_p = draw(rng, bounds.d_s_p);
        p.theta_n_100 = draw(rng, bounds.theta_n_100);
        p.theta_n_0 = draw(rng, bounds.theta_n_0);
        p.theta_p_100 = draw(rng, bounds.theta_p_100);
        p.theta_p_0 = draw(rng, bounds.theta_p_0);
        p.theta_p_alpha = draw(rng, bounds.theta_p_alpha);
        p.theta_p_beta = draw(rng, bounds.theta_p_beta);
        p.r_l = draw(rng, bounds.r_l);
        p.k_n = draw(rng, bounds.k_n);
        p.k_p = draw(rng, bounds.k_p);

        let ordered = p.theta_p_100 < p.theta_p_alpha
            && p.theta_p_alpha < p.theta_p_beta
            && p.theta_p_beta < p.theta_p_0
            && p.theta_n_0 < p.theta_n_100;
        if ordered {
            return Ok(p);
        }
    }
    Err(Error::InvalidParameter(format!(
        "stoichiometry ordering not satisfied after {MAX_SAMPLE_ATTEMPTS} rejection attempts"
    )))
}

fn draw(rng: &mut impl Rng, iv: Interval) -> f64 {
    rng.random_range(iv.lower..=iv.upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn table_column_is_valid() {
        let p = CellParameters::illustrative_lfp();
        assert!(validate(p).is_ok());
    }

    #[test]
    fn phase_ordering_violation_is_named() {
        let mut p = CellParameters::illustrative_lfp();
        p.theta_p_alpha = 0.9; // above theta_p_beta = 0.8
        let err = validate(p).unwrap_err().to_string();
        assert!(err.contains("phase ordering"), "got: {err}");
    }

    #[test]
    fn transference_number_violation_is_named() {
        let mut p = CellParameters::illustrative_lfp();
        p.t_plus = 1.2;
        let err = validate(p).unwrap_err().to_string();
        assert!(err.contains("transference number"), "got: {err}");
    }

    #[test]
    fn active_area_examples() {
        assert_eq!(active_area(1e-6, 0.0).unwrap(), 0.0);
        assert_relative_eq!(active_area(1e-6, 0.6).unwrap(), 1.8e6, max_relative = 1e-12);
        assert_relative_eq!(active_area(3e-6, 0.5).unwrap(), 5.0e5, max_relative = 1e-12);
        assert!(active_area(0.0, 0.5).is_err());
        assert!(active_area(-1.0, 0.5).is_err());
    }

    #[test]
    fn active_area_scales_inversely_with_radius() {
        for c in [0.5, 2.0, 10.0, 123.0] {
            let a1 = active_area(1e-6, 0.37).unwrap();
            let a2 = active_area(c * 1e-6, 0.37).unwrap();
            assert_relative_eq!(a2, a1 / c, max_relative = 1e-12);
        }
    }

    #[test]
    fn porosity_examples() {
        assert_relative_eq!(porosity(0.5, 0.1).unwrap(), 0.4, max_relative = 1e-12);
        assert_eq!(porosity(0.0, 0.0).unwrap(), 1.0);
        assert!(porosity(0.7, 0.4).is_err());
    }

    #[test]
    fn capacity_hand_value() {
        let mut p = CellParameters::illustrative_lfp();
        p.nu_p = 0.5;
        p.l_p = 1e-4;
        p.a_cell = 1.491;
        p.c_s_p_max = 20000.0;
        // |theta window| = 0.8125 with the default stoichiometry
        let q = theoretical_capacity(&p, Electrode::Positive);
        assert!((q - 32.47).abs() < 0.01, "q = {q}");
    }

    #[test]
    fn capacity_zero_window() {
        let mut p = CellParameters::illustrative_lfp();
        p.theta_p_100 = 0.4;
        p.theta_p_0 = 0.4;
        assert_eq!(theoretical_capacity(&p, Electrode::Positive), 0.0);
    }

    #[test]
    fn capacity_is_linear_in_each_factor() {
        let p = CellParameters::illustrative_lfp();
        let q0 = theoretical_capacity(&p, Electrode::Positive);
        for scale in [0.5, 2.0, 3.5] {
            let mut pa = p.clone();
            pa.nu_p *= scale;
            pa.eps_p = 1.0 - pa.nu_p - pa.nu_p_filler; // keep consistency out of the way
            assert_relative_eq!(
                theoretical_capacity(&pa, Electrode::Positive),
                scale * q0,
                max_relative = 1e-12
            );
            let mut pb = p.clone();
            pb.l_p *= scale;
            assert_relative_eq!(
                theoretical_capacity(&pb, Electrode::Positive),
                scale * q0,
                max_relative = 1e-12
            );
            let mut pc = p.clone();
            pc.a_cell *= scale;
            assert_relative_eq!(
                theoretical_capacity(&pc, Electrode::Positive),
                scale * q0,
                max_relative = 1e-12
            );
            let mut pd = p.clone();
            pd.c_s_p_max *= scale;
            assert_relative_eq!(
                theoretical_capacity(&pd, Electrode::Positive),
                scale * q0,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn illustrative_capacities_match_target() {
        // Both electrodes sized for ~49.999 Ah; the identification capacity
        // constraint allows +/- 1%.
        let p = CellParameters::illustrative_lfp();
        let qp = theoretical_capacity(&p, Electrode::Positive);
        let qn = theoretical_capacity(&p, Electrode::Negative);
        assert!((qp - 49.999).abs() <= 0.01 * 49.999, "qp = {qp}");
        assert!((qn - 49.999).abs() <= 0.01 * 49.999, "qn = {qn}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let bounds = ParameterBounds::default();
        let base = CellParameters::illustrative_lfp();
        let a = sample_within_bounds(&bounds, &base, 42).unwrap();
        let b = sample_within_bounds(&bounds, &base, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_within_bounds(&bounds, &base, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn samples_stay_in_bounds_and_ordered() {
        let bounds = ParameterBounds::default();
        let base = CellParameters::illustrative_lfp();
        for seed in 0..1000 {
            let p = sample_within_bounds(&bounds, &base, seed).unwrap();
            assert!(bounds.r_n.contains(p.r_n));
            assert!(bounds.r_p.contains(p.r_p));
            assert!(bounds.a_cell.contains(p.a_cell));
            assert!(bounds.d_s_n.contains(p.d_s_n));
            assert!(bounds.d_s_p.contains(p.d_s_p));
            assert!(bounds.theta_p_alpha.contains(p.theta_p_alpha));
            assert!(bounds.theta_p_beta.contains(p.theta_p_beta));
            assert!(bounds.r_l.contains(p.r_l));
            assert!(p.theta_p_100 < p.theta_p_alpha);
            assert!(p.theta_p_alpha < p.theta_p_beta);
            assert!(p.theta_p_beta < p.theta_p_0);
            assert!(p.theta_n_0 < p.theta_n_100);
            // untouched fields come from the base
            assert_eq!(p.l_p, base.l_p);
            assert_eq!(p.t_plus, base.t_plus);
        }
    }

    #[test]
    fn sample_mean_of_theta_alpha_is_central() {
        // Disjoint theta_p_100 bounds so no rejection biases the draw.
        let mut bounds = ParameterBounds::default();
        bounds.theta_p_100 = Interval::new(0.05, 0.09);
        let base = CellParameters::illustrative_lfp();
        let n = 1000;
        let mean: f64 = (0..n)
            .map(|seed| {
                sample_within_bounds(&bounds, &base, seed)
                    .unwrap()
                    .theta_p_alpha
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.15).abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn degenerate_bounds_are_rejected() {
        let mut bounds = ParameterBounds::default();
        bounds.r_n = Interval::new(2e-5, 1e-6);
        let base = CellParameters::illustrative_lfp();
        assert!(sample_within_bounds(&bounds, &base, 0).is_err());
    }

    #[test]
    fn identified_values_lie_within_default_bounds() {
        let bounds = ParameterBounds::default();
        let p = CellParameters::illustrative_lfp();
        assert!(bounds.r_n.contains(p.r_n));
        assert!(bounds.r_p.contains(p.r_p));
        assert!(bounds.a_cell.contains(p.a_cell));
        assert!(bounds.d_s_n.contains(p.d_s_n));
        assert!(bounds.d_s_p.contains(p.d_s_p));
        assert!(bounds.theta_n_100.contains(p.theta_n_100));
        assert!(bounds.theta_n_0.contains(p.theta_n_0));
        assert!(bounds.theta_p_100.contains(p.theta_p_100));
        assert!(bounds.theta_p_0.contains(p.theta_p_0));
        assert!(bounds.theta_p_alpha.contains(p.theta_p_alpha));
        assert!(bounds.theta_p_beta.contains(p.theta_p_beta));
        assert!(bounds.r_l.contains(p.r_l));
    }
}
