//! Electrolyte salt transport: constitutive relations, conservative
//! finite-volume assembly across anode/separator/cathode, and the lumped
//! electrolyte voltage terms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::constants::{FARADAY, GAS_CONSTANT};
use crate::error::{Error, Result};
use crate::params::CellParameters;

/// Region index aliases for the three stacked domains.
pub const REGION_NEGATIVE: usize = 0;
pub const REGION_SEPARATOR: usize = 1;
pub const REGION_POSITIVE: usize = 2;

/// Cartesian finite-volume grid over negative electrode, separator, and
/// positive electrode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectrolyteGrid {
    /// Cell counts per region, [negative, separator, positive].
    pub n_x: [usize; 3],
    /// Cell widths per region [m].
    pub dx: [f64; 3],
    /// Porosity per region.
    pub eps: [f64; 3],
    /// Bruggeman exponent shared by all regions.
    pub brugg: f64,
    /// Region thicknesses [m], kept for the source terms.
    pub lengths: [f64; 3],
}

impl ElectrolyteGrid {
    /// Build a grid with the given per-region cell counts (each must be >= 2).
    pub fn new(params: &CellParameters, n_x: [usize; 3]) -> Result<Self> {
        for (i, &n) in n_x.iter().enumerate() {
            if n < 2 {
                return Err(Error::Assembly(format!(
                    "electrolyte region {i} needs at least 2 cells, got {n}"
                )));
            }
        }
        let lengths = [params.l_n, params.l_s, params.l_p];
        let dx = [
            lengths[0] / n_x[0] as f64,
            lengths[1] / n_x[1] as f64,
            lengths[2] / n_x[2] as f64,
        ];
        Ok(ElectrolyteGrid {
            n_x,
            dx,
            eps: [params.eps_n, params.eps_s, params.eps_p],
            brugg: params.brugg,
            lengths,
        })
    }

    /// Default discretization: 10 cells per region.
    pub fn with_defaults(params: &CellParameters) -> Result<Self> {
        Self::new(params, [10, 10, 10])
    }

    /// Total cell count.
    pub fn total(&self) -> usize {
        self.n_x.iter().sum()
    }

    /// Region owning global cell index `idx`.
    pub fn region_of(&self, idx: usize) -> usize {
        if idx < self.n_x[0] {
            REGION_NEGATIVE
        } else if idx < self.n_x[0] + self.n_x[1] {
            REGION_SEPARATOR
        } else {
            REGION_POSITIVE
        }
    }

    /// Global index range of a region.
    pub fn region_range(&self, region: usize) -> std::ops::Range<usize> {
        match region {
            REGION_NEGATIVE => 0..self.n_x[0],
            REGION_SEPARATOR => self.n_x[0]..self.n_x[0] + self.n_x[1],
            _ => self.n_x[0] + self.n_x[1]..self.total(),
        }
    }

    /// Arithmetic mean concentration of one region.
    pub fn region_mean(&self, c: &DVector<f64>, region: usize) -> f64 {
        let range = self.region_range(region);
        let n = range.len() as f64;
        c.rows_range(range).iter().sum::<f64>() / n
    }

    /// Arithmetic mean concentration over the whole domain.
    pub fn domain_mean(&self, c: &DVector<f64>) -> f64 {
        c.iter().sum::<f64>() / self.total() as f64
    }

    /// Salt inventory sum(eps_l c_l dx_l), the conserved quantity [mol/m^2].
    pub fn salt_inventory(&self, c: &DVector<f64>) -> f64 {
        (0..self.total())
            .map(|l| {
                let r = self.region_of(l);
                self.eps[r] * self.dx[r] * c[l]
            })
            .sum()
    }
}

/// Electrolyte concentration state: one cell-average value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectrolyteState {
    pub c: DVector<f64>,
}

impl ElectrolyteState {
    /// Uniform profile at `c0`.
    pub fn uniform(grid: &ElectrolyteGrid, c0: f64) -> Self {
        ElectrolyteState {
            c: DVector::from_element(grid.total(), c0),
        }
    }
}

/// Bulk electrolyte diffusion coefficient D(c, T) [m^2/s].
///
/// The empirical fit is singular where T - (206.25 + 10 c/1000) reaches
/// zero; that is reported as a domain error.
pub fn diffusivity(c: f64, temperature: f64) -> Result<f64> {
    let denom = temperature - (206.25 + 10.0 * c / 1000.0);
    if denom <= 0.0 {
        return Err(Error::Domain(format!(
            "diffusivity domain: T - (206.25 + 10 c/1000) = {denom} must be positive \
             (c = {c}, T = {temperature})"
        )));
    }
    let exponent = (-4.51 - 59.22 / denom) * c / 1000.0;
    Ok(1e-4 * 10f64.powf(exponent))
}

/// Bulk electrolyte conductivity kappa(c) [S/m].
pub fn conductivity(c_avg: f64) -> Result<f64> {
    if c_avg <= 0.0 {
        return Err(Error::Domain(format!(
            "conductivity requires positive concentration, got {c_avg}"
        )));
    }
    let x = c_avg / 1000.0;
    let shifted = x - 1.05;
    Ok((x / 1.05).powf(0.68) * (-0.1 * shifted * shifted - 0.56 * shifted).exp())
}

/// Bruggeman correction X eps^brugg applied to a bulk transport property.
pub fn effective_transport(x: f64, eps: f64, brugg: f64) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!(
            "porosity must lie in (0,1], got {eps}"
        )));
    }
    Ok(x * eps.powf(brugg))
}

/// Thermodynamic factor v(c, T) of the electrolyte activity correction.
pub fn thermodynamic_factor(c_avg: f64, temperature: f64) -> f64 {
    let x = c_avg / 1000.0;
    0.601 - 0.24 * x.sqrt() + 0.982 * (1.0 - 0.0052 * (temperature - 293.0)) * x.powf(1.5)
}

/// Interface diffusivity between two adjacent cells: harmonic mean weighted
/// by the widths of the cells sharing the face.
pub fn interface_diffusivity(d_left: f64, d_right: f64, dx_left: f64, dx_right: f64) -> f64 {
    let delta_bar = dx_right / (dx_left + dx_right);
    d_right * d_left / (delta_bar * d_right + (1.0 - delta_bar) * d_left)
}

/// Assembled state-space form dc/dt = A c + (1 - t_plus)/(A_cell F) B I.
pub struct ElectrolyteSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Assemble the conservative finite-volume system for the current state.
///
/// Each cell's diffusivity is evaluated from its own concentration, face
/// values use the width-weighted harmonic mean, face fluxes are divided by
/// the center-to-center distance, and every row is scaled by the owning
/// cell's eps dx. Outer boundaries are zero-flux.
pub fn assemble_electrolyte_system(
    state: &ElectrolyteState,
    grid: &ElectrolyteGrid,
    params: &CellParameters,
) -> Result<ElectrolyteSystem> {
    let n = grid.total();
    if state.c.len() != n {
        return Err(Error::Assembly(format!(
            "state has {} cells, grid has {n}",
            state.c.len()
        )));
    }
    // Per-cell effective diffusivities.
    let mut d_eff = vec![0.0; n];
    for l in 0..n {
        let region = grid.region_of(l);
        let d = diffusivity(state.c[l], params.temperature)?;
        d_eff[l] = effective_transport(d, grid.eps[region], grid.brugg)?;
    }

    let mut a = DMatrix::zeros(n, n);
    for l in 0..n - 1 {
        let r_l = grid.region_of(l);
        let r_r = grid.region_of(l + 1);
        let dx_l = grid.dx[r_l];
        let dx_r = grid.dx[r_r];
        let d_face = interface_diffusivity(d_eff[l], d_eff[l + 1], dx_l, dx_r);
        if !(d_face > 0.0) || !d_face.is_finite() {
            return Err(Error::Assembly(format!(
                "nonpositive interface diffusivity {d_face} at face {l}"
            )));
        }
        // Flux = d_face (c_{l+1} - c_l) / distance, positive into cell l.
        let g = d_face / (0.5 * (dx_l + dx_r));
        let w_l = 1.0 / (grid.eps[r_l] * dx_l);
        let w_r = 1.0 / (grid.eps[r_r] * dx_r);
        a[(l, l)] -= g * w_l;
        a[(l, l + 1)] += g * w_l;
        a[(l + 1, l + 1)] -= g * w_r;
        a[(l + 1, l)] += g * w_r;
    }

    let mut b = DVector::zeros(n);
    for l in 0..n {
        match grid.region_of(l) {
            REGION_NEGATIVE => b[l] = 1.0 / (params.l_n * grid.eps[REGION_NEGATIVE]),
            REGION_POSITIVE => b[l] = -1.0 / (params.l_p * grid.eps[REGION_POSITIVE]),
            _ => {}
        }
    }
    Ok(ElectrolyteSystem { a, b })
}

/// Evaluate dc/dt directly from the same conservative scheme as
/// [`assemble_electrolyte_system`], without materializing the matrix.
/// `scaled_current` is (1 - t_plus) I / (A_cell F).
pub fn apply_electrolyte_system(
    state: &ElectrolyteState,
    grid: &ElectrolyteGrid,
    params: &CellParameters,
    scaled_current: f64,
) -> Result<DVector<f64>> {
    let n = grid.total();
    let mut d_eff = vec![0.0; n];
    for l in 0..n {
        let region = grid.region_of(l);
        let d = diffusivity(state.c[l], params.temperature)?;
        d_eff[l] = effective_transport(d, grid.eps[region], grid.brugg)?;
    }
    let mut dc = DVector::zeros(n);
    for l in 0..n - 1 {
        let r_l = grid.region_of(l);
        let r_r = grid.region_of(l + 1);
        let dx_l = grid.dx[r_l];
        let dx_r = grid.dx[r_r];
        let d_face = interface_diffusivity(d_eff[l], d_eff[l + 1], dx_l, dx_r);
        if !(d_face > 0.0) || !d_face.is_finite() {
            return Err(Error::Assembly(format!(
                "nonpositive interface diffusivity {d_face} at face {l}"
            )));
        }
        let flux = d_face * (state.c[l + 1] - state.c[l]) / (0.5 * (dx_l + dx_r));
        dc[l] += flux / (grid.eps[r_l] * dx_l);
        dc[l + 1] -= flux / (grid.eps[r_r] * dx_r);
    }
    for l in 0..n {
        match grid.region_of(l) {
            REGION_NEGATIVE => {
                dc[l] += scaled_current / (params.l_n * grid.eps[REGION_NEGATIVE])
            }
            REGION_POSITIVE => {
                dc[l] -= scaled_current / (params.l_p * grid.eps[REGION_POSITIVE])
            }
            _ => {}
        }
    }
    Ok(dc)
}

/// Lumped electrolyte resistance from region-average conductivities [ohm].
pub fn electrolyte_resistance(
    state: &ElectrolyteState,
    grid: &ElectrolyteGrid,
    params: &CellParameters,
) -> Result<f64> {
    let mut terms = 0.0;
    for (region, weight) in [
        (REGION_NEGATIVE, 1.0),
        (REGION_SEPARATOR, 2.0),
        (REGION_POSITIVE, 1.0),
    ] {
        let c_mean = grid.region_mean(&state.c, region);
        let kappa = conductivity(c_mean)?;
        let kappa_eff = effective_transport(kappa, grid.eps[region], grid.brugg)?;
        if !(kappa_eff > 0.0) {
            return Err(Error::Domain(format!(
                "zero effective conductivity in region {region}"
            )));
        }
        terms += weight * grid.lengths[region] / kappa_eff;
    }
    Ok(terms / (2.0 * params.a_cell))
}

/// Electrolyte diffusion overpotential 2RTv/F ln(c_L/c_0) [V].
///
/// `v` is the thermodynamic factor evaluated by the caller at the intended
/// average concentration.
pub fn diffusion_overpotential(v: f64, temperature: f64, c_first: f64, c_last: f64) -> Result<f64> {
    if c_first <= 0.0 || c_last <= 0.0 {
        return Err(Error::Domain(format!(
            "boundary concentrations must be positive, got {c_first} and {c_last}"
        )));
    }
    Ok(2.0 * GAS_CONSTANT * temperature * v / FARADAY * (c_last / c_first).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid_and_params() -> (ElectrolyteGrid, CellParameters) {
        let params = CellParameters::illustrative_lfp();
        let grid = ElectrolyteGrid::with_defaults(&params).unwrap();
        (grid, params)
    }

    #[test]
    fn diffusivity_zero_concentration() {
        assert_relative_eq!(diffusivity(0.0, 298.15).unwrap(), 1e-4, max_relative = 1e-15);
    }

    #[test]
    fn diffusivity_reference_point() {
        // Hand evaluation of the fit at c = 1000 mol/m^3, T = 298.15 K.
        let d = diffusivity(1000.0, 298.15).unwrap();
        assert!((d - 5.8468651e-10).abs() < 1e-13, "d = {d:e}");
    }

    #[test]
    fn diffusivity_domain_error() {
        let err = diffusivity(1000.0, 216.25).unwrap_err().to_string();
        assert!(err.contains("diffusivity domain"), "got: {err}");
    }

    #[test]
    fn conductivity_unit_point() {
        assert_eq!(conductivity(1050.0).unwrap(), 1.0);
    }

    #[test]
    fn conductivity_reference_point() {
        let k = conductivity(2050.0).unwrap();
        assert!((k - 0.8146).abs() < 1e-3, "k = {k}");
    }

    #[test]
    fn conductivity_domain() {
        assert!(conductivity(0.0).is_err());
        assert!(conductivity(-5.0).is_err());
    }

    #[test]
    fn effective_transport_cases() {
        assert_eq!(effective_transport(3.7, 1.0, 1.5).unwrap(), 3.7);
        assert_relative_eq!(
            effective_transport(2.0, 0.25, 1.5).unwrap(),
            0.25,
            max_relative = 1e-12
        );
        assert_eq!(effective_transport(0.0, 0.5, 1.5).unwrap(), 0.0);
        assert!(effective_transport(1.0, 0.0, 1.5).is_err());
        assert!(effective_transport(1.0, 1.5, 1.5).is_err());
    }

    #[test]
    fn thermodynamic_factor_limits() {
        assert_relative_eq!(thermodynamic_factor(0.0, 298.15), 0.601, max_relative = 1e-12);
        assert_relative_eq!(thermodynamic_factor(1000.0, 293.0), 1.343, max_relative = 1e-12);
        // At T = 293 + 1/0.0052 the cubic-root term vanishes.
        let t_star = 293.0 + 1.0 / 0.0052;
        let c = 1700.0;
        assert_relative_eq!(
            thermodynamic_factor(c, t_star),
            0.601 - 0.24 * (c / 1000.0f64).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn interface_of_equal_diffusivities_is_identity() {
        assert_relative_eq!(
            interface_diffusivity(3.2e-10, 3.2e-10, 1e-5, 1e-5),
            3.2e-10,
            max_relative = 1e-12
        );
        // also for unequal widths
        assert_relative_eq!(
            interface_diffusivity(3.2e-10, 3.2e-10, 1e-5, 2.5e-6),
            3.2e-10,
            max_relative = 1e-12
        );
    }

    #[test]
    fn uniform_interior_stencil() {
        // Uniform concentration, equal porosity, equal widths: interior rows
        // must be (d', -2d', d') with d' = d_eff/(eps dx^2).
        let mut params = CellParameters::illustrative_lfp();
        params.l_s = 1.0e-4; // equal widths in all three regions
        params.nu_n = 0.4832;
        params.nu_p = 0.4832;
        params.nu_n_filler = 0.0868;
        params.nu_p_filler = 0.0868;
        params.eps_n = 0.43;
        params.eps_s = 0.43;
        params.eps_p = 0.43;
        let grid = ElectrolyteGrid::with_defaults(&params).unwrap();
        let state = ElectrolyteState::uniform(&grid, 1200.0);
        let sys = assemble_electrolyte_system(&state, &grid, &params).unwrap();
        let d = diffusivity(1200.0, params.temperature).unwrap();
        let d_eff = effective_transport(d, 0.43, params.brugg).unwrap();
        let dprime = d_eff / (0.43 * 1e-5 * 1e-5);
        for l in 1..grid.total() - 1 {
            assert_relative_eq!(sys.a[(l, l - 1)], dprime, max_relative = 1e-12);
            assert_relative_eq!(sys.a[(l, l)], -2.0 * dprime, max_relative = 1e-12);
            assert_relative_eq!(sys.a[(l, l + 1)], dprime, max_relative = 1e-12);
        }
    }

    #[test]
    fn rows_sum_to_zero_and_signs() {
        let (grid, params) = grid_and_params();
        // a non-uniform profile to exercise state-dependent coefficients
        let c = DVector::from_fn(grid.total(), |l, _| 1000.0 + 40.0 * l as f64);
        let state = ElectrolyteState { c };
        let sys = assemble_electrolyte_system(&state, &grid, &params).unwrap();
        let n = grid.total();
        for l in 0..n {
            let row_sum: f64 = (0..n).map(|m| sys.a[(l, m)]).sum();
            assert!(row_sum.abs() < 1e-4 * sys.a[(l, l)].abs().max(1.0), "row {l}");
            assert!(sys.a[(l, l)] <= 0.0);
            for m in 0..n {
                if m != l {
                    let v = sys.a[(l, m)];
                    assert!(v >= 0.0, "off-diagonal ({l},{m}) = {v}");
                    if m > l + 1 || l > m + 1 {
                        assert_eq!(v, 0.0, "not tridiagonal at ({l},{m})");
                    }
                }
            }
        }
    }

    #[test]
    fn source_vector_shape() {
        let (grid, params) = grid_and_params();
        let state = ElectrolyteState::uniform(&grid, 1200.0);
        let sys = assemble_electrolyte_system(&state, &grid, &params).unwrap();
        for l in grid.region_range(REGION_NEGATIVE) {
            assert_relative_eq!(
                sys.b[l],
                1.0 / (params.l_n * params.eps_n),
                max_relative = 1e-12
            );
        }
        for l in grid.region_range(REGION_SEPARATOR) {
            assert_eq!(sys.b[l], 0.0);
        }
        for l in grid.region_range(REGION_POSITIVE) {
            assert_relative_eq!(
                sys.b[l],
                -1.0 / (params.l_p * params.eps_p),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn source_conserves_salt_exactly() {
        // The weighted sum eps dx c is invariant under A c and under B I.
        let (grid, params) = grid_and_params();
        let c = DVector::from_fn(grid.total(), |l, _| 900.0 + 25.0 * (l as f64).sin().abs());
        let state = ElectrolyteState { c: c.clone() };
        let sys = assemble_electrolyte_system(&state, &grid, &params).unwrap();
        let dcdt_diff = &sys.a * &c;
        let dcdt_src = &sys.b;
        let mut drift_diff = 0.0;
        let mut drift_src = 0.0;
        for l in 0..grid.total() {
            let r = grid.region_of(l);
            drift_diff += grid.eps[r] * grid.dx[r] * dcdt_diff[l];
            drift_src += grid.eps[r] * grid.dx[r] * dcdt_src[l];
        }
        assert!(drift_diff.abs() < 1e-9 * dcdt_diff.amax(), "diffusion leaks salt");
        // the anode/cathode source weights cancel to round-off
        assert!(drift_src.abs() < 1e-12, "source leaks salt: {drift_src}");
    }

    #[test]
    fn resistance_equal_regions_reduces() {
        let mut params = CellParameters::illustrative_lfp();
        params.l_n = 1e-4;
        params.l_s = 1e-4;
        params.l_p = 1e-4;
        // Make every region's effective conductivity equal to kappa0 by
        // using porosity 1 (filler-free, solid-free thought experiment is
        // fine for exercising the formula) and brugg irrelevant.
        params.brugg = 0.0;
        params.eps_n = 0.3;
        params.eps_s = 0.3;
        params.eps_p = 0.3;
        params.nu_n = 0.5;
        params.nu_n_filler = 0.2;
        params.nu_p = 0.5;
        params.nu_p_filler = 0.2;
        let grid = ElectrolyteGrid::with_defaults(&params).unwrap();
        let state = ElectrolyteState::uniform(&grid, 1050.0); // kappa = 1 exactly
        let r_el = electrolyte_resistance(&state, &grid, &params).unwrap();
        // (L + 2L + L)/kappa0 / (2 A) = 2L/(A kappa0)
        assert_relative_eq!(
            r_el,
            2.0 * 1e-4 / (params.a_cell * 1.0),
            max_relative = 1e-12
        );
        assert!((r_el - 1.3414e-4).abs() < 1e-8, "r_el = {r_el}");
        // doubling the area halves the resistance
        let mut params2 = params.clone();
        params2.a_cell *= 2.0;
        let r_el2 = electrolyte_resistance(&state, &grid, &params2).unwrap();
        assert_relative_eq!(r_el2, r_el / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn diffusion_overpotential_cases() {
        // uniform concentration: ln(1) = 0
        assert_eq!(
            diffusion_overpotential(1.2, 298.15, 1000.0, 1000.0).unwrap(),
            0.0
        );
        // ratio e with v = 1 at 298.15 K
        let dphi = diffusion_overpotential(1.0, 298.15, 1000.0, 1000.0 * std::f64::consts::E)
            .unwrap();
        assert!((dphi - 0.05138).abs() < 1e-5, "dphi = {dphi}");
        // swapping the boundary values flips the sign
        let fwd = diffusion_overpotential(1.1, 298.15, 900.0, 1500.0).unwrap();
        let rev = diffusion_overpotential(1.1, 298.15, 1500.0, 900.0).unwrap();
        assert_relative_eq!(fwd, -rev, max_relative = 1e-12);
        assert!(diffusion_overpotential(1.0, 298.15, 0.0, 1000.0).is_err());
    }
}
