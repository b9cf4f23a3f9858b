//! Negative particle: spherical diffusion on a fixed radial grid, bulk
//! stoichiometry, SOC mapping, and the tabulated open circuit potential.

use nalgebra::{DMatrix, DVector};

use crate::constants::FARADAY;
use crate::error::{Error, Result};
use crate::params::CellParameters;
use crate::quadrature::radial_moment_integral;

/// Radial concentration states of the negative particle. The center node is
/// eliminated by the spherical symmetry condition, leaving N_r - 1 states at
/// r_l = l dr, l = 1..N_r-1, with the last node on the particle surface.
#[derive(Debug, Clone, PartialEq)]
pub struct AnodeState {
    pub c_s_n: DVector<f64>,
}

impl AnodeState {
    pub fn uniform(n_r: usize, c: f64) -> Self {
        AnodeState {
            c_s_n: DVector::from_element(n_r - 1, c),
        }
    }
}

/// Dimensionless finite-difference matrix of the spherical diffusion
/// operator on N_r - 1 interior+surface nodes.
///
/// Row l (1-based node index) is ((l-1)/l, -2, (l+1)/l); the surface row
/// folds the zero-gradient ghost mirror in as (2, -2). The first-derivative
/// term uses the central difference, which is what produces the (l-1)/l and
/// (l+1)/l weights.
pub fn radial_diffusion_matrix(n_r: usize) -> Result<DMatrix<f64>> {
    if n_r < 3 {
        return Err(Error::Assembly(format!(
            "radial discretization needs at least 3 points, got {n_r}"
        )));
    }
    let n = n_r - 1;
    let mut a = DMatrix::zeros(n, n);
    for row in 0..n {
        let l = (row + 1) as f64;
        a[(row, row)] = -2.0;
        if row + 1 < n {
            a[(row, row + 1)] = (l + 1.0) / l;
        }
        if row > 0 {
            a[(row, row - 1)] = if row + 1 == n {
                // surface node: ghost eliminated through the flux condition,
                // mirror weight (l-1)/l + (l+1)/l = 2
                2.0
            } else {
                (l - 1.0) / l
            };
        }
    }
    Ok(a)
}

/// Dimensionless flux injection vector; only the surface node receives the
/// boundary flux, with weight 2 + 2/(N_r - 1).
pub fn radial_flux_vector(n_r: usize) -> Result<DVector<f64>> {
    if n_r < 3 {
        return Err(Error::Assembly(format!(
            "radial discretization needs at least 3 points, got {n_r}"
        )));
    }
    let n = n_r - 1;
    let mut b = DVector::zeros(n);
    b[n - 1] = 2.0 + 2.0 / (n_r as f64 - 1.0);
    Ok(b)
}

/// Scaled state-space system dc/dt = a c + b I for the negative particle.
pub struct AnodeSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

/// Assemble the negative-particle system with physical scalings applied:
/// dc/dt = D/(dr^2) A c - 1/(A_cell L_n F a_n dr) B I.
pub fn assemble_anode_system(params: &CellParameters, n_r: usize) -> Result<AnodeSystem> {
    let dr = params.r_n / (n_r as f64 - 1.0);
    let a_n = 3.0 * params.nu_n / params.r_n;
    let diff_scale = params.d_s_n / (dr * dr);
    let flux_scale = -1.0 / (params.a_cell * params.l_n * FARADAY * a_n * dr);
    let a = radial_diffusion_matrix(n_r)? * diff_scale;
    let b = radial_flux_vector(n_r)? * flux_scale;
    Ok(AnodeSystem { a, b })
}

/// Volume-average stoichiometry 3/(c_max R^3) int c r^2 dr of the negative
/// particle. The (eliminated) center value is taken from the first node,
/// consistent with the zero-gradient symmetry condition.
pub fn bulk_stoichiometry(state: &AnodeState, params: &CellParameters) -> f64 {
    let n = state.c_s_n.len();
    let dr = params.r_n / n as f64;
    let mut radii = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    radii.push(0.0);
    values.push(state.c_s_n[0]);
    for l in 1..=n {
        radii.push(l as f64 * dr);
        values.push(state.c_s_n[l - 1]);
    }
    let integral = radial_moment_integral(&radii, &values);
    3.0 / (params.c_s_n_max * params.r_n.powi(3)) * integral
}

/// Negative electrode SOC from bulk stoichiometry (affine, not clamped).
pub fn soc_n(theta_bulk: f64, params: &CellParameters) -> Result<f64> {
    let window = params.theta_n_100 - params.theta_n_0;
    if window == 0.0 {
        return Err(Error::InvalidParameter(
            "degenerate anode stoichiometric window".into(),
        ));
    }
    Ok((theta_bulk - params.theta_n_0) / window)
}

/// Tabulated open circuit potential on a strictly increasing theta grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OcpTable {
    theta: Vec<f64>,
    volts: Vec<f64>,
}

impl OcpTable {
    pub fn new(theta: Vec<f64>, volts: Vec<f64>) -> Result<Self> {
        if theta.len() < 2 || theta.len() != volts.len() {
            return Err(Error::Input(format!(
                "OCP table needs at least 2 matching (theta, volts) pairs, got {} and {}",
                theta.len(),
                volts.len()
            )));
        }
        for w in theta.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Input(format!(
                    "OCP table theta grid must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if theta[0] < 0.0 || *theta.last().unwrap() > 1.0 {
            return Err(Error::Input(
                "OCP table theta grid must lie within [0, 1]".into(),
            ));
        }
        Ok(OcpTable { theta, volts })
    }

    pub fn theta_min(&self) -> f64 {
        self.theta[0]
    }

    pub fn theta_max(&self) -> f64 {
        *self.theta.last().unwrap()
    }

    pub fn grid(&self) -> (&[f64], &[f64]) {
        (&self.theta, &self.volts)
    }

    /// Synthetic graphite-like OCP used by tests and shipped as the example
    /// table. Smooth, monotonically decreasing, with the usual low-voltage
    /// plateaus; not measured data.
    pub fn graphite_placeholder() -> Self {
        let n = 201;
        let mut theta = Vec::with_capacity(n);
        let mut volts = Vec::with_capacity(n);
        for i in 0..n {
            let x = i as f64 / (n - 1) as f64;
            theta.push(x);
            volts.push(graphite_like_potential(x));
        }
        OcpTable { theta, volts }
    }
}

/// Smooth graphite-like potential curve used for the placeholder table.
fn graphite_like_potential(theta: f64) -> f64 {
    0.6379 + 0.5416 * (-305.5309 * theta).exp()
        + 0.044 * (-(theta - 0.1958) / 0.1088).tanh()
        - 0.1978 * ((theta - 1.0571) / 0.0854).tanh()
        - 0.6875 * ((theta + 0.0117) / 0.0529).tanh()
        - 0.0175 * ((theta - 0.5692) / 0.0875).tanh()
}

/// Linear interpolation of the OCP table. Requests outside the tabulated
/// range are an extrapolation error.
pub fn ocp_lookup(table: &OcpTable, theta: f64) -> Result<f64> {
    if !theta.is_finite() || theta < table.theta_min() || theta > table.theta_max() {
        return Err(Error::OcpRange(format!(
            "theta = {theta} outside the tabulated range [{}, {}]",
            table.theta_min(),
            table.theta_max()
        )));
    }
    let idx = match table
        .theta
        .binary_search_by(|t| t.partial_cmp(&theta).unwrap())
    {
        Ok(i) => return Ok(table.volts[i]),
        Err(i) => i,
    };
    let (t0, t1) = (table.theta[idx - 1], table.theta[idx]);
    let (v0, v1) = (table.volts[idx - 1], table.volts[idx]);
    let w = (theta - t0) / (t1 - t0);
    Ok(v0 + w * (v1 - v0))
}
