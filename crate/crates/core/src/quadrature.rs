//! Radial moment quadrature shared by both particles.

/// Integral of c(r) r^2 dr over the node span, treating the nodal values as
/// a piecewise-linear profile; each linear segment is integrated exactly.
pub fn radial_moment_integral(radii: &[f64], values: &[f64]) -> f64 {
    debug_assert_eq!(radii.len(), values.len());
    let mut total = 0.0;
    for i in 0..radii.len() - 1 {
        let (r0, r1) = (radii[i], radii[i + 1]);
        let (c0, c1) = (values[i], values[i + 1]);
        let h = r1 - r0;
        if h <= 0.0 {
            continue;
        }
        let slope = (c1 - c0) / h;
        let int_r2 = (r1.powi(3) - r0.powi(3)) / 3.0;
        let int_r3 = (r1.powi(4) - r0.powi(4)) / 4.0;
        total += (c0 - slope * r0) * int_r2 + slope * int_r3;
    }
    total
}

/// Like [`radial_moment_integral`] but returning the pair of linear weights
/// (w0, w1) of a single segment, so that its contribution is w0 c0 + w1 c1.
pub fn segment_moment_weights(r0: f64, r1: f64) -> (f64, f64) {
    let h = r1 - r0;
    if h <= 0.0 {
        return (0.0, 0.0);
    }
    let int_r2 = (r1.powi(3) - r0.powi(3)) / 3.0;
    let int_r3 = (r1.powi(4) - r0.powi(4)) / 4.0;
    let lin = (int_r3 - r0 * int_r2) / h;
    (int_r2 - lin, lin)
}
