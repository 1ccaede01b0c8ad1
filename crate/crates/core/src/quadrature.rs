//! Triangle quadrature.

/// Symmetric 3-point Gauss rule, exact for polynomials of degree 2.
/// Barycentric points with weights normalised to sum to one.
pub const GAUSS3: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

#[inline]
pub fn map_point(corners: &[[f64; 2]; 3], bary: [f64; 3]) -> [f64; 2] {
    [
        bary[0] * corners[0][0] + bary[1] * corners[1][0] + bary[2] * corners[2][0],
        bary[0] * corners[0][1] + bary[1] * corners[1][1] + bary[2] * corners[2][1],
    ]
}

/// `∫_T f` with the 3-point rule.
pub fn integrate(corners: &[[f64; 2]; 3], area: f64, f: impl Fn([f64; 2]) -> f64) -> f64 {
    GAUSS3
        .iter()
        .map(|&(b, w)| w * f(map_point(corners, b)))
        .sum::<f64>()
        * area
}
