use num_complex::Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Solve `dE/dz = i κ σ(z)` from `E(0) = input` by the trapezoid rule.
/// The last entry is the output sample `E(l)`.
pub fn propagate_field(sigma: &[Complex64], input: Complex64, kappa: f64, dz: f64) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); sigma.len()];
    propagate_field_into(sigma, input, kappa, dz, &mut out);
    out
}

pub fn propagate_field_into(
    sigma: &[Complex64],
    input: Complex64,
    kappa: f64,
    dz: f64,
    out: &mut [Complex64],
) {
    if out.is_empty() {
        return;
    }
    let w = I * (0.5 * kappa * dz);
    out[0] = input;
    for j in 1..sigma.len() {
        out[j] = out[j - 1] + w * (sigma[j - 1] + sigma[j]);
    }
}

/// Field seen by the atom at each node: `(E[j-1] + 2E[j] + E[j+1]) / 4`
/// inside, the average with the single neighbour at the ends.
///
/// With this drive and trapezoid weights for `N_exc`, the z-discrete system
/// satisfies `dN/dt = |E(0)|² - |E(l)|²` exactly. Driving with the nodal
/// field instead leaves a residual `(κ dz / 2)² (|σ(l)|² - |σ(0)|²)`.
pub fn drive_field_into(field: &[Complex64], out: &mut [Complex64]) {
    let n = field.len();
    if n < 2 {
        out.copy_from_slice(field);
        return;
    }
    out[0] = 0.5 * (field[0] + field[1]);
    for j in 1..n - 1 {
        out[j] = 0.25 * (field[j - 1] + field[j + 1]) + 0.5 * field[j];
    }
    out[n - 1] = 0.5 * (field[n - 2] + field[n - 1]);
}
