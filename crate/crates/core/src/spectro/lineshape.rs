/// Derivative lineshape
/// `k [d/dw A(w) cos(phi) + d/dw D(w) sin(phi)] + offset` with absorptive
/// `A = g / (g^2 + dw^2)` and dispersive `D = dw / (g^2 + dw^2)`.
pub fn lineshape(omega: f64, omega0: f64, gamma2: f64, k: f64, phi: f64, offset: f64) -> f64 {
    let dw = omega - omega0;
    let den = gamma2 * gamma2 + dw * dw;
    let den2 = den * den;
    let absorptive = -2.0 * gamma2 * dw / den2;
    let dispersive = (gamma2 * gamma2 - dw * dw) / den2;
    k * (absorptive * phi.cos() + dispersive * phi.sin()) + offset
}

/// Undifferentiated mixture `A cos(phi) + D sin(phi)`.
pub fn lorentzian_mixture(omega: f64, omega0: f64, gamma2: f64, phi: f64) -> f64 {
    let dw = omega - omega0;
    let den = gamma2 * gamma2 + dw * dw;
    (gamma2 * phi.cos() + dw * phi.sin()) / den
}

/// `gamma2 = (sqrt 3 / 2) dw_pp`.
pub fn gamma2_from_pp(delta_omega_pp: f64) -> f64 {
    3f64.sqrt() / 2.0 * delta_omega_pp
}

pub fn pp_from_gamma2(gamma2: f64) -> f64 {
    2.0 * gamma2 / 3f64.sqrt()
}
