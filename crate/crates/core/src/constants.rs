//! CODATA 2018 constants.

/// Physical constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Vacuum permeability (T m / A).
    pub mu0: f64,
    /// Electron gyromagnetic ratio (rad / (s T)), signed (negative).
    pub gamma_e: f64,
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    /// Boltzmann constant (J / K).
    pub k_b: f64,
}

pub const CODATA: PhysicalConstants = PhysicalConstants {
    mu0: 1.256_637_062_12e-6,
    gamma_e: -1.760_859_630_23e11,
    hbar: 1.054_571_817e-34,
    k_b: 1.380_649e-23,
};

pub const MU0: f64 = CODATA.mu0;
pub const GAMMA_E: f64 = CODATA.gamma_e;
pub const HBAR: f64 = CODATA.hbar;
pub const K_B: f64 = CODATA.k_b;

/// |gamma_e|, the magnitude used wherever a Larmor frequency is meant.
pub const GAMMA_E_ABS: f64 = -GAMMA_E;

impl PhysicalConstants {
    pub fn gamma_abs(&self) -> f64 {
        self.gamma_e.abs()
    }
}
