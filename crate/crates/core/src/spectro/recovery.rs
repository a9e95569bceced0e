use num_complex::Complex64;

use super::lockin::Spectrum;
use crate::error::{Error, Result};

/// Beam-on minus beam-off.
pub fn differential(on: Complex64, off: Complex64) -> Complex64 {
    on - off
}

/// Pointwise difference of two spectra taken on the same sweep.
pub fn differential_spectrum(on: &Spectrum, off: &Spectrum) -> Result<Spectrum> {
    if on.omegas != off.omegas {
        return Err(Error::invalid("off", "sweep points differ from the beam-on spectrum"));
    }
    let values = on.values.iter().zip(&off.values).map(|(a, b)| a - b).collect();
    Spectrum::new(on.omegas.clone(), values, on.quadrature_phase, on.modulation)
}

/// Rotation `(I, Q) -> (I cos p - Q sin p, I sin p + Q cos p)`, i.e.
/// multiplication of `I + iQ` by `e^{ip}`.
pub fn rotate_iq(i: f64, q: f64, phase: f64) -> (f64, f64) {
    let (s, c) = phase.sin_cos();
    (i * c - q * s, i * s + q * c)
}

/// Angle `atan2(d_I, d_Q)` that rotates the background offsets onto the Q
/// axis. Of the two solutions the one leaving a positive Q is returned.
pub fn phase_align(d_i: f64, d_q: f64) -> Result<f64> {
    if d_i == 0.0 && d_q == 0.0 {
        return Err(Error::BothZero);
    }
    Ok(d_i.atan2(d_q))
}

/// Inputs of the EMF subtraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryParams {
    /// Indirect signal per volt of coil EMF.
    pub alpha: Complex64,
    /// Signal per tesla of drive field (V/T).
    pub r_signal: Complex64,
    /// Self-weighted unitary coil field (T/A).
    pub bu_avg: f64,
    /// Coil resistance (Ohm).
    pub rc: f64,
    /// Rotation applied to the measured signal before subtraction (rad).
    pub phase_offset: f64,
}

impl RecoveryParams {
    /// `alpha = R B_u / (2 R_c)`.
    pub fn from_ratio(r_signal: Complex64, bu_avg: f64, rc: f64, phase_offset: f64) -> Result<Self> {
        Self::check_coil(bu_avg, rc)?;
        Ok(Self {
            alpha: r_signal * bu_avg / (2.0 * rc),
            r_signal,
            bu_avg,
            rc,
            phase_offset,
        })
    }

    /// Takes `alpha` as given (for example from a simulation) and infers `R`.
    pub fn from_alpha(alpha: Complex64, bu_avg: f64, rc: f64, phase_offset: f64) -> Result<Self> {
        Self::check_coil(bu_avg, rc)?;
        Ok(Self {
            alpha,
            r_signal: alpha * 2.0 * rc / bu_avg,
            bu_avg,
            rc,
            phase_offset,
        })
    }

    fn check_coil(bu_avg: f64, rc: f64) -> Result<()> {
        if !(bu_avg > 0.0) {
            return Err(Error::invalid("bu_avg", "must be positive"));
        }
        if !(rc > 0.0) {
            return Err(Error::invalid("rc", "must be positive"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        Self::check_coil(self.bu_avg, self.rc)?;
        let expected = self.r_signal.norm() * self.bu_avg / (2.0 * self.rc);
        if (self.alpha.norm() - expected).abs() > 1e-9 * expected.max(f64::MIN_POSITIVE) {
            return Err(Error::invalid("alpha", "inconsistent with R B_u / (2 R_c)"));
        }
        Ok(())
    }
}

/// `S_beam = S_ESR e^{i phase_offset} - alpha U_EMF`.
pub fn recover_beam_signal(s_esr: Complex64, u_emf: Complex64, params: &RecoveryParams) -> Complex64 {
    debug_assert!(params.validate().is_ok());
    s_esr * Complex64::from_polar(1.0, params.phase_offset) - params.alpha * u_emf
}
