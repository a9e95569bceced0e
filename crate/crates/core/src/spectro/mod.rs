//! Lock-in spectra: synthesis, derivative-lineshape fitting, differential
//! subtraction, phase calibration and recovery of the beam-driven signal.

mod calibration;
mod fit;
mod io;
mod lineshape;
mod lockin;
mod recovery;

pub use calibration::{calibration_model, fit_calibration, CalibrationFit, CalibrationModel};
pub use fit::{curve_extrema, fit_data, fit_spectrum, initial_guesses, FitGuess, FitResult};
pub use io::{
    parse_fit_report, read_calibration_csv, read_spectrum_csv, write_calibration_csv, write_spectrum_csv,
    CalibrationData,
};
pub use lineshape::{gamma2_from_pp, lineshape, lorentzian_mixture, pp_from_gamma2};
pub use lockin::{
    synthesize_lockin, LockIn, LockInMode, LorentzianResponse, ResonanceResponse, SampleResponse, Spectrum,
};
pub use recovery::{differential, differential_spectrum, phase_align, recover_beam_signal, rotate_iq, RecoveryParams};

pub use crate::sample::infer_b1x;
