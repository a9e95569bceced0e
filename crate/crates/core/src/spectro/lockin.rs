use std::f64::consts::PI;

use num_complex::Complex64;

use crate::bloch::{thermal_magnetization, SpinMaterial};
use crate::constants::GAMMA_E_ABS;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::sample::{CouplingTable, SignalKind};

/// Largest allowed `w_m T2` for the quasi-static lock-in model.
pub const QUASI_STATIC_LIMIT: f64 = 0.01;

/// Complex coil signal as a function of drive frequency and of a shift of
/// the resonance (rad/s).
pub trait ResonanceResponse: Sync {
    fn phasor(&self, omega: f64, shift: f64) -> Complex64;
    fn t2(&self) -> f64;
}

/// Single Bloch resonance `amplitude (x - i) / (1 + x^2)` with
/// `x = (w - w0 - shift) T2`. The absorptive part is `-i amplitude` on
/// resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianResponse {
    pub omega0: f64,
    pub t2: f64,
    pub amplitude: Complex64,
}

impl ResonanceResponse for LorentzianResponse {
    fn phasor(&self, omega: f64, shift: f64) -> Complex64 {
        let x = (omega - self.omega0 - shift) * self.t2;
        self.amplitude * Complex64::new(x, -1.0) / (1.0 + x * x)
    }

    fn t2(&self) -> f64 {
        self.t2
    }
}

/// One signal of a coupled sample as the static field is swept through
/// resonance. Frequency prefactors are held at the resonance frequency.
#[derive(Debug, Clone)]
pub struct SampleResponse {
    pub table: CouplingTable,
    pub kind: SignalKind,
    pub material: SpinMaterial,
    pub b0: f64,
    /// Complex gain applied to the coil voltage.
    pub gain: Complex64,
    m0: f64,
    omega_ref: f64,
}

impl SampleResponse {
    pub fn new(table: CouplingTable, kind: SignalKind, material: SpinMaterial, b0: f64) -> Result<Self> {
        material.validate()?;
        if !(b0 > 0.0) {
            return Err(Error::invalid("b0", "must be positive"));
        }
        let omega_ref = GAMMA_E_ABS * b0;
        table.check_saturation(omega_ref, &material)?;
        Ok(Self {
            table,
            kind,
            material,
            b0,
            gain: Complex64::new(1.0, 0.0),
            m0: thermal_magnetization(&material, b0),
            omega_ref,
        })
    }

    pub fn with_gain(mut self, gain: Complex64) -> Self {
        self.gain = gain;
        self
    }

    pub fn omega0(&self) -> f64 {
        self.omega_ref
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }
}

impl ResonanceResponse for SampleResponse {
    fn phasor(&self, omega: f64, shift: f64) -> Complex64 {
        let detuning = omega - self.omega_ref - shift;
        let set = self.table.evaluate(self.omega_ref, detuning, &self.material, self.m0);
        self.gain * set.get(self.kind).value
    }

    fn t2(&self) -> f64 {
        self.material.t2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LockInMode {
    /// First cosine harmonic over one modulation cycle.
    #[default]
    Exact,
    /// Small-modulation limit, `|gamma| A_m ds/dw0`.
    Derivative,
}

/// Field-modulation lock-in settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockIn {
    /// Modulation amplitude `A_m` (T).
    pub amplitude: f64,
    /// Modulation angular frequency `w_m` (rad/s).
    pub omega_m: f64,
    /// Local-oscillator phase (rad).
    pub phase: f64,
    pub mode: LockInMode,
    pub cycle_samples: usize,
}

impl Default for LockIn {
    fn default() -> Self {
        Self {
            amplitude: 18e-6,
            omega_m: 2.0 * PI * 1280.0,
            phase: 0.0,
            mode: LockInMode::Exact,
            cycle_samples: 64,
        }
    }
}

impl LockIn {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::invalid("amplitude", "modulation amplitude must be non-negative"));
        }
        if !(self.omega_m > 0.0) {
            return Err(Error::invalid("omega_m", "must be positive"));
        }
        if self.cycle_samples < 64 {
            return Err(Error::invalid("cycle_samples", "at least 64 samples per cycle"));
        }
        if !self.phase.is_finite() {
            return Err(Error::invalid("phase", "must be finite"));
        }
        Ok(())
    }

    /// Lock-in output at one sweep frequency.
    pub fn output<R: ResonanceResponse + ?Sized>(&self, model: &R, omega: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let lo = Complex64::from_polar(1.0, -self.phase);
        let depth = GAMMA_E_ABS * self.amplitude;
        let s = |shift: f64| (lo * model.phasor(omega, shift)).re;
        match self.mode {
            LockInMode::Exact => {
                let n = self.cycle_samples;
                let mut acc = 0.0;
                for k in 0..n {
                    let c = (2.0 * PI * k as f64 / n as f64).cos();
                    acc += s(depth * c) * c;
                }
                2.0 * acc / n as f64
            }
            LockInMode::Derivative => {
                let h = 1e-3 / model.t2();
                depth * (s(h) - s(-h)) / (2.0 * h)
            }
        }
    }
}

/// Sampled lock-in spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub omegas: Vec<f64>,
    pub values: Vec<f64>,
    pub quadrature_phase: f64,
    /// `(A_m, w_m)`.
    pub modulation: (f64, f64),
}

impl Spectrum {
    pub fn new(omegas: Vec<f64>, values: Vec<f64>, quadrature_phase: f64, modulation: (f64, f64)) -> Result<Self> {
        if omegas.is_empty() {
            return Err(Error::EmptyInput);
        }
        if omegas.len() != values.len() {
            return Err(Error::invalid("values", "length differs from omegas"));
        }
        if omegas.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("omegas", "must be strictly increasing"));
        }
        if values.iter().chain(&omegas).any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "non-finite entry"));
        }
        if !(modulation.0 >= 0.0) {
            return Err(Error::invalid("modulation", "amplitude must be non-negative"));
        }
        Ok(Self {
            omegas,
            values,
            quadrature_phase,
            modulation,
        })
    }

    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Lock-in spectrum of `model` over `omegas`.
pub fn synthesize_lockin<R: ResonanceResponse + ?Sized>(
    model: &R,
    omegas: &[f64],
    lockin: &LockIn,
    exec: Execution,
) -> Result<Spectrum> {
    lockin.validate()?;
    let product = lockin.omega_m * model.t2();
    if product > QUASI_STATIC_LIMIT {
        return Err(Error::QuasiStaticViolation { product });
    }
    let values = exec.map(omegas, |w| lockin.output(model, *w));
    Spectrum::new(
        omegas.to_vec(),
        values,
        lockin.phase,
        (lockin.amplitude, lockin.omega_m),
    )
}
