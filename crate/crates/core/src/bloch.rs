//! Thermal magnetization and the small-drive steady state of the Bloch
//! equations, plus a lab-frame RK4 integrator used as a cross-check.
//!
//! Phasor convention: the transverse phasor `P = M_x' - i M_y'` maps to the
//! lab frame as `M_x = Re[P e^{-i w t}]`, `M_y = Re[i P e^{-i w t}]`, which is
//! the same `e^{-i w t}` convention used by every signal phasor downstream.
//! Drive phases enter as `cos(w t + theta)`, so advancing both drive phases by
//! `delta` multiplies `P` by `e^{-i delta}`.

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::constants::{GAMMA_E, GAMMA_E_ABS, HBAR, K_B};
use crate::error::{Error, Result};

/// Upper limit on `gamma^2 B1^2 T1 T2` for the linearized solution.
pub const SATURATION_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinMaterial {
    /// Spin density (1/m^3).
    pub spin_density: f64,
    /// Longitudinal relaxation time (s).
    pub t1: f64,
    /// Transverse relaxation time (s).
    pub t2: f64,
    /// Sample temperature (K).
    pub temperature: f64,
    pub spin: f64,
}

impl SpinMaterial {
    pub const DEFAULT_TEMPERATURE: f64 = 293.0;

    /// Spin-1/2 material with `T1 = T2`.
    pub fn new(spin_density: f64, t2: f64, temperature: f64) -> Self {
        Self {
            spin_density,
            t1: t2,
            t2,
            temperature,
            spin: 0.5,
        }
    }

    pub fn with_t1(mut self, t1: f64) -> Self {
        self.t1 = t1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("spin_density", self.spin_density),
            ("t1", self.t1),
            ("t2", self.t2),
            ("temperature", self.temperature),
            ("spin", self.spin),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.t2 > 2.0 * self.t1 {
            return Err(Error::invalid("t2", "T2 may not exceed 2 T1"));
        }
        Ok(())
    }
}

/// Transverse drive `B1x cos(w t + theta_x) x + B1y cos(w t + theta_y) y`
/// on top of a static `b0` along z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveField {
    pub b1x: f64,
    pub theta_x: f64,
    pub b1y: f64,
    pub theta_y: f64,
    pub omega: f64,
    pub b0: f64,
}

impl DriveField {
    /// Drive whose components are `Re[cx e^{i w t}]` and `Re[cy e^{i w t}]`.
    pub fn from_phasors(cx: Complex64, cy: Complex64, omega: f64, b0: f64) -> Self {
        Self {
            b1x: cx.norm(),
            theta_x: cx.arg(),
            b1y: cy.norm(),
            theta_y: cy.arg(),
            omega,
            b0,
        }
    }

    pub fn x_phasor(&self) -> Complex64 {
        Complex64::from_polar(self.b1x, self.theta_x)
    }

    pub fn y_phasor(&self) -> Complex64 {
        Complex64::from_polar(self.b1y, self.theta_y)
    }

    /// `w - w0` with `w0 = |gamma_e| B0`.
    pub fn detuning(&self) -> f64 {
        self.omega - GAMMA_E_ABS * self.b0
    }

    pub fn rotating(&self) -> RotatingFrameDrive {
        RotatingFrameDrive::from_drive(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b1x >= 0.0 && self.b1y >= 0.0) {
            return Err(Error::invalid("b1", "amplitudes must be non-negative"));
        }
        if !(self.omega > 0.0) {
            return Err(Error::invalid("omega", "must be positive"));
        }
        if !(self.b0 > 0.0) {
            return Err(Error::invalid("b0", "must be positive"));
        }
        if !(self.theta_x.is_finite() && self.theta_y.is_finite()) {
            return Err(Error::invalid("theta", "phases must be finite"));
        }
        Ok(())
    }

    fn at(&self, t: f64) -> Vector3<f64> {
        Vector3::new(
            self.b1x * (self.omega * t + self.theta_x).cos(),
            self.b1y * (self.omega * t + self.theta_y).cos(),
            self.b0,
        )
    }
}

/// Co-rotating drive components in the frame turning at `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotatingFrameDrive {
    pub b1x_rot: f64,
    pub b1y_rot: f64,
}

impl RotatingFrameDrive {
    pub fn from_drive(d: &DriveField) -> Self {
        Self {
            b1x_rot: 0.5 * (d.b1x * d.theta_x.cos() - d.b1y * d.theta_y.sin()),
            b1y_rot: 0.5 * (d.b1x * d.theta_x.sin() + d.b1y * d.theta_y.cos()),
        }
    }

    /// `B1x' + i B1y'`.
    pub fn as_complex(&self) -> Complex64 {
        Complex64::new(self.b1x_rot, self.b1y_rot)
    }
}

/// Rotating-frame transverse magnetization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Magnetization {
    pub mx_rot: f64,
    pub my_rot: f64,
    pub m0: f64,
}

impl Magnetization {
    pub fn transverse_phasor(&self) -> Complex64 {
        transverse_phasor(self)
    }

    /// Lab-frame `(M_x, M_y)` at time `t` for drive frequency `omega`.
    pub fn lab(&self, omega: f64, t: f64) -> (f64, f64) {
        let p = self.transverse_phasor() * Complex64::from_polar(1.0, -omega * t);
        (p.re, (Complex64::i() * p).re)
    }
}

/// `M_x' - i M_y'`.
pub fn transverse_phasor(m: &Magnetization) -> Complex64 {
    Complex64::new(m.mx_rot, -m.my_rot)
}

/// Curie-law magnetization `n gamma^2 hbar^2 S(S+1) B0 / (3 k_B T)`.
pub fn thermal_magnetization(mat: &SpinMaterial, b0: f64) -> f64 {
    let s = mat.spin;
    mat.spin_density * GAMMA_E * GAMMA_E * HBAR * HBAR * s * (s + 1.0) * b0 / (3.0 * K_B * mat.temperature)
}

/// Two-level polarization `hbar w0 / (2 k_B T)`.
pub fn polarization(b0: f64, temperature: f64) -> f64 {
    HBAR * GAMMA_E_ABS * b0 / (2.0 * K_B * temperature)
}

/// `gamma^2 B1^2 T1 T2` with `B1` the larger drive amplitude.
pub fn saturation_parameter(drive: &DriveField, mat: &SpinMaterial) -> f64 {
    let b1 = drive.b1x.max(drive.b1y);
    GAMMA_E * GAMMA_E * b1 * b1 * mat.t1 * mat.t2
}

/// Steady-state transverse phasor for the combined drive `X + iY`, where
/// `X = B1x e^{i theta_x}` and `Y = B1y e^{i theta_y}`.
///
/// Linear in the drive; no saturation check.
pub fn response_phasor(drive_xy: Complex64, detuning: f64, t2: f64, m0: f64) -> Complex64 {
    let x = detuning * t2;
    let k = GAMMA_E * m0 * t2 / (1.0 + x * x);
    Complex64::new(x, -1.0) * drive_xy.conj() * (0.5 * k)
}

/// Small-drive steady state in the frame rotating with the drive.
pub fn steady_state(drive: &DriveField, mat: &SpinMaterial, m0: f64) -> Result<Magnetization> {
    let sat = saturation_parameter(drive, mat);
    if sat > SATURATION_THRESHOLD {
        return Err(Error::SaturationRegime {
            parameter: sat,
            threshold: SATURATION_THRESHOLD,
        });
    }
    let rot = drive.rotating();
    let x = drive.detuning() * mat.t2;
    let k = GAMMA_E * m0 * mat.t2 / (1.0 + x * x);
    let m = Magnetization {
        mx_rot: -k * (rot.b1y_rot - x * rot.b1x_rot),
        my_rot: k * (rot.b1x_rot + x * rot.b1y_rot),
        m0,
    };
    debug_assert!(m.transverse_phasor().norm() <= 1.1 * m0.abs());
    Ok(m)
}

/// Relaxation parameters for the lab-frame integrator; infinite times switch
/// relaxation off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Relaxation {
    pub t1: f64,
    pub t2: f64,
    pub m0: f64,
}

fn bloch_rhs(drive: &DriveField, relax: &Relaxation, t: f64, m: &Vector3<f64>) -> Vector3<f64> {
    let torque = m.cross(&drive.at(t)) * GAMMA_E;
    Vector3::new(
        torque.x - m.x / relax.t2,
        torque.y - m.y / relax.t2,
        torque.z - (m.z - relax.m0) / relax.t1,
    )
}

/// Fixed-step RK4 in the lab frame; `visit` sees the state after each step.
pub fn integrate_lab(
    drive: &DriveField,
    relax: &Relaxation,
    init: Vector3<f64>,
    dt: f64,
    steps: usize,
    mut visit: impl FnMut(usize, f64, &Vector3<f64>),
) -> Vector3<f64> {
    let mut m = init;
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = bloch_rhs(drive, relax, t, &m);
        let k2 = bloch_rhs(drive, relax, t + 0.5 * dt, &(m + k1 * (0.5 * dt)));
        let k3 = bloch_rhs(drive, relax, t + 0.5 * dt, &(m + k2 * (0.5 * dt)));
        let k4 = bloch_rhs(drive, relax, t + dt, &(m + k3 * dt));
        m += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        visit(k + 1, (k + 1) as f64 * dt, &m);
    }
    m
}

/// Integrates the full Bloch equations from thermal equilibrium and
/// demodulates the final drive period into rotating-frame components.
pub fn time_domain_oracle(
    drive: &DriveField,
    mat: &SpinMaterial,
    m0: f64,
    duration: f64,
    dt: f64,
) -> Result<Magnetization> {
    drive.validate()?;
    mat.validate()?;
    let period = 2.0 * std::f64::consts::PI / drive.omega;
    let limit = period / 64.0;
    if dt > limit {
        return Err(Error::StepTooLarge { dt, limit });
    }
    let needed = 10.0 * mat.t1.max(mat.t2);
    if duration < needed {
        return Err(Error::invalid(
            "duration",
            format!("must cover 10 relaxation times ({needed:e} s)"),
        ));
    }
    let spp = (period / dt).ceil() as usize;
    let periods = (duration / period).ceil() as usize;
    let h = period / spp as f64;
    let steps = periods * spp;
    let relax = Relaxation {
        t1: mat.t1,
        t2: mat.t2,
        m0,
    };

    let mut acc = Complex64::default();
    integrate_lab(drive, &relax, Vector3::new(0.0, 0.0, m0), h, steps, |k, t, m| {
        if k > steps - spp {
            acc += Complex64::new(m.x, m.y) * Complex64::from_polar(1.0, -drive.omega * t);
        }
    });
    let mu = acc / spp as f64;
    Ok(Magnetization {
        mx_rot: mu.re,
        my_rot: mu.im,
        m0,
    })
}
