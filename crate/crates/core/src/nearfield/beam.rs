use nalgebra::Vector2;

use crate::constants::MU0;
use crate::error::{Error, Result};

/// Guard radius around the beam line.
pub const SINGULAR_RADIUS: f64 = 1e-9;

/// Geometry and drive of the sinusoidally deflected beam.
///
/// The undeflected beam sits at `x = sample_height + standoff`, `y = offset`.
/// The deflection of amplitude `amplitude` points along `y` rotated by `tilt`
/// into the xy-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamSpec {
    /// Beam current (A).
    pub current: f64,
    /// Deflection angular frequency, half the drive frequency (rad/s).
    pub base_omega: f64,
    /// Deflection amplitude at the sample plane (m).
    pub amplitude: f64,
    /// Height of the undeflected beam above the sample top (m).
    pub standoff: f64,
    /// Lateral beam-center position along y (m).
    pub offset: f64,
    /// Angle of the deflection direction from the y-axis into xy (rad).
    pub tilt: f64,
    /// Height of the sample top above the coil plane (m).
    pub sample_height: f64,
}

impl BeamSpec {
    pub const DEFAULT_AMPLITUDE: f64 = 0.9e-3;
    pub const DEFAULT_TILT_DEG: f64 = 5.0;
    pub const DEFAULT_STANDOFF: f64 = 0.6e-3;
    pub const DEFAULT_OFFSET: f64 = 0.1e-3;
    pub const DEFAULT_SAMPLE_HEIGHT: f64 = 0.7e-3;
    pub const DEFAULT_BASE_OMEGA: f64 = 2.0 * std::f64::consts::PI * 174e6;

    /// Beam with the default geometry and the given current.
    pub fn new(current: f64) -> Self {
        Self {
            current,
            base_omega: Self::DEFAULT_BASE_OMEGA,
            amplitude: Self::DEFAULT_AMPLITUDE,
            standoff: Self::DEFAULT_STANDOFF,
            offset: Self::DEFAULT_OFFSET,
            tilt: Self::DEFAULT_TILT_DEG.to_radians(),
            sample_height: Self::DEFAULT_SAMPLE_HEIGHT,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_standoff(mut self, standoff: f64) -> Self {
        self.standoff = standoff;
        self
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    pub fn with_tilt(mut self, tilt: f64) -> Self {
        self.tilt = tilt;
        self
    }

    pub fn with_current(mut self, current: f64) -> Self {
        self.current = current;
        self
    }

    pub fn with_sample_height(mut self, sample_height: f64) -> Self {
        self.sample_height = sample_height;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(name, format!("must be positive, got {v}")))
            }
        };
        positive("current", self.current)?;
        positive("base_omega", self.base_omega)?;
        positive("standoff", self.standoff)?;
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::invalid("amplitude", "must be non-negative"));
        }
        if !self.offset.is_finite() || !self.tilt.is_finite() || !self.sample_height.is_finite() {
            return Err(Error::invalid("beam", "non-finite geometry"));
        }
        Ok(())
    }

    /// x of the undeflected beam line.
    pub fn center_height(&self) -> f64 {
        self.sample_height + self.standoff
    }

    /// Beam position at deflection phase `phase = base_omega * t`.
    pub fn position_at_phase(&self, phase: f64) -> Vector2<f64> {
        let c = phase.cos();
        Vector2::new(
            self.center_height() + self.amplitude * self.tilt.sin() * c,
            self.offset + self.amplitude * self.tilt.cos() * c,
        )
    }

    /// End points of the straight segment swept by the beam in the xy-plane.
    pub fn sweep_extremes(&self) -> (Vector2<f64>, Vector2<f64>) {
        (
            self.position_at_phase(0.0),
            self.position_at_phase(std::f64::consts::PI),
        )
    }

    /// mu0 I / 2 pi.
    pub(crate) fn field_scale(&self) -> f64 {
        MU0 * self.current / (2.0 * std::f64::consts::PI)
    }
}

/// Field components in the xy-plane (T); the z-component vanishes for an
/// infinite line current along z.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldVector {
    pub bx: f64,
    pub by: f64,
}

impl FieldVector {
    pub fn norm(&self) -> f64 {
        self.bx.hypot(self.by)
    }
}

/// Instantaneous beam line position `(x, y)` at time `t`.
pub fn beam_line_position(spec: &BeamSpec, t: f64) -> Vector2<f64> {
    spec.position_at_phase(spec.base_omega * t)
}

/// Field of the infinite line at `beam` evaluated at `point`, with
/// `scale = mu0 I / 2 pi`.
#[inline]
pub(crate) fn line_field(scale: f64, beam: Vector2<f64>, point: Vector2<f64>) -> Result<FieldVector> {
    let dx = point.x - beam.x;
    let dy = point.y - beam.y;
    let r2 = dx * dx + dy * dy;
    if r2 <= SINGULAR_RADIUS * SINGULAR_RADIUS {
        return Err(Error::SingularPoint { distance: r2.sqrt() });
    }
    Ok(FieldVector {
        bx: -scale * dy / r2,
        by: scale * dx / r2,
    })
}

/// Quasi-static field of the beam at `point` and time `t` (Ampère's law for
/// an infinite straight line).
pub fn field_at(spec: &BeamSpec, point: Vector2<f64>, t: f64) -> Result<FieldVector> {
    line_field(spec.field_scale(), beam_line_position(spec, t), point)
}
