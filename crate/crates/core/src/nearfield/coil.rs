use std::f64::consts::PI;

use nalgebra::Vector3;

use super::beam::SINGULAR_RADIUS;
use crate::constants::MU0;
use crate::error::{Error, Result};

/// Rectangular loop in the yz-plane at `x = 0`.
///
/// Current runs `(y_min, z_min) -> (y_max, z_min) -> (y_max, z_max) ->
/// (y_min, z_max)`, so a positive current produces `+x` field at the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopRect {
    pub y_min: f64,
    pub y_max: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl LoopRect {
    /// Loop centered at the origin.
    pub fn centered(width_y: f64, width_z: f64) -> Self {
        Self {
            y_min: -width_y / 2.0,
            y_max: width_y / 2.0,
            z_min: -width_z / 2.0,
            z_max: width_z / 2.0,
        }
    }

    pub fn width_y(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn width_z(&self) -> f64 {
        self.z_max - self.z_min
    }

    pub fn area(&self) -> f64 {
        self.width_y() * self.width_z()
    }

    /// Grown by `margin` on every side.
    pub fn expanded(&self, margin: f64) -> Self {
        Self {
            y_min: self.y_min - margin,
            y_max: self.y_max + margin,
            z_min: self.z_min - margin,
            z_max: self.z_max + margin,
        }
    }

    fn corners(&self) -> [Vector3<f64>; 4] {
        [
            Vector3::new(0.0, self.y_min, self.z_min),
            Vector3::new(0.0, self.y_max, self.z_min),
            Vector3::new(0.0, self.y_max, self.z_max),
            Vector3::new(0.0, self.y_min, self.z_max),
        ]
    }
}

/// Planar pick-up microcoil made of nested rectangular windings.
#[derive(Debug, Clone, PartialEq)]
pub struct CoilSpec {
    pub turns: usize,
    /// Effective area for the induced EMF (m^2).
    pub area: f64,
    /// Ohmic resistance (Ohm).
    pub resistance: f64,
    pub loop_rects: Vec<LoopRect>,
    /// Nominal unitary field magnitude (T/A), kept for reporting.
    pub unitary_ref: f64,
}

impl CoilSpec {
    pub const DEFAULT_INNER: (f64, f64) = (1.1e-3, 0.6e-3);
    pub const DEFAULT_PITCH: f64 = 0.2e-3;
    pub const DEFAULT_AREA: f64 = 1e-6;
    pub const DEFAULT_RESISTANCE: f64 = 1.25;
    pub const DEFAULT_UNITARY_REF: f64 = 2e-3;

    /// `turns` concentric windings, the innermost `inner_y x inner_z`, each
    /// further one offset outward by `pitch`.
    pub fn concentric(turns: usize, inner_y: f64, inner_z: f64, pitch: f64) -> Self {
        let inner = LoopRect::centered(inner_y, inner_z);
        Self {
            turns,
            area: Self::DEFAULT_AREA,
            resistance: Self::DEFAULT_RESISTANCE,
            loop_rects: (0..turns).map(|k| inner.expanded(k as f64 * pitch)).collect(),
            unitary_ref: Self::DEFAULT_UNITARY_REF,
        }
    }

    pub fn with_area(mut self, area: f64) -> Self {
        self.area = area;
        self
    }

    pub fn with_resistance(mut self, resistance: f64) -> Self {
        self.resistance = resistance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.turns == 0 {
            return Err(Error::invalid("turns", "at least one winding is required"));
        }
        if self.loop_rects.len() != self.turns {
            return Err(Error::invalid(
                "loop_rects",
                format!("{} loops given for {} turns", self.loop_rects.len(), self.turns),
            ));
        }
        if !(self.area.is_finite() && self.area > 0.0) {
            return Err(Error::invalid("area", "must be positive"));
        }
        if !(self.resistance > 0.0) {
            return Err(Error::invalid("resistance", "must be positive"));
        }
        for r in &self.loop_rects {
            if !(r.width_y() > 0.0 && r.width_z() > 0.0) {
                return Err(Error::invalid("loop_rects", "degenerate rectangle"));
            }
        }
        Ok(())
    }

    /// Innermost winding, used as the EMF averaging aperture.
    pub fn inner_loop(&self) -> &LoopRect {
        self.loop_rects
            .iter()
            .min_by(|a, b| a.area().total_cmp(&b.area()))
            .expect("coil has at least one loop")
    }
}

impl Default for CoilSpec {
    fn default() -> Self {
        let (y, z) = Self::DEFAULT_INNER;
        Self::concentric(2, y, z, Self::DEFAULT_PITCH)
    }
}

/// Field of a 1 A straight segment from `a` to `b` at `p` (T/A).
pub fn segment_field(a: Vector3<f64>, b: Vector3<f64>, p: Vector3<f64>) -> Result<Vector3<f64>> {
    let r1 = p - a;
    let r2 = p - b;
    let (n1, n2) = (r1.norm(), r2.norm());
    let ab = b - a;
    let s = (r1.dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
    let dist = (r1 - ab * s).norm();
    if dist <= SINGULAR_RADIUS {
        return Err(Error::SingularPoint { distance: dist });
    }
    let denom = n1 * n2 * (n1 * n2 + r1.dot(&r2));
    if denom <= 0.0 {
        // on the extension of the segment
        return Ok(Vector3::zeros());
    }
    Ok(r1.cross(&r2) * (MU0 / (4.0 * PI) * (n1 + n2) / denom))
}

/// Field per ampere of coil current at `point`, summed over all windings.
pub fn coil_unitary_field(coil: &CoilSpec, point: Vector3<f64>) -> Result<Vector3<f64>> {
    let mut b = Vector3::zeros();
    for rect in &coil.loop_rects {
        let c = rect.corners();
        for i in 0..4 {
            b += segment_field(c[i], c[(i + 1) % 4], point)?;
        }
    }
    Ok(b)
}

/// `sum b^2 / sum b`, the average of `b` weighted by itself.
pub fn self_weighted_average(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(
            "values",
            format!("magnitudes must be non-negative, got {v}"),
        ));
    }
    let (sq, sum) = values.iter().fold((0.0, 0.0), |(sq, s), v| (sq + v * v, s + v));
    if sum == 0.0 {
        return Err(Error::AllZero);
    }
    Ok(sq / sum)
}
