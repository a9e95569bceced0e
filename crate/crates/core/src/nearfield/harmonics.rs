use std::f64::consts::PI;

use nalgebra::Vector2;
use num_complex::Complex64;

use super::beam::{line_field, BeamSpec, FieldVector};
use crate::error::{Error, Result};

/// Default number of samples per modulation period.
pub const DEFAULT_SAMPLES: usize = 4096;

/// Complex Fourier amplitudes of the beam field at one point, with
/// `B(t) = sum_n Re[c_n exp(i n Omega t)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicField {
    pub point: Vector2<f64>,
    pub coeffs_x: Vec<Complex64>,
    pub coeffs_y: Vec<Complex64>,
}

impl HarmonicField {
    pub fn n_max(&self) -> usize {
        self.coeffs_x.len() - 1
    }

    /// `(c_n^x, c_n^y)`.
    pub fn coefficient(&self, n: usize) -> (Complex64, Complex64) {
        (self.coeffs_x[n], self.coeffs_y[n])
    }

    /// Second-harmonic coefficients, the resonant drive at `omega = 2 Omega`.
    pub fn second(&self) -> (Complex64, Complex64) {
        self.coefficient(2)
    }

    /// sqrt(|c_2^x|^2 + |c_2^y|^2).
    pub fn second_magnitude(&self) -> f64 {
        let (x, y) = self.second();
        x.norm().hypot(y.norm())
    }

    /// Truncated series evaluated at modulation phase `Omega t`.
    pub fn reconstruct(&self, phase: f64) -> FieldVector {
        let mut out = FieldVector::default();
        for n in 0..=self.n_max() {
            let e = Complex64::from_polar(1.0, n as f64 * phase);
            out.bx += (self.coeffs_x[n] * e).re;
            out.by += (self.coeffs_y[n] * e).re;
        }
        out
    }

    /// Time-averaged `|B|^2` implied by the retained coefficients.
    pub fn mean_square(&self) -> f64 {
        self.coeffs_x
            .iter()
            .zip(&self.coeffs_y)
            .enumerate()
            .map(|(n, (x, y))| {
                let w = if n == 0 { 1.0 } else { 0.5 };
                w * (x.norm_sqr() + y.norm_sqr())
            })
            .sum()
    }
}

/// Precomputed sampling grid for repeated harmonic extraction.
#[derive(Debug, Clone)]
pub struct HarmonicSampler {
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl HarmonicSampler {
    pub fn new(n_samples: usize) -> Result<Self> {
        if n_samples < 8 {
            return Err(Error::invalid("n_samples", "at least 8 samples are required"));
        }
        let (cos, sin) = (0..n_samples)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / n_samples as f64;
                (a.cos(), a.sin())
            })
            .unzip();
        Ok(Self { cos, sin })
    }

    pub fn n_samples(&self) -> usize {
        self.cos.len()
    }

    pub fn harmonics(&self, spec: &BeamSpec, point: Vector2<f64>, n_max: usize) -> Result<HarmonicField> {
        let n = self.n_samples();
        if n < 8 * n_max {
            return Err(Error::invalid(
                "n_samples",
                format!("{n} samples cannot resolve {n_max} harmonics (need >= 8 per harmonic)"),
            ));
        }
        let scale = spec.field_scale();
        let x0 = spec.center_height();
        let ax = spec.amplitude * spec.tilt.sin();
        let ay = spec.amplitude * spec.tilt.cos();

        let mut samples = Vec::with_capacity(n);
        for &c in &self.cos {
            let beam = Vector2::new(x0 + ax * c, spec.offset + ay * c);
            samples.push(line_field(scale, beam, point)?);
        }

        let mut coeffs_x = Vec::with_capacity(n_max + 1);
        let mut coeffs_y = Vec::with_capacity(n_max + 1);
        for h in 0..=n_max {
            let (mut sx, mut sy) = (Complex64::default(), Complex64::default());
            for (k, b) in samples.iter().enumerate() {
                let idx = (h * k) % n;
                let tw = Complex64::new(self.cos[idx], -self.sin[idx]);
                sx += tw * b.bx;
                sy += tw * b.by;
            }
            let w = if h == 0 { 1.0 } else { 2.0 } / n as f64;
            coeffs_x.push(sx * w);
            coeffs_y.push(sy * w);
        }
        Ok(HarmonicField {
            point,
            coeffs_x,
            coeffs_y,
        })
    }
}

/// Fourier harmonics `c_0..=c_{n_max}` of the beam field at `point`, by
/// uniform sampling of one modulation period.
pub fn harmonics(spec: &BeamSpec, point: Vector2<f64>, n_max: usize, n_samples: usize) -> Result<HarmonicField> {
    HarmonicSampler::new(n_samples)?.harmonics(spec, point, n_max)
}

/// Time-averaged field at `point`.
pub fn dc_field(spec: &BeamSpec, point: Vector2<f64>) -> Result<FieldVector> {
    let h = harmonics(spec, point, 0, DEFAULT_SAMPLES)?;
    Ok(FieldVector {
        bx: h.coeffs_x[0].re,
        by: h.coeffs_y[0].re,
    })
}
