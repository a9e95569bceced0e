//! Voxelized spin sample, reciprocity signal and the coil-EMF feedback path.
//!
//! Signal phasors (voltages, currents, magnetization phasors) use the
//! `Re[S e^{-i w t}]` convention; beam drive coefficients use
//! `Re[c e^{+i w t}]`. A coil current `I` therefore drives the spins with the
//! field phasor `B_u conj(I)`.

use nalgebra::{Vector2, Vector3};
use num_complex::Complex64;

use crate::bloch::{self, SpinMaterial};
use crate::constants::{GAMMA_E, GAMMA_E_ABS};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nearfield::{
    coil_unitary_field, self_weighted_average, BeamSpec, CoilSpec, HarmonicField, HarmonicSampler, DEFAULT_SAMPLES,
};

/// Default number of aperture samples for the coil-averaged beam field.
pub const DEFAULT_APERTURE_SAMPLES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSpec {
    /// Edge lengths along (x, y, z) (m).
    pub dims: [f64; 3],
    pub voxel_size: f64,
    pub material: SpinMaterial,
    /// Center of the sample face nearest the coil (m).
    pub origin_offset: [f64; 3],
}

impl SampleSpec {
    pub const DEFAULT_DIMS: [f64; 3] = [0.7e-3, 1.1e-3, 0.7e-3];
    pub const DEFAULT_VOXEL: f64 = 100e-6;
    pub const DEFAULT_SPIN_DENSITY: f64 = 1.5e27;
    pub const DEFAULT_T2: f64 = 87e-9;

    pub fn new(dims: [f64; 3], voxel_size: f64, material: SpinMaterial) -> Self {
        Self {
            dims,
            voxel_size,
            material,
            origin_offset: [0.0; 3],
        }
    }

    /// Height of the face facing the beam.
    pub fn top(&self) -> f64 {
        self.origin_offset[0] + self.dims[0]
    }

    /// Cross-section in the xy-plane as `(x_min, x_max, y_min, y_max)`.
    pub fn footprint(&self) -> (f64, f64, f64, f64) {
        let [ox, oy, _] = self.origin_offset;
        let [lx, ly, _] = self.dims;
        (ox, ox + lx, oy - ly / 2.0, oy + ly / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dims.iter().all(|d| d.is_finite() && *d > 0.0) {
            return Err(Error::invalid("dims", "edges must be positive"));
        }
        if !(self.voxel_size.is_finite() && self.voxel_size > 0.0) {
            return Err(Error::invalid("voxel_size", "must be positive"));
        }
        self.material.validate()
    }
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self::new(
            Self::DEFAULT_DIMS,
            Self::DEFAULT_VOXEL,
            SpinMaterial::new(
                Self::DEFAULT_SPIN_DENSITY,
                Self::DEFAULT_T2,
                SpinMaterial::DEFAULT_TEMPERATURE,
            ),
        )
    }
}

/// Voxel centers ordered x-major, z fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub centers: Vec<Vector3<f64>>,
    pub volume: f64,
    pub counts: [usize; 3],
}

impl VoxelGrid {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Distinct (x, y) positions; the voxels of column `k` are
    /// `centers[k * nz..(k + 1) * nz]`.
    pub fn columns(&self) -> Vec<Vector2<f64>> {
        self.centers
            .iter()
            .step_by(self.counts[2])
            .map(|c| Vector2::new(c.x, c.y))
            .collect()
    }

    pub fn centroid(&self) -> Vector3<f64> {
        self.centers.iter().sum::<Vector3<f64>>() / self.len() as f64
    }
}

pub fn build_voxel_grid(spec: &SampleSpec) -> Result<VoxelGrid> {
    spec.validate()?;
    let v = spec.voxel_size;
    let counts = spec.dims.map(|d| (d / v).round() as usize);
    if let Some(axis) = counts.iter().position(|c| *c == 0) {
        return Err(Error::BadDiscretization { axis });
    }
    let [ox, oy, oz] = spec.origin_offset;
    let mid = [ox + spec.dims[0] / 2.0, oy, oz];
    let axis_center = |axis: usize, k: usize| mid[axis] + (k as f64 - (counts[axis] as f64 - 1.0) / 2.0) * v;

    let mut centers = Vec::with_capacity(counts.iter().product());
    for i in 0..counts[0] {
        for j in 0..counts[1] {
            for k in 0..counts[2] {
                centers.push(Vector3::new(axis_center(0, i), axis_center(1, j), axis_center(2, k)));
            }
        }
    }
    Ok(VoxelGrid {
        centers,
        volume: v * v * v,
        counts,
    })
}

/// True if the segment swept by the beam crosses the sample cross-section.
pub fn beam_intersects(beam: &BeamSpec, spec: &SampleSpec) -> bool {
    let (a, b) = beam.sweep_extremes();
    let (x0, x1, y0, y1) = spec.footprint();
    // Liang–Barsky clipping of a + s (b - a), s in [0, 1]
    let d = b - a;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for (p, q) in [(-d.x, a.x - x0), (d.x, x1 - a.x), (-d.y, a.y - y0), (d.y, y1 - a.y)] {
        if p == 0.0 {
            if q < 0.0 {
                return false;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
        }
    }
    lo <= hi
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignalKind {
    Direct,
    Indirect,
    Total,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalPhasor {
    pub value: Complex64,
    pub kind: SignalKind,
}

/// Signals of one configuration; `total = direct + indirect`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalSet {
    pub direct: Complex64,
    /// Part of `direct` driven by the x-component of the beam field.
    pub direct_x: Complex64,
    pub indirect: Complex64,
    pub total: Complex64,
    pub u_emf: Complex64,
}

impl SignalSet {
    pub fn get(&self, kind: SignalKind) -> SignalPhasor {
        let value = match kind {
            SignalKind::Direct => self.direct,
            SignalKind::Indirect => self.indirect,
            SignalKind::Total => self.total,
        };
        SignalPhasor { value, kind }
    }

    /// Every phasor multiplied by `s`.
    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            direct: self.direct * s,
            direct_x: self.direct_x * s,
            indirect: self.indirect * s,
            total: self.total * s,
            u_emf: self.u_emf * s,
        }
    }
}

/// Reciprocity voltage of one voxel with magnetization phasor `p`.
fn reciprocity(omega: f64, vv: f64, bu: &Vector3<f64>, p: Complex64) -> Complex64 {
    Complex64::new(0.0, 0.5 * omega * vv) * Complex64::new(bu.x, bu.y) * p
}

/// Voltage induced by one voxel driven with beam-convention phasors `cx`, `cy`.
#[allow(clippy::too_many_arguments)]
pub fn voxel_signal_phasors(
    vv: f64,
    cx: Complex64,
    cy: Complex64,
    bu: &Vector3<f64>,
    mat: &SpinMaterial,
    m0: f64,
    omega: f64,
    detuning: f64,
) -> Result<Complex64> {
    let drive = bloch::DriveField::from_phasors(cx, cy, omega, (omega - detuning) / GAMMA_E_ABS);
    let p = bloch::steady_state(&drive, mat, m0)?.transverse_phasor();
    Ok(reciprocity(omega, vv, bu, p))
}

/// Voltage induced by one voxel driven by the second beam harmonic.
pub fn voxel_signal(
    vv: f64,
    drive: &HarmonicField,
    bu: &Vector3<f64>,
    mat: &SpinMaterial,
    m0: f64,
    omega: f64,
    detuning: f64,
) -> Result<Complex64> {
    let (cx, cy) = drive.second();
    voxel_signal_phasors(vv, cx, cy, bu, mat, m0, omega, detuning)
}

/// Coil-current drive at one voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndirectDrive {
    /// `B_u^x U / (2 R_c)`.
    pub x: Complex64,
    /// `B_u^y U / (2 R_c)`.
    pub y: Complex64,
}

impl IndirectDrive {
    /// `(B_u^x + i B_u^y) U / (2 R_c)`.
    pub fn combined(&self) -> Complex64 {
        self.x + Complex64::i() * self.y
    }

    /// The same field as beam-convention drive phasors.
    pub fn drive_phasors(&self) -> (Complex64, Complex64) {
        (self.x.conj(), self.y.conj())
    }
}

pub fn indirect_driving_field(bu: &Vector3<f64>, u_emf: Complex64, coil: &CoilSpec) -> IndirectDrive {
    let current = u_emf / (2.0 * coil.resistance);
    IndirectDrive {
        x: current * bu.x,
        y: current * bu.y,
    }
}

/// Mean second-harmonic x-field over the inner coil aperture at `x = 0`.
///
/// The beam field does not depend on z, so only the y-extent is sampled.
pub fn aperture_b1x(
    beam: &BeamSpec,
    coil: &CoilSpec,
    aperture_samples: usize,
    sampler: &HarmonicSampler,
) -> Result<Complex64> {
    if aperture_samples < 16 {
        return Err(Error::invalid("aperture_samples", "need at least 16 samples per axis"));
    }
    let rect = coil.inner_loop();
    let step = rect.width_y() / aperture_samples as f64;
    let mut acc = Complex64::default();
    for j in 0..aperture_samples {
        let y = rect.y_min + (j as f64 + 0.5) * step;
        acc += sampler.harmonics(beam, Vector2::new(0.0, y), 2)?.coeffs_x[2];
    }
    Ok(acc / aperture_samples as f64)
}

/// EMF induced in the coil by the second beam harmonic, `i N w A B1x_avg`.
pub fn coil_emf(beam: &BeamSpec, coil: &CoilSpec, omega: f64, aperture_samples: usize) -> Result<Complex64> {
    let sampler = HarmonicSampler::new(DEFAULT_SAMPLES)?;
    let b1x = aperture_b1x(beam, coil, aperture_samples, &sampler)?;
    Ok(emf_from_b1x(b1x, coil, omega))
}

pub fn emf_from_b1x(b1x: Complex64, coil: &CoilSpec, omega: f64) -> Complex64 {
    Complex64::new(0.0, coil.turns as f64 * omega * coil.area) * b1x
}

/// Inverse of [`emf_from_b1x`].
pub fn infer_b1x(u_emf: Complex64, coil: &CoilSpec, omega: f64) -> Complex64 {
    u_emf / Complex64::new(0.0, coil.turns as f64 * omega * coil.area)
}

/// Per-voxel coil coupling of a sample, independent of the beam.
#[derive(Debug, Clone)]
pub struct CoilCoupling {
    pub grid: VoxelGrid,
    pub coil: CoilSpec,
    pub sample: SampleSpec,
    /// Unitary coil field at every voxel center (T/A).
    pub bu: Vec<Vector3<f64>>,
}

impl CoilCoupling {
    pub fn new(sample: &SampleSpec, coil: &CoilSpec, exec: Execution) -> Result<Self> {
        coil.validate()?;
        let grid = build_voxel_grid(sample)?;
        let bu = exec.try_map(&grid.centers, |c| coil_unitary_field(coil, *c))?;
        Ok(Self {
            grid,
            coil: coil.clone(),
            sample: *sample,
            bu,
        })
    }

    /// Self-weighted average of `|B_u|` over the sample.
    pub fn bu_average(&self) -> f64 {
        let mags: Vec<f64> = self.bu.iter().map(|b| b.norm()).collect();
        self_weighted_average(&mags).expect("coil field vanishes over the whole sample")
    }

    /// Couples this sample to `beam`.
    pub fn with_beam(
        &self,
        beam: &BeamSpec,
        n_samples: usize,
        aperture_samples: usize,
        exec: Execution,
    ) -> Result<CouplingTable> {
        beam.validate()?;
        if beam_intersects(beam, &self.sample) {
            return Err(Error::BeamIntersectsSample);
        }
        let sampler = HarmonicSampler::new(n_samples)?;
        let columns = self.grid.columns();
        let drives = exec.try_map(&columns, |p| sampler.harmonics(beam, *p, 2).map(|h| h.second()))?;
        let b1x_avg = aperture_b1x(beam, &self.coil, aperture_samples, &sampler)?;

        let nz = self.grid.counts[2];
        let vv = self.grid.volume;
        let half_i = Complex64::new(0.0, 0.5 * vv);
        let (mut sum_x, mut sum_y, mut sum_bu2) = (Complex64::default(), Complex64::default(), 0.0);
        let mut max_b1: f64 = 0.0;
        for (v, bu) in self.bu.iter().enumerate() {
            let (cx, cy) = drives[v / nz];
            max_b1 = max_b1.max(cx.norm()).max(cy.norm());
            let g = half_i * Complex64::new(bu.x, bu.y);
            // conj(X + iY) split into its x and y parts
            sum_x += g * cx.conj();
            sum_y += g * (Complex64::i() * cy).conj();
            sum_bu2 += bu.x * bu.x + bu.y * bu.y;
        }
        let max_bu = self.bu.iter().map(|b| b.x.hypot(b.y)).fold(0.0, f64::max);
        Ok(CouplingTable {
            sum_x,
            sum_y,
            sum_bu2: half_i * sum_bu2,
            b1x_avg,
            max_b1,
            max_bu,
            turns: self.coil.turns as f64,
            area: self.coil.area,
            resistance: self.coil.resistance,
        })
    }
}

/// Beam- and coil-dependent voxel sums. Because the material and static
/// field are uniform, every signal is one of these sums times a common
/// lineshape factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingTable {
    sum_x: Complex64,
    sum_y: Complex64,
    sum_bu2: Complex64,
    b1x_avg: Complex64,
    max_b1: f64,
    max_bu: f64,
    turns: f64,
    area: f64,
    resistance: f64,
}

impl CouplingTable {
    pub fn b1x_avg(&self) -> Complex64 {
        self.b1x_avg
    }

    pub fn u_emf(&self, omega: f64) -> Complex64 {
        Complex64::new(0.0, self.turns * omega * self.area) * self.b1x_avg
    }

    /// Indirect signal per volt of coil EMF.
    pub fn alpha(&self, omega: f64, detuning: f64, mat: &SpinMaterial, m0: f64) -> Complex64 {
        omega * lineshape(detuning, mat.t2, m0) * self.sum_bu2 / (2.0 * self.resistance)
    }

    /// Fails if the beam or coil drive at `omega` leaves the linear regime.
    pub fn check_saturation(&self, omega: f64, mat: &SpinMaterial) -> Result<()> {
        let b1_ind = self.max_bu * self.u_emf(omega).norm() / (2.0 * self.resistance);
        let b1 = self.max_b1.max(b1_ind);
        let sat = GAMMA_E * GAMMA_E * b1 * b1 * mat.t1 * mat.t2;
        if sat > bloch::SATURATION_THRESHOLD {
            return Err(Error::SaturationRegime {
                parameter: sat,
                threshold: bloch::SATURATION_THRESHOLD,
            });
        }
        Ok(())
    }

    /// Signals with the `w` prefactors evaluated at `omega` and the Bloch
    /// response at `detuning`.
    pub fn signals(&self, omega: f64, detuning: f64, mat: &SpinMaterial, m0: f64) -> Result<SignalSet> {
        self.check_saturation(omega, mat)?;
        Ok(self.evaluate(omega, detuning, mat, m0))
    }

    /// [`Self::signals`] without the saturation check.
    pub fn evaluate(&self, omega: f64, detuning: f64, mat: &SpinMaterial, m0: f64) -> SignalSet {
        let u_emf = self.u_emf(omega);
        let r = omega * lineshape(detuning, mat.t2, m0);
        let direct_x = r * self.sum_x;
        let direct = direct_x + r * self.sum_y;
        let indirect = self.alpha(omega, detuning, mat, m0) * u_emf;
        SignalSet {
            direct,
            direct_x,
            indirect,
            total: direct + indirect,
            u_emf,
        }
    }
}

/// Magnetization phasor per unit of `conj(X + iY)`.
fn lineshape(detuning: f64, t2: f64, m0: f64) -> Complex64 {
    bloch::response_phasor(Complex64::new(1.0, 0.0), detuning, t2, m0)
}

/// Sum of [`voxel_signal`] over the grid for the bare beam drive.
pub fn direct_signal(
    sample: &SampleSpec,
    beam: &BeamSpec,
    coil: &CoilSpec,
    b0: f64,
    omega: f64,
    exec: Execution,
) -> Result<SignalPhasor> {
    let set = total_signal(sample, beam, coil, b0, omega, exec)?;
    Ok(set.get(SignalKind::Direct))
}

/// Direct, indirect and total signal evaluated voxel by voxel through the
/// Bloch steady state.
pub fn total_signal(
    sample: &SampleSpec,
    beam: &BeamSpec,
    coil: &CoilSpec,
    b0: f64,
    omega: f64,
    exec: Execution,
) -> Result<SignalSet> {
    beam.validate()?;
    if beam_intersects(beam, sample) {
        return Err(Error::BeamIntersectsSample);
    }
    let coupling = CoilCoupling::new(sample, coil, exec)?;
    let mat = &sample.material;
    let m0 = bloch::thermal_magnetization(mat, b0);
    let detuning = omega - GAMMA_E_ABS * b0;
    let u_emf = coil_emf(beam, coil, omega, DEFAULT_APERTURE_SAMPLES)?;
    let sampler = HarmonicSampler::new(DEFAULT_SAMPLES)?;
    let columns = coupling.grid.columns();
    let fields = exec.try_map(&columns, |p| sampler.harmonics(beam, *p, 2))?;
    let nz = coupling.grid.counts[2];
    let vv = coupling.grid.volume;
    let zero = Complex64::default();

    let per_voxel = exec.try_map(&(0..coupling.bu.len()).collect::<Vec<_>>(), |&v| {
        let bu = &coupling.bu[v];
        let (cx, cy) = fields[v / nz].second();
        let direct = voxel_signal_phasors(vv, cx, cy, bu, mat, m0, omega, detuning)?;
        let direct_x = voxel_signal_phasors(vv, cx, zero, bu, mat, m0, omega, detuning)?;
        let (ix, iy) = indirect_driving_field(bu, u_emf, coil).drive_phasors();
        let indirect = voxel_signal_phasors(vv, ix, iy, bu, mat, m0, omega, detuning)?;
        Ok::<_, Error>((direct, direct_x, indirect))
    })?;
    let (mut direct, mut direct_x, mut indirect) = (zero, zero, zero);
    for (d, dx, i) in per_voxel {
        direct += d;
        direct_x += dx;
        indirect += i;
    }
    Ok(SignalSet {
        direct,
        direct_x,
        indirect,
        total: direct + indirect,
        u_emf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nearfield::harmonics;
    use std::f64::consts::PI;

    const B0: f64 = 12.5e-3;

    fn omega0() -> f64 {
        GAMMA_E_ABS * B0
    }

    fn beam() -> BeamSpec {
        BeamSpec::new(1e-6)
    }

    #[test]
    fn default_grid_has_539_voxels() {
        let g = build_voxel_grid(&SampleSpec::default()).unwrap();
        assert_eq!(g.counts, [7, 11, 7]);
        assert_eq!(g.len(), 539);
        assert!((g.volume - 1e-12).abs() < 1e-24);
        let c = g.centroid();
        assert!((c - Vector3::new(0.35e-3, 0.0, 0.0)).norm() < 1e-12);
        assert_eq!(g.columns().len(), 77);
        let xs: Vec<f64> = g.centers.iter().map(|c| c.x).collect();
        assert!((xs.iter().cloned().fold(f64::INFINITY, f64::min) - 0.05e-3).abs() < 1e-15);
    }

    #[test]
    fn single_voxel_grid() {
        let s = SampleSpec {
            dims: [0.1e-3; 3],
            ..SampleSpec::default()
        };
        let g = build_voxel_grid(&s).unwrap();
        assert_eq!(g.len(), 1);
        assert!((g.volume - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn zero_voxels_is_an_error() {
        let mut s = SampleSpec::default();
        s.dims[1] = 0.04e-3;
        assert_eq!(build_voxel_grid(&s), Err(Error::BadDiscretization { axis: 1 }));
    }

    #[test]
    fn intersection_detection() {
        let s = SampleSpec::default();
        assert!(!beam_intersects(&beam(), &s));
        // deflection swings into the sample
        let steep = beam().with_tilt(PI / 2.0 - 0.1).with_standoff(0.5e-3);
        assert!(beam_intersects(&steep, &s));
        let inside = beam()
            .with_sample_height(0.5e-3)
            .with_standoff(0.1e-3)
            .with_amplitude(0.0);
        assert!(beam_intersects(&inside, &s));
        let err = CoilCoupling::new(&s, &CoilSpec::default(), Execution::Sequential)
            .unwrap()
            .with_beam(&steep, 256, 32, Execution::Sequential)
            .unwrap_err();
        assert_eq!(err, Error::BeamIntersectsSample);
    }

    #[test]
    fn voxel_signal_trivial_cases() {
        let mat = SampleSpec::default().material;
        let f = harmonics(&beam(), Vector2::new(0.35e-3, 0.0), 2, 512).unwrap();
        let bu = Vector3::new(2e-3, 1e-4, 0.0);
        let w = omega0();
        let s1 = voxel_signal(1e-12, &f, &bu, &mat, 0.4, w, 0.0).unwrap();
        let s2 = voxel_signal(2e-12, &f, &bu, &mat, 0.4, w, 0.0).unwrap();
        assert!(s1.norm() > 0.0);
        assert!((s2 - s1 * 2.0).norm() < 1e-15 * s1.norm());
        assert_eq!(
            voxel_signal(1e-12, &f, &Vector3::zeros(), &mat, 0.4, w, 0.0).unwrap(),
            Complex64::default()
        );
        let z = Complex64::default();
        assert_eq!(voxel_signal_phasors(1e-12, z, z, &bu, &mat, 0.4, w, 0.0).unwrap(), z);
    }

    #[test]
    fn on_resonance_proportional_to_drive_combination() {
        let mat = SampleSpec::default().material;
        let bu = Vector3::new(2e-3, -3e-4, 1e-4);
        let w = omega0();
        let a = Complex64::from_polar(3e-11, 0.4);
        let b = Complex64::from_polar(5e-11, -1.3);
        let s = voxel_signal_phasors(1e-12, a, b, &bu, &mat, 0.4, w, 0.0).unwrap();
        let combo = a.conj() - Complex64::i() * b.conj();
        let ratio = s / combo;
        let a2 = Complex64::from_polar(1e-11, 2.0);
        let b2 = Complex64::from_polar(2e-11, 0.1);
        let s2 = voxel_signal_phasors(1e-12, a2, b2, &bu, &mat, 0.4, w, 0.0).unwrap();
        let ratio2 = s2 / (a2.conj() - Complex64::i() * b2.conj());
        assert!((ratio - ratio2).norm() < 1e-12 * ratio.norm());
    }

    #[test]
    fn emf_arithmetic() {
        let coil = CoilSpec::default();
        let w = 2.0 * PI * 348e6;
        let u = emf_from_b1x(Complex64::new(50e-12, 0.0), &coil, w);
        assert!((u.norm() / 2.2e-7 - 1.0).abs() < 0.02);
        assert!((u.arg() - PI / 2.0).abs() < 1e-12);
        assert!((infer_b1x(u, &coil, w) - Complex64::new(50e-12, 0.0)).norm() < 1e-24);
    }

    #[test]
    fn emf_minimal_on_axis() {
        let coil = CoilSpec::default();
        let w = 2.0 * PI * 348e6;
        let centered = beam().with_offset(0.0).with_tilt(0.0);
        let u0 = coil_emf(&centered, &coil, w, 32).unwrap().norm();
        for d in [0.2e-3, 0.5e-3, 1.0e-3] {
            let u = coil_emf(&centered.with_offset(d), &coil, w, 32).unwrap().norm();
            assert!(u > 1e3 * u0.max(1e-30), "d={d}: {u:e} vs {u0:e}");
        }
        assert!(coil_emf(&centered, &coil, w, 8).is_err());
    }

    #[test]
    fn emf_two_lobes_with_sign_flip() {
        let coil = CoilSpec::default();
        let w = 2.0 * PI * 348e6;
        let b = beam().with_tilt(0.0);
        let emf = |d: f64| coil_emf(&b.with_offset(d), &coil, w, 32).unwrap();
        let ds: Vec<f64> = (-30..=30).map(|i| i as f64 * 0.1e-3).collect();
        let vals: Vec<f64> = ds.iter().map(|d| emf(*d).im).collect();
        let imax = (0..vals.len()).max_by(|a, b| vals[*a].total_cmp(&vals[*b])).unwrap();
        let imin = (0..vals.len()).min_by(|a, b| vals[*a].total_cmp(&vals[*b])).unwrap();
        assert!(vals[imax] > 0.0 && vals[imin] < 0.0);
        assert!(
            (ds[imax] + ds[imin]).abs() < 1e-9,
            "lobes at {} and {}",
            ds[imax],
            ds[imin]
        );
        assert!(ds[imax].abs() > 0.3e-3 && ds[imax].abs() < 2e-3);
    }

    #[test]
    fn indirect_drive_scaling() {
        let coil = CoilSpec::default().with_resistance(1.5);
        let bu = Vector3::new(2e-3, 0.0, 0.0);
        let w = 2.0 * PI * 348e6;
        let b1x = Complex64::new(50e-12, 0.0);
        let u = emf_from_b1x(b1x, &coil, w);
        let f = indirect_driving_field(&bu, u, &coil);
        let ratio = f.combined() / b1x;
        assert!(ratio.norm() > 2.5 && ratio.norm() < 3.5, "{}", ratio.norm());
        assert!((ratio.arg() - PI / 2.0).abs() < 3f64.to_radians());
        let half = indirect_driving_field(&bu, u, &coil.clone().with_resistance(0.75));
        assert!((half.combined() - f.combined() * 2.0).norm() < 1e-15 * f.combined().norm());
        assert_eq!(
            indirect_driving_field(&bu, Complex64::default(), &coil).combined(),
            Complex64::default()
        );
    }

    #[test]
    fn table_matches_voxel_by_voxel_sum() {
        let s = SampleSpec::default();
        let coil = CoilSpec::default();
        let w = omega0();
        let slow = total_signal(&s, &beam(), &coil, B0, w, Execution::Parallel).unwrap();
        let table = CoilCoupling::new(&s, &coil, Execution::Parallel)
            .unwrap()
            .with_beam(&beam(), DEFAULT_SAMPLES, DEFAULT_APERTURE_SAMPLES, Execution::Parallel)
            .unwrap();
        let m0 = bloch::thermal_magnetization(&s.material, B0);
        let fast = table.signals(w, 0.0, &s.material, m0).unwrap();
        for (a, b) in [
            (slow.direct, fast.direct),
            (slow.direct_x, fast.direct_x),
            (slow.indirect, fast.indirect),
            (slow.total, fast.total),
            (slow.u_emf, fast.u_emf),
        ] {
            assert!((a - b).norm() < 1e-10 * a.norm(), "{a} vs {b}");
        }
        assert!((slow.total - slow.direct - slow.indirect).norm() < 1e-12 * slow.total.norm());
    }

    #[test]
    fn open_circuit_and_zero_current() {
        let s = SampleSpec::default();
        let coil = CoilSpec::default().with_resistance(1e30);
        let set = total_signal(&s, &beam(), &coil, B0, omega0(), Execution::Sequential).unwrap();
        assert!(set.indirect.norm() < 1e-20 * set.direct.norm());
        assert!((set.total - set.direct).norm() < 1e-20 * set.direct.norm());
        assert!(beam().with_current(0.0).validate().is_err());
    }

    #[test]
    fn self_consistent_alpha_is_beam_independent() {
        let s = SampleSpec::default();
        let coupling = CoilCoupling::new(&s, &CoilSpec::default(), Execution::Parallel).unwrap();
        let m0 = bloch::thermal_magnetization(&s.material, B0);
        let mut alphas = Vec::new();
        for d in [-0.8e-3, 0.1e-3, 0.6e-3] {
            let t = coupling
                .with_beam(&beam().with_offset(d), 1024, 32, Execution::Parallel)
                .unwrap();
            let set = t.signals(omega0(), 0.0, &s.material, m0).unwrap();
            alphas.push(set.indirect / set.u_emf);
            assert!(
                (set.indirect / set.u_emf - t.alpha(omega0(), 0.0, &s.material, m0)).norm() < 1e-12 * alphas[0].norm()
            );
        }
        for a in &alphas[1..] {
            assert!((a - alphas[0]).norm() < 1e-12 * alphas[0].norm());
        }
    }

    #[test]
    fn bu_average_within_factor_two() {
        let c = CoilCoupling::new(&SampleSpec::default(), &CoilSpec::default(), Execution::Sequential).unwrap();
        let avg = c.bu_average();
        assert!(avg > 1e-3 && avg < 4e-3, "{avg:e}");
        assert!((avg - 2.35e-3).abs() < 0.05e-3, "{avg:e}");
    }
}
