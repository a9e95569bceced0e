//! Scenario files: TOML with a JSON mirror, all quantities in SI units.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ebesr::bloch::SpinMaterial;
use ebesr::constants::GAMMA_E_ABS;
use ebesr::nearfield::{BeamSpec, CoilSpec, DEFAULT_SAMPLES};
use ebesr::sample::{SampleSpec, SignalKind, DEFAULT_APERTURE_SAMPLES};
use ebesr::spectro::{gamma2_from_pp, CalibrationModel, LockIn, LockInMode};
use ebesr::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

mod defaults {
    pub fn amplitude() -> f64 {
        0.9e-3
    }
    pub fn standoff() -> f64 {
        0.6e-3
    }
    pub fn offset() -> f64 {
        0.1e-3
    }
    pub fn tilt_deg() -> f64 {
        5.0
    }
    pub fn base_frequency_hz() -> f64 {
        174e6
    }
    pub fn turns() -> usize {
        2
    }
    pub fn coil_area() -> f64 {
        1e-6
    }
    pub fn resistance() -> f64 {
        1.25
    }
    pub fn inner_width() -> f64 {
        1.1e-3
    }
    pub fn inner_height() -> f64 {
        0.6e-3
    }
    pub fn pitch() -> f64 {
        0.2e-3
    }
    pub fn dims() -> [f64; 3] {
        [0.7e-3, 1.1e-3, 0.7e-3]
    }
    pub fn voxel_size() -> f64 {
        100e-6
    }
    pub fn electron_density() -> f64 {
        1.5e27
    }
    pub fn density_factor() -> f64 {
        0.5
    }
    pub fn temperature() -> f64 {
        293.0
    }
    pub fn b0() -> f64 {
        12.5e-3
    }
    pub fn mod_amplitude() -> f64 {
        18e-6
    }
    pub fn mod_frequency_hz() -> f64 {
        1280.0
    }
    pub fn cycle_samples() -> usize {
        64
    }
    pub fn points() -> usize {
        401
    }
    pub fn span_hz() -> f64 {
        20e6
    }
    pub fn one() -> f64 {
        1.0
    }
    pub fn gain() -> [f64; 2] {
        [1.0, 0.0]
    }
    pub fn rescale_current() -> f64 {
        1e-6
    }
    pub fn harmonic_samples() -> usize {
        super::DEFAULT_SAMPLES
    }
    pub fn aperture_samples() -> usize {
        super::DEFAULT_APERTURE_SAMPLES
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamConfig {
    /// Mean beam current (A). Zero is allowed for beam-off spectra only.
    pub current: f64,
    #[serde(default = "defaults::amplitude")]
    pub amplitude: f64,
    /// Distance h between the undeflected beam and the sample top (m).
    #[serde(default = "defaults::standoff")]
    pub standoff: f64,
    /// Lateral offset d (m).
    #[serde(default = "defaults::offset")]
    pub offset: f64,
    #[serde(default = "defaults::tilt_deg")]
    pub tilt_deg: f64,
    #[serde(default = "defaults::base_frequency_hz")]
    pub base_frequency_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoilConfig {
    #[serde(default = "defaults::turns")]
    pub turns: usize,
    /// Effective winding area for the EMF (m^2).
    #[serde(default = "defaults::coil_area")]
    pub area: f64,
    #[serde(default = "defaults::resistance")]
    pub resistance: f64,
    /// Inner loop extent along y (m).
    #[serde(default = "defaults::inner_width")]
    pub inner_width: f64,
    /// Inner loop extent along z (m).
    #[serde(default = "defaults::inner_height")]
    pub inner_height: f64,
    #[serde(default = "defaults::pitch")]
    pub pitch: f64,
}

impl Default for CoilConfig {
    fn default() -> Self {
        Self {
            turns: defaults::turns(),
            area: defaults::coil_area(),
            resistance: defaults::resistance(),
            inner_width: defaults::inner_width(),
            inner_height: defaults::inner_height(),
            pitch: defaults::pitch(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    /// Edges along (x, y, z) in m; x points from the coil towards the beam.
    #[serde(default = "defaults::dims")]
    pub dims: [f64; 3],
    #[serde(default = "defaults::voxel_size")]
    pub voxel_size: f64,
    #[serde(default = "defaults::electron_density")]
    pub electron_density: f64,
    /// Fraction of `electron_density` that contributes spins.
    #[serde(default = "defaults::density_factor")]
    pub density_factor: f64,
    /// Transverse relaxation time (s). Mutually exclusive with `linewidth_pp_hz`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t2: Option<f64>,
    /// Peak-to-peak linewidth of the derivative line (Hz).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linewidth_pp_hz: Option<f64>,
    /// Defaults to T2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t1: Option<f64>,
    #[serde(default = "defaults::temperature")]
    pub temperature: f64,
    /// Static field (T).
    #[serde(default = "defaults::b0")]
    pub b0: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            dims: defaults::dims(),
            voxel_size: defaults::voxel_size(),
            electron_density: defaults::electron_density(),
            density_factor: defaults::density_factor(),
            t2: None,
            linewidth_pp_hz: None,
            t1: None,
            temperature: defaults::temperature(),
            b0: defaults::b0(),
        }
    }
}

/// Inclusive linear range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + step * i as f64).collect()
    }

    fn validate(&self, field: &str) -> Result<(), CliError> {
        if self.points == 0 {
            return Err(CliError::validation(format!("{field}.points"), "must be at least 1"));
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(CliError::validation(field, "bounds must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SweepConfig {
    /// Drive frequency sweep; bounds default to the resonance +- 10 MHz.
    Frequency {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start_hz: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stop_hz: Option<f64>,
        #[serde(default = "defaults::points")]
        points: usize,
    },
    /// Lateral offset d at the configured standoff.
    Offset {
        d: Range,
    },
    /// Standoff h at the configured offset.
    Standoff {
        h: Range,
    },
    Map {
        d: Range,
        h: Range,
    },
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig::Frequency {
            start_hz: None,
            stop_hz: None,
            points: defaults::points(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeConfig {
    #[default]
    Exact,
    Derivative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockInConfig {
    /// Field modulation amplitude (T).
    #[serde(default = "defaults::mod_amplitude")]
    pub amplitude: f64,
    #[serde(default = "defaults::mod_frequency_hz")]
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
    #[serde(default)]
    pub mode: ModeConfig,
    #[serde(default = "defaults::cycle_samples")]
    pub cycle_samples: usize,
}

impl Default for LockInConfig {
    fn default() -> Self {
        Self {
            amplitude: defaults::mod_amplitude(),
            frequency_hz: defaults::mod_frequency_hz(),
            phase_rad: 0.0,
            mode: ModeConfig::Exact,
            cycle_samples: defaults::cycle_samples(),
        }
    }
}

/// Frequency-dependent leakage shaped like the coil calibration function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RippleConfig {
    pub k: f64,
    pub a: f64,
    pub theta: f64,
    pub center_hz: f64,
    pub width_hz: f64,
}

impl RippleConfig {
    pub fn model(&self) -> CalibrationModel {
        CalibrationModel {
            k: self.k,
            a: self.a,
            theta: self.theta,
            omega0: 2.0 * PI * self.center_hz,
            s: 2.0 * PI * self.width_hz,
        }
    }
}

/// Beam-off background: constant offset plus an optional ripple.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundConfig {
    #[serde(default)]
    pub offset: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ripple: Option<RippleConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoveryConfig {
    /// Measured signal-to-driving-field ratio `[re, im]` in V/T. When absent
    /// the simulator's own ratio is used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<[f64; 2]>,
    #[serde(default)]
    pub phase_offset_rad: f64,
}

/// Multipliers applied to the reported position columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisScale {
    #[serde(default = "defaults::one")]
    pub d: f64,
    #[serde(default = "defaults::one")]
    pub h: f64,
}

impl Default for AxisScale {
    fn default() -> Self {
        Self { d: 1.0, h: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "defaults::harmonic_samples")]
    pub harmonic_samples: usize,
    #[serde(default = "defaults::aperture_samples")]
    pub aperture_samples: usize,
    /// Average field maps over the sample columns instead of the top center.
    #[serde(default)]
    pub voxel_average: bool,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            harmonic_samples: defaults::harmonic_samples(),
            aperture_samples: defaults::aperture_samples(),
            voxel_average: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalConfig {
    Direct,
    Indirect,
    #[default]
    Total,
}

impl From<SignalConfig> for SignalKind {
    fn from(s: SignalConfig) -> Self {
        match s {
            SignalConfig::Direct => SignalKind::Direct,
            SignalConfig::Indirect => SignalKind::Indirect,
            SignalConfig::Total => SignalKind::Total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    /// Complex chain gain `[re, im]` applied to every simulated voltage.
    #[serde(default = "defaults::gain")]
    pub gain: [f64; 2],
    /// Reference current for normalization (A).
    #[serde(default = "defaults::rescale_current")]
    pub rescale_current: f64,
    /// Standard deviation of additive white noise on synthesized spectra (V).
    #[serde(default)]
    pub noise_sigma: f64,
    /// Contribution seen by the spectrometer with the beam on.
    #[serde(default)]
    pub signal: SignalConfig,
    pub beam: BeamConfig,
    #[serde(default)]
    pub coil: CoilConfig,
    #[serde(default)]
    pub sample: SampleConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub lockin: LockInConfig,
    #[serde(default)]
    pub background: BackgroundConfig,
    #[serde(default)]
    pub recovery: RecoveryConfig,
    #[serde(default)]
    pub scale: AxisScale,
    #[serde(default)]
    pub numerics: NumericsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

pub fn parse_config(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Parse {
        source_name: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_str(&text, Format::from_path(path)).map_err(|e| match e {
        CliError::Parse { message, .. } => CliError::Parse {
            source_name: path.display().to_string(),
            message,
        },
        other => other,
    })
}

pub fn parse_str(text: &str, format: Format) -> Result<Scenario, CliError> {
    let parsed: Scenario = match format {
        Format::Toml => toml::from_str(text).map_err(|e| CliError::Parse {
            source_name: "<toml>".into(),
            message: e.to_string(),
        })?,
        Format::Json => serde_json::from_str(text).map_err(|e| CliError::Parse {
            source_name: "<json>".into(),
            message: e.to_string(),
        })?,
    };
    let scenario = parsed.resolve();
    scenario.validate()?;
    Ok(scenario)
}

/// Maps a core validation error onto the config field it came from.
fn core_field(section: &str, err: ebesr::Error) -> CliError {
    match err {
        ebesr::Error::InvalidParameter { name, reason } => CliError::validation(format!("{section}.{name}"), reason),
        other => CliError::validation(section, other.to_string()),
    }
}

impl Scenario {
    /// Fills in defaults that depend on other fields.
    fn resolve(mut self) -> Self {
        if self.sample.t2.is_none() && self.sample.linewidth_pp_hz.is_none() {
            self.sample.t2 = Some(SampleSpec::DEFAULT_T2);
        }
        if let SweepConfig::Frequency { start_hz, stop_hz, .. } = &mut self.sweep {
            let center = GAMMA_E_ABS * self.sample.b0 / (2.0 * PI);
            start_hz.get_or_insert(center - defaults::span_hz() / 2.0);
            stop_hz.get_or_insert(center + defaults::span_hz() / 2.0);
        }
        self
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let b = &self.beam;
        if !(b.current.is_finite() && b.current >= 0.0) {
            return Err(CliError::validation("beam.current", "must be non-negative"));
        }
        if b.current > 0.0 {
            self.beam_spec().validate().map_err(|e| core_field("beam", e))?;
        }
        self.coil_spec().validate().map_err(|e| core_field("coil", e))?;
        let s = &self.sample;
        if s.t2.is_some() && s.linewidth_pp_hz.is_some() {
            return Err(CliError::validation(
                "sample.t2",
                "give either t2 or linewidth_pp_hz, not both",
            ));
        }
        if let Some(t2) = s.t2 {
            if !(t2.is_finite() && t2 > 0.0) {
                return Err(CliError::validation("sample.t2", format!("must be positive, got {t2}")));
            }
        }
        if let Some(w) = s.linewidth_pp_hz {
            if !(w.is_finite() && w > 0.0) {
                return Err(CliError::validation("sample.linewidth_pp_hz", "must be positive"));
            }
        }
        if !(s.density_factor > 0.0 && s.density_factor <= 1.0) {
            return Err(CliError::validation("sample.density_factor", "must lie in (0, 1]"));
        }
        if !(s.b0.is_finite() && s.b0 > 0.0) {
            return Err(CliError::validation("sample.b0", "must be positive"));
        }
        self.sample_spec().validate().map_err(|e| core_field("sample", e))?;

        match &self.sweep {
            SweepConfig::Frequency {
                start_hz,
                stop_hz,
                points,
            } => {
                let (lo, hi) = (start_hz.unwrap_or(f64::NAN), stop_hz.unwrap_or(f64::NAN));
                if !(lo > 0.0 && hi > lo) {
                    return Err(CliError::validation("sweep.start_hz", "need 0 < start_hz < stop_hz"));
                }
                if *points < 2 {
                    return Err(CliError::validation("sweep.points", "need at least 2 points"));
                }
            }
            SweepConfig::Offset { d } => d.validate("sweep.d")?,
            SweepConfig::Standoff { h } => {
                h.validate("sweep.h")?;
                if h.start.min(h.stop) <= 0.0 {
                    return Err(CliError::validation("sweep.h", "standoff must stay positive"));
                }
            }
            SweepConfig::Map { d, h } => {
                d.validate("sweep.d")?;
                h.validate("sweep.h")?;
                if h.start.min(h.stop) <= 0.0 {
                    return Err(CliError::validation("sweep.h", "standoff must stay positive"));
                }
            }
        }

        self.lockin().validate().map_err(|e| core_field("lockin", e))?;
        if let Some(r) = &self.background.ripple {
            r.model().validate().map_err(|e| core_field("background.ripple", e))?;
        }
        if !self.background.offset.is_finite() {
            return Err(CliError::validation("background.offset", "must be finite"));
        }
        if let Some(r) = self.recovery.ratio {
            if !(r[0].is_finite() && r[1].is_finite()) || r == [0.0, 0.0] {
                return Err(CliError::validation("recovery.ratio", "must be finite and non-zero"));
            }
        }
        if !self.gain.iter().all(|g| g.is_finite()) {
            return Err(CliError::validation("gain", "must be finite"));
        }
        if !(self.rescale_current.is_finite() && self.rescale_current > 0.0) {
            return Err(CliError::validation("rescale_current", "must be positive"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(CliError::validation("noise_sigma", "must be non-negative"));
        }
        if !(self.scale.d.is_finite() && self.scale.h.is_finite()) {
            return Err(CliError::validation("scale", "factors must be finite"));
        }
        if self.numerics.harmonic_samples < 16 {
            return Err(CliError::validation("numerics.harmonic_samples", "need at least 16"));
        }
        if self.numerics.aperture_samples == 0 {
            return Err(CliError::validation("numerics.aperture_samples", "must be positive"));
        }
        Ok(())
    }

    /// Beam at the configured (d, h), resting on the sample top.
    pub fn beam_spec(&self) -> BeamSpec {
        let b = &self.beam;
        let mut spec = BeamSpec::new(b.current)
            .with_amplitude(b.amplitude)
            .with_standoff(b.standoff)
            .with_offset(b.offset)
            .with_tilt(b.tilt_deg.to_radians())
            .with_sample_height(self.sample_spec().top());
        spec.base_omega = 2.0 * PI * b.base_frequency_hz;
        spec
    }

    pub fn coil_spec(&self) -> CoilSpec {
        let c = &self.coil;
        CoilSpec::concentric(c.turns, c.inner_width, c.inner_height, c.pitch)
            .with_area(c.area)
            .with_resistance(c.resistance)
    }

    pub fn t2(&self) -> f64 {
        match (self.sample.t2, self.sample.linewidth_pp_hz) {
            (Some(t2), _) => t2,
            (None, Some(pp)) => 1.0 / gamma2_from_pp(2.0 * PI * pp),
            (None, None) => SampleSpec::DEFAULT_T2,
        }
    }

    pub fn material(&self) -> SpinMaterial {
        let s = &self.sample;
        let t2 = self.t2();
        SpinMaterial::new(s.electron_density * s.density_factor, t2, s.temperature).with_t1(s.t1.unwrap_or(t2))
    }

    pub fn sample_spec(&self) -> SampleSpec {
        SampleSpec::new(self.sample.dims, self.sample.voxel_size, self.material())
    }

    pub fn lockin(&self) -> LockIn {
        let l = &self.lockin;
        LockIn {
            amplitude: l.amplitude,
            omega_m: 2.0 * PI * l.frequency_hz,
            phase: l.phase_rad,
            mode: match l.mode {
                ModeConfig::Exact => LockInMode::Exact,
                ModeConfig::Derivative => LockInMode::Derivative,
            },
            cycle_samples: l.cycle_samples,
        }
    }

    pub fn gain(&self) -> Complex64 {
        Complex64::new(self.gain[0], self.gain[1])
    }

    /// Gain times the current normalization; zero current leaves it unscaled.
    pub fn output_scale(&self) -> Complex64 {
        let norm = if self.beam.current > 0.0 {
            self.rescale_current / self.beam.current
        } else {
            1.0
        };
        self.gain() * norm
    }

    pub fn resonance_omega(&self) -> f64 {
        GAMMA_E_ABS * self.sample.b0
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes to JSON")
    }

    /// SHA-256 over the key-sorted compact JSON form.
    pub fn digest(&self) -> String {
        let value = serde_json::to_value(self).expect("scenario serializes to JSON");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}
