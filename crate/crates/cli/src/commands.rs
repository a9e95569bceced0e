//! Subcommand implementations. The `*_table` functions are pure and are
//! what the tests exercise; [`run`] adds file handling and the worker pool.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use ebesr::bloch::thermal_magnetization;
use ebesr::nearfield::{HarmonicField, HarmonicSampler};
use ebesr::sample::{beam_intersects, build_voxel_grid, CoilCoupling};
use ebesr::spectro::{
    differential_spectrum, fit_calibration, fit_spectrum, read_calibration_csv, read_spectrum_csv, recover_beam_signal,
    synthesize_lockin, write_spectrum_csv, CalibrationFit, FitResult, RecoveryParams, SampleResponse, Spectrum,
};
use ebesr::{Complex64, Execution};
use nalgebra::Vector2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{parse_config, Scenario, SweepConfig};
use crate::error::CliError;
use crate::report::{sidecar, Provenance, RunReport, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    FieldMap,
    Spectrum,
    Sweep,
    Fit,
    Calibrate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FieldMap => "field-map",
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::Fit => "fit",
            Command::Calibrate => "calibrate",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub seed: u64,
}

/// (d, h) positions of a spatial sweep, h outermost for maps.
fn positions(sc: &Scenario, cmd: Command) -> Result<Vec<(f64, f64)>, CliError> {
    let (d0, h0) = (sc.beam.offset, sc.beam.standoff);
    Ok(match &sc.sweep {
        SweepConfig::Offset { d } => d.values().into_iter().map(|d| (d, h0)).collect(),
        SweepConfig::Standoff { h } => h.values().into_iter().map(|h| (d0, h)).collect(),
        SweepConfig::Map { d, h } => {
            let ds = d.values();
            h.values()
                .into_iter()
                .flat_map(|h| ds.iter().map(move |d| (*d, h)))
                .collect()
        }
        SweepConfig::Frequency { .. } => {
            return Err(CliError::Usage(format!(
                "{} needs an offset, standoff or map sweep",
                cmd.name()
            )))
        }
    })
}

pub const FIELD_MAP_COLUMNS: [&str; 7] = ["d_m", "h_m", "b1x_T", "theta_x_rad", "b1y_T", "theta_y_rad", "b2mag_T"];

/// Second-harmonic field at the sample-top center, or averaged over the
/// voxel columns when `numerics.voxel_average` is set.
pub fn field_map_table(sc: &Scenario, exec: Execution) -> Result<Table, CliError> {
    let pts = positions(sc, Command::FieldMap)?;
    let sample = sc.sample_spec();
    let top = sample.top();
    let sampler = HarmonicSampler::new(sc.numerics.harmonic_samples).map_err(CliError::core("harmonic sampler"))?;
    let columns = if sc.numerics.voxel_average {
        build_voxel_grid(&sample)
            .map_err(CliError::core("voxel grid"))?
            .columns()
    } else {
        vec![Vector2::new(top, 0.0)]
    };
    let base = sc.beam_spec();
    let rows = exec.try_map(&pts, |&(d, h)| -> Result<Vec<f64>, CliError> {
        let beam = base.with_offset(d).with_standoff(h);
        if sc.numerics.voxel_average && beam_intersects(&beam, &sample) {
            return Err(CliError::core(format!("d = {d}, h = {h}"))(
                ebesr::Error::BeamIntersectsSample,
            ));
        }
        let (mut cx, mut cy) = (Complex64::default(), Complex64::default());
        for p in &columns {
            let f: HarmonicField = sampler
                .harmonics(&beam, *p, 2)
                .map_err(CliError::core(format!("field at d = {d}, h = {h}")))?;
            let (x, y) = f.second();
            cx += x;
            cy += y;
        }
        cx /= columns.len() as f64;
        cy /= columns.len() as f64;
        Ok(vec![
            d * sc.scale.d,
            h * sc.scale.h,
            cx.norm(),
            cx.arg(),
            cy.norm(),
            cy.arg(),
            (cx.norm_sqr() + cy.norm_sqr()).sqrt(),
        ])
    })?;
    Ok(Table {
        rows,
        ..Table::new(&FIELD_MAP_COLUMNS)
    })
}

pub const SWEEP_COLUMNS: [&str; 12] = [
    "d_m",
    "h_m",
    "s_esr_i_V",
    "s_esr_q_V",
    "u_emf_i_V",
    "u_emf_q_V",
    "s_emf_i_V",
    "s_emf_q_V",
    "s_beam_i_V",
    "s_beam_q_V",
    "direct_i_V",
    "direct_q_V",
];

/// On-resonance signals per position, scaled by gain and current
/// normalization, with the recovered beam signal.
pub fn sweep_table(sc: &Scenario, exec: Execution) -> Result<Table, CliError> {
    let pts = positions(sc, Command::Sweep)?;
    let sample = sc.sample_spec();
    let coil = sc.coil_spec();
    let coupling = CoilCoupling::new(&sample, &coil, exec).map_err(CliError::core("coil coupling"))?;
    let mat = sample.material;
    let w0 = sc.resonance_omega();
    let m0 = thermal_magnetization(&mat, sc.sample.b0);
    let scale = sc.output_scale();
    let base = sc.beam_spec();
    let (ns, na) = (sc.numerics.harmonic_samples, sc.numerics.aperture_samples);
    let phase = sc.recovery.phase_offset_rad;
    let rows = exec.try_map(&pts, |&(d, h)| -> Result<Vec<f64>, CliError> {
        let ctx = || format!("d = {d}, h = {h}");
        let beam = base.with_offset(d).with_standoff(h);
        let table = coupling
            .with_beam(&beam, ns, na, Execution::Sequential)
            .map_err(CliError::core(ctx()))?;
        let set = table
            .signals(w0, 0.0, &mat, m0)
            .map_err(CliError::core(ctx()))?
            .scaled(scale);
        let params = match sc.recovery.ratio {
            Some([re, im]) => {
                RecoveryParams::from_ratio(Complex64::new(re, im), coupling.bu_average(), coil.resistance, phase)
            }
            None => RecoveryParams::from_alpha(
                table.alpha(w0, 0.0, &mat, m0),
                coupling.bu_average(),
                coil.resistance,
                phase,
            ),
        }
        .map_err(CliError::core(ctx()))?;
        let s_emf = params.alpha * set.u_emf;
        let beam_sig = recover_beam_signal(set.total, set.u_emf, &params);
        Ok(vec![
            d * sc.scale.d,
            h * sc.scale.h,
            set.total.re,
            set.total.im,
            set.u_emf.re,
            set.u_emf.im,
            s_emf.re,
            s_emf.im,
            beam_sig.re,
            beam_sig.im,
            set.direct.re,
            set.direct.im,
        ])
    })?;
    Ok(Table {
        rows,
        ..Table::new(&SWEEP_COLUMNS)
    })
}

pub const SPECTRUM_COLUMNS: [&str; 4] = ["omega_rad_s", "beam_on_V", "beam_off_V", "differential_V"];

#[derive(Debug, Clone)]
pub struct SpectrumRun {
    pub table: Table,
    pub differential: Spectrum,
    /// `None` when the differential is identically zero.
    pub fit: Option<FitResult>,
}

pub fn spectrum_run(sc: &Scenario, exec: Execution, seed: u64) -> Result<SpectrumRun, CliError> {
    let SweepConfig::Frequency {
        start_hz: Some(lo),
        stop_hz: Some(hi),
        points,
    } = sc.sweep
    else {
        return Err(CliError::Usage("spectrum needs a frequency sweep".into()));
    };
    let omegas: Vec<f64> = crate::config::Range {
        start: 2.0 * std::f64::consts::PI * lo,
        stop: 2.0 * std::f64::consts::PI * hi,
        points,
    }
    .values();
    let lockin = sc.lockin();
    let modulation = (lockin.amplitude, lockin.omega_m);

    let mut on = if sc.beam.current > 0.0 {
        let sample = sc.sample_spec();
        let coupling = CoilCoupling::new(&sample, &sc.coil_spec(), exec).map_err(CliError::core("coil coupling"))?;
        let table = coupling
            .with_beam(
                &sc.beam_spec(),
                sc.numerics.harmonic_samples,
                sc.numerics.aperture_samples,
                exec,
            )
            .map_err(CliError::core("beam coupling"))?;
        let model = SampleResponse::new(table, sc.signal.into(), sample.material, sc.sample.b0)
            .map_err(CliError::core("sample response"))?
            .with_gain(sc.output_scale());
        synthesize_lockin(&model, &omegas, &lockin, exec)
            .map_err(CliError::core("lock-in synthesis"))?
            .values
    } else {
        vec![0.0; omegas.len()]
    };
    let ripple = sc.background.ripple.map(|r| r.model());
    let mut off: Vec<f64> = omegas
        .iter()
        .map(|w| sc.background.offset + ripple.map_or(0.0, |m| m.value(*w)))
        .collect();
    for (v, b) in on.iter_mut().zip(&off) {
        *v += b;
    }
    if sc.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, sc.noise_sigma).map_err(|e| CliError::validation("noise_sigma", e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in on.iter_mut().chain(off.iter_mut()) {
            *v += noise.sample(&mut rng);
        }
    }

    let spec = |values: Vec<f64>| {
        Spectrum::new(omegas.clone(), values, lockin.phase, modulation).map_err(CliError::core("spectrum"))
    };
    let (on_s, off_s) = (spec(on)?, spec(off)?);
    let differential = differential_spectrum(&on_s, &off_s).map_err(CliError::core("differential"))?;
    let fit = if differential.values.iter().all(|v| *v == 0.0) {
        None
    } else {
        Some(fit_spectrum(&differential, None).map_err(CliError::core("fitting the differential spectrum"))?)
    };
    let rows = (0..omegas.len())
        .map(|i| vec![omegas[i], on_s.values[i], off_s.values[i], differential.values[i]])
        .collect();
    Ok(SpectrumRun {
        table: Table {
            rows,
            ..Table::new(&SPECTRUM_COLUMNS)
        },
        differential,
        fit,
    })
}

fn fit_summary(fit: &FitResult) -> serde_json::Value {
    json!({
        "omega0_rad_s": fit.omega0,
        "gamma2_rad_s": fit.gamma2,
        "t2_s": fit.t2(),
        "phi_rad": fit.phi,
        "magnitude_V": fit.magnitude,
        "residual_norm_V": fit.residual_norm,
    })
}

fn open_input(path: &Path) -> Result<fs::File, CliError> {
    fs::File::open(path).map_err(|e| CliError::Parse {
        source_name: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn fit_file(path: &Path) -> Result<FitResult, CliError> {
    let file = open_input(path)?;
    let spectrum = read_spectrum_csv(file).map_err(CliError::core(path.display().to_string()))?;
    fit_spectrum(&spectrum, None).map_err(CliError::core("fit"))
}

pub fn calibrate_file(path: &Path) -> Result<CalibrationFit, CliError> {
    let file = open_input(path)?;
    let data = read_calibration_csv(file).map_err(CliError::core(path.display().to_string()))?;
    fit_calibration(&data.omegas, &data.i, Some(&data.q)).map_err(CliError::core("calibration fit"))
}

const CAL_NAMES: [&str; 5] = ["k", "a", "theta", "omega0", "s"];

pub fn calibration_report(fit: &CalibrationFit) -> String {
    let m = &fit.model;
    let mut s = String::new();
    for (k, v) in [
        ("k_V", m.k),
        ("a_s", m.a),
        ("theta_rad", m.theta),
        ("omega0_rad_s", m.omega0),
        ("s_rad_s", m.s),
        ("residual_norm_V", fit.residual_norm),
    ] {
        s.push_str(&format!("{k} = {v:e}\n"));
    }
    for (name, row) in CAL_NAMES.iter().zip(&fit.covariance) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&format!("cov_{name} = {}\n", cells.join(",")));
    }
    s
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn config_hash(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn load_scenario(opts: &RunOptions, cmd: Command) -> Result<(Scenario, String), CliError> {
    let path = opts
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage(format!("{} requires --config", cmd.name())))?;
    let scenario = parse_config(path)?;
    Ok((scenario, config_hash(path)?))
}

/// Runs a subcommand inside a pool of `opts.jobs` workers.
pub fn run(cmd: Command, opts: &RunOptions) -> Result<(), CliError> {
    let jobs = opts.jobs.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(io::Error::other(e)))?;
    let exec = if jobs > 1 {
        Execution::Parallel
    } else {
        Execution::Sequential
    };
    pool.install(|| dispatch(cmd, opts, exec, jobs))
}

fn dispatch(cmd: Command, opts: &RunOptions, exec: Execution, jobs: usize) -> Result<(), CliError> {
    let start = Instant::now();
    let mut stdout = io::stdout().lock();
    let (digest, hash, table, text, summary, extra) = match cmd {
        Command::FieldMap | Command::Sweep | Command::Spectrum => {
            let (sc, hash) = load_scenario(opts, cmd)?;
            let mut extra = Vec::new();
            let mut summary = None;
            let mut text = None;
            let table = match cmd {
                Command::FieldMap => field_map_table(&sc, exec)?,
                Command::Sweep => sweep_table(&sc, exec)?,
                _ => {
                    let run = spectrum_run(&sc, exec, opts.seed)?;
                    let mut buf = Vec::new();
                    write_spectrum_csv(&mut buf, &run.differential).map_err(CliError::core("differential CSV"))?;
                    extra.push(("differential.csv", String::from_utf8(buf).expect("CSV is UTF-8")));
                    let report = match &run.fit {
                        Some(fit) => {
                            summary = Some(fit_summary(fit));
                            fit.to_report()
                        }
                        None => {
                            summary = Some(json!({ "fit": "skipped: differential spectrum is identically zero" }));
                            String::new()
                        }
                    };
                    text = Some(report);
                    run.table
                }
            };
            (Some(sc.digest()), Some(hash), Some(table), text, summary, extra)
        }
        Command::Fit | Command::Calibrate => {
            let input = opts
                .input
                .as_deref()
                .ok_or_else(|| CliError::Usage(format!("{} requires --input", cmd.name())))?;
            let (digest, hash) = match &opts.config {
                Some(_) => {
                    let (sc, hash) = load_scenario(opts, cmd)?;
                    (Some(sc.digest()), Some(hash))
                }
                None => (None, None),
            };
            let (text, summary) = if cmd == Command::Fit {
                let fit = fit_file(input)?;
                (fit.to_report(), fit_summary(&fit))
            } else {
                let fit = calibrate_file(input)?;
                let m = fit.model;
                let summary =
                    json!({ "k_V": m.k, "a_s": m.a, "theta_rad": m.theta, "omega0_rad_s": m.omega0, "s_rad_s": m.s });
                (calibration_report(&fit), summary)
            };
            (digest, hash, None, Some(text), Some(summary), Vec::new())
        }
    };

    let report = RunReport {
        command: cmd.name(),
        scenario_digest: digest,
        provenance: Provenance::new(hash, opts.seed, jobs),
        columns: table.as_ref().map(|t| t.columns.clone()).unwrap_or_default(),
        points: table.as_ref().map(|t| t.rows.clone()).unwrap_or_default(),
        summary,
        wall_time_s: start.elapsed().as_secs_f64(),
    };

    match (&opts.out, &table) {
        (Some(out), Some(table)) => {
            write_file(out, &table.to_csv_string())?;
            for (suffix, body) in &extra {
                write_file(&sidecar(out, suffix), body)?;
            }
            if let Some(text) = text.as_deref().filter(|t| !t.is_empty()) {
                write_file(&sidecar(out, "fit.txt"), text)?;
            }
            write_file(&sidecar(out, "report.json"), &report.to_json())?;
        }
        (None, Some(table)) => {
            table.write_csv(&mut stdout)?;
            if let Some(text) = text.as_deref().filter(|t| !t.is_empty()) {
                eprint!("{text}");
            }
        }
        (out, None) => {
            let text = text.unwrap_or_default();
            stdout.write_all(text.as_bytes())?;
            if let Some(out) = out {
                write_file(out, &text)?;
                write_file(&sidecar(out, "report.json"), &report.to_json())?;
            }
        }
    }
    stdout.flush()?;
    Ok(())
}
