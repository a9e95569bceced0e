//! Spectrometer chain end to end: coupled sample -> lock-in -> fit.

use std::f64::consts::PI;

use ebesr::bloch::SpinMaterial;
use ebesr::nearfield::{BeamSpec, CoilSpec, DEFAULT_SAMPLES};
use ebesr::sample::{CoilCoupling, SampleSpec, SignalKind, DEFAULT_APERTURE_SAMPLES};
use ebesr::spectro::{
    differential_spectrum, fit_spectrum, gamma2_from_pp, phase_align, rotate_iq, synthesize_lockin, LockIn, LockInMode,
    SampleResponse, Spectrum,
};
use ebesr::{Complex64, Execution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const B0: f64 = 12.5e-3;

fn response(kind: SignalKind, t2: f64) -> SampleResponse {
    let sample = SampleSpec {
        material: SpinMaterial::new(0.75e27, t2, 293.0),
        ..SampleSpec::default()
    };
    let coupling = CoilCoupling::new(&sample, &CoilSpec::default(), Execution::Parallel).unwrap();
    let table = coupling
        .with_beam(
            &BeamSpec::new(1e-6),
            DEFAULT_SAMPLES,
            DEFAULT_APERTURE_SAMPLES,
            Execution::Parallel,
        )
        .unwrap();
    SampleResponse::new(table, kind, sample.material, B0).unwrap()
}

fn sweep(model: &SampleResponse, span: f64, n: usize) -> Vec<f64> {
    let w0 = model.omega0();
    (0..n).map(|i| w0 + (i as f64 / (n - 1) as f64 - 0.5) * span).collect()
}

#[test]
fn derivative_mode_spectrum_fits_back_exactly() {
    let t2 = 1.0 / gamma2_from_pp(2.0 * PI * 2.1e6);
    let model = response(SignalKind::Total, t2);
    let ws = sweep(&model, 2.0 * PI * 20e6, 401);
    let lockin = LockIn {
        mode: LockInMode::Derivative,
        ..LockIn::default()
    };
    let s = synthesize_lockin(&model, &ws, &lockin, Execution::Parallel).unwrap();
    let fit = fit_spectrum(&s, None).unwrap();
    assert!((fit.omega0 / model.omega0() - 1.0).abs() < 1e-9);
    assert!((fit.t2() / t2 - 1.0).abs() < 1e-6);
}

#[test]
fn beam_off_subtraction_removes_background() {
    let model = response(SignalKind::Direct, 87e-9);
    let ws = sweep(&model, 2.0 * PI * 20e6, 301);
    let lockin = LockIn::default();
    let on = synthesize_lockin(&model, &ws, &lockin, Execution::Parallel).unwrap();
    let bg: Vec<f64> = ws.iter().map(|w| 3e-11 + 1e-11 * (w * 1e-8).sin()).collect();
    let with_bg = Spectrum::new(
        ws.clone(),
        on.values.iter().zip(&bg).map(|(a, b)| a + b).collect(),
        on.quadrature_phase,
        on.modulation,
    )
    .unwrap();
    let off = Spectrum::new(ws.clone(), bg, on.quadrature_phase, on.modulation).unwrap();
    let diff = differential_spectrum(&with_bg, &off).unwrap();
    let direct = fit_spectrum(&on, None).unwrap();
    let recovered = fit_spectrum(&diff, None).unwrap();
    assert!((recovered.omega0 / direct.omega0 - 1.0).abs() < 1e-9);
    assert!((recovered.magnitude / direct.magnitude - 1.0).abs() < 1e-6);
}

/// Two LO phases a quarter period apart give the I and Q spectra; their
/// signed peak values align the signal entirely into Q.
#[test]
fn quadrature_spectra_align_into_q() {
    let model = response(SignalKind::Direct, 87e-9).with_gain(Complex64::from_polar(1.0, 0.6));
    let w0 = model.omega0();
    let ws = sweep(&model, 2.0 * PI * 20e6, 401);
    let peak = |phase: f64| {
        let s = synthesize_lockin(
            &model,
            &ws,
            &LockIn {
                phase,
                ..LockIn::default()
            },
            Execution::Parallel,
        )
        .unwrap();
        let fit = fit_spectrum(&s, None).unwrap();
        // signed peak-to-peak: positive when the low-field lobe is the maximum
        let sign = (fit.eval(w0 - fit.gamma2 / 3f64.sqrt()) - fit.eval(w0 + fit.gamma2 / 3f64.sqrt())).signum();
        sign * fit.magnitude
    };
    let (d_i, d_q) = (peak(0.0), peak(-PI / 2.0));
    let phi = phase_align(d_i, d_q).unwrap();
    let (i, q) = rotate_iq(d_i, d_q, phi);
    assert!(i.abs() < 1e-9 * q.abs());
    assert!(q > 0.0);
}

#[test]
fn monte_carlo_resonance_estimate_is_unbiased() {
    let model = response(SignalKind::Total, 87e-9);
    let ws = sweep(&model, 2.0 * PI * 20e6, 201);
    let clean = synthesize_lockin(&model, &ws, &LockIn::default(), Execution::Parallel).unwrap();
    let sigma = 0.05 * clean.max_abs();
    let noise = Normal::new(0.0, sigma).unwrap();
    let seeds: Vec<u64> = (0..40).collect();
    let omegas = Execution::Parallel.map(&seeds, |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(*seed);
        let noisy = Spectrum::new(
            ws.clone(),
            clean.values.iter().map(|v| v + noise.sample(&mut rng)).collect(),
            clean.quadrature_phase,
            clean.modulation,
        )
        .unwrap();
        fit_spectrum(&noisy, None).unwrap().omega0
    });
    let mean = omegas.iter().sum::<f64>() / omegas.len() as f64;
    let gamma2 = 1.0 / 87e-9;
    assert!((mean - model.omega0()).abs() < 0.02 * gamma2);
}
