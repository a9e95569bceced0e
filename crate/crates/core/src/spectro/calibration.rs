use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lm::{self, LmOptions};

/// Frequency-dependent LO phase drift times the coil impedance-match
/// envelope: `k cos(a w + theta) / sqrt(((w - w0) / s)^2 + 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationModel {
    pub k: f64,
    /// Phase slope (s).
    pub a: f64,
    pub theta: f64,
    /// Impedance-match center (rad/s).
    pub omega0: f64,
    /// Impedance-match width (rad/s).
    pub s: f64,
}

impl CalibrationModel {
    pub fn envelope(&self, omega: f64) -> f64 {
        let u = (omega - self.omega0) / self.s;
        1.0 / (u * u + 1.0).sqrt()
    }

    /// In-phase value.
    pub fn value(&self, omega: f64) -> f64 {
        calibration_model(omega, self)
    }

    /// `I + iQ = k e^{i(a w + theta)} envelope`.
    pub fn complex(&self, omega: f64) -> Complex64 {
        Complex64::from_polar(self.k * self.envelope(omega), self.a * omega + self.theta)
    }

    /// Removes the frequency-dependent LO rotation from a measured `I + iQ`.
    pub fn compensate(&self, omega: f64, iq: Complex64) -> Complex64 {
        iq * Complex64::from_polar(1.0, -self.a * omega)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0) {
            return Err(Error::invalid("s", "impedance-match width must be positive"));
        }
        Ok(())
    }
}

pub fn calibration_model(omega: f64, cal: &CalibrationModel) -> f64 {
    cal.k * (cal.a * omega + cal.theta).cos() * cal.envelope(omega)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationFit {
    pub model: CalibrationModel,
    /// Order `(k, a, theta, omega0, s)`.
    pub covariance: [[f64; 5]; 5],
    pub residual_norm: f64,
}

// scaled parameters: [k / ys, a ws, theta + a wc, (w0 - wc) / ws, s / ws]
fn scaled_model(p: &[f64], u: f64) -> Complex64 {
    let e = (u - p[3]) / p[4];
    Complex64::from_polar(p[0] / (e * e + 1.0).sqrt(), p[1] * u + p[2])
}

/// Coarse search over slope, center and width with the complex amplitude
/// solved linearly.
fn grid_start(us: &[f64], iq: &[Complex64], q_given: bool) -> [f64; 5] {
    let slopes: Vec<f64> = (0..=320).map(|i| -40.0 + 0.25 * i as f64).collect();
    let centers: Vec<f64> = (0..=30).map(|i| -1.5 + 0.1 * i as f64).collect();
    let widths: Vec<f64> = (0..=10).map(|i| 10f64.powf(-1.5 + 0.25 * i as f64)).collect();
    let mut best = (f64::INFINITY, [1.0, 0.0, 0.0, 0.0, 1.0]);
    let mut env = vec![0.0; us.len()];
    for &u0 in &centers {
        for &s in &widths {
            for (e, u) in env.iter_mut().zip(us) {
                let x = (u - u0) / s;
                *e = 1.0 / (x * x + 1.0).sqrt();
            }
            for &a in &slopes {
                let (amp, cost) = if q_given {
                    // z = c b with b = e^{i a u} env
                    let (mut num, mut den) = (Complex64::default(), 0.0);
                    for ((u, z), e) in us.iter().zip(iq).zip(&env) {
                        let b = Complex64::from_polar(*e, a * u);
                        num += b.conj() * z;
                        den += e * e;
                    }
                    let c = num / den;
                    let cost: f64 = us
                        .iter()
                        .zip(iq)
                        .zip(&env)
                        .map(|((u, z), e)| (z - c * Complex64::from_polar(*e, a * u)).norm_sqr())
                        .sum();
                    (c, cost)
                } else {
                    // y = A cos(a u) env - B sin(a u) env, c = A + iB
                    let (mut scc, mut sss, mut scs, mut syc, mut sys) = (0.0, 0.0, 0.0, 0.0, 0.0);
                    for ((u, z), e) in us.iter().zip(iq).zip(&env) {
                        let c = (a * u).cos() * e;
                        let s = -(a * u).sin() * e;
                        scc += c * c;
                        sss += s * s;
                        scs += c * s;
                        syc += z.re * c;
                        sys += z.re * s;
                    }
                    let det = scc * sss - scs * scs;
                    if det.abs() < 1e-300 {
                        continue;
                    }
                    let ca = (syc * sss - sys * scs) / det;
                    let cb = (sys * scc - syc * scs) / det;
                    let cost: f64 = us
                        .iter()
                        .zip(iq)
                        .zip(&env)
                        .map(|((u, z), e)| {
                            let m = ca * (a * u).cos() * e - cb * (a * u).sin() * e;
                            (z.re - m).powi(2)
                        })
                        .sum();
                    (Complex64::new(ca, cb), cost)
                };
                if cost < best.0 {
                    best = (cost, [amp.norm(), a, amp.arg(), u0, s]);
                }
            }
        }
    }
    best.1
}

/// Fits the calibration model to the in-phase data and, when given, the
/// quadrature data `q = k sin(a w + theta) envelope`. In-phase data alone
/// cannot fix the sign of `a`; it is then reported non-negative.
pub fn fit_calibration(omegas: &[f64], i_vals: &[f64], q_vals: Option<&[f64]>) -> Result<CalibrationFit> {
    let n = omegas.len();
    if n != i_vals.len() || q_vals.is_some_and(|q| q.len() != n) {
        return Err(Error::invalid("calibration", "column lengths differ"));
    }
    if n < 8 {
        return Err(Error::DegenerateData(format!("{n} points, need at least 8")));
    }
    if omegas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("omegas", "must be strictly increasing"));
    }
    let iq: Vec<Complex64> = (0..n)
        .map(|j| Complex64::new(i_vals[j], q_vals.map_or(0.0, |q| q[j])))
        .collect();
    let ys = iq.iter().fold(0.0f64, |m, z| m.max(z.re.abs()).max(z.im.abs()));
    if !(ys > 0.0) || !ys.is_finite() {
        return Err(Error::DegenerateData("calibration data are zero or non-finite".into()));
    }
    let wc = 0.5 * (omegas[0] + omegas[n - 1]);
    let ws = 0.5 * (omegas[n - 1] - omegas[0]);
    let us: Vec<f64> = omegas.iter().map(|w| (w - wc) / ws).collect();
    let zs: Vec<Complex64> = iq.iter().map(|z| z / ys).collect();

    let start = grid_start(&us, &zs, q_vals.is_some());
    let with_q = q_vals.is_some();
    let residuals = |p: &[f64]| -> Vec<f64> {
        let mut r = Vec::with_capacity(if with_q { 2 * n } else { n });
        for (u, z) in us.iter().zip(&zs) {
            let m = scaled_model(p, *u);
            r.push(z.re - m.re);
            if with_q {
                r.push(z.im - m.im);
            }
        }
        r
    };
    let sol = lm::minimize(residuals, &start, &LmOptions::default())?;
    let p = &sol.params;

    let mut k = ys * p[0];
    let a = p[1] / ws;
    let mut theta = p[2] - a * wc;
    // d(physical) / d(scaled), rows (k, a, theta, omega0, s)
    let mut jac = DMatrix::zeros(5, 5);
    jac[(0, 0)] = ys;
    jac[(1, 1)] = 1.0 / ws;
    jac[(2, 2)] = 1.0;
    jac[(2, 1)] = -wc / ws;
    jac[(3, 3)] = ws;
    jac[(4, 4)] = ws;
    if k < 0.0 {
        k = -k;
        theta += PI;
        jac[(0, 0)] = -ys;
    }
    let mut a = a;
    if !with_q && a < 0.0 {
        // cos is even: without Q the slope sign is a convention
        a = -a;
        theta = -theta;
        for c in 0..5 {
            jac[(1, c)] = -jac[(1, c)];
            jac[(2, c)] = -jac[(2, c)];
        }
    }
    let mut s = ws * p[4];
    if s < 0.0 {
        s = -s;
        jac[(4, 4)] = -ws;
    }
    theta = theta.rem_euclid(2.0 * PI);
    if theta > PI {
        theta -= 2.0 * PI;
    }
    let model = CalibrationModel {
        k,
        a,
        theta,
        omega0: wc + ws * p[3],
        s,
    };
    model.validate()?;
    let cov = &jac * &sol.covariance * jac.transpose();
    Ok(CalibrationFit {
        model,
        covariance: std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)])),
        residual_norm: sol.ssr.sqrt() * ys,
    })
}
