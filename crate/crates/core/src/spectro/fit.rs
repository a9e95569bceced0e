use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::lineshape::{lineshape, pp_from_gamma2};
use super::lockin::Spectrum;
use crate::error::{Error, Result};
use crate::lm::{self, LmOptions};

/// Starting point for [`fit_data`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitGuess {
    pub omega0: f64,
    pub gamma2: f64,
    pub k: f64,
    pub phi: f64,
    pub offset: f64,
}

/// Fitted derivative lineshape. Parameter order in `covariance` is
/// `(omega0, gamma2, k, phi, offset)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub omega0: f64,
    pub gamma2: f64,
    pub k: f64,
    pub phi: f64,
    pub offset: f64,
    /// Peak-to-peak of the fitted curve over `omega0 +- 5 gamma2`.
    pub magnitude: f64,
    pub covariance: [[f64; 5]; 5],
    /// Root of the sum of squared residuals.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl FitResult {
    pub fn t2(&self) -> f64 {
        1.0 / self.gamma2
    }

    pub fn delta_omega_pp(&self) -> f64 {
        pp_from_gamma2(self.gamma2)
    }

    pub fn eval(&self, omega: f64) -> f64 {
        lineshape(omega, self.omega0, self.gamma2, self.k, self.phi, self.offset)
    }

    pub fn std_errors(&self) -> [f64; 5] {
        std::array::from_fn(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    pub fn as_guess(&self) -> FitGuess {
        FitGuess {
            omega0: self.omega0,
            gamma2: self.gamma2,
            k: self.k,
            phi: self.phi,
            offset: self.offset,
        }
    }
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

fn golden<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    f(0.5 * (a + b))
}

/// `(min, max)` of `f` on `[lo, hi]`: dense grid refined by golden section.
pub fn curve_extrema<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    let n = 2001;
    let step = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
    let ys: Vec<f64> = xs.iter().map(|x| f(*x)).collect();
    let imax = (0..n).max_by(|a, b| ys[*a].total_cmp(&ys[*b])).unwrap();
    let imin = (0..n).min_by(|a, b| ys[*a].total_cmp(&ys[*b])).unwrap();
    let bracket = |i: usize| (xs[i.saturating_sub(1)], xs[(i + 1).min(n - 1)]);
    let (a, b) = bracket(imax);
    let max = golden(&f, a, b).max(ys[imax]);
    let (a, b) = bracket(imin);
    let min = -golden(&|x| -f(x), a, b);
    (min.min(ys[imin]), max)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn check_data(omegas: &[f64], values: &[f64]) -> Result<()> {
    if omegas.len() != values.len() {
        return Err(Error::invalid("values", "length differs from omegas"));
    }
    if omegas.len() < 8 {
        return Err(Error::DegenerateData(format!(
            "{} points, need at least 8",
            omegas.len()
        )));
    }
    if omegas.iter().chain(values).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateData("non-finite samples".into()));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    if hi - lo <= 1e-12 * hi.abs().max(lo.abs()) || hi == lo {
        return Err(Error::DegenerateData("flat spectrum".into()));
    }
    Ok(())
}

/// Deterministic starting points: two resonance candidates times four
/// quadrants of the mixing phase.
pub fn initial_guesses(omegas: &[f64], values: &[f64]) -> Result<Vec<FitGuess>> {
    check_data(omegas, values)?;
    let n = values.len();
    let offset = median(values);
    let imax = (0..n).max_by(|a, b| values[*a].total_cmp(&values[*b])).unwrap();
    let imin = (0..n).min_by(|a, b| values[*a].total_cmp(&values[*b])).unwrap();
    let ipeak = (0..n)
        .max_by(|a, b| (values[*a] - offset).abs().total_cmp(&(values[*b] - offset).abs()))
        .unwrap();
    let span = omegas[n - 1] - omegas[0];
    let min_step = span / (n - 1) as f64;
    let sep = (omegas[imax] - omegas[imin]).abs().max(2.0 * min_step);
    let gamma2 = 3f64.sqrt() / 2.0 * sep;
    let pp = values[imax] - values[imin];
    // peak-to-peak of the phi = 0 shape is 9 k / (4 sqrt 3 gamma^2)
    let k = pp * gamma2 * gamma2 * 4.0 * 3f64.sqrt() / 9.0;

    let mut centers = vec![0.5 * (omegas[imax] + omegas[imin])];
    if (omegas[ipeak] - centers[0]).abs() > 0.25 * gamma2 {
        centers.push(omegas[ipeak]);
    }
    let mut out = Vec::new();
    for &omega0 in &centers {
        for q in 0..4 {
            out.push(FitGuess {
                omega0,
                gamma2,
                k,
                phi: q as f64 * PI / 2.0,
                offset,
            });
        }
    }
    Ok(out)
}

struct Scaling {
    wc: f64,
    ws: f64,
    ys: f64,
}

impl Scaling {
    fn to_scaled(&self, g: &FitGuess) -> Vec<f64> {
        vec![
            (g.omega0 - self.wc) / self.ws,
            g.gamma2 / self.ws,
            g.k / (self.ws * self.ws * self.ys),
            g.phi,
            g.offset / self.ys,
        ]
    }
}

fn run_lm(omegas: &[f64], values: &[f64], guess: &FitGuess, scale: &Scaling) -> Result<lm::LmSolution> {
    let us: Vec<f64> = omegas.iter().map(|w| (w - scale.wc) / scale.ws).collect();
    let ys: Vec<f64> = values.iter().map(|v| v / scale.ys).collect();
    let residuals = |p: &[f64]| -> Vec<f64> {
        us.iter()
            .zip(&ys)
            .map(|(u, y)| y - lineshape(*u, p[0], p[1], p[2], p[3], p[4]))
            .collect()
    };
    lm::minimize(residuals, &scale.to_scaled(guess), &LmOptions::default())
}

/// Least-squares fit of the derivative lineshape to `(omegas, values)`.
///
/// With no guess, every candidate of [`initial_guesses`] is tried and the
/// lowest residual wins.
pub fn fit_data(omegas: &[f64], values: &[f64], guess: Option<&FitGuess>) -> Result<FitResult> {
    let guesses = match guess {
        Some(g) => {
            check_data(omegas, values)?;
            vec![*g]
        }
        None => initial_guesses(omegas, values)?,
    };
    let ys = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut best: Option<(lm::LmSolution, Scaling)> = None;
    let mut last_err = None;
    for g in &guesses {
        if !(g.gamma2.abs() > 0.0) {
            return Err(Error::invalid("gamma2", "initial width must be non-zero"));
        }
        let scale = Scaling {
            wc: g.omega0,
            ws: g.gamma2.abs(),
            ys,
        };
        match run_lm(omegas, values, g, &scale) {
            Ok(sol) => {
                if best.as_ref().is_none_or(|(b, _)| sol.ssr < b.ssr) {
                    best = Some((sol, scale));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((sol, scale)) = best else {
        return Err(last_err.unwrap_or(Error::NoConvergence { iterations: 0 }));
    };

    let p = &sol.params;
    let omega0 = scale.wc + scale.ws * p[0];
    let mut gamma2 = scale.ws * p[1];
    let mut k = scale.ws * scale.ws * scale.ys * p[2];
    let mut phi = p[3];
    let offset = scale.ys * p[4];
    // parameter-space Jacobian from scaled to reported values
    let mut jac = [scale.ws, scale.ws, scale.ws * scale.ws * scale.ys, 1.0, scale.ys];
    if gamma2 < 0.0 {
        gamma2 = -gamma2;
        phi = PI - phi;
        jac[1] = -jac[1];
        jac[3] = -jac[3];
    }
    if k < 0.0 {
        k = -k;
        phi += PI;
        jac[2] = -jac[2];
    }
    phi = wrap_angle(phi);
    if !(gamma2 > 0.0) || !omega0.is_finite() {
        return Err(Error::DegenerateData("fit collapsed to zero width".into()));
    }

    let span = omegas[omegas.len() - 1] - omegas[0];
    if span < 3.0 * gamma2 {
        return Err(Error::DegenerateData(format!(
            "sweep spans {:.2} linewidths, need at least 3",
            span / gamma2
        )));
    }

    let cov = DMatrix::from_fn(5, 5, |i, j| jac[i] * sol.covariance[(i, j)] * jac[j]);
    let covariance = std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)]));
    let curve = |w: f64| lineshape(w, omega0, gamma2, k, phi, 0.0);
    let (lo, hi) = curve_extrema(curve, omega0 - 5.0 * gamma2, omega0 + 5.0 * gamma2);

    Ok(FitResult {
        omega0,
        gamma2,
        k,
        phi,
        offset,
        magnitude: hi - lo,
        covariance,
        residual_norm: sol.ssr.sqrt() * scale.ys,
        iterations: sol.iterations,
    })
}

pub fn fit_spectrum(spectrum: &Spectrum, guess: Option<&FitGuess>) -> Result<FitResult> {
    fit_data(&spectrum.omegas, &spectrum.values, guess)
}
