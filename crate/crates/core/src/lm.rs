//! Levenberg–Marquardt least squares with Marquardt diagonal scaling and
//! Nielsen damping updates.
//!
//! The solver is model-agnostic: callers supply the residual vector as a
//! function of the parameters. Parameters should be of order one; the
//! spectral fits rescale their variables before calling in.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative step tolerance on the parameter vector.
    pub xtol: f64,
    /// Absolute tolerance on the infinity norm of the gradient.
    pub gtol: f64,
    /// Initial damping relative to the largest diagonal of `J^T J`.
    pub tau: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            xtol: 1e-10,
            gtol: 1e-15,
            tau: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmSolution {
    pub params: Vec<f64>,
    /// `s^2 (J^T J)^-1` with `s^2 = SSR / (m - n)`.
    pub covariance: DMatrix<f64>,
    /// Sum of squared residuals at the solution.
    pub ssr: f64,
    pub iterations: usize,
}

impl LmSolution {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.params.len())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect()
    }
}

fn sum_sq(r: &DVector<f64>) -> f64 {
    let s = r.norm_squared();
    if s.is_finite() {
        s
    } else {
        f64::INFINITY
    }
}

fn eval<F>(f: &F, p: &DVector<f64>, m: usize) -> Result<DVector<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let r = f(p.as_slice());
    if r.len() != m {
        return Err(Error::invalid("residuals", "residual length changed between calls"));
    }
    Ok(DVector::from_vec(r))
}

/// Central-difference Jacobian of the residual vector.
fn jacobian<F>(f: &F, p: &DVector<f64>, m: usize) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut q = p.clone();
    for j in 0..n {
        let h = 6e-6 * p[j].abs().max(1.0);
        q[j] = p[j] + h;
        let plus = eval(f, &q, m)?;
        q[j] = p[j] - h;
        let minus = eval(f, &q, m)?;
        q[j] = p[j];
        jac.set_column(j, &((plus - minus) / (2.0 * h)));
    }
    Ok(jac)
}

fn solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.clone().lu().solve(b)
}

fn inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().try_inverse().unwrap_or_else(|| {
        a.clone()
            .pseudo_inverse(1e-14 * a.amax())
            .unwrap_or_else(|_| DMatrix::from_element(a.nrows(), a.ncols(), f64::NAN))
    })
}

/// Minimizes `sum r_i(p)^2` starting from `p0`.
pub fn minimize<F>(residuals: F, p0: &[f64], opts: &LmOptions) -> Result<LmSolution>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = p0.len();
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut p = DVector::from_column_slice(p0);
    let m = residuals(p.as_slice()).len();
    if m <= n {
        return Err(Error::DegenerateData(format!(
            "{m} residuals cannot determine {n} parameters"
        )));
    }
    let mut r = eval(&residuals, &p, m)?;
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(Error::DegenerateData(
            "non-finite residuals at the initial guess".into(),
        ));
    }

    let mut jac = jacobian(&residuals, &p, m)?;
    let mut jtj = jac.tr_mul(&jac);
    let mut grad = jac.tr_mul(&r);
    let mut mu = opts.tau * jtj.diagonal().max().max(f64::MIN_POSITIVE);
    let mut nu = 2.0;
    let mut converged = grad.amax() <= opts.gtol;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let diag = jtj.diagonal().map(|d| d.max(1e-300));
        let mut lhs = jtj.clone();
        for i in 0..n {
            lhs[(i, i)] += mu * diag[i];
        }
        let Some(step) = solve(&lhs, &(-&grad)) else {
            mu *= nu;
            nu *= 2.0;
            continue;
        };
        if step.norm() <= opts.xtol * (p.norm() + opts.xtol) {
            converged = true;
            break;
        }
        let trial = &p + &step;
        let r_trial = eval(&residuals, &trial, m)?;
        let cost_trial = sum_sq(&r_trial);
        // predicted reduction of 0.5 * ||r||^2
        let predicted = 0.5 * step.dot(&(step.component_mul(&diag) * mu - &grad));
        let rho = 0.5 * (cost - cost_trial) / predicted;
        if cost_trial.is_finite() && rho > 0.0 {
            p = trial;
            r = r_trial;
            cost = cost_trial;
            jac = jacobian(&residuals, &p, m)?;
            jtj = jac.tr_mul(&jac);
            grad = jac.tr_mul(&r);
            mu *= (1.0f64 / 3.0).max(1.0 - (2.0 * rho - 1.0).powi(3));
            nu = 2.0;
            converged = grad.amax() <= opts.gtol || cost == 0.0;
        } else {
            mu *= nu;
            nu *= 2.0;
        }
        if !mu.is_finite() {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence { iterations });
    }

    let dof = (m - n) as f64;
    let covariance = inverse(&jtj) * (cost / dof);
    Ok(LmSolution {
        params: p.as_slice().to_vec(),
        covariance,
        ssr: cost,
        iterations,
    })
}
