//! Threshold calibration.
//!
//! Given the leading-order entropy form and a tolerance `tol`, pick the
//! acceptance thresholds that maximize region volume subject to the form not
//! exceeding `tol`. The ball case is a quartic root; the two-dimensional
//! ellipse has a Lagrange closed form; a numeric optimizer (augmented
//! Lagrangian in the `u = eps^2` variables, initialized at the ball solution)
//! cross-checks the closed form and covers general dimensions.

use alloc::vec;
use alloc::vec::Vec;

use crate::expansion::REQuadraticForm;
use crate::math;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CalibrateError {
    #[error("entropy form is not positive on the requested directions")]
    DegenerateForm,
    #[error("operation requires a two-dimensional form")]
    DimensionMismatch,
    #[error("optimizer failed to converge within the iteration cap")]
    NonConvergence,
    #[error("tolerance must be nonnegative")]
    InvalidTolerance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Numeric,
}

/// Calibrated thresholds plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub epsilon: Vec<f64>,
    /// Form value at the returned thresholds.
    pub achieved_re: f64,
    /// Region volume: `2 eps` at q = 1, `pi eps_1 eps_2` at q = 2.
    pub volume: f64,
    pub method: Method,
}

fn volume(eps: &[f64]) -> f64 {
    match eps.len() {
        1 => 2.0 * eps[0],
        2 => core::f64::consts::PI * eps[0] * eps[1],
        _ => unreachable!(),
    }
}

fn result(form: &REQuadraticForm, eps: Vec<f64>, method: Method) -> CalibrationResult {
    let achieved_re = form.value(&eps);
    let volume = volume(&eps);
    CalibrationResult { epsilon: eps, achieved_re, volume, method }
}

/// Equal thresholds in every direction: `eps = (tol / C)^{1/4}` with
/// `C` the ball coefficient of the form.
pub fn calibrate_ball(
    form: &REQuadraticForm,
    tol: f64,
) -> Result<CalibrationResult, CalibrateError> {
    if tol < 0.0 || !tol.is_finite() {
        return Err(CalibrateError::InvalidTolerance);
    }
    let c = form.total();
    if !(c > 0.0) {
        return Err(CalibrateError::DegenerateForm);
    }
    let eps = math::powf(tol / c, 0.25);
    Ok(result(form, vec![eps; form.q], Method::ClosedForm))
}

/// Lagrange closed form for the two-dimensional ellipse.
///
/// In `u = eps^2` variables the optimum satisfies `u_1/u_2 = sqrt(b/a)` and
/// sits on the constraint boundary.
pub fn calibrate_ellipse_closed(
    form: &REQuadraticForm,
    tol: f64,
) -> Result<CalibrationResult, CalibrateError> {
    if tol < 0.0 || !tol.is_finite() {
        return Err(CalibrateError::InvalidTolerance);
    }
    if form.q != 2 {
        return Err(CalibrateError::DimensionMismatch);
    }
    let (a, b, c) = (form.diag[0], form.diag[1], form.cross);
    if !(a > 0.0 && b > 0.0) {
        return Err(CalibrateError::DegenerateForm);
    }
    let r = math::sqrt(b / a);
    let u2 = math::sqrt(tol / (2.0 * b + c * r));
    let u1 = r * u2;
    Ok(result(form, vec![math::sqrt(u1), math::sqrt(u2)], Method::ClosedForm))
}

/// Iterative calibration: maximize `prod eps_i` subject to `form <= tol`.
///
/// Augmented Lagrangian on the scaled constraint `g(u)/tol - 1` with a damped
/// Newton inner solver, starting from the (feasible) ball solution. Converges
/// when the constraint violation and the relative objective change both drop
/// below 1e-10; errors out after 200 outer iterations.
pub fn calibrate_ellipse_numeric(
    form: &REQuadraticForm,
    tol: f64,
) -> Result<CalibrationResult, CalibrateError> {
    if tol < 0.0 || !tol.is_finite() {
        return Err(CalibrateError::InvalidTolerance);
    }
    let q = form.q;
    let c = form.total();
    if !(c > 0.0) || (q == 2 && !(form.diag[0] > 0.0 && form.diag[1] > 0.0)) {
        return Err(CalibrateError::DegenerateForm);
    }
    if tol == 0.0 {
        return Ok(result(form, vec![0.0; q], Method::Numeric));
    }

    // constraint and derivatives in u variables
    let g = |u: &[f64]| -> f64 {
        if q == 1 {
            form.diag[0] * u[0] * u[0]
        } else {
            form.diag[0] * u[0] * u[0] + form.diag[1] * u[1] * u[1] + form.cross * u[0] * u[1]
        }
    };
    let grad_g = |u: &[f64]| -> [f64; 2] {
        if q == 1 {
            [2.0 * form.diag[0] * u[0], 0.0]
        } else {
            [
                2.0 * form.diag[0] * u[0] + form.cross * u[1],
                2.0 * form.diag[1] * u[1] + form.cross * u[0],
            ]
        }
    };
    // Hessian of g is constant
    let hess_g = if q == 1 {
        [[2.0 * form.diag[0], 0.0], [0.0, 0.0]]
    } else {
        [
            [2.0 * form.diag[0], form.cross],
            [form.cross, 2.0 * form.diag[1]],
        ]
    };

    let u_ball = math::sqrt(tol / c);
    let mut u = vec![u_ball; q];
    // multiplier estimate from the stationarity condition at the ball point
    let g0 = grad_g(&u);
    let mut lambda = (0..q).map(|i| tol / (u[i] * g0[i])).sum::<f64>() / q as f64;
    let mut rho = 10.0;
    let mut last_obj = u.iter().map(|&x| math::ln(x)).sum::<f64>();
    let mut last_viol = f64::INFINITY;

    for _outer in 0..200 {
        // inner: maximize sum ln u_i - lambda*gh - rho/2*gh^2, gh = g/tol - 1
        for _inner in 0..100 {
            let gh = g(&u) / tol - 1.0;
            let gg = grad_g(&u);
            let mult = lambda + rho * gh;
            let mut grad = [0.0f64; 2];
            for i in 0..q {
                grad[i] = 1.0 / u[i] - mult * gg[i] / tol;
            }
            // Hessian of the augmented objective
            let mut h = [[0.0f64; 2]; 2];
            for i in 0..q {
                for j in 0..q {
                    h[i][j] = -rho * (gg[i] / tol) * (gg[j] / tol) - mult * hess_g[i][j] / tol;
                }
                h[i][i] -= 1.0 / (u[i] * u[i]);
            }
            // Newton step: solve h * step = -grad
            let step = if q == 1 {
                [-grad[0] / h[0][0], 0.0]
            } else {
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                if det == 0.0 {
                    return Err(CalibrateError::NonConvergence);
                }
                [
                    -(h[1][1] * grad[0] - h[0][1] * grad[1]) / det,
                    -(h[0][0] * grad[1] - h[1][0] * grad[0]) / det,
                ]
            };
            // damp to stay in the positive orthant
            let mut t = 1.0;
            for i in 0..q {
                while u[i] + t * step[i] <= 0.0 {
                    t *= 0.5;
                    if t < 1e-16 {
                        return Err(CalibrateError::NonConvergence);
                    }
                }
            }
            let mut scaled = 0.0f64;
            for i in 0..q {
                u[i] += t * step[i];
                scaled = scaled.max(math::abs(step[i]) * t / u[i]);
            }
            if scaled < 1e-14 {
                break;
            }
        }
        let gh = g(&u) / tol - 1.0;
        let obj = u.iter().map(|&x| math::ln(x)).sum::<f64>();
        let viol = math::abs(gh);
        if viol < 1e-10 && math::abs(obj - last_obj) <= 1e-10 * math::abs(obj).max(1.0) {
            let eps: Vec<f64> = u.iter().map(|&x| math::sqrt(x)).collect();
            return Ok(result(form, eps, Method::Numeric));
        }
        lambda += rho * gh;
        if viol > 0.25 * last_viol {
            rho *= 5.0;
        }
        last_viol = viol;
        last_obj = obj;
    }
    Err(CalibrateError::NonConvergence)
}
