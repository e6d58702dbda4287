//! Closed-form predictors: leading-order estimator bias and the asymptotic
//! ellipse-to-ball mean-rejection-rate ratio.
//!
//! Bias predictions share one structure: for an observable `h` the accepted
//! sample's estimator drifts from the posterior mean by `sum_i eps_i^2 C_i`
//! to leading order, where `C_i` is a covariance between `h` and the mean-zero
//! weight function of component `i` (the same weights that drive the
//! relative-entropy expansion). For the normal model the coefficients are
//! assembled from [`NormalWeights`], which carries the full marginal shape of
//! the statistic's distribution; a flat-normalizer shortcut gets both the
//! magnitude and, for the mean, the sign of the bias wrong.

use alloc::vec::Vec;

use crate::expansion::{EtaMoments, NormalObservable, NormalWeights};
use crate::models::{GammaParams, ModelError, NormalModel};

/// What a [`BiasPrediction`] is about.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableTag {
    /// Posterior mean of mu (normal model).
    Mean,
    /// Posterior mean of sigma^2 (normal model).
    Variance,
    /// Posterior mean of the rate theta (exponential model).
    Rate,
    /// Caller-supplied observable through [`bias_generic`].
    Custom,
}

/// Leading-order bias of an idealized accepted-sample estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasPrediction {
    /// Per-component coefficients `C_i`.
    pub coefficients: Vec<f64>,
    /// `sum_i eps_i^2 C_i`.
    pub predicted_bias: f64,
    pub observable: ObservableTag,
}

fn assemble(coefficients: Vec<f64>, eps: &[f64], observable: ObservableTag) -> BiasPrediction {
    assert_eq!(coefficients.len(), eps.len(), "threshold dimension mismatch");
    let predicted_bias = coefficients.iter().zip(eps).map(|(c, e)| c * e * e).sum();
    BiasPrediction { coefficients, predicted_bias, observable }
}

/// Bias of the mu estimator in the normal model.
///
/// Coefficients are `E[mu w_i / f_T] / (2(q+2))` with the exact weight
/// functions in the observed-statistic coordinates. The second coefficient
/// vanishes identically: the s2-direction weight is even in `mu - mu_n`.
pub fn bias_normal_mean(
    model: &NormalModel,
    stat: [f64; 2],
    eps: &[f64; 2],
) -> Result<BiasPrediction, ModelError> {
    let w = NormalWeights::new(model, stat)?;
    let c1 = w.observable_mean(0, NormalObservable::Mu)? / 8.0;
    let c2 = w.observable_mean(1, NormalObservable::Mu)? / 8.0;
    Ok(assemble(alloc::vec![c1, c2], eps, ObservableTag::Mean))
}

/// Bias of the sigma^2 = 1/lambda estimator in the normal model.
///
/// Requires `alpha_n > 1` for the posterior mean of `1/lambda` to exist.
pub fn bias_normal_variance(
    model: &NormalModel,
    stat: [f64; 2],
    eps: &[f64; 2],
) -> Result<BiasPrediction, ModelError> {
    let w = NormalWeights::new(model, stat)?;
    let c1 = w.observable_mean(0, NormalObservable::Sigma2)? / 8.0;
    let c2 = w.observable_mean(1, NormalObservable::Sigma2)? / 8.0;
    Ok(assemble(alloc::vec![c1, c2], eps, ObservableTag::Variance))
}

/// Bias of the rate estimator in the exponential model:
/// `C(tau*) = (n^2/3)(alpha_n/beta_n^2) [ (alpha_n+1)/beta_n - ((n-1)/n)/tau* ]`.
pub fn bias_exponential_rate(
    post: &GammaParams,
    n: u64,
    tau_star: f64,
    eps: f64,
) -> Result<BiasPrediction, ModelError> {
    if !(tau_star > 0.0) {
        return Err(ModelError::InvalidStatistic("tau must be positive"));
    }
    let nf = n as f64;
    let (a, b) = (post.alpha, post.beta);
    let c = nf * nf / 3.0 * (a / (b * b)) * ((a + 1.0) / b - (nf - 1.0) / (nf * tau_star));
    Ok(assemble(alloc::vec![c], &[eps], ObservableTag::Rate))
}

/// Shorthand `1/(3 tau*^3)` quoted as the large-n limit of the exponential
/// bias coefficient. Qualitative only: the exact coefficient at a unit prior
/// tends to twice this value, so nothing asserts convergence to it.
pub fn exponential_bias_large_n(tau_star: f64) -> f64 {
    1.0 / (3.0 * tau_star * tau_star * tau_star)
}

/// Generic bias coefficients from a natural-parameter moment table:
///
/// ```text
/// C_i = n^2/(2(q+2)) * ( Cov(h, eta_i^2) + 2 c_i Cov(h, eta_i) )
/// ```
///
/// `h_moments(i, k)` must return `E[h * eta_i^k]` under the posterior for
/// `k <= 2`; `c_i` is the i-th log-normalizer gradient. A constant observable
/// has zero covariance with the mean-zero weights, so its bias vanishes.
pub fn bias_generic(
    moments: &dyn EtaMoments,
    log_r_grad: &[f64],
    n: u64,
    eps: &[f64],
    h_moments: &dyn Fn(usize, u32) -> Result<f64, ModelError>,
) -> Result<BiasPrediction, ModelError> {
    let q = moments.dim();
    assert_eq!(log_r_grad.len(), q);
    assert_eq!(eps.len(), q);
    let nf = n as f64;
    let pre = nf * nf / (2.0 * (q as f64 + 2.0));
    let mut coefficients = Vec::with_capacity(q);
    for i in 0..q {
        let mut p = alloc::vec![0u32; q];
        p[i] = 1;
        let m1 = moments.eta_moment(&p)?;
        p[i] = 2;
        let m2 = moments.eta_moment(&p)?;
        let eh = h_moments(i, 0)?;
        let eh1 = h_moments(i, 1)?;
        let eh2 = h_moments(i, 2)?;
        coefficients.push(pre * (eh2 - eh * m2 + 2.0 * log_r_grad[i] * (eh1 - eh * m1)));
    }
    Ok(assemble(coefficients, eps, ObservableTag::Custom))
}

/// Asymptotic ratio of ellipse to ball mean rejection rates for the normal
/// model:
///
/// ```text
/// U(tau*) = (eps^2/(eps_1 eps_2)) [1 + (n^2 eps^2/8)(q_1+q_2)]
///           / [1 + (n^2 eps_1^2/8) q_1 + (n^2 eps_2^2/8) q_2]
/// ```
pub fn rejection_ratio_normal(
    post: &crate::models::NormalGamma,
    n: u64,
    eps_ball: f64,
    eps_ellipse: [f64; 2],
) -> f64 {
    let [q1, q2] = normal_q_weights(post);
    rejection_ratio_generic(&[q1, q2], n, eps_ball, &eps_ellipse)
}

/// The per-direction curvature weights entering the normal rejection ratio.
pub fn normal_q_weights(post: &crate::models::NormalGamma) -> [f64; 2] {
    let (m, k, a, b) = (post.mu, post.kappa, post.alpha, post.beta);
    let q1 = m * m * (a + 1.0) * a / (b * b) + a / (k * b);
    let q2 = 0.25 * (a + 1.0) * a / (b * b);
    [q1, q2]
}

/// Rejection-rate ratio for arbitrary curvature weights:
///
/// ```text
/// U = (eps^q / prod eps_i) [1 + n^2 eps^2/(2(q+2)) sum q_i]
///     / [1 + n^2/(2(q+2)) sum eps_i^2 q_i]
/// ```
pub fn rejection_ratio_generic(q_weights: &[f64], n: u64, eps_ball: f64, eps: &[f64]) -> f64 {
    assert!(eps_ball > 0.0 && eps.iter().all(|e| *e > 0.0), "thresholds must be positive");
    assert_eq!(q_weights.len(), eps.len());
    let q = eps.len() as f64;
    let nf = n as f64;
    let pre = nf * nf / (2.0 * (q + 2.0));
    let shape: f64 = eps.iter().map(|e| eps_ball / e).product();
    let num = 1.0 + pre * eps_ball * eps_ball * q_weights.iter().sum::<f64>();
    let den = 1.0
        + pre * q_weights.iter().zip(eps).map(|(qi, e)| qi * e * e).sum::<f64>();
    shape * num / den
}
