//! Conjugate models and their sufficient statistics.
//!
//! Two models are supported:
//!
//! - **Normal, unknown mean and precision.** Data are N(mu, 1/lambda); the
//!   sufficient statistic is `(xbar, s2)` (sample mean, sample variance) and
//!   the conjugate prior is normal-gamma.
//! - **Exponential, unknown rate.** Data are Exp(theta); the sufficient
//!   statistic is `xbar` and the conjugate prior is gamma.
//!
//! Statistics are simulated directly from their exact sampling distributions
//! rather than by averaging n raw draws: `xbar ~ N(mu, 1/(n*lambda))` and
//! `(n-1)*s2*lambda ~ chi-square(n-1)` independently for the normal model,
//! and `n*xbar ~ Gamma(n, theta)` for the exponential model. This is
//! distributionally identical to summarizing n observations and keeps large-n
//! experiments cheap.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, Normal as NormalDist};

use crate::{math, quad};

/// Errors from model construction and evaluation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("prior hyperparameters must be positive and finite")]
    InvalidPrior,
    #[error("invalid statistic: {0}")]
    InvalidStatistic(&'static str),
    #[error("the normal model needs n >= 2 (s2 requires two observations)")]
    SampleSize,
    #[error("parameter outside the model support")]
    SupportViolation,
    #[error("moment undefined for these parameters")]
    MomentUndefined,
}

fn double_factorial_odd(k: u32) -> f64 {
    // (k-1)!! for even k: 0 -> 1, 2 -> 1, 4 -> 3, 6 -> 15, ...
    let mut acc = 1.0;
    let mut j = 1;
    while j < k {
        acc *= j as f64;
        j += 2;
    }
    acc
}

fn binomial(n: u32, k: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Normal-gamma parameters `(mu, kappa, alpha, beta)`.
///
/// `lambda ~ Gamma(alpha, rate beta)` and `mu | lambda ~ N(mu, 1/(kappa*lambda))`.
/// Doubles as prior and posterior; [`NormalGamma::update`] performs the
/// conjugate update from the observed statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalGamma {
    pub mu: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl NormalGamma {
    pub fn new(mu: f64, kappa: f64, alpha: f64, beta: f64) -> Result<Self, ModelError> {
        if !(mu.is_finite() && kappa > 0.0 && alpha > 0.0 && beta > 0.0)
            || !(kappa.is_finite() && alpha.is_finite() && beta.is_finite())
        {
            return Err(ModelError::InvalidPrior);
        }
        Ok(Self { mu, kappa, alpha, beta })
    }

    /// Conjugate update from `(xbar, s2)` over `n` observations.
    ///
    /// `n = 0` returns the prior unchanged.
    pub fn update(&self, n: u64, stat: [f64; 2]) -> Result<Self, ModelError> {
        if n == 0 {
            return Ok(*self);
        }
        let [xbar, s2] = stat;
        if !(s2 > 0.0) || !xbar.is_finite() {
            return Err(ModelError::InvalidStatistic("s2 must be positive"));
        }
        let nf = n as f64;
        let kappa_n = self.kappa + nf;
        let mu_n = (self.kappa * self.mu + nf * xbar) / kappa_n;
        let alpha_n = self.alpha + nf / 2.0;
        let d = xbar - self.mu;
        let beta_n =
            self.beta + (nf - 1.0) * s2 / 2.0 + self.kappa * nf * d * d / (2.0 * kappa_n);
        Ok(Self { mu: mu_n, kappa: kappa_n, alpha: alpha_n, beta: beta_n })
    }

    /// Joint log density at `(mu, lambda)`.
    pub fn logpdf(&self, theta: (f64, f64)) -> Result<f64, ModelError> {
        let (m, lam) = theta;
        if !(lam > 0.0) {
            return Err(ModelError::SupportViolation);
        }
        let lg = self.alpha * math::ln(self.beta) + (self.alpha - 1.0) * math::ln(lam)
            - self.beta * lam
            - math::ln_gamma(self.alpha);
        let d = m - self.mu;
        let ln = 0.5 * math::ln(self.kappa * lam / (2.0 * core::f64::consts::PI))
            - self.kappa * lam * d * d / 2.0;
        Ok(lg + ln)
    }

    pub fn pdf(&self, theta: (f64, f64)) -> Result<f64, ModelError> {
        Ok(math::exp(self.logpdf(theta)?))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let lam = GammaDist::new(self.alpha, 1.0 / self.beta).unwrap().sample(rng);
        let sd = 1.0 / math::sqrt(self.kappa * lam);
        let m = NormalDist::new(self.mu, sd).unwrap().sample(rng);
        (m, lam)
    }

    /// `E[lambda^k]` for integer `k` (negative `k` needs `alpha > -k`).
    pub fn lambda_moment(&self, k: i32) -> Result<f64, ModelError> {
        if k >= 0 {
            let mut acc = 1.0;
            for i in 0..k {
                acc *= (self.alpha + i as f64) / self.beta;
            }
            Ok(acc)
        } else {
            let m = (-k) as u32;
            if self.alpha <= m as f64 {
                return Err(ModelError::MomentUndefined);
            }
            let mut acc = 1.0;
            for i in 0..m {
                acc *= self.beta / (self.alpha - 1.0 - i as f64);
            }
            Ok(acc)
        }
    }

    /// Central-in-mu moment `E[(mu - mu_0)^a lambda^b]` where `mu_0` is this
    /// distribution's location parameter.
    ///
    /// Conditionally on lambda, `mu - mu_0` is centered normal with variance
    /// `1/(kappa*lambda)`, so odd `a` vanish and even `a` contribute
    /// `(a-1)!! (kappa*lambda)^{-a/2}`.
    pub fn central_moment(&self, a: u32, b: i32) -> Result<f64, ModelError> {
        if a % 2 == 1 {
            return Ok(0.0);
        }
        let half = (a / 2) as i32;
        let lam = self.lambda_moment(b - half)?;
        Ok(double_factorial_odd(a) / math::powf(self.kappa, half as f64) * lam)
    }

    /// Raw moment `E[mu^a lambda^b]`.
    pub fn moment(&self, a: u32, b: i32) -> Result<f64, ModelError> {
        let mut acc = 0.0;
        let mut k = 0;
        while k <= a {
            let c = binomial(a, k) * math::powf(self.mu, (a - k) as f64);
            acc += c * self.central_moment(k, b)?;
            k += 2;
        }
        Ok(acc)
    }

    /// Posterior mean of mu.
    pub fn mu_mean(&self) -> f64 {
        self.mu
    }

    /// Posterior mean of sigma^2 = 1/lambda (needs `alpha > 1`).
    pub fn sigma2_mean(&self) -> Result<f64, ModelError> {
        self.lambda_moment(-1)
    }
}

/// Gamma parameters `(alpha, rate beta)`; prior and posterior for the
/// exponential-rate model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(ModelError::InvalidPrior);
        }
        Ok(Self { alpha, beta })
    }

    /// Conjugate update from the mean `tau` of `n` exponential observations.
    pub fn update(&self, n: u64, tau: f64) -> Result<Self, ModelError> {
        if n == 0 {
            return Ok(*self);
        }
        if !(tau > 0.0) {
            return Err(ModelError::InvalidStatistic("tau must be positive"));
        }
        Ok(Self { alpha: self.alpha + n as f64, beta: self.beta + n as f64 * tau })
    }

    pub fn logpdf(&self, theta: f64) -> Result<f64, ModelError> {
        if !(theta > 0.0) {
            return Err(ModelError::SupportViolation);
        }
        Ok(self.alpha * math::ln(self.beta) + (self.alpha - 1.0) * math::ln(theta)
            - self.beta * theta
            - math::ln_gamma(self.alpha))
    }

    pub fn pdf(&self, theta: f64) -> Result<f64, ModelError> {
        Ok(math::exp(self.logpdf(theta)?))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        GammaDist::new(self.alpha, 1.0 / self.beta).unwrap().sample(rng)
    }

    /// `E[theta^k]` for integer `k` (negative `k` needs `alpha > -k`).
    pub fn moment(&self, k: i32) -> Result<f64, ModelError> {
        if k >= 0 {
            let mut acc = 1.0;
            for i in 0..k {
                acc *= (self.alpha + i as f64) / self.beta;
            }
            Ok(acc)
        } else {
            let m = (-k) as u32;
            if self.alpha <= m as f64 {
                return Err(ModelError::MomentUndefined);
            }
            let mut acc = 1.0;
            for i in 0..m {
                acc *= self.beta / (self.alpha - 1.0 - i as f64);
            }
            Ok(acc)
        }
    }

    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }
}

/// Common interface consumed by the sampler and the quadrature oracle.
///
/// `Q` is the dimension of the sufficient statistic. Log densities return
/// `-inf` outside the support, which is what quadrature loops want; the
/// inherent methods on the parameter types offer checked variants.
pub trait Model<const Q: usize> {
    type Theta: Copy + core::fmt::Debug + PartialEq;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Theta;
    fn sample_stat<R: Rng + ?Sized>(&self, theta: &Self::Theta, rng: &mut R) -> [f64; Q];
    fn prior_logpdf(&self, theta: &Self::Theta) -> f64;
    /// Log density of the observed statistic given theta.
    fn stat_logpdf(&self, stat: &[f64; Q], theta: &Self::Theta) -> f64;
    /// Log posterior density of theta given the statistic.
    fn posterior_logpdf(&self, stat: &[f64; Q], theta: &Self::Theta) -> f64;
    /// Exact log marginal density of the statistic, constants included.
    ///
    /// Computed through the conjugacy identity
    /// `f_T(tau) = f(tau | theta) f(theta) / f(theta | tau)`, which holds at
    /// every theta in the support; a point near the posterior mode is used.
    fn marginal_logpdf(&self, stat: &[f64; Q]) -> f64;
    /// Posterior-adapted quadrature grid: `(theta, weight)` pairs whose
    /// truncation covers all but a negligible tail of the posterior mass.
    fn posterior_nodes(&self, stat: &[f64; Q], nodes_per_dim: usize) -> Vec<(Self::Theta, f64)>;
}

/// Normal model with unknown mean and precision, `n` observations.
#[derive(Debug, Clone, Copy)]
pub struct NormalModel {
    pub prior: NormalGamma,
    pub n: u64,
}

impl NormalModel {
    pub fn new(prior: NormalGamma, n: u64) -> Result<Self, ModelError> {
        if n < 2 {
            return Err(ModelError::SampleSize);
        }
        Ok(Self { prior, n })
    }

    pub fn posterior(&self, stat: [f64; 2]) -> Result<NormalGamma, ModelError> {
        self.prior.update(self.n, stat)
    }

    /// Tau-dependent part of `log f_T(xbar, s2)`.
    ///
    /// The marginal factors as an n-dependent constant times
    /// `beta_n^{-alpha_n} * s2^{(n-3)/2}`; ratios of `f_T` at fixed `n` need
    /// only this shape. Use [`Model::marginal_logpdf`] when absolute
    /// normalization matters (acceptance probabilities).
    pub fn marginal_shape(&self, stat: [f64; 2]) -> Result<f64, ModelError> {
        let post = self.posterior(stat)?;
        let nf = self.n as f64;
        Ok(-post.alpha * math::ln(post.beta) + (nf - 3.0) / 2.0 * math::ln(stat[1]))
    }
}

impl Model<2> for NormalModel {
    type Theta = (f64, f64);

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        self.prior.sample(rng)
    }

    fn sample_stat<R: Rng + ?Sized>(&self, theta: &(f64, f64), rng: &mut R) -> [f64; 2] {
        let (mu, lam) = *theta;
        let nf = self.n as f64;
        let xbar = NormalDist::new(mu, 1.0 / math::sqrt(nf * lam)).unwrap().sample(rng);
        // s2 ~ Gamma(shape (n-1)/2, rate lam*(n-1)/2)
        let shape = (nf - 1.0) / 2.0;
        let scale = 2.0 / (lam * (nf - 1.0));
        let s2 = GammaDist::new(shape, scale).unwrap().sample(rng);
        [xbar, s2]
    }

    fn prior_logpdf(&self, theta: &(f64, f64)) -> f64 {
        self.prior.logpdf(*theta).unwrap_or(f64::NEG_INFINITY)
    }

    fn stat_logpdf(&self, stat: &[f64; 2], theta: &(f64, f64)) -> f64 {
        let [xbar, s2] = *stat;
        let (mu, lam) = *theta;
        if !(lam > 0.0) || !(s2 > 0.0) {
            return f64::NEG_INFINITY;
        }
        let nf = self.n as f64;
        let d = xbar - mu;
        let lx = 0.5 * math::ln(nf * lam / (2.0 * core::f64::consts::PI))
            - nf * lam * d * d / 2.0;
        let a = (nf - 1.0) / 2.0;
        let rate = lam * (nf - 1.0) / 2.0;
        let ls = a * math::ln(rate) + (a - 1.0) * math::ln(s2) - rate * s2 - math::ln_gamma(a);
        lx + ls
    }

    fn posterior_logpdf(&self, stat: &[f64; 2], theta: &(f64, f64)) -> f64 {
        match self.posterior(*stat) {
            Ok(post) => post.logpdf(*theta).unwrap_or(f64::NEG_INFINITY),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn marginal_logpdf(&self, stat: &[f64; 2]) -> f64 {
        let post = match self.posterior(*stat) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        let theta = (post.mu, post.alpha / post.beta);
        self.stat_logpdf(stat, &theta) + self.prior_logpdf(&theta)
            - post.logpdf(theta).unwrap_or(f64::NEG_INFINITY)
    }

    fn posterior_nodes(&self, stat: &[f64; 2], nodes_per_dim: usize) -> Vec<((f64, f64), f64)> {
        let post = self.posterior(*stat).expect("valid statistic");
        let lam_mean = post.alpha / post.beta;
        let lam_sd = math::sqrt(post.alpha) / post.beta;
        let lam_lo = (lam_mean - 12.0 * lam_sd).max(1e-12);
        let lam_hi = lam_mean + 24.0 * lam_sd;
        let (lam, wlam) = quad::gauss_legendre_on(nodes_per_dim, lam_lo, lam_hi);
        let mu_half = 12.0 / math::sqrt(post.kappa * lam_mean);
        let (mu, wmu) =
            quad::gauss_legendre_on(nodes_per_dim, post.mu - mu_half, post.mu + mu_half);
        let mut grid = Vec::with_capacity(nodes_per_dim * nodes_per_dim);
        for (m, wm) in mu.iter().zip(&wmu) {
            for (l, wl) in lam.iter().zip(&wlam) {
                grid.push(((*m, *l), wm * wl));
            }
        }
        grid
    }
}

/// Exponential model with unknown rate, `n` observations.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialModel {
    pub prior: GammaParams,
    pub n: u64,
}

impl ExponentialModel {
    pub fn new(prior: GammaParams, n: u64) -> Result<Self, ModelError> {
        if n < 1 {
            return Err(ModelError::SampleSize);
        }
        Ok(Self { prior, n })
    }

    pub fn posterior(&self, tau: f64) -> Result<GammaParams, ModelError> {
        self.prior.update(self.n, tau)
    }

    /// Tau-dependent part of `log f_T(tau)`:
    /// `(n-1) ln tau - alpha_n ln beta_n` up to an n-dependent constant.
    pub fn marginal_shape(&self, tau: f64) -> Result<f64, ModelError> {
        let post = self.posterior(tau)?;
        Ok((self.n as f64 - 1.0) * math::ln(tau) - post.alpha * math::ln(post.beta))
    }
}

impl Model<1> for ExponentialModel {
    type Theta = f64;

    fn sample_prior<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.prior.sample(rng)
    }

    fn sample_stat<R: Rng + ?Sized>(&self, theta: &f64, rng: &mut R) -> [f64; 1] {
        // n*tau ~ Gamma(n, rate theta)
        let nf = self.n as f64;
        let g = GammaDist::new(nf, 1.0 / theta).unwrap().sample(rng);
        [g / nf]
    }

    fn prior_logpdf(&self, theta: &f64) -> f64 {
        self.prior.logpdf(*theta).unwrap_or(f64::NEG_INFINITY)
    }

    fn stat_logpdf(&self, stat: &[f64; 1], theta: &f64) -> f64 {
        let tau = stat[0];
        let th = *theta;
        if !(tau > 0.0) || !(th > 0.0) {
            return f64::NEG_INFINITY;
        }
        let nf = self.n as f64;
        // density of tau = G/n with G ~ Gamma(n, rate theta)
        nf * math::ln(th) + (nf - 1.0) * math::ln(nf * tau) - th * nf * tau
            - math::ln_gamma(nf)
            + math::ln(nf)
    }

    fn posterior_logpdf(&self, stat: &[f64; 1], theta: &f64) -> f64 {
        match self.posterior(stat[0]) {
            Ok(post) => post.logpdf(*theta).unwrap_or(f64::NEG_INFINITY),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn marginal_logpdf(&self, stat: &[f64; 1]) -> f64 {
        let post = match self.posterior(stat[0]) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        };
        let theta = post.mean();
        self.stat_logpdf(stat, &theta) + self.prior_logpdf(&theta)
            - post.logpdf(theta).unwrap_or(f64::NEG_INFINITY)
    }

    fn posterior_nodes(&self, stat: &[f64; 1], nodes_per_dim: usize) -> Vec<(f64, f64)> {
        let post = self.posterior(stat[0]).expect("valid statistic");
        let mean = post.mean();
        let sd = math::sqrt(post.alpha) / post.beta;
        let lo = (mean - 12.0 * sd).max(1e-12);
        let hi = mean + 24.0 * sd;
        let (th, w) = quad::gauss_legendre_on(nodes_per_dim, lo, hi);
        th.into_iter().zip(w).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn unit_prior() -> NormalGamma {
        NormalGamma::new(0.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn update_empty_data_is_identity() {
        let p = unit_prior();
        assert_eq!(p.update(0, [0.3, 1.1]).unwrap(), p);
        let g = GammaParams::new(1.0, 1.0).unwrap();
        assert_eq!(g.update(0, 2.0).unwrap(), g);
    }

    #[test]
    fn update_normal_hand_evaluated() {
        let p = unit_prior().update(2, [0.0, 2.0]).unwrap();
        assert_relative_eq!(p.mu, 0.0);
        assert_relative_eq!(p.kappa, 3.0);
        assert_relative_eq!(p.alpha, 2.0);
        assert_relative_eq!(p.beta, 2.0);
    }

    #[test]
    fn update_normal_large_n() {
        let p = unit_prior().update(1000, [-0.027, 1.013]).unwrap();
        assert_relative_eq!(p.kappa, 1001.0);
        assert_relative_eq!(p.alpha, 501.0);
        assert_relative_eq!(p.mu, -0.02697, max_relative = 1e-3);
        assert_relative_eq!(p.beta, 507.0, max_relative = 1e-3);
    }

    #[test]
    fn update_exponential() {
        let g = GammaParams::new(1.0, 1.0).unwrap().update(10, 2.0).unwrap();
        assert_eq!((g.alpha, g.beta), (11.0, 21.0));
        let g = GammaParams::new(2.0, 3.0).unwrap().update(100, 0.5).unwrap();
        assert_eq!((g.alpha, g.beta), (102.0, 53.0));
    }

    #[test]
    fn update_rejects_bad_statistics() {
        assert!(unit_prior().update(5, [0.0, -1.0]).is_err());
        assert!(GammaParams::new(1.0, 1.0).unwrap().update(5, 0.0).is_err());
    }

    #[test]
    fn gamma_pdf_value() {
        // Gamma(2,1) density at 1 is e^{-1}
        let g = GammaParams::new(2.0, 1.0).unwrap();
        assert_relative_eq!(g.pdf(1.0).unwrap(), math::exp(-1.0), epsilon = 1e-14);
    }

    #[test]
    fn support_violations_error() {
        assert!(unit_prior().logpdf((0.0, -1.0)).is_err());
        assert!(GammaParams::new(1.0, 1.0).unwrap().logpdf(0.0).is_err());
    }

    #[test]
    fn eta_moment_closed_forms() {
        let p = unit_prior().update(20, [0.1, 1.2]).unwrap();
        assert_relative_eq!(p.lambda_moment(1).unwrap(), p.alpha / p.beta, epsilon = 1e-15);
        // E[mu^2 lambda^2] = mu_n^2 (a+1)a/b^2 + (1/kappa)(a/b)
        let want = p.mu * p.mu * (p.alpha + 1.0) * p.alpha / (p.beta * p.beta)
            + p.alpha / (p.kappa * p.beta);
        assert_relative_eq!(p.moment(2, 2).unwrap(), want, epsilon = 1e-13);
    }

    #[test]
    fn moments_match_quadrature() {
        let prior = unit_prior();
        let model = NormalModel::new(prior, 20).unwrap();
        let stat = [0.1, 1.2];
        let post = model.posterior(stat).unwrap();
        let grid = model.posterior_nodes(&stat, 160);
        for (a, b) in [(1u32, 0i32), (2, 2), (0, 2), (4, 4), (1, 1), (3, 3), (0, -1)] {
            let want = post.moment(a, b).unwrap();
            let got: f64 = grid
                .iter()
                .map(|(th, w)| {
                    let p = post.pdf(*th).unwrap_or(0.0);
                    w * p * math::powf(th.0, a as f64) * math::powf(th.1, b as f64)
                })
                .sum();
            assert_relative_eq!(got, want, max_relative = 1e-6);
        }
    }

    #[test]
    fn moment_undefined_guard() {
        let p = unit_prior(); // alpha = 1
        assert!(p.lambda_moment(-1).is_err());
        assert!(GammaParams::new(0.5, 1.0).unwrap().moment(-1).is_err());
    }

    #[test]
    fn posterior_integrates_to_one() {
        let model = NormalModel::new(unit_prior(), 50).unwrap();
        let stat = [-0.1, 0.9];
        let post = model.posterior(stat).unwrap();
        let mass: f64 = model
            .posterior_nodes(&stat, 160)
            .iter()
            .map(|(th, w)| w * post.pdf(*th).unwrap_or(0.0))
            .sum();
        assert_relative_eq!(mass, 1.0, epsilon = 1e-8);

        let emodel = ExponentialModel::new(GammaParams::new(1.0, 1.0).unwrap(), 50).unwrap();
        let epost = emodel.posterior(1.0).unwrap();
        let mass: f64 = emodel
            .posterior_nodes(&[1.0], 200)
            .iter()
            .map(|(th, w)| w * epost.pdf(*th).unwrap_or(0.0))
            .sum();
        assert_relative_eq!(mass, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn conjugacy_log_ratio_is_constant() {
        let model = NormalModel::new(unit_prior(), 30).unwrap();
        let stat = [0.25, 1.4];
        let reference = model.stat_logpdf(&stat, &(0.2, 1.0)) + model.prior_logpdf(&(0.2, 1.0))
            - model.posterior_logpdf(&stat, &(0.2, 1.0));
        for th in [(0.0, 0.5), (-0.4, 2.0), (0.9, 1.3), (0.2, 0.1)] {
            let r = model.stat_logpdf(&stat, &th) + model.prior_logpdf(&th)
                - model.posterior_logpdf(&stat, &th);
            assert_relative_eq!(r, reference, epsilon = 1e-10);
        }
    }

    #[test]
    fn marginal_shape_tracks_exact_marginal() {
        let model = NormalModel::new(unit_prior(), 20).unwrap();
        let a = [0.0, 1.0];
        let b = [0.15, 1.3];
        let exact = model.marginal_logpdf(&a) - model.marginal_logpdf(&b);
        let shape = model.marginal_shape(a).unwrap() - model.marginal_shape(b).unwrap();
        assert_relative_eq!(exact, shape, epsilon = 1e-9);

        let emodel = ExponentialModel::new(GammaParams::new(1.0, 1.0).unwrap(), 20).unwrap();
        let exact = emodel.marginal_logpdf(&[1.0]) - emodel.marginal_logpdf(&[1.4]);
        let shape = emodel.marginal_shape(1.0).unwrap() - emodel.marginal_shape(1.4).unwrap();
        assert_relative_eq!(exact, shape, epsilon = 1e-9);
    }

    #[test]
    fn exponential_marginal_matches_theta_quadrature() {
        // Independent check: f_T(tau) = integral of f(tau|theta) f(theta) dtheta.
        let emodel = ExponentialModel::new(GammaParams::new(1.0, 1.0).unwrap(), 15).unwrap();
        for tau in [0.6, 1.0, 1.7] {
            let stat = [tau];
            // The prior Gamma(1,1) has substantial spread; integrate theta
            // over a wide grid covering prior and posterior mass.
            let (th, w) = quad::gauss_legendre_on(4000, 1e-9, 40.0);
            let got: f64 = th
                .iter()
                .zip(&w)
                .map(|(&t, &wt)| {
                    wt * math::exp(emodel.stat_logpdf(&stat, &t) + emodel.prior_logpdf(&t))
                })
                .sum();
            let want = math::exp(emodel.marginal_logpdf(&stat));
            assert_relative_eq!(got, want, max_relative = 1e-8);
        }
    }

    #[test]
    fn sample_stat_mean_behaviour() {
        let model = NormalModel::new(unit_prior(), 100).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let reps = 100_000;
        let mut sum_x = 0.0;
        let mut sum_s = 0.0;
        for _ in 0..reps {
            let s = model.sample_stat(&(0.0, 1.0), &mut rng);
            sum_x += s[0];
            sum_s += s[1];
        }
        let mx = sum_x / reps as f64;
        let ms = sum_s / reps as f64;
        // sd(xbar) = 1/sqrt(n); sd(s2) = sqrt(2/(n-1))
        assert!(math::abs(mx) < 3.0 / math::sqrt(reps as f64 * 100.0) * 3.0);
        assert!(math::abs(ms - 1.0) < 3.0 * math::sqrt(2.0 / 99.0) / math::sqrt(reps as f64));
    }

    #[test]
    fn sample_stat_xbar_ks_test() {
        let model = NormalModel::new(unit_prior(), 25).unwrap();
        let (mu, lam) = (0.3, 1.5);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let m = 10_000usize;
        let mut draws: Vec<f64> = (0..m).map(|_| model.sample_stat(&(mu, lam), &mut rng)[0]).collect();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let sd = 1.0 / math::sqrt(25.0 * lam);
        let mut d = 0.0f64;
        for (i, x) in draws.iter().enumerate() {
            let z = (x - mu) / (sd * core::f64::consts::SQRT_2);
            let cdf = 0.5 * (1.0 + libm::erf(z));
            d = d.max(math::abs(cdf - (i + 1) as f64 / m as f64));
            d = d.max(math::abs(cdf - i as f64 / m as f64));
        }
        // critical value at significance 0.001
        assert!(d < 1.949 / math::sqrt(m as f64), "KS statistic {d}");
    }

    #[test]
    fn prior_sampling_moments() {
        let prior = unit_prior();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let m = 200_000;
        let mut sum_lam = 0.0;
        let mut sum_mu = 0.0;
        let mut sum_z2 = 0.0;
        for _ in 0..m {
            let (mu, lam) = prior.sample(&mut rng);
            sum_lam += lam;
            sum_mu += mu;
            let z = mu * math::sqrt(lam * prior.kappa);
            sum_z2 += z * z;
        }
        let mf = m as f64;
        assert!(math::abs(sum_lam / mf - 1.0) < 0.02);
        assert!(math::abs(sum_mu / mf) < 0.05);
        assert!(math::abs(sum_z2 / mf - 1.0) < 0.02);
    }

    #[test]
    fn normal_model_requires_two_observations() {
        assert!(NormalModel::new(unit_prior(), 1).is_err());
        assert!(NormalModel::new(unit_prior(), 2).is_ok());
    }
}
