//! Likelihood-free inference with calibrated acceptance regions.
//!
//! This crate implements rejection ABC for two conjugate models (normal with
//! unknown mean and precision, exponential with unknown rate) where the
//! accept/reject rule operates on the sufficient statistic. The acceptance
//! thresholds are not ad hoc: they are chosen by bounding the leading-order
//! relative entropy between the exact posterior and the distribution the
//! accepted particles actually follow.
//!
//! Module map:
//!
//! - [`models`]: conjugate priors, posterior updates, closed-form moments,
//!   and exact sampling of the sufficient statistics.
//! - [`expansion`]: the quadratic form in the squared thresholds that gives
//!   the leading relative-entropy term, with closed forms for both models.
//! - [`calibrate`]: threshold selection - maximize region volume subject to
//!   the leading-order entropy staying below a tolerance.
//! - [`sampler`]: the rejection loop, acceptance regions, and estimators.
//! - [`diagnostics`]: closed-form bias predictors and the asymptotic
//!   ellipse/ball rejection-rate ratio.
//! - [`oracle`]: independent numerical ground truth by quadrature (perturbed
//!   posterior, KL divergence, moments, acceptance probabilities).
//!
//! The crate is `no_std`-compatible (requires `alloc`); disable the default
//! `std` feature for embedded or wasm targets.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod calibrate;
pub mod diagnostics;
pub mod expansion;
pub mod models;
pub mod oracle;
pub mod quad;
pub mod sampler;

pub(crate) mod math {
    //! Thin wrappers so transcendental calls work identically with and
    //! without `std`.

    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }

    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }

    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }

    #[inline]
    pub fn powf(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }

    #[inline]
    pub fn ln_gamma(x: f64) -> f64 {
        libm::lgamma(x)
    }

    #[inline]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }

    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
}
