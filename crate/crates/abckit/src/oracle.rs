//! Independent numerical ground truth.
//!
//! Everything here is deterministic quadrature built directly on the model
//! densities: the perturbed posterior of an accepted particle, its divergence
//! from the exact posterior, its moments, and region acceptance probabilities.
//! The expansion and the diagnostic predictors are validated against these
//! routines, never the other way around.
//!
//! Acceptance regions are integrated after mapping them to the unit ball:
//! Gauss-Legendre on an interval for one-dimensional statistics, and for
//! two-dimensional ones a polar grid (Gauss-Legendre in radius, uniform in
//! angle, which is spectrally accurate for the periodic angular factor).
//! Parameter-space integrals ride on each model's posterior-adapted grid.
//! Every public result is recomputed with doubled node counts and rejected
//! unless the two agree to the requested tolerance.

use alloc::vec::Vec;

use crate::models::{Model, ModelError};
use crate::quad;
use crate::sampler::Region;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("node counts must be at least 16")]
    InvalidSpec,
    #[error("doubling quadrature nodes moved the result by more than rel_tol")]
    NonConvergence,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Node budget and self-convergence tolerance for one oracle evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    /// Radial (or interval) nodes over the acceptance region; the angular
    /// count is twice this.
    pub region_nodes: usize,
    /// Nodes per parameter dimension.
    pub theta_nodes: usize,
    /// Relative agreement demanded between the base and doubled grids.
    pub rel_tol: f64,
}

impl QuadratureSpec {
    pub fn new(region_nodes: usize, theta_nodes: usize, rel_tol: f64) -> Result<Self, OracleError> {
        if region_nodes < 16 || theta_nodes < 16 || !(rel_tol > 0.0) {
            return Err(OracleError::InvalidSpec);
        }
        Ok(Self { region_nodes, theta_nodes, rel_tol })
    }

    /// Default for pointwise densities and acceptance probabilities.
    pub fn for_densities() -> Self {
        Self { region_nodes: 24, theta_nodes: 96, rel_tol: 1e-7 }
    }

    /// Default for divergences and moments (integrals of densities).
    pub fn for_moments() -> Self {
        Self { region_nodes: 24, theta_nodes: 96, rel_tol: 1e-6 }
    }

    fn doubled(&self) -> Self {
        Self { region_nodes: 2 * self.region_nodes, theta_nodes: 2 * self.theta_nodes, ..*self }
    }
}

fn converged(coarse: f64, fine: f64, rel_tol: f64) -> bool {
    let scale = libm::fabs(fine).max(libm::fabs(coarse));
    libm::fabs(coarse - fine) <= rel_tol * scale + 1e-300
}

/// Quadrature nodes and weights covering the acceptance region.
pub fn region_grid<const Q: usize>(region: &Region<Q>, nodes: usize) -> Vec<([f64; Q], f64)> {
    let a = region.unit_ball_map();
    let c = region.center;
    match Q {
        1 => {
            let (x, w) = quad::gauss_legendre(nodes);
            x.into_iter()
                .zip(w)
                .map(|(t, wt)| {
                    let mut p = [0.0; Q];
                    p[0] = c[0] + a[0][0] * t;
                    (p, wt * libm::fabs(a[0][0]))
                })
                .collect()
        }
        2 => {
            let det = libm::fabs(a[0][0] * a[1][1] - a[0][1] * a[1][0]);
            let (r, wr) = quad::gauss_legendre_on(nodes, 0.0, 1.0);
            let m = 2 * nodes;
            let dphi = 2.0 * core::f64::consts::PI / m as f64;
            let mut grid = Vec::with_capacity(nodes * m);
            for (ri, wi) in r.iter().zip(&wr) {
                for k in 0..m {
                    let phi = (k as f64 + 0.5) * dphi;
                    let u = [ri * libm::cos(phi), ri * libm::sin(phi)];
                    let mut p = [0.0; Q];
                    p[0] = c[0] + a[0][0] * u[0] + a[0][1] * u[1];
                    p[1] = c[1] + a[1][0] * u[0] + a[1][1] * u[1];
                    grid.push((p, wi * ri * dphi * det));
                }
            }
            grid
        }
        _ => panic!("only 1- and 2-dimensional statistics are supported"),
    }
}

/// Unnormalized perturbed density at `theta`: `f(theta) integral_D f(tau | theta) dtau`,
/// which equals `integral_D f(theta | tau) f_T(tau) dtau`.
fn perturbed_numerator<const Q: usize, M: Model<Q>>(
    model: &M,
    theta: &M::Theta,
    grid: &[([f64; Q], f64)],
) -> f64 {
    let lp = model.prior_logpdf(theta);
    if lp == f64::NEG_INFINITY {
        return 0.0;
    }
    let s: f64 = grid
        .iter()
        .map(|(tau, w)| {
            let l = model.stat_logpdf(tau, theta);
            if l == f64::NEG_INFINITY { 0.0 } else { w * libm::exp(l) }
        })
        .sum();
    libm::exp(lp) * s
}

/// Mass of the statistic's marginal over the region (fully normalized).
fn marginal_mass<const Q: usize, M: Model<Q>>(model: &M, grid: &[([f64; Q], f64)]) -> f64 {
    grid.iter()
        .map(|(tau, w)| {
            let l = model.marginal_logpdf(tau);
            if l == f64::NEG_INFINITY { 0.0 } else { w * libm::exp(l) }
        })
        .sum()
}

/// Density of an accepted particle's parameter at `theta`, as a proper
/// density: region-average of the posterior weighted by the marginal.
pub fn perturbed_density<const Q: usize, M: Model<Q>>(
    model: &M,
    stat: &[f64; Q],
    region: &Region<Q>,
    theta: &M::Theta,
    spec: &QuadratureSpec,
) -> Result<f64, OracleError> {
    let _ = stat; // the region is already centered on the observed statistic
    let eval = |nodes: usize| {
        let grid = region_grid(region, nodes);
        perturbed_numerator(model, theta, &grid) / marginal_mass(model, &grid)
    };
    let coarse = eval(spec.region_nodes);
    let fine = eval(2 * spec.region_nodes);
    if !converged(coarse, fine, spec.rel_tol) {
        return Err(OracleError::NonConvergence);
    }
    Ok(fine)
}

fn kl_once<const Q: usize, M: Model<Q>>(
    model: &M,
    stat: &[f64; Q],
    region: &Region<Q>,
    spec: &QuadratureSpec,
) -> f64 {
    let grid = region_grid(region, spec.region_nodes);
    let den = marginal_mass(model, &grid);
    let theta_grid = model.posterior_nodes(stat, spec.theta_nodes);
    let mut h = 0.0;
    for (theta, w) in &theta_grid {
        let lf = model.posterior_logpdf(stat, theta);
        if lf == f64::NEG_INFINITY {
            continue;
        }
        let f = libm::exp(lf);
        let feps = perturbed_numerator(model, theta, &grid) / den;
        if feps > 0.0 {
            h += w * f * (lf - libm::log(feps));
        }
    }
    h
}

/// Divergence of the exact posterior from the accepted-particle density,
/// `integral f log(f / f_eps) dtheta`.
pub fn kl_numeric<const Q: usize, M: Model<Q>>(
    model: &M,
    stat: &[f64; Q],
    region: &Region<Q>,
    spec: &QuadratureSpec,
) -> Result<f64, OracleError> {
    let coarse = kl_once(model, stat, region, spec);
    let fine = kl_once(model, stat, region, &spec.doubled());
    if !converged(coarse, fine, spec.rel_tol) {
        return Err(OracleError::NonConvergence);
    }
    Ok(fine)
}

fn moment_once<const Q: usize, M: Model<Q>>(
    model: &M,
    stat: &[f64; Q],
    region: &Region<Q>,
    h: &dyn Fn(&M::Theta) -> f64,
    spec: &QuadratureSpec,
) -> f64 {
    // The marginal mass cancels in the normalized ratio, so only the
    // unnormalized numerator density is integrated.
    let grid = region_grid(region, spec.region_nodes);
    let theta_grid = model.posterior_nodes(stat, spec.theta_nodes);
    let mut num = 0.0;
    let mut mass = 0.0;
    for (theta, w) in &theta_grid {
        let g = w * perturbed_numerator(model, theta, &grid);
        mass += g;
        num += g * h(theta);
    }
    num / mass
}

/// `E[h(theta)]` under the accepted-particle density.
pub fn perturbed_moment<const Q: usize, M: Model<Q>>(
    model: &M,
    stat: &[f64; Q],
    region: &Region<Q>,
    h: &dyn Fn(&M::Theta) -> f64,
    spec: &QuadratureSpec,
) -> Result<f64, OracleError> {
    let coarse = moment_once(model, stat, region, h, spec);
    let fine = moment_once(model, stat, region, h, &spec.doubled());
    if !converged(coarse, fine, spec.rel_tol) {
        return Err(OracleError::NonConvergence);
    }
    Ok(fine)
}

/// Probability that a statistic drawn from the marginal lands in the region.
pub fn acceptance_probability<const Q: usize, M: Model<Q>>(
    model: &M,
    region: &Region<Q>,
    spec: &QuadratureSpec,
) -> Result<f64, OracleError> {
    let coarse = marginal_mass(model, &region_grid(region, spec.region_nodes));
    let fine = marginal_mass(model, &region_grid(region, 2 * spec.region_nodes));
    if !converged(coarse, fine, spec.rel_tol) {
        return Err(OracleError::NonConvergence);
    }
    Ok(fine)
}
