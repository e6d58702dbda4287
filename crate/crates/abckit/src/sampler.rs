//! Rejection-ABC engine: acceptance regions, the accept/reject loop, and
//! estimator assembly.

use alloc::vec::Vec;

use rand::Rng;

use crate::math;
use crate::models::Model;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SamplerError {
    #[error("region radii must be strictly positive")]
    InvalidRadius,
    #[error("metric matrix must be symmetric positive definite")]
    NotPositiveDefinite,
    #[error("run holds no particles")]
    EmptyRun,
    #[error("standard error needs at least two particles")]
    TooFewParticles,
}

/// Acceptance-region shape around the observed statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry<const Q: usize> {
    /// Euclidean ball of the given radius.
    Ball(f64),
    /// Axis-aligned ellipse with per-component semi-axes.
    Ellipse([f64; Q]),
    /// General region `{tau : (tau - c)^T A (tau - c) <= 1}` for a symmetric
    /// positive-definite `A`.
    Metric([[f64; Q]; Q]),
}

/// Acceptance region: a center (the observed statistic) plus a geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region<const Q: usize> {
    pub center: [f64; Q],
    geometry: Geometry<Q>,
}

/// Cholesky factor of a symmetric positive-definite matrix, or `None`.
fn cholesky<const Q: usize>(m: &[[f64; Q]; Q]) -> Option<[[f64; Q]; Q]> {
    let mut l = [[0.0; Q]; Q];
    for i in 0..Q {
        for j in 0..=i {
            let mut s = m[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][j] = math::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

impl<const Q: usize> Region<Q> {
    pub fn ball(center: [f64; Q], radius: f64) -> Result<Self, SamplerError> {
        if !(radius > 0.0) {
            return Err(SamplerError::InvalidRadius);
        }
        Ok(Self { center, geometry: Geometry::Ball(radius) })
    }

    pub fn ellipse(center: [f64; Q], radii: [f64; Q]) -> Result<Self, SamplerError> {
        if radii.iter().any(|r| !(*r > 0.0)) {
            return Err(SamplerError::InvalidRadius);
        }
        Ok(Self { center, geometry: Geometry::Ellipse(radii) })
    }

    pub fn metric(center: [f64; Q], a: [[f64; Q]; Q]) -> Result<Self, SamplerError> {
        for i in 0..Q {
            for j in 0..i {
                if a[i][j] != a[j][i] {
                    return Err(SamplerError::NotPositiveDefinite);
                }
            }
        }
        if cholesky(&a).is_none() {
            return Err(SamplerError::NotPositiveDefinite);
        }
        Ok(Self { center, geometry: Geometry::Metric(a) })
    }

    pub fn geometry(&self) -> &Geometry<Q> {
        &self.geometry
    }

    /// Membership test; boundary points are accepted.
    pub fn contains(&self, tau: &[f64; Q]) -> bool {
        let mut d = [0.0; Q];
        for i in 0..Q {
            d[i] = tau[i] - self.center[i];
        }
        match &self.geometry {
            Geometry::Ball(r) => {
                let s: f64 = d.iter().map(|x| x * x).sum();
                s <= r * r
            }
            Geometry::Ellipse(radii) => {
                let s: f64 = d.iter().zip(radii).map(|(x, r)| (x / r) * (x / r)).sum();
                s <= 1.0
            }
            Geometry::Metric(a) => {
                let mut s = 0.0;
                for i in 0..Q {
                    for j in 0..Q {
                        s += d[i] * a[i][j] * d[j];
                    }
                }
                s <= 1.0
            }
        }
    }

    /// Linear map `A` with `region = center + A * (unit ball)`; the oracle's
    /// region quadrature is built on it. `|det A|` is the volume Jacobian.
    pub fn unit_ball_map(&self) -> [[f64; Q]; Q] {
        let mut a = [[0.0; Q]; Q];
        match &self.geometry {
            Geometry::Ball(r) => {
                for i in 0..Q {
                    a[i][i] = *r;
                }
            }
            Geometry::Ellipse(radii) => {
                for i in 0..Q {
                    a[i][i] = radii[i];
                }
            }
            Geometry::Metric(m) => {
                // M = L L^T  =>  M^{-1} = L^{-T} L^{-1}, so A = L^{-T} works.
                let l = cholesky(m).expect("validated at construction");
                let mut linv = [[0.0; Q]; Q];
                for i in 0..Q {
                    linv[i][i] = 1.0 / l[i][i];
                    for j in 0..i {
                        let mut s = 0.0;
                        for k in j..i {
                            s += l[i][k] * linv[k][j];
                        }
                        linv[i][j] = -s / l[i][i];
                    }
                }
                for i in 0..Q {
                    for j in 0..Q {
                        a[i][j] = linv[j][i];
                    }
                }
            }
        }
        a
    }
}

/// Result of one rejection-sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct AbcRun<T> {
    pub particles: Vec<T>,
    pub rejections_per_particle: Vec<u64>,
    pub total_proposals: u64,
    /// False when the proposal budget ran out before collecting K particles.
    pub complete: bool,
}

/// Point estimate with particle spread.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Particle-sample standard deviation (posterior spread).
    pub sd: f64,
    /// Standard error of the mean, `sd / sqrt(K)`.
    pub std_error: f64,
}

impl<T> AbcRun<T> {
    pub fn k(&self) -> usize {
        self.particles.len()
    }

    /// Mean number of rejected proposals per accepted particle.
    pub fn mean_rejections(&self) -> f64 {
        let k = self.k() as f64;
        (self.total_proposals as f64 - k) / k
    }

    /// Sample mean, spread, and standard error of `h` over the particles.
    pub fn estimate(&self, h: impl Fn(&T) -> f64) -> Result<Estimate, SamplerError> {
        if self.particles.is_empty() {
            return Err(SamplerError::EmptyRun);
        }
        let k = self.particles.len();
        if k < 2 {
            return Err(SamplerError::TooFewParticles);
        }
        let kf = k as f64;
        let vals: Vec<f64> = self.particles.iter().map(&h).collect();
        let mean = vals.iter().sum::<f64>() / kf;
        let ss: f64 = vals.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = math::sqrt(ss / (kf - 1.0));
        Ok(Estimate { value: mean, sd, std_error: sd / math::sqrt(kf) })
    }
}

/// Rejection ABC: draw from the prior, simulate the statistic, accept when it
/// lands in the region; stop at `k` acceptances or when `max_proposals` is
/// exhausted (the run is then flagged incomplete).
///
/// Deterministic given the RNG state; a single sequential stream is consumed.
pub fn run_abc<const Q: usize, M: Model<Q>, R: Rng + ?Sized>(
    model: &M,
    region: &Region<Q>,
    k: usize,
    max_proposals: u64,
    rng: &mut R,
) -> AbcRun<M::Theta> {
    assert!(k >= 1, "need at least one particle");
    assert!(max_proposals >= k as u64, "budget below particle count");
    let mut particles = Vec::with_capacity(k);
    let mut rejections_per_particle = Vec::with_capacity(k);
    let mut total: u64 = 0;
    let mut rejected_so_far: u64 = 0;
    while particles.len() < k && total < max_proposals {
        total += 1;
        let theta = model.sample_prior(rng);
        let stat = model.sample_stat(&theta, rng);
        if region.contains(&stat) {
            particles.push(theta);
            rejections_per_particle.push(rejected_so_far);
            rejected_so_far = 0;
        } else {
            rejected_so_far += 1;
        }
    }
    let complete = particles.len() == k;
    AbcRun { particles, rejections_per_particle, total_proposals: total, complete }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{NormalGamma, NormalModel};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn model() -> NormalModel {
        NormalModel::new(NormalGamma::new(0.0, 1.0, 1.0, 1.0).unwrap(), 50).unwrap()
    }

    #[test]
    fn center_always_contained() {
        let c = [0.3, 1.1];
        for region in [
            Region::ball(c, 0.01).unwrap(),
            Region::ellipse(c, [0.02, 0.005]).unwrap(),
            Region::metric(c, [[4.0, 1.0], [1.0, 9.0]]).unwrap(),
        ] {
            assert!(region.contains(&c));
        }
    }

    #[test]
    fn ellipse_boundary_points() {
        let region = Region::ellipse([0.0, 0.0], [2.0, 1.0]).unwrap();
        assert!(region.contains(&[2.0, 0.0]));
        assert!(!region.contains(&[0.0, 1.0001]));
    }

    #[test]
    fn ball_ellipse_metric_equivalence() {
        let eps = 0.37;
        let c = [0.1, -0.4];
        let ball = Region::ball(c, eps).unwrap();
        let ell = Region::ellipse(c, [eps, eps]).unwrap();
        let id = 1.0 / (eps * eps);
        let met = Region::metric(c, [[id, 0.0], [0.0, id]]).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        use rand::Rng;
        for _ in 0..100_000 {
            let tau = [c[0] + rng.random_range(-1.0..1.0), c[1] + rng.random_range(-1.0..1.0)];
            let b = ball.contains(&tau);
            assert_eq!(b, ell.contains(&tau));
            assert_eq!(b, met.contains(&tau));
        }
    }

    #[test]
    fn metric_requires_spd() {
        assert!(Region::metric([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]]).is_err());
        assert!(Region::metric([0.0, 0.0], [[1.0, 0.5], [0.4, 1.0]]).is_err());
        assert!(Region::metric([0.0, 0.0], [[1.0, 0.5], [0.5, 1.0]]).is_ok());
    }

    #[test]
    fn unit_ball_map_roundtrip() {
        // Points on the mapped unit circle must sit on the region boundary.
        let m = [[9.0, 2.0], [2.0, 5.0]];
        let region = Region::metric([0.0, 0.0], m).unwrap();
        let a = region.unit_ball_map();
        for t in 0..16 {
            let phi = t as f64 * core::f64::consts::PI / 8.0;
            let u = [libm::cos(phi), libm::sin(phi)];
            let x = [a[0][0] * u[0] + a[0][1] * u[1], a[1][0] * u[0] + a[1][1] * u[1]];
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    s += x[i] * m[i][j] * x[j];
                }
            }
            assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn huge_region_accepts_everything() {
        let model = model();
        let region = Region::ball([0.0, 1.0], 1e6).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let run = run_abc(&model, &region, 500, 10_000, &mut rng);
        assert!(run.complete);
        assert_eq!(run.total_proposals, 500);
        assert_relative_eq!(run.mean_rejections(), 0.0);
        // particle mean of mu near the prior mean 0
        let est = run.estimate(|t| t.0).unwrap();
        assert!(libm::fabs(est.value) < 4.0 * est.std_error + 0.05);
    }

    #[test]
    fn budget_exhaustion_flags_incomplete() {
        let model = model();
        let region = Region::ball([0.0, 1.0], 1e-6).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let run = run_abc(&model, &region, 10, 1000, &mut rng);
        assert!(!run.complete);
        assert_eq!(run.total_proposals, 1000);
    }

    #[test]
    fn proposal_accounting() {
        let model = model();
        let region = Region::ball([0.0, 1.0], 0.2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let run = run_abc(&model, &region, 50, 1_000_000, &mut rng);
        assert!(run.complete);
        let rej: u64 = run.rejections_per_particle.iter().sum();
        assert_eq!(run.total_proposals, 50 + rej);
        assert_relative_eq!(run.mean_rejections(), rej as f64 / 50.0);
    }

    #[test]
    fn determinism_and_region_equivalence() {
        let model = model();
        let eps = 0.15;
        let c = [0.0, 1.0];
        let ball = Region::ball(c, eps).unwrap();
        let met = Region::metric(
            c,
            [[1.0 / (eps * eps), 0.0], [0.0, 1.0 / (eps * eps)]],
        )
        .unwrap();
        let run1 = run_abc(&model, &ball, 100, 1_000_000, &mut ChaCha12Rng::seed_from_u64(9));
        let run2 = run_abc(&model, &ball, 100, 1_000_000, &mut ChaCha12Rng::seed_from_u64(9));
        let run3 = run_abc(&model, &met, 100, 1_000_000, &mut ChaCha12Rng::seed_from_u64(9));
        assert_eq!(run1, run2);
        assert_eq!(run1, run3);
    }

    #[test]
    fn small_region_recovers_posterior_mean() {
        let model = model();
        let stat = [0.2, 1.1];
        let post = model.posterior(stat).unwrap();
        let region = Region::ball(stat, 0.05).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let run = run_abc(&model, &region, 2000, 100_000_000, &mut rng);
        assert!(run.complete);
        let mu = run.estimate(|t| t.0).unwrap();
        assert!(libm::fabs(mu.value - post.mu_mean()) < 3.0 * mu.std_error + 0.01);
        let s2 = run.estimate(|t| 1.0 / t.1).unwrap();
        assert!(libm::fabs(s2.value - post.sigma2_mean().unwrap()) < 3.0 * s2.std_error + 0.02);
    }

    #[test]
    fn constant_observable() {
        let model = model();
        let region = Region::ball([0.0, 1.0], 0.5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let run = run_abc(&model, &region, 20, 1_000_000, &mut rng);
        let est = run.estimate(|_| 1.0).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.sd, 0.0);
    }
}
