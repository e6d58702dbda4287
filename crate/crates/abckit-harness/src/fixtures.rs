//! Reference rows from the published simulation study.
//!
//! All rows use the normal model with prior (0, 1, 1, 1) and true parameters
//! (mu, sigma^2) = (0, 1). A few printed entries are internally inconsistent;
//! they are carried verbatim but flagged `suspect` so verification can report
//! them without letting them gate pass/fail:
//!
//! - ball row (1, 600) prints epsilon = 0.003 against neighbors 0.027/0.022,
//!   and ball row (0.05, 600) prints sd(mu) = 0.004 against the column's
//!   0.031-0.061 pattern;
//! - ellipse row (1, 100) prints xbar = -0.081 while the ball table's same
//!   cell prints -0.181, and only the latter reproduces the printed radii
//!   (to 0.4%); the consistent value is stored in `xbar` with the variant
//!   kept in `xbar_variant`;
//! - comparison row (0.5, 1000) prints 0.574, duplicating the (1, 600) entry,
//!   and no calibration route lands anywhere near it.

/// One row of the ball-region table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallRow {
    pub tol: f64,
    pub n: u64,
    pub xbar: f64,
    pub s2: f64,
    pub epsilon: f64,
    pub mu_hat: f64,
    pub sd_mu: f64,
    pub sigma2_hat: f64,
    pub sd_sigma2: f64,
    pub r_hat: f64,
    pub suspect: bool,
}

/// One row of the ellipse-region table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseRow {
    pub tol: f64,
    pub n: u64,
    /// Statistic consistent with the printed radii.
    pub xbar: f64,
    pub s2: f64,
    /// Verbatim printed statistic where it differs from `xbar`/`s2`.
    pub xbar_variant: Option<f64>,
    pub s2_variant: Option<f64>,
    pub eps1: f64,
    pub eps2: f64,
    pub mu_hat: f64,
    pub sd_mu: f64,
    pub sigma2_hat: f64,
    pub sd_sigma2: f64,
    pub r_hat: f64,
}

/// One cell of the asymptotic-vs-empirical comparison table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub tol: f64,
    pub n: u64,
    pub u_tilde: f64,
    pub r_ratio_empirical: f64,
    pub suspect: bool,
}

pub fn ball_rows() -> Vec<BallRow> {
    let r = |tol, n, xbar, s2, epsilon, mu_hat, sd_mu, sigma2_hat, sd_sigma2, r_hat, suspect| {
        BallRow { tol, n, xbar, s2, epsilon, mu_hat, sd_mu, sigma2_hat, sd_sigma2, r_hat, suspect }
    };
    vec![
        r(0.05, 100, 0.167, 1.061, 0.055, 0.161, 0.109, 1.035, 0.075, 1484.0, false),
        r(0.25, 100, -0.022, 0.965, 0.083, -0.023, 0.106, 0.987, 0.076, 608.0, false),
        r(0.5, 100, 0.061, 1.099, 0.111, 0.059, 0.122, 1.053, 0.079, 384.0, false),
        r(1.0, 100, -0.181, 0.866, 0.096, -0.175, 0.105, 0.936, 0.071, 389.0, false),
        r(0.05, 300, -0.112, 1.003, 0.025, -0.111, 0.061, 1.007, 0.041, 6998.0, false),
        r(0.25, 300, 0.022, 0.974, 0.038, 0.024, 0.061, 0.989, 0.041, 2902.0, false),
        r(0.5, 300, 0.020, 1.001, 0.046, 0.021, 0.062, 1.003, 0.042, 1982.0, false),
        r(1.0, 300, -0.070, 1.005, 0.054, -0.069, 0.063, 1.007, 0.043, 1490.0, false),
        r(0.05, 600, -0.014, 1.025, 0.016, -0.013, 0.004, 1.015, 0.030, 17645.0, true),
        r(0.25, 600, 0.023, 0.933, 0.022, 0.023, 0.042, 0.968, 0.028, 8820.0, false),
        r(0.5, 600, -0.009, 0.986, 0.027, -0.010, 0.041, 0.994, 0.029, 5805.0, false),
        r(1.0, 600, 0.016, 0.972, 0.003, 0.014, 0.004, 0.986, 0.028, 4172.0, true),
        r(0.05, 1000, -0.027, 1.013, 0.011, -0.027, 0.031, 1.017, 0.023, 35639.0, false),
        r(0.25, 1000, 0.016, 0.971, 0.015, 0.017, 0.032, 0.986, 0.022, 17730.0, false),
        r(0.5, 1000, -0.050, 0.938, 0.0175, -0.051, 0.032, 0.986, 0.023, 13868.0, false),
        r(1.0, 1000, -0.012, 0.995, 0.022, -0.012, 0.033, 0.992, 0.023, 8702.0, false),
    ]
}

pub fn ellipse_rows() -> Vec<EllipseRow> {
    let r = |tol,
             n,
             xbar,
             s2,
             xbar_variant: Option<f64>,
             s2_variant: Option<f64>,
             eps1,
             eps2,
             mu_hat,
             sd_mu,
             sigma2_hat,
             sd_sigma2,
             r_hat| EllipseRow {
        tol,
        n,
        xbar,
        s2,
        xbar_variant,
        s2_variant,
        eps1,
        eps2,
        mu_hat,
        sd_mu,
        sigma2_hat,
        sd_sigma2,
        r_hat,
    };
    vec![
        r(0.05, 100, 0.167, 1.061, None, None, 0.065, 0.049, 0.167, 0.103, 1.037, 0.074, 1505.0),
        r(0.25, 100, -0.022, 0.965, None, None, 0.155, 0.069, -0.027, 0.121, 0.991, 0.077, 390.0),
        r(0.5, 100, 0.061, 1.099, None, None, 0.173, 0.094, 0.063, 0.133, 1.061, 0.082, 303.0),
        r(1.0, 100, -0.181, 0.866, Some(-0.081), None, 0.113, 0.086, -0.178, 0.106, 0.937, 0.072, 370.0),
        r(0.05, 300, -0.112, 1.003, None, None, 0.035, 0.021, -0.113, 0.061, 1.004, 0.042, 5660.0),
        r(0.25, 300, 0.022, 0.974, None, None, 0.087, 0.031, 0.194, 0.071, 0.989, 0.041, 1559.0),
        r(0.5, 300, 0.020, 1.001, None, None, 0.106, 0.038, 0.024, 0.077, 0.998, 0.040, 1102.0),
        r(1.0, 300, -0.070, 1.005, None, None, 0.091, 0.046, -0.074, 0.075, 1.006, 0.045, 1105.0),
        r(0.05, 600, -0.014, 1.025, None, None, 0.043, 0.013, -0.015, 0.046, 1.014, 0.028, 7617.0),
        r(0.25, 600, 0.023, 0.933, None, None, 0.056, 0.018, 0.022, 0.049, 0.966, 0.029, 4045.0),
        r(0.5, 600, -0.009, 0.986, None, None, 0.078, 0.023, -0.006, 0.056, 0.991, 0.029, 2679.0),
        r(1.0, 600, 0.016, 0.972, None, None, 0.087, 0.026, 0.016, 0.059, 0.986, 0.031, 1782.0),
        r(0.05, 1000, -0.027, 1.033, None, Some(1.013), 0.028, 0.009, -0.026, 0.035, 1.018, 0.023, 18043.0),
        r(0.25, 1000, 0.016, 0.971, None, None, 0.045, 0.013, 0.017, 0.039, 0.987, 0.023, 7085.0),
        r(0.5, 1000, -0.050, 0.938, None, None, 0.036, 0.015, -0.011, 0.048, 0.993, 0.023, 6270.0),
        r(1.0, 1000, -0.012, 0.985, None, Some(0.995), 0.068, 0.018, -0.011, 0.048, 0.993, 0.023, 3461.0),
    ]
}

pub fn comparison_rows() -> Vec<ComparisonRow> {
    let r = |tol, n, u_tilde, r_ratio_empirical, suspect| ComparisonRow {
        tol,
        n,
        u_tilde,
        r_ratio_empirical,
        suspect,
    };
    vec![
        r(0.05, 100, 0.986, 1.014, false),
        r(0.25, 100, 0.763, 0.641, false),
        r(0.5, 100, 0.884, 0.790, false),
        r(1.0, 100, 1.041, 0.949, false),
        r(0.05, 300, 0.947, 0.809, false),
        r(0.25, 300, 0.648, 0.537, false),
        r(0.5, 300, 0.651, 0.556, false),
        r(1.0, 300, 0.861, 0.741, false),
        r(0.05, 600, 0.531, 0.431, false),
        r(0.25, 600, 0.592, 0.462, false),
        r(0.5, 600, 0.540, 0.461, false),
        r(1.0, 600, 0.574, 0.436, false),
        r(0.05, 1000, 0.592, 0.506, false),
        r(0.25, 1000, 0.532, 0.401, false),
        r(0.5, 1000, 0.574, 0.452, true),
        r(1.0, 1000, 0.511, 0.397, false),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sixteen_cells_each() {
        assert_eq!(ball_rows().len(), 16);
        assert_eq!(ellipse_rows().len(), 16);
        assert_eq!(comparison_rows().len(), 16);
    }

    #[test]
    fn cell_grids_align() {
        for ((b, e), c) in ball_rows().iter().zip(&ellipse_rows()).zip(&comparison_rows()) {
            assert_eq!((b.tol, b.n), (e.tol, e.n));
            assert_eq!((b.tol, b.n), (c.tol, c.n));
        }
    }

    #[test]
    fn suspect_flags() {
        let suspects: Vec<_> =
            ball_rows().iter().filter(|r| r.suspect).map(|r| (r.tol, r.n)).collect();
        assert_eq!(suspects, vec![(0.05, 600), (1.0, 600)]);
        assert_eq!(
            comparison_rows().iter().filter(|r| r.suspect).count(),
            1
        );
    }
}
