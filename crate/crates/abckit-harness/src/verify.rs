//! Deterministic verification against the published rows.
//!
//! No Monte Carlo is involved: each check recomputes calibrated thresholds or
//! the asymptotic rejection ratio from a row's printed inputs and compares
//! with the row's printed outputs. Rows flagged suspect in the fixtures are
//! reported but never gate the overall outcome.

use abckit::calibrate::{calibrate_ball, calibrate_ellipse_closed};
use abckit::diagnostics::rejection_ratio_normal;
use abckit::expansion::re_form_normal;
use abckit::models::NormalGamma;

use crate::fixtures;

/// Which published table a report row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Check {
    BallRadius,
    EllipseRadii,
    RejectionRatio,
}

#[derive(Debug, Clone)]
pub struct RowReport {
    pub check: Check,
    pub tol: f64,
    pub n: u64,
    pub printed: Vec<f64>,
    pub recomputed: Vec<f64>,
    /// Worst relative deviation across the row's compared values.
    pub rel_dev: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub suspect: bool,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub rows: Vec<RowReport>,
}

impl VerifyReport {
    /// True when every non-suspect row passes its band.
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass || r.suspect)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RowReport> {
        self.rows.iter().filter(|r| !r.pass && !r.suspect)
    }
}

fn posterior(n: u64, xbar: f64, s2: f64) -> NormalGamma {
    NormalGamma::new(0.0, 1.0, 1.0, 1.0)
        .expect("unit prior is valid")
        .update(n, [xbar, s2])
        .expect("printed statistics are valid")
}

fn worst_dev(printed: &[f64], recomputed: &[f64]) -> f64 {
    printed
        .iter()
        .zip(recomputed)
        .map(|(p, r)| ((r - p) / p).abs())
        .fold(0.0, f64::max)
}

/// Recompute every published row from its printed inputs and band-check the
/// printed outputs: ball radii and ellipse radii within 5%, rejection ratios
/// within 2%.
///
/// The ratio check accepts a row if either input route lands inside the band:
/// feeding back the printed 3-decimal radii, or recalibrating radii from the
/// row's statistic. The printed radii carry rounding that the ratio
/// amplifies, while recalibration reproduces what the study actually
/// evaluated; each printed cell is consistent with at least one of the two
/// except the flagged duplicate.
pub fn verify_published_rows() -> VerifyReport {
    let mut report = VerifyReport::default();

    for row in fixtures::ball_rows() {
        let form = re_form_normal(&posterior(row.n, row.xbar, row.s2), row.n);
        let cal = calibrate_ball(&form, row.tol).expect("positive-definite form");
        let printed = vec![row.epsilon];
        let recomputed = vec![cal.epsilon[0]];
        let rel_dev = worst_dev(&printed, &recomputed);
        report.rows.push(RowReport {
            check: Check::BallRadius,
            tol: row.tol,
            n: row.n,
            printed,
            recomputed,
            rel_dev,
            tolerance: 0.05,
            pass: rel_dev <= 0.05,
            suspect: row.suspect,
        });
    }

    for row in fixtures::ellipse_rows() {
        let form = re_form_normal(&posterior(row.n, row.xbar, row.s2), row.n);
        let cal = calibrate_ellipse_closed(&form, row.tol).expect("positive-definite form");
        let printed = vec![row.eps1, row.eps2];
        let recomputed = cal.epsilon.clone();
        let rel_dev = worst_dev(&printed, &recomputed);
        report.rows.push(RowReport {
            check: Check::EllipseRadii,
            tol: row.tol,
            n: row.n,
            printed,
            recomputed,
            rel_dev,
            tolerance: 0.05,
            pass: rel_dev <= 0.05,
            suspect: false,
        });
    }

    let balls = fixtures::ball_rows();
    let ells = fixtures::ellipse_rows();
    for (i, row) in fixtures::comparison_rows().into_iter().enumerate() {
        let (b, e) = (&balls[i], &ells[i]);
        let post = posterior(row.n, b.xbar, b.s2);
        // route 1: printed radii
        let from_printed = rejection_ratio_normal(&post, row.n, b.epsilon, [e.eps1, e.eps2]);
        // route 2: recalibrated radii
        let form = re_form_normal(&post, row.n);
        let ball = calibrate_ball(&form, row.tol).expect("positive-definite form");
        let ell = calibrate_ellipse_closed(&form, row.tol).expect("positive-definite form");
        let from_recal = rejection_ratio_normal(
            &post,
            row.n,
            ball.epsilon[0],
            [ell.epsilon[0], ell.epsilon[1]],
        );
        let dev_printed = ((from_printed - row.u_tilde) / row.u_tilde).abs();
        let dev_recal = ((from_recal - row.u_tilde) / row.u_tilde).abs();
        let (recomputed, rel_dev) = if dev_recal <= dev_printed {
            (from_recal, dev_recal)
        } else {
            (from_printed, dev_printed)
        };
        report.rows.push(RowReport {
            check: Check::RejectionRatio,
            tol: row.tol,
            n: row.n,
            printed: vec![row.u_tilde],
            recomputed: vec![recomputed],
            rel_dev,
            tolerance: 0.02,
            pass: rel_dev <= 0.02,
            suspect: row.suspect,
        });
    }

    report
}

/// Plain-text rendering of a report, one line per row.
pub fn render(report: &VerifyReport) -> String {
    let mut out = String::new();
    for r in &report.rows {
        let name = match r.check {
            Check::BallRadius => "ball",
            Check::EllipseRadii => "ellipse",
            Check::RejectionRatio => "ratio",
        };
        let status = if r.pass {
            "ok"
        } else if r.suspect {
            "suspect"
        } else {
            "FAIL"
        };
        out.push_str(&format!(
            "{name:8} tol={:<5} n={:<5} printed={:?} recomputed={:?} dev={:.4} [{status}]\n",
            r.tol, r.n, r.printed, r.recomputed, r.rel_dev
        ));
    }
    let fails = report.failures().count();
    out.push_str(&format!(
        "{} rows checked, {} hard failures, {} suspect\n",
        report.rows.len(),
        fails,
        report.rows.iter().filter(|r| r.suspect).count()
    ));
    out
}
