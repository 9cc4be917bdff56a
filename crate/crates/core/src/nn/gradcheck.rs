//! Central finite-difference verification of analytic gradients.

use serde::{Deserialize, Serialize};

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor for the relative error. Components whose magnitude is
/// below this are effectively compared in absolute terms.
pub const RELATIVE_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    /// `max_i |a_i - n_i| / max(|a_i|, |n_i|, RELATIVE_FLOOR)`.
    pub max_relative_error: f64,
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Relative discrepancy between two gradient components.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `analytic` against central differences of `loss` around
/// `params`, perturbing every coordinate by [`FD_STEP`].
pub fn finite_difference_check(
    mut loss: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    tolerance: f64,
) -> GradCheckReport {
    assert_eq!(params.len(), analytic.len(), "gradient length mismatch");
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        checked: params.len(),
        tolerance,
        passed: true,
    };
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + FD_STEP;
        let up = loss(&probe);
        probe[i] = orig - FD_STEP;
        let down = loss(&probe);
        probe[i] = orig;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let err = relative_error(analytic[i], numeric);
        if !(err <= report.max_relative_error) {
            report.max_relative_error = err;
            report.worst_index = i;
            report.analytic_at_worst = analytic[i];
            report.numeric_at_worst = numeric;
        }
    }
    report.passed = report.max_relative_error < tolerance;
    report
}
