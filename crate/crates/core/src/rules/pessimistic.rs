//! Pessimistic error estimate used by tree pruning.

use statrs::distribution::{ContinuousCDF, Normal};

/// Extra errors to add to `errors` observed among `total` weighted instances:
/// the upper limit of the Wilson score interval at one-sided confidence
/// `confidence_factor`, minus the observed errors. Below one error the value
/// is interpolated from the exact zero-error bound `N(1 - CF^(1/N))`.
pub fn estimated_extra_errors(total: f64, errors: f64, confidence_factor: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    if errors < 1.0 {
        let base = total * (1.0 - confidence_factor.powf(1.0 / total));
        if errors == 0.0 {
            return base;
        }
        return base + errors * (estimated_extra_errors(total, 1.0, confidence_factor) - base);
    }
    // Continuity correction makes the bound degenerate near the top.
    if errors + 0.5 >= total {
        return (total - errors).max(0.0);
    }
    let z = Normal::standard().inverse_cdf(1.0 - confidence_factor);
    let f = (errors + 0.5) / total;
    let z2 = z * z;
    let r = (f + z2 / (2.0 * total) + z * (f / total - f * f / total + z2 / (4.0 * total * total)).sqrt())
        / (1.0 + z2 / total);
    r * total - errors
}

/// Observed plus extra errors for a node that predicts its majority class.
pub(crate) fn leaf_errors(tally: &[f64], confidence_factor: f64) -> f64 {
    let total: f64 = tally.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let wrong = total - tally.iter().cloned().fold(0.0, f64::max);
    wrong + estimated_extra_errors(total, wrong, confidence_factor)
}
