use crate::error::{AslError, Result};

/// Compares analytic gradients against central differences.
///
/// Returns `max_i |analytic_i - fd_i| / max(1, |analytic_i|)` where
/// `fd_i = (f(w + eps e_i) - f(w - eps e_i)) / (2 eps)`.
pub fn finite_diff_check<F>(mut loss: F, params: &[f64], analytic: &[f64], eps: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(AslError::shape("finite_diff_check", params.len(), analytic.len()));
    }
    let mut w = params.to_vec();
    let mut worst = 0.0f64;
    for i in 0..w.len() {
        let orig = w[i];
        w[i] = orig + eps;
        let plus = loss(&w);
        w[i] = orig - eps;
        let minus = loss(&w);
        w[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(AslError::NonFinite {
                what: "loss under finite-difference perturbation".into(),
                index: i,
            });
        }
        let numeric = (plus - minus) / (2.0 * eps);
        let err = (analytic[i] - numeric).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
