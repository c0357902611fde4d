use super::Real;
use crate::error::{Error, Result};

/// Largest elementwise relative error between `analytic` and a central
/// finite-difference gradient of `loss` at `params`.
///
/// Relative error is `|a - n| / max(1e-8, |a| + |n|)`.
pub fn grad_check<T, F>(mut loss: F, params: &[T], analytic: &[T], eps: T) -> Result<T>
where
    T: Real,
    F: FnMut(&[T]) -> T,
{
    if !(eps > T::zero() && eps <= T::lit(1e-2)) {
        return Err(Error::Domain(
            "finite-difference step must lie in (0, 1e-2]".into(),
        ));
    }
    if params.len() != analytic.len() {
        return Err(Error::Shape(format!(
            "{} parameters but {} gradient entries",
            params.len(),
            analytic.len()
        )));
    }
    let floor = T::lit(1e-8);
    let mut theta = params.to_vec();
    let mut worst = T::zero();
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + eps;
        let up = loss(&theta);
        theta[i] = orig - eps;
        let down = loss(&theta);
        theta[i] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite {
                name: format!("loss at parameter {i}"),
            });
        }
        let numeric = (up - down) / (T::lit(2.0) * eps);
        let a = analytic[i];
        let rel = (a - numeric).abs() / floor.max(a.abs() + numeric.abs());
        worst = worst.max(rel);
    }
    Ok(worst)
}
