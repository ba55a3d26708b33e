//! Central finite-difference gradient checker.

use crate::array::Array;
use crate::error::{Error, Result};

/// Compares an analytic gradient against central finite differences of `f`
/// around `point`, probing every coordinate. Returns
/// `max_i |analytic_i - fd_i| / max(|analytic_i|, |fd_i|, 1e-12)`.
///
/// `f` must be evaluable at `point +- step * e_i`; a non-finite value at any
/// probe is rejected.
pub fn gradient_check(
    f: impl Fn(&Array) -> Result<f64>,
    point: &Array,
    analytic: &Array,
    step: f64,
) -> Result<f64> {
    if analytic.shape() != point.shape() {
        return Err(Error::shape(
            "gradient_check",
            format!("{:?}", point.shape()),
            format!("{:?}", analytic.shape()),
        ));
    }
    if step <= 0.0 {
        return Err(Error::InvalidArgument("gradient_check: step must be positive".into()));
    }
    let mut max_err: f64 = 0.0;
    for i in 0..point.numel() {
        let mut plus = point.clone();
        plus.data_mut()[i] += step;
        let f_plus = f(&plus)?;
        let mut minus = point.clone();
        minus.data_mut()[i] -= step;
        let f_minus = f(&minus)?;
        if !f_plus.is_finite() || !f_minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "gradient_check: f non-finite at probe coordinate {i}"
            )));
        }
        let fd = (f_plus - f_minus) / (2.0 * step);
        let a = analytic.data()[i];
        let err = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-12);
        max_err = max_err.max(err);
    }
    Ok(max_err)
}
