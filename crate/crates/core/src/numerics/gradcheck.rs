use super::{Params, Tensor};
use crate::error::{Error, Result};

/// Compares analytic gradients against central finite differences.
///
/// `f` returns the loss and its gradient (one tensor per parameter).
/// Returns the largest `|a - n| / max(|a|, |n|, 1e-6)` over all scalars.
pub fn grad_check<F>(params: &Params, eps: f64, f: F) -> Result<f64>
where
    F: Fn(&Params) -> Result<(f64, Vec<Tensor>)>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::InvalidArgument(format!("finite-difference step {eps} outside [1e-7, 1e-3]")));
    }
    let (loss, analytic) = f(params)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    if analytic.len() != params.len() {
        return Err(Error::Shape(format!("{} gradients for {} parameters", analytic.len(), params.len())));
    }
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for (i, grad) in analytic.iter().enumerate() {
        if grad.len() != params.tensor(i).len() {
            return Err(Error::Shape(format!("gradient for {}", params.name(i))));
        }
        for j in 0..params.tensor(i).len() {
            let orig = params.tensor(i).data()[j];
            probe.tensor_mut(i).data_mut()[j] = orig + eps;
            let up = f(&probe)?.0;
            probe.tensor_mut(i).data_mut()[j] = orig - eps;
            let down = f(&probe)?.0;
            probe.tensor_mut(i).data_mut()[j] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = grad.data()[j];
            if !numeric.is_finite() || !a.is_finite() {
                return Err(Error::NonFinite("gradient"));
            }
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
