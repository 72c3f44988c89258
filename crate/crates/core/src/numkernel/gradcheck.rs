use super::params::ParamSet;
use crate::error::{Error, Result};

/// Compares analytic gradients against central finite differences.
///
/// Every scalar of every parameter is perturbed by `±step`. Returns the max
/// over all scalars of `|analytic − fd| / max(1, |analytic|)`.
pub fn grad_check<F>(mut f: F, params: &ParamSet, analytic: &ParamSet, step: f64) -> Result<f64>
where
    F: FnMut(&ParamSet) -> Result<f64>,
{
    if !params.same_layout(analytic) {
        return Err(Error::usage("analytic gradient layout differs from params"));
    }
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let names: Vec<String> = params.names().map(str::to_owned).collect();
    for name in &names {
        let n = params.get(name)?.len();
        let grad = analytic.get(name)?.data().to_vec();
        for (k, &a) in grad.iter().enumerate().take(n) {
            let orig = params.get(name)?.data()[k];
            probe.get_mut(name)?.data_mut()[k] = orig + step;
            let up = f(&probe)?;
            probe.get_mut(name)?.data_mut()[k] = orig - step;
            let down = f(&probe)?;
            probe.get_mut(name)?.data_mut()[k] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::numeric(format!(
                    "objective not finite while probing {name}[{k}]"
                )));
            }
            let fd = (up - down) / (2.0 * step);
            let rel = (a - fd).abs() / a.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
