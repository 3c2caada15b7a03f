//! Central-difference verification of analytic gradients.

use ndarray::{Array2, ArrayView2};

use super::network::Network;
use super::param::ParamKey;
use crate::error::Result;

/// Relative errors are taken against `max(|analytic|, |numeric|, REL_FLOOR)`;
/// below the floor, central differences at h = 1e-5 are dominated by roundoff.
pub const REL_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter (and flat index within it) with the largest error.
    pub worst: Option<(ParamKey, usize)>,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares `∂loss/∂θ` from [`Network::backward`] against
/// `(loss(θ+h) − loss(θ−h)) / 2h` for every parameter.
pub fn grad_check(
    net: &Network,
    batch: ArrayView2<f64>,
    labels: &[f64],
    h: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut work = net.clone();
    work.zero_grad();
    work.backward(batch, labels)?;
    let analytic = work.flat_grads();
    let base = work.flat_values();
    let keys = work.param_keys().to_vec();
    let sizes: Vec<usize> = work.params().iter().map(|p| p.len()).collect();

    let mut probe = net.clone();
    let mut values = base.clone();
    let mut max_rel = 0.0f64;
    let mut worst = None;
    let mut flat = 0;
    for (key, &n) in keys.iter().zip(&sizes) {
        for local in 0..n {
            let orig = values[flat];
            values[flat] = orig + h;
            probe.set_flat_values(&values)?;
            let plus = probe.loss(batch, labels)?;
            values[flat] = orig - h;
            probe.set_flat_values(&values)?;
            let minus = probe.loss(batch, labels)?;
            values[flat] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let rel = relative_error(analytic[flat], numeric);
            if rel > max_rel || worst.is_none() {
                max_rel = max_rel.max(rel);
                worst = Some((*key, local));
            }
            flat += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        worst,
        checked: flat,
        tolerance,
        passed: max_rel < tolerance,
    })
}

/// Same comparison for `∂f(x)/∂x` of every sample; returns the max relative error.
pub fn input_grad_check(net: &Network, batch: ArrayView2<f64>, h: f64) -> Result<f64> {
    let analytic = net.input_gradients(batch)?;
    let mut x: Array2<f64> = batch.to_owned();
    let mut max_rel = 0.0f64;
    for b in 0..x.nrows() {
        for j in 0..x.ncols() {
            let orig = x[[b, j]];
            x[[b, j]] = orig + h;
            let plus = net.forward(x.row(b).insert_axis(ndarray::Axis(0)))?[0];
            x[[b, j]] = orig - h;
            let minus = net.forward(x.row(b).insert_axis(ndarray::Axis(0)))?[0];
            x[[b, j]] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            max_rel = max_rel.max(relative_error(analytic[[b, j]], numeric));
        }
    }
    Ok(max_rel)
}
