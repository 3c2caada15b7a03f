//! Binary log loss and its batch mean.

use crate::error::{Error, Result};

/// Probabilities are clamped to `[PROB_EPS, 1 − PROB_EPS]` before the log.
pub const PROB_EPS: f64 = 1e-12;

/// `−(y·ln p + (1−y)·ln(1−p))` with `p` clamped away from 0 and 1.
pub fn bce_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Mean of [`bce_loss`] over a batch.
pub fn batch_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if predictions.len() != labels.len() {
        return Err(Error::InvalidData(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    let sum: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| bce_loss(p, y))
        .sum();
    Ok(sum / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reference_values() {
        assert_abs_diff_eq!(bce_loss(0.5, 1.0), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(bce_loss(1.0 - PROB_EPS, 1.0), 0.0, epsilon = 1e-11);
        // -ln(0.1)
        assert_abs_diff_eq!(bce_loss(0.9, 0.0), 2.302_585_092_994_046, epsilon = 1e-12);
    }

    #[test]
    fn clamp_keeps_log_finite() {
        assert!(bce_loss(0.0, 1.0).is_finite());
        assert!(bce_loss(1.0, 0.0).is_finite());
        assert_abs_diff_eq!(bce_loss(0.0, 1.0), -(PROB_EPS.ln()), epsilon = 1e-9);
    }

    #[test]
    fn batch_mean() {
        let a = bce_loss(0.3, 1.0);
        let b = bce_loss(0.8, 0.0);
        assert_eq!(batch_loss(&[0.3], &[1.0]).unwrap(), a);
        assert_abs_diff_eq!(batch_loss(&[0.3, 0.8], &[1.0, 0.0]).unwrap(), (a + b) / 2.0, epsilon = 1e-15);
        let dup = batch_loss(&[0.3, 0.8, 0.3, 0.8], &[1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(dup, (a + b) / 2.0, epsilon = 1e-15);
        assert!(matches!(batch_loss(&[], &[]), Err(Error::Empty(_))));
    }

    proptest::proptest! {
        #[test]
        fn loss_is_non_negative(p in 0.0f64..=1.0, y in proptest::bool::ANY) {
            let l = bce_loss(p, if y { 1.0 } else { 0.0 });
            proptest::prop_assert!(l >= 0.0);
        }
    }
}
