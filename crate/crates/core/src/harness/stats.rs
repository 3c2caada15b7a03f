use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// Welch–Satterthwaite degrees of freedom.
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidData(
            "each sample needs at least two values".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-test input".into()));
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (sa, sb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = sa + sb;
    if se2 <= 0.0 {
        return Err(Error::InvalidData("both samples have zero variance".into()));
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / (sa * sa / (a.len() as f64 - 1.0) + sb * sb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidData(e.to_string()))?;
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(TTest { t, df, p })
}

/// Area under the ROC curve; ties count one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidData("scores and labels differ in length".into()));
    }
    let pos: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(&s, _)| s).collect();
    let neg: Vec<f64> = scores.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(&s, _)| s).collect();
    if pos.is_empty() {
        return Err(Error::MissingClass(1));
    }
    if neg.is_empty() {
        return Err(Error::MissingClass(0));
    }
    let mut sorted = neg.clone();
    sorted.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for p in &pos {
        let below = sorted.partition_point(|n| n < p);
        let upto = sorted.partition_point(|n| n <= p);
        wins += below as f64 + 0.5 * (upto - below) as f64;
    }
    Ok(wins / (pos.len() * neg.len()) as f64)
}
