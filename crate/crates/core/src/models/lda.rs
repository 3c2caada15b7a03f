//! Non-shrinkage linear discriminant with a pseudo-inverse of the pooled
//! within-class covariance.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::io_util::{read_magic, truncated};

pub const MAGIC: [u8; 4] = *b"P3LD";
pub const VERSION: u32 = 1;

/// Eigenvalues below `PINV_CUTOFF · λ_max` are treated as zero.
pub const PINV_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub fitted: bool,
}

impl LdaModel {
    pub fn new(n_features: usize) -> Self {
        Self {
            weights: vec![0.0; n_features],
            bias: 0.0,
            fitted: false,
        }
    }

    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    /// `wᵀx + b`.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if !self.fitted {
            return Err(Error::NotFitted);
        }
        if x.len() != self.weights.len() {
            return Err(Error::Shape {
                layer: 0,
                detail: format!("LDA expects {} features, got {}", self.weights.len(), x.len()),
            });
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    pub fn score_batch(&self, rows: ArrayView2<f64>) -> Result<Vec<f64>> {
        if !self.fitted {
            return Err(Error::NotFitted);
        }
        if rows.ncols() != self.weights.len() {
            return Err(Error::Shape {
                layer: 0,
                detail: format!(
                    "LDA expects {} features, got {}",
                    self.weights.len(),
                    rows.ncols()
                ),
            });
        }
        let w = ArrayView1::from(&self.weights);
        Ok(rows.dot(&w).iter().map(|s| s + self.bias).collect())
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        if !self.fitted {
            return Err(Error::NotFitted);
        }
        w.write_all(&MAGIC)?;
        w.write_u32::<LittleEndian>(VERSION)?;
        for &v in &self.weights {
            w.write_f64::<LittleEndian>(v)?;
        }
        w.write_f64::<LittleEndian>(self.bias)?;
        Ok(())
    }

    /// Reads `n_features` weights and the bias.
    pub fn read<R: Read>(r: &mut R, n_features: usize) -> Result<Self> {
        read_magic(r, MAGIC)?;
        let version = r
            .read_u32::<LittleEndian>()
            .map_err(|e| truncated(e, "LDA header"))?;
        if version != VERSION {
            return Err(Error::VersionMismatch {
                expected: VERSION,
                found: version,
            });
        }
        let mut weights = vec![0.0; n_features];
        r.read_f64_into::<LittleEndian>(&mut weights)
            .map_err(|e| truncated(e, "LDA weights"))?;
        let bias = r
            .read_f64::<LittleEndian>()
            .map_err(|e| truncated(e, "LDA bias"))?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(Error::InvalidData("trailing bytes after LDA bias".into()));
        }
        Ok(Self {
            weights,
            bias,
            fitted: true,
        })
    }
}

fn class_mean(rows: ArrayView2<f64>, labels: &[u8], class: u8) -> Result<Array1<f64>> {
    let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
    if idx.is_empty() {
        return Err(Error::MissingClass(class));
    }
    Ok(rows
        .select(Axis(0), &idx)
        .mean_axis(Axis(0))
        .expect("non-empty class"))
}

fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// `S⁺v` for symmetric positive semi-definite `S`, with eigenvalue cutoff.
fn pinv_apply(s: &Array2<f64>, v: &Array1<f64>, power: i32) -> Array1<f64> {
    let eig = SymmetricEigen::new(to_nalgebra(s));
    let lmax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let q = &eig.eigenvectors;
    let vn = nalgebra::DVector::from_iterator(v.len(), v.iter().copied());
    let mut coef = q.transpose() * vn;
    for (c, &l) in coef.iter_mut().zip(eig.eigenvalues.iter()) {
        *c = if lmax > 0.0 && l > PINV_CUTOFF * lmax {
            *c / l.powi(power)
        } else {
            0.0
        };
    }
    let out = q * coef;
    Array1::from_iter(out.iter().copied())
}

/// Fits on flattened epochs (`rows`, channel-major then time) with binary labels.
///
/// `w = S⁺(μ₁ − μ₀)`, `b = −wᵀ(μ₁ + μ₀)/2`, with `S` the pooled within-class
/// covariance. When there are fewer centered rows than features the
/// pseudo-inverse is taken through the Gram matrix of the rows, which gives the
/// same vector at a fraction of the cost.
pub fn lda_fit(rows: ArrayView2<f64>, labels: &[u8]) -> Result<LdaModel> {
    let (n, d) = rows.dim();
    if labels.len() != n {
        return Err(Error::InvalidData(format!("{n} rows with {} labels", labels.len())));
    }
    let mu1 = class_mean(rows, labels, 1)?;
    let mu0 = class_mean(rows, labels, 0)?;
    let mut centered = rows.to_owned();
    for (mut row, &l) in centered.outer_iter_mut().zip(labels) {
        row -= if l == 1 { &mu1 } else { &mu0 };
    }
    let dof = (n.saturating_sub(2)).max(1) as f64;
    let delta = &mu1 - &mu0;

    let w = if n >= d {
        let s = centered.t().dot(&centered) / dof;
        pinv_apply(&s, &delta, 1)
    } else {
        // S⁺Δ = dof · Aᵀ (AAᵀ)⁺² A Δ
        let gram = centered.dot(&centered.t());
        let projected = centered.dot(&delta);
        centered.t().dot(&pinv_apply(&gram, &projected, 2)) * dof
    };
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LDA weights".into()));
    }
    let bias = -w.dot(&(&mu1 + &mu0)) / 2.0;
    Ok(LdaModel {
        weights: w.to_vec(),
        bias,
        fitted: true,
    })
}
