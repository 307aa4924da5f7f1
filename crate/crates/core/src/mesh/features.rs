use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::DenseMatrix;

/// Reshape a variable-major state vector `(q0 of every cell, q1 of every
/// cell, ...)` into an `Nc x nq` node-feature matrix.
pub fn matricize(x: &[f64], nq: usize) -> Result<DenseMatrix> {
    if nq == 0 || !x.len().is_multiple_of(nq) {
        return Err(Error::Dimension(format!(
            "state of length {} is not divisible into {nq} variables",
            x.len()
        )));
    }
    let nc = x.len() / nq;
    Ok(DenseMatrix::from_fn(nc, nq, |i, j| x[j * nc + i]))
}

/// Inverse of [`matricize`].
pub fn vectorize(m: &DenseMatrix) -> Vec<f64> {
    let (nc, nq) = m.shape();
    let mut x = vec![0.0; nc * nq];
    for i in 0..nc {
        for j in 0..nq {
            x[j * nc + i] = m[(i, j)];
        }
    }
    x
}

/// Per-feature extrema over the training set, frozen before training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleStats {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScaleStats {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self> {
        if min.len() != max.len() {
            return Err(Error::Dimension("min/max length mismatch".into()));
        }
        if min.iter().zip(&max).any(|(a, b)| !a.is_finite() || !b.is_finite() || b < a) {
            return Err(Error::Contract("scale stats must be finite with max >= min".into()));
        }
        Ok(Self { min, max })
    }

    /// Column-wise extrema over a collection of feature matrices.
    pub fn from_matrices<'a>(mats: impl IntoIterator<Item = &'a DenseMatrix>) -> Result<Self> {
        let mut min: Vec<f64> = Vec::new();
        let mut max: Vec<f64> = Vec::new();
        for m in mats {
            if min.is_empty() {
                min = vec![f64::INFINITY; m.cols()];
                max = vec![f64::NEG_INFINITY; m.cols()];
            } else if m.cols() != min.len() {
                return Err(Error::Dimension("feature count differs between snapshots".into()));
            }
            for i in 0..m.rows() {
                for (j, &v) in m.row(i).iter().enumerate() {
                    min[j] = min[j].min(v);
                    max[j] = max[j].max(v);
                }
            }
        }
        if min.is_empty() {
            return Err(Error::Contract("no training data for scale stats".into()));
        }
        Self::new(min, max)
    }

    /// Extrema over variable-major state vectors with `nq` variables.
    pub fn from_states<'a>(states: impl IntoIterator<Item = &'a [f64]>, nq: usize) -> Result<Self> {
        let mats = states
            .into_iter()
            .map(|s| matricize(s, nq))
            .collect::<Result<Vec<_>>>()?;
        Self::from_matrices(mats.iter())
    }

    pub fn num_features(&self) -> usize {
        self.min.len()
    }

    /// `max - min`, zero for constant features.
    pub fn range(&self, j: usize) -> f64 {
        self.max[j] - self.min[j]
    }

    fn check(&self, x: &DenseMatrix) -> Result<()> {
        if x.cols() != self.min.len() {
            return Err(Error::Dimension(format!(
                "{} features, scale stats for {}",
                x.cols(),
                self.min.len()
            )));
        }
        Ok(())
    }

    /// Map training-range values into `[0, 1]`; constant features map to 0.
    /// Values outside the training range are not clipped.
    pub fn scale(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(x)?;
        Ok(DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| {
            let r = self.range(j);
            if r > 0.0 {
                (x[(i, j)] - self.min[j]) / r
            } else {
                0.0
            }
        }))
    }

    pub fn inv_scale(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(y)?;
        Ok(DenseMatrix::from_fn(y.rows(), y.cols(), |i, j| {
            y[(i, j)] * self.range(j) + self.min[j]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_variable_is_identity_reshape() {
        let x = vec![1.0, 2.0, 3.0];
        let m = matricize(&x, 1).unwrap();
        assert_eq!(m.shape(), (3, 1));
        assert_eq!(m.as_slice(), &x[..]);
    }

    #[test]
    fn euler_layout() {
        // (rho, rho u, rho v, rho E) for two cells
        let x = vec![1.0, 2.0, 10.0, 20.0, 100.0, 200.0, 1000.0, 2000.0];
        let m = matricize(&x, 4).unwrap();
        assert_eq!(m.row(0), &[1.0, 10.0, 100.0, 1000.0]);
        assert_eq!(m.row(1), &[2.0, 20.0, 200.0, 2000.0]);
        assert!(matricize(&x, 3).is_err());
    }

    #[test]
    fn scale_endpoints_and_constant_feature() {
        let s = ScaleStats::new(vec![-1.0, 2.0], vec![3.0, 2.0]).unwrap();
        let x = DenseMatrix::from_rows(&[vec![-1.0, 2.0], vec![3.0, 2.0], vec![5.0, 7.0]]).unwrap();
        let y = s.scale(&x).unwrap();
        assert_eq!(y.row(0), &[0.0, 0.0]);
        assert_eq!(y.row(1), &[1.0, 0.0]);
        assert_eq!(y[(2, 0)], 1.5);
        let back = s.inv_scale(&y).unwrap();
        assert_eq!(back.row(0), x.row(0));
        assert_eq!(back[(2, 1)], 2.0);
    }

    proptest! {
        #[test]
        fn matricize_roundtrip_bit_exact(x in prop::collection::vec(-1e6f64..1e6, 1..40), nq in 1usize..5) {
            let n = (x.len() / nq) * nq;
            prop_assume!(n > 0);
            let x = &x[..n];
            let m = matricize(x, nq).unwrap();
            prop_assert_eq!(vectorize(&m), x.to_vec());
        }

        #[test]
        fn scale_roundtrip(vals in prop::collection::vec(-50f64..50.0, 6..30)) {
            let n = vals.len() / 3 * 3;
            let x = DenseMatrix::from_vec(n / 3, 3, vals[..n].to_vec()).unwrap();
            let s = ScaleStats::from_matrices([&x]).unwrap();
            let back = s.inv_scale(&s.scale(&x).unwrap()).unwrap();
            for i in 0..x.rows() {
                for j in 0..3 {
                    let mag = s.min[j].abs().max(s.max[j].abs()).max(1.0);
                    prop_assert!((back[(i, j)] - x[(i, j)]).abs() <= 1e-14 * mag);
                }
            }
        }
    }
}
