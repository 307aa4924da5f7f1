//! Autoencoder building blocks with forward, tangent and adjoint passes.
//!
//! Node-feature matrices are `nodes x features`, row-major.

use crate::coarsen::AssignmentMatrix;
use crate::error::{Error, Result};
use crate::mesh::Graph;
use crate::num::DenseMatrix;

#[inline]
pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

#[inline]
pub fn elu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Row `j` becomes the mean of its neighbors' rows; isolated nodes get zero.
pub fn neighbor_mean(g: &Graph, x: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x.rows(), x.cols());
    for j in 0..x.rows() {
        let nb = g.neighbors(j);
        if nb.is_empty() {
            continue;
        }
        let w = 1.0 / nb.len() as f64;
        let row = out.row_mut(j);
        for &n in nb {
            for (o, v) in row.iter_mut().zip(x.row(n)) {
                *o += w * v;
            }
        }
    }
    out
}

/// Adjoint of [`neighbor_mean`].
pub fn neighbor_mean_t(g: &Graph, y: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(y.rows(), y.cols());
    for j in 0..y.rows() {
        let nb = g.neighbors(j);
        if nb.is_empty() {
            continue;
        }
        let w = 1.0 / nb.len() as f64;
        for &n in nb {
            let src: Vec<f64> = y.row(j).to_vec();
            for (o, v) in out.row_mut(n).iter_mut().zip(&src) {
                *o += w * v;
            }
        }
    }
    out
}

/// Cached intermediates of one SAGE message-passing op.
pub struct MpCache {
    pub x: DenseMatrix,
    pub agg: DenseMatrix,
    pub z: DenseMatrix,
}

/// `sigma(X W1 + mean_nbrs(X) W2)`, `sigma` = ELU when `activate`.
pub fn mp_forward(g: &Graph, x: &DenseMatrix, w1: &DenseMatrix, w2: &DenseMatrix, activate: bool) -> Result<(DenseMatrix, MpCache)> {
    if x.rows() != g.num_nodes() {
        return Err(Error::Dimension(format!(
            "message passing on {} rows over a {}-node graph",
            x.rows(),
            g.num_nodes()
        )));
    }
    let agg = neighbor_mean(g, x);
    let mut z = x.matmul(w1)?;
    z.axpy(1.0, &agg.matmul(w2)?)?;
    let y = if activate { z.map(elu) } else { z.clone() };
    Ok((y, MpCache { x: x.clone(), agg, z }))
}

/// Tangent of the op output for input tangent `dx`.
pub fn mp_jvp(g: &Graph, cache: &MpCache, dx: &DenseMatrix, w1: &DenseMatrix, w2: &DenseMatrix, activate: bool) -> Result<DenseMatrix> {
    let mut dz = dx.matmul(w1)?;
    dz.axpy(1.0, &neighbor_mean(g, dx).matmul(w2)?)?;
    if activate {
        for (d, z) in dz.as_mut_slice().iter_mut().zip(cache.z.as_slice()) {
            *d *= elu_grad(*z);
        }
    }
    Ok(dz)
}

/// Returns `(dX, dW1, dW2)` for output adjoint `dy`.
pub fn mp_backward(
    g: &Graph,
    cache: &MpCache,
    dy: &DenseMatrix,
    w1: &DenseMatrix,
    w2: &DenseMatrix,
    activate: bool,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let mut dz = dy.clone();
    if activate {
        for (d, z) in dz.as_mut_slice().iter_mut().zip(cache.z.as_slice()) {
            *d *= elu_grad(*z);
        }
    }
    let dw1 = cache.x.t_matmul(&dz)?;
    let dw2 = cache.agg.t_matmul(&dz)?;
    let mut dx = dz.matmul_t(w1)?;
    dx.axpy(1.0, &neighbor_mean_t(g, &dz.matmul_t(w2)?))?;
    Ok((dx, dw1, dw2))
}

/// Cluster-mean pooling `S X`.
pub fn pool(s: &AssignmentMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    s.apply(x)
}

/// Adjoint of [`pool`].
pub fn pool_t(s: &AssignmentMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    s.apply_transpose(y)
}

/// Inverse-distance k-nearest-neighbor interpolation from a coarse node set
/// onto a fine one, stored as sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Unpool {
    coarse: usize,
    rows: Vec<Vec<(usize, f64)>>,
}

impl Unpool {
    pub fn new(fine: &DenseMatrix, coarse: &DenseMatrix, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("unpool neighbor count must be positive".into()));
        }
        if fine.cols() != coarse.cols() || coarse.rows() == 0 {
            return Err(Error::Dimension("unpool position sets are incompatible".into()));
        }
        let k = k.min(coarse.rows());
        let mut rows = Vec::with_capacity(fine.rows());
        for j in 0..fine.rows() {
            let p = fine.row(j);
            let mut d: Vec<(f64, usize)> = (0..coarse.rows())
                .map(|n| {
                    let dist = p
                        .iter()
                        .zip(coarse.row(n))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    (dist, n)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let near = &d[..k];
            let row = if near[0].0 == 0.0 {
                vec![(near[0].1, 1.0)]
            } else {
                let total: f64 = near.iter().map(|(dist, _)| 1.0 / dist).sum();
                near.iter().map(|&(dist, n)| (n, (1.0 / dist) / total)).collect()
            };
            rows.push(row);
        }
        Ok(Self {
            coarse: coarse.rows(),
            rows,
        })
    }

    pub fn fine_nodes(&self) -> usize {
        self.rows.len()
    }

    pub fn apply(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        if y.rows() != self.coarse {
            return Err(Error::Dimension(format!(
                "unpooling {} rows, expected {}",
                y.rows(),
                self.coarse
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows.len(), y.cols());
        for (j, row) in self.rows.iter().enumerate() {
            let dst = out.row_mut(j);
            for &(n, w) in row {
                for (o, v) in dst.iter_mut().zip(y.row(n)) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }

    pub fn apply_t(&self, dy: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(self.coarse, dy.cols());
        for (j, row) in self.rows.iter().enumerate() {
            for &(n, w) in row {
                let src = dy.row(j).to_vec();
                for (o, v) in out.row_mut(n).iter_mut().zip(&src) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }
}
