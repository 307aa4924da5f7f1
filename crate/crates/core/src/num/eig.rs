//! Dense symmetric eigensolver: Householder tridiagonalization followed by
//! the implicit QL algorithm with Wilkinson-style shifts.

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 60;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column `k` is the unit eigenvector for `eigenvalues[k]`.
    pub eigenvectors: DenseMatrix,
}

impl EigenDecomposition {
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k)
    }

    /// `Q diag(lambda) Q^T`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.eigenvalues.len();
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for i in 0..n {
            for (j, &l) in self.eigenvalues.iter().enumerate() {
                scaled[(i, j)] *= l;
            }
        }
        scaled.matmul_t(q).expect("square factors")
    }
}

/// Full eigendecomposition of a symmetric matrix.
pub fn symmetric_eig(m: &DenseMatrix) -> Result<EigenDecomposition> {
    if !m.is_square() {
        return Err(Error::Contract(format!(
            "symmetric_eig needs a square matrix, got {:?}",
            m.shape()
        )));
    }
    let asym = m.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(Error::Contract(format!(
            "matrix is not symmetric (max |m_ij - m_ji| = {asym:e})"
        )));
    }
    if !m.is_finite() {
        return Err(Error::Contract("matrix has non-finite entries".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: vec![],
            eigenvectors: DenseMatrix::zeros(0, 0),
        });
    }

    // Work on rows of V; symmetrize so tiny asymmetries cannot leak through.
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (m[(i, j)] + m[(j, i)])).collect())
        .collect();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e)?;

    // Sort ascending; stable on ties so ordering follows the solver.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let eigenvalues = order.iter().map(|&k| d[k]).collect();
    let eigenvectors = DenseMatrix::from_fn(n, n, |i, j| v[i][order[j]]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Householder reduction to tridiagonal form. On exit `v` holds the
/// accumulated orthogonal transform, `d` the diagonal and `e[1..]` the
/// sub-diagonal.
fn tridiagonalize(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    d[..n].copy_from_slice(&v[n - 1][..n]);

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
                v[j][i] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in (j + 1)..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k][j] -= f * e[k] + g * d[k];
                }
                d[j] = v[i - 1][j];
                v[i][j] = 0.0;
            }
        }
        d[i] = h;
    }

    // Accumulate transformations.
    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    v[k][j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k][i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = 0.0;
    }
    v[n - 1][n - 1] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL iteration on the symmetric tridiagonal matrix (d, e).
fn ql_implicit(v: &mut [Vec<f64>], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }

        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_SWEEPS {
                    return Err(Error::EigenNoConvergence {
                        index: l,
                        iterations: MAX_SWEEPS,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
