use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

const JITTER_ATTEMPTS: usize = 3;

/// Solve `m x = rhs` for symmetric positive (semi-)definite `m` by Cholesky.
///
/// When the factorization breaks down a diagonal jitter `lambda I` is added,
/// starting at `1e-10 * trace / n` and growing tenfold per retry.
pub fn solve_spd(m: &DenseMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = m.rows();
    if !m.is_square() || rhs.len() != n {
        return Err(Error::Dimension(format!(
            "solve_spd: matrix {:?} with rhs of length {}",
            m.shape(),
            rhs.len()
        )));
    }
    if n == 0 {
        return Ok(vec![]);
    }
    if let Some(l) = cholesky(m, 0.0) {
        return Ok(cholesky_solve(&l, rhs));
    }
    let base = (m.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
    let mut jitter = 1e-10 * base;
    for _ in 0..JITTER_ATTEMPTS {
        if let Some(l) = cholesky(m, jitter) {
            return Ok(cholesky_solve(&l, rhs));
        }
        jitter *= 10.0;
    }
    Err(Error::NotPositiveDefinite {
        attempts: JITTER_ATTEMPTS,
        jitter: jitter / 10.0,
    })
}

/// Lower Cholesky factor of `m + shift I`, or `None` on breakdown.
fn cholesky(m: &DenseMatrix, shift: f64) -> Option<DenseMatrix> {
    let n = m.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = m[(j, j)] + shift;
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &DenseMatrix, rhs: &[f64]) -> Vec<f64> {
    let n = l.rows();
    let mut y = rhs.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::matrix::norm2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_diagonal() {
        let b = vec![1.0, -2.0, 3.5];
        assert_eq!(solve_spd(&DenseMatrix::identity(3), &b).unwrap(), b);
        let d = DenseMatrix::diag(&[2.0, 4.0]);
        let x = solve_spd(&d, &[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn random_gram_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let g = DenseMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
            let mut a = g.t_matmul(&g).unwrap();
            for i in 0..5 {
                a[(i, i)] += 1e-3;
            }
            let b: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x = solve_spd(&a, &b).unwrap();
            let ax = a.matvec(&x).unwrap();
            let r: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
            assert!(norm2(&r) <= 1e-10 * norm2(&b));
        }
    }

    #[test]
    fn singular_psd_gets_jitter() {
        // rank-one PSD matrix
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let x = solve_spd(&a, &[2.0, 2.0]).unwrap();
        assert!(x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn indefinite_fails() {
        let a = DenseMatrix::diag(&[1.0, -5.0]);
        assert!(matches!(
            solve_spd(&a, &[1.0, 1.0]),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }
}
