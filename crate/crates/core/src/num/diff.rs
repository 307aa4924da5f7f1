use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

/// A map `R^n -> R^m` with exact forward-mode derivatives.
pub trait DifferentiableMap {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Value at `x` together with `J(x) * tangents`, where `tangents` is
    /// `input_dim x k`.
    fn push_forward(&self, x: &[f64], tangents: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)>;
}

fn check_input<F: DifferentiableMap + ?Sized>(f: &F, x: &[f64]) -> Result<()> {
    if x.len() != f.input_dim() {
        return Err(Error::Dimension(format!(
            "map expects input of length {}, got {}",
            f.input_dim(),
            x.len()
        )));
    }
    Ok(())
}

/// Exact Jacobian (`output_dim x input_dim`) by pushing the identity forward.
pub fn jacobian<F: DifferentiableMap + ?Sized>(f: &F, x: &[f64]) -> Result<DenseMatrix> {
    check_input(f, x)?;
    let (_, j) = f.push_forward(x, &DenseMatrix::identity(f.input_dim()))?;
    Ok(j)
}

/// Central-difference Jacobian. Verification oracle only.
pub fn fd_jacobian<F: DifferentiableMap + ?Sized>(f: &F, x: &[f64], h: f64) -> Result<DenseMatrix> {
    if !(h > 0.0) {
        return Err(Error::Contract(format!("finite-difference step must be positive, got {h}")));
    }
    check_input(f, x)?;
    let mut jac = DenseMatrix::zeros(f.output_dim(), f.input_dim());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        xp[j] = x[j] + h;
        let fp = f.eval(&xp)?;
        xp[j] = x[j] - h;
        let fm = f.eval(&xp)?;
        xp[j] = x[j];
        for i in 0..fp.len() {
            jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Relative Frobenius distance `||a - b|| / max(||b||, tiny)`.
pub fn relative_frobenius(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b).expect("same shapes");
    d.frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

/// `x -> W x`.
#[derive(Clone, Debug)]
pub struct LinearMap(pub DenseMatrix);

impl DifferentiableMap for LinearMap {
    fn input_dim(&self) -> usize {
        self.0.cols()
    }

    fn output_dim(&self) -> usize {
        self.0.rows()
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.matvec(x)
    }

    fn push_forward(&self, x: &[f64], tangents: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
        Ok((self.0.matvec(x)?, self.0.matmul(tangents)?))
    }
}

/// Identity map on `R^n`.
#[derive(Clone, Copy, Debug)]
pub struct IdentityMap(pub usize);

impl DifferentiableMap for IdentityMap {
    fn input_dim(&self) -> usize {
        self.0
    }

    fn output_dim(&self) -> usize {
        self.0
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.to_vec())
    }

    fn push_forward(&self, x: &[f64], tangents: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
        Ok((x.to_vec(), tangents.clone()))
    }
}
