//! Full-order models and the time-discrete residual they share with the ROM.

pub mod burgers;
pub mod euler;

use crate::error::{Error, Result};
use crate::num::DenseMatrix;

/// Linear multistep coefficients `alpha_0..alpha_tau`, `beta_0..beta_tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeScheme {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    dt: f64,
}

impl TimeScheme {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, dt: f64) -> Result<Self> {
        if alpha.len() != beta.len() || alpha.len() < 2 {
            return Err(Error::Contract(
                "a time scheme needs matching alpha/beta lists of length >= 2".into(),
            ));
        }
        if alpha[0] == 0.0 {
            return Err(Error::Contract("alpha_0 must be non-zero".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Contract(format!("time step must be positive, got {dt}")));
        }
        Ok(Self { alpha, beta, dt })
    }

    /// `x^{n+1} - x^n - dt f(x^{n+1})`.
    pub fn backward_euler(dt: f64) -> Result<Self> {
        Self::new(vec![1.0, -1.0], vec![-dt, 0.0], dt)
    }

    /// `x^{n+1} - x^n + dt f(x^n)`; the velocity is the outward flux balance.
    pub fn forward_euler(dt: f64) -> Result<Self> {
        Self::new(vec![1.0, -1.0], vec![0.0, dt], dt)
    }

    /// Number of previous states the residual needs.
    pub fn steps(&self) -> usize {
        self.alpha.len() - 1
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn is_explicit(&self) -> bool {
        self.beta[0] == 0.0
    }
}

/// Semi-discrete right-hand side `f(x, t)`.
pub trait Velocity: Sync {
    fn dim(&self) -> usize;

    fn velocity(&self, x: &[f64], t: f64) -> Result<Vec<f64>>;

    /// `(df/dx)(x) V`. The default is a central difference per column, kept
    /// for models whose flux is only piecewise smooth.
    fn jacobian_apply(&self, x: &[f64], t: f64, v: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.dim();
        if v.rows() != n || x.len() != n {
            return Err(Error::Dimension("jacobian_apply operand size".into()));
        }
        let xn = crate::num::norm2(x).max(1.0);
        let mut out = DenseMatrix::zeros(n, v.cols());
        for k in 0..v.cols() {
            let col = v.column(k);
            let vn = crate::num::norm2(&col);
            if vn == 0.0 {
                continue;
            }
            let h = 1e-7 * xn / vn;
            let xp: Vec<f64> = x.iter().zip(&col).map(|(a, b)| a + h * b).collect();
            let xm: Vec<f64> = x.iter().zip(&col).map(|(a, b)| a - h * b).collect();
            let fp = self.velocity(&xp, t)?;
            let fm = self.velocity(&xm, t)?;
            let d: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
            out.set_column(k, &d);
        }
        Ok(out)
    }
}

/// Residual `r(xi) = alpha_0 xi + beta_0 f(xi) + sum_i (alpha_i x^{n+1-i} + beta_i f(x^{n+1-i}))`.
pub struct ResidualProblem<'a, V: Velocity + ?Sized> {
    pub velocity: &'a V,
    pub scheme: &'a TimeScheme,
}

impl<'a, V: Velocity + ?Sized> ResidualProblem<'a, V> {
    pub fn new(velocity: &'a V, scheme: &'a TimeScheme) -> Self {
        Self { velocity, scheme }
    }

    pub fn dim(&self) -> usize {
        self.velocity.dim()
    }

    /// The part of the residual fixed by the history (most recent state
    /// first), evaluated once per time step.
    pub fn history_term(&self, history: &[&[f64]], t_next: f64) -> Result<Vec<f64>> {
        let tau = self.scheme.steps();
        if history.len() != tau {
            return Err(Error::Contract(format!(
                "scheme needs {tau} previous states, got {}",
                history.len()
            )));
        }
        let n = self.dim();
        let mut acc = vec![0.0; n];
        for (i, h) in history.iter().enumerate() {
            if h.len() != n {
                return Err(Error::Dimension(format!("history state {i} has length {}", h.len())));
            }
            let a = self.scheme.alpha[i + 1];
            let b = self.scheme.beta[i + 1];
            if a != 0.0 {
                acc.iter_mut().zip(h.iter()).for_each(|(s, x)| *s += a * x);
            }
            if b != 0.0 {
                let f = self.velocity.velocity(h, t_next - (i + 1) as f64 * self.scheme.dt)?;
                acc.iter_mut().zip(&f).for_each(|(s, v)| *s += b * v);
            }
        }
        Ok(acc)
    }

    pub fn residual(&self, xi: &[f64], history_term: &[f64], t_next: f64) -> Result<Vec<f64>> {
        let a0 = self.scheme.alpha[0];
        let b0 = self.scheme.beta[0];
        let mut r: Vec<f64> = xi.iter().zip(history_term).map(|(x, h)| a0 * x + h).collect();
        if b0 != 0.0 {
            let f = self.velocity.velocity(xi, t_next)?;
            r.iter_mut().zip(&f).for_each(|(s, v)| *s += b0 * v);
        }
        Ok(r)
    }

    /// `(dr/dxi) V = alpha_0 V + beta_0 (df/dxi) V`.
    pub fn jacobian_apply(&self, xi: &[f64], t_next: f64, v: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = v.clone();
        out.scale_in_place(self.scheme.alpha[0]);
        let b0 = self.scheme.beta[0];
        if b0 != 0.0 {
            let jf = self.velocity.jacobian_apply(xi, t_next, v)?;
            out.axpy(b0, &jf)?;
        }
        Ok(out)
    }
}
