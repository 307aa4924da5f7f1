//! Parameterized 1D inviscid Burgers with a spatially varying source.
//!
//! `w_t + (w^2/2)_x = 0.02 exp(mu2 x)` on `[0, L]`, `w(0, t) = mu1`, `w(x, 0) = 1`,
//! first-order upwind finite volumes and backward Euler in time.

use rayon::prelude::*;

use super::{TimeScheme, Velocity};
use crate::error::{Error, Result};
use crate::num::{norm2, DenseMatrix};
use crate::snapshot::{descriptor_hash, SnapshotSet, Trajectory};

pub const NEWTON_MAX_ITER: usize = 50;

#[derive(Clone, Debug, PartialEq)]
pub struct BurgersConfig {
    pub cells: usize,
    pub length: f64,
    pub dt: f64,
    pub final_time: f64,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        Self {
            cells: 256,
            length: 100.0,
            dt: 0.07,
            final_time: 35.0,
        }
    }
}

impl BurgersConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells < 2 {
            return Err(Error::Config(format!("need at least 2 cells, got {}", self.cells)));
        }
        if !(self.dt > 0.0) || !(self.length > 0.0) || !(self.final_time >= 0.0) {
            return Err(Error::Config("dt and length must be positive, final time non-negative".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Number of time steps (snapshots minus one).
    pub fn steps(&self) -> usize {
        (self.final_time / self.dt).round() as usize
    }

    pub fn mesh_hash(&self) -> String {
        descriptor_hash(&format!("burgers1d:{}:{:e}", self.cells, self.length))
    }
}

/// Burgers velocity `f(w)` for one parameter pair.
#[derive(Clone, Debug)]
pub struct Burgers {
    cells: usize,
    dx: f64,
    mu: [f64; 2],
    source: Vec<f64>,
}

impl Burgers {
    pub fn new(cells: usize, dx: f64, mu: [f64; 2]) -> Result<Self> {
        if cells == 0 || !(dx > 0.0) {
            return Err(Error::Config("Burgers model needs cells > 0 and dx > 0".into()));
        }
        let source = (0..cells)
            .map(|i| 0.02 * (mu[1] * (i as f64 + 0.5) * dx).exp())
            .collect();
        Ok(Self { cells, dx, mu, source })
    }

    pub fn from_config(cfg: &BurgersConfig, mu: [f64; 2]) -> Result<Self> {
        cfg.validate()?;
        Self::new(cfg.cells, cfg.dx(), mu)
    }

    pub fn mu(&self) -> [f64; 2] {
        self.mu
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|i| (i as f64 + 0.5) * self.dx).collect()
    }

    fn upwind(&self, w: &[f64], i: usize) -> f64 {
        w.get(i.wrapping_sub(1)).copied().unwrap_or(self.mu[0])
    }

    /// One backward-Euler step by Newton's method on the bidiagonal system.
    pub fn step(&self, prev: &[f64], dt: f64) -> Result<NewtonReport> {
        let n = self.cells;
        if prev.len() != n {
            return Err(Error::Dimension(format!("state length {} for {n} cells", prev.len())));
        }
        let tol = 1e-10 * n as f64;
        let c = dt / self.dx;
        let mut w = prev.to_vec();
        let mut norms = Vec::new();
        for it in 0..=NEWTON_MAX_ITER {
            let f = self.velocity(&w, 0.0)?;
            let r: Vec<f64> = (0..n).map(|i| w[i] - prev[i] - dt * f[i]).collect();
            let rn = norm2(&r);
            norms.push(rn);
            if !rn.is_finite() {
                break;
            }
            if rn <= tol {
                return Ok(NewtonReport {
                    state: w,
                    iterations: it,
                    residual: rn,
                });
            }
            if it == NEWTON_MAX_ITER {
                break;
            }
            // J = I - dt df/dw: diagonal 1 + c w_i, sub-diagonal -c w_{i-1}
            let mut delta = vec![0.0; n];
            for i in 0..n {
                let d = 1.0 + c * w[i];
                if d == 0.0 {
                    return Err(Error::NewtonDiverged { step: 0, norms });
                }
                let sub = if i > 0 { -c * w[i - 1] * delta[i - 1] } else { 0.0 };
                delta[i] = (-r[i] - sub) / d;
            }
            w.iter_mut().zip(&delta).for_each(|(a, b)| *a += b);
        }
        Err(Error::NewtonDiverged { step: 0, norms })
    }

    /// March from `w = 1` for `steps` steps; returns all states including the
    /// initial one.
    pub fn solve(&self, dt: f64, steps: usize) -> Result<Vec<Vec<f64>>> {
        let mut states = Vec::with_capacity(steps + 1);
        states.push(vec![1.0; self.cells]);
        for k in 0..steps {
            let next = self
                .step(&states[k], dt)
                .map_err(|e| match e {
                    Error::NewtonDiverged { norms, .. } => Error::NewtonDiverged { step: k + 1, norms },
                    other => Error::Step {
                        step: k + 1,
                        source: Box::new(other),
                    },
                })?
                .state;
            states.push(next);
        }
        Ok(states)
    }
}

/// Outcome of a converged Newton solve.
#[derive(Clone, Debug)]
pub struct NewtonReport {
    pub state: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl Velocity for Burgers {
    fn dim(&self) -> usize {
        self.cells
    }

    fn velocity(&self, w: &[f64], _t: f64) -> Result<Vec<f64>> {
        if w.len() != self.cells {
            return Err(Error::Dimension(format!("state length {} for {} cells", w.len(), self.cells)));
        }
        let inv = 1.0 / (2.0 * self.dx);
        Ok((0..self.cells)
            .map(|i| {
                let wl = self.upwind(w, i);
                (wl * wl - w[i] * w[i]) * inv + self.source[i]
            })
            .collect())
    }

    fn jacobian_apply(&self, w: &[f64], _t: f64, v: &DenseMatrix) -> Result<DenseMatrix> {
        if w.len() != self.cells || v.rows() != self.cells {
            return Err(Error::Dimension("Burgers jacobian operand size".into()));
        }
        let inv = 1.0 / self.dx;
        let mut out = DenseMatrix::zeros(self.cells, v.cols());
        for i in 0..self.cells {
            for k in 0..v.cols() {
                let mut s = -w[i] * inv * v[(i, k)];
                if i > 0 {
                    s += w[i - 1] * inv * v[(i - 1, k)];
                }
                out[(i, k)] = s;
            }
        }
        Ok(out)
    }
}

/// The `(mu1, mu2)` training grid: `mu1 = 4.25 + 1.25 i / 9`, `mu2 = 0.015 + 0.015 j / 7`.
pub fn param_grid(n1: usize, n2: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            out.push([4.25 + 1.25 * i as f64 / 9.0, 0.015 + 0.015 * j as f64 / 7.0]);
        }
    }
    out
}

/// Trajectory with padding nodes: `pad_left` copies of `mu1` ahead of the
/// inlet, and `pad_right` cells taken from a run on a longer domain.
pub fn padded_trajectory(cfg: &BurgersConfig, mu: [f64; 2], pad_left: usize, pad_right: usize) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let model = Burgers::new(cfg.cells + pad_right, cfg.dx(), mu)?;
    let states = model.solve(cfg.dt, cfg.steps())?;
    Ok(states
        .into_iter()
        .map(|s| {
            let mut full = vec![mu[0]; pad_left];
            full.extend(s);
            full
        })
        .collect())
}

/// Node coordinates for a padded Burgers graph, continuing the uniform grid.
pub fn padded_positions(cfg: &BurgersConfig, pad_left: usize, pad_right: usize) -> DenseMatrix {
    let dx = cfg.dx();
    let n = pad_left + cfg.cells + pad_right;
    DenseMatrix::from_fn(n, 1, |i, _| (i as f64 - pad_left as f64 + 0.5) * dx)
}

/// A parameter whose FOM run failed.
#[derive(Debug)]
pub struct FailedRun {
    pub mu: [f64; 2],
    pub error: Error,
}

/// Run every parameter in parallel; failures are returned alongside the set.
pub fn training_set(
    cfg: &BurgersConfig,
    params: &[[f64; 2]],
    pad_left: usize,
    pad_right: usize,
) -> Result<(SnapshotSet, Vec<FailedRun>)> {
    cfg.validate()?;
    let results: Vec<_> = params
        .par_iter()
        .map(|&mu| (mu, padded_trajectory(cfg, mu, pad_left, pad_right)))
        .collect();
    let mut set = SnapshotSet::new("burgers", 1, cfg.cells, cfg.dt, cfg.mesh_hash()).with_padding(pad_left, pad_right);
    let mut failed = Vec::new();
    for (mu, r) in results {
        match r {
            Ok(states) => set.push(Trajectory {
                mu: mu.to_vec(),
                states,
                latents: None,
            })?,
            Err(error) => failed.push(FailedRun { mu, error }),
        }
    }
    Ok((set, failed))
}

/// Backward-Euler scheme for a config.
pub fn scheme(cfg: &BurgersConfig) -> Result<TimeScheme> {
    TimeScheme::backward_euler(cfg.dt)
}
