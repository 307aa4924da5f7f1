//! Oracles shared by the integration tests. Nothing here calls into the
//! code paths it is used to check.

#![allow(dead_code)]

use gdlspg::ae::{self, AEModel, LayerSpec, Padding, TrainConfig};
use gdlspg::coarsen::{build_hierarchy, line_radii};
use gdlspg::fom::burgers::{self, Burgers, BurgersConfig};
use gdlspg::mesh::ScaleStats;
use nalgebra::{DMatrix, SymmetricEigen};

/// Exact solution of the 1D Riemann problem for an ideal gas, sampled at
/// `s = x / t`. States are `(rho, u, p)`.
pub fn exact_riemann(left: (f64, f64, f64), right: (f64, f64, f64), gamma: f64, s: f64) -> (f64, f64, f64) {
    let (rl, ul, pl) = left;
    let (rr, ur, pr) = right;
    let cl = (gamma * pl / rl).sqrt();
    let cr = (gamma * pr / rr).sqrt();
    let g1 = (gamma - 1.0) / (2.0 * gamma);
    let g2 = (gamma + 1.0) / (2.0 * gamma);

    // pressure function of one side and its derivative
    let side = |p: f64, rk: f64, pk: f64, ck: f64| -> (f64, f64) {
        if p > pk {
            let a = 2.0 / ((gamma + 1.0) * rk);
            let b = (gamma - 1.0) / (gamma + 1.0) * pk;
            let q = (a / (p + b)).sqrt();
            ((p - pk) * q, q * (1.0 - 0.5 * (p - pk) / (p + b)))
        } else {
            let f = 2.0 * ck / (gamma - 1.0) * ((p / pk).powf(g1) - 1.0);
            (f, (p / pk).powf(-g2) / (rk * ck))
        }
    };

    let mut p = 0.5 * (pl + pr);
    for _ in 0..100 {
        let (fl, dl) = side(p, rl, pl, cl);
        let (fr, dr) = side(p, rr, pr, cr);
        let next = (p - (fl + fr + ur - ul) / (dl + dr)).max(1e-12);
        let done = (next - p).abs() < 1e-15 * p.max(1.0);
        p = next;
        if done {
            break;
        }
    }
    let u = 0.5 * (ul + ur) + 0.5 * (side(p, rr, pr, cr).0 - side(p, rl, pl, cl).0);

    let gm = (gamma - 1.0) / (gamma + 1.0);
    if s <= u {
        // left of contact
        if p > pl {
            let shock = ul - cl * (g2 * p / pl + g1).sqrt();
            if s < shock {
                left
            } else {
                (rl * (p / pl + gm) / (gm * p / pl + 1.0), u, p)
            }
        } else {
            let head = ul - cl;
            let cstar = cl * (p / pl).powf(g1);
            let tail = u - cstar;
            if s < head {
                left
            } else if s > tail {
                (rl * (p / pl).powf(1.0 / gamma), u, p)
            } else {
                let c = 2.0 / (gamma + 1.0) * (cl + 0.5 * (gamma - 1.0) * (ul - s));
                let uf = 2.0 / (gamma + 1.0) * (cl + 0.5 * (gamma - 1.0) * ul + s);
                let rho = rl * (c / cl).powf(2.0 / (gamma - 1.0));
                (rho, uf, pl * (c / cl).powf(1.0 / g1))
            }
        }
    } else if p > pr {
        let shock = ur + cr * (g2 * p / pr + g1).sqrt();
        if s > shock {
            right
        } else {
            (rr * (p / pr + gm) / (gm * p / pr + 1.0), u, p)
        }
    } else {
        let head = ur + cr;
        let cstar = cr * (p / pr).powf(g1);
        let tail = u + cstar;
        if s > head {
            right
        } else if s < tail {
            (rr * (p / pr).powf(1.0 / gamma), u, p)
        } else {
            let c = 2.0 / (gamma + 1.0) * (cr - 0.5 * (gamma - 1.0) * (ur - s));
            let uf = 2.0 / (gamma + 1.0) * (-cr + 0.5 * (gamma - 1.0) * ur + s);
            let rho = rr * (c / cr).powf(2.0 / (gamma - 1.0));
            (rho, uf, pr * (c / cr).powf(1.0 / g1))
        }
    }
}

/// POD by the method of snapshots: eigenvectors of `X^T X` lifted by `X`.
/// Columns are sign-normalized so the largest-magnitude entry is positive.
pub fn gram_pod(snapshots: &[Vec<f64>], m: usize) -> (DMatrix<f64>, Vec<f64>) {
    let n = snapshots[0].len();
    let x = DMatrix::from_fn(n, snapshots.len(), |i, j| snapshots[j][i]);
    let gram = x.transpose() * &x;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut phi = DMatrix::zeros(n, m);
    let mut sigma = Vec::with_capacity(m);
    for (k, &idx) in order.iter().take(m).enumerate() {
        let s = eig.eigenvalues[idx].max(0.0).sqrt();
        let mut col = &x * eig.eigenvectors.column(idx) / s;
        let imax = col.iamax();
        if col[imax] < 0.0 {
            col = -col;
        }
        phi.set_column(k, &col);
        sigma.push(s);
    }
    (phi, sigma)
}

/// 32-cell Burgers variant with a single trajectory of 20 snapshots.
pub fn toy_burgers() -> (BurgersConfig, Burgers, Vec<Vec<f64>>) {
    let cfg = BurgersConfig {
        cells: 32,
        length: 100.0,
        dt: 1.75,
        final_time: 33.25,
    };
    let model = Burgers::from_config(&cfg, [4.75, 0.02]).unwrap();
    let states = model.solve(cfg.dt, cfg.steps()).unwrap();
    assert_eq!(states.len(), 20);
    (cfg, model, states)
}

/// Autoencoder with hierarchy 32 -> 8 -> 2 and a 2D latent space, overfit
/// to [`toy_burgers`] for `epochs` epochs.
pub fn toy_autoencoder(states: &[Vec<f64>], cfg: &BurgersConfig, epochs: usize) -> (AEModel, Vec<f64>) {
    let pos = burgers::padded_positions(cfg, 0, 0);
    let counts = [32, 8, 2];
    let radii = line_radii(pos[(0, 0)], pos[(31, 0)], &counts);
    let h = build_hierarchy(pos, &counts, &radii, 0).unwrap();
    let stats = ScaleStats::from_states(states.iter().map(Vec::as_slice), 1).unwrap();
    let mut model = AEModel::new(LayerSpec::new(vec![1, 8, 16], 2), h, stats, Padding::default(), 0).unwrap();
    let tc = TrainConfig {
        epochs,
        batch_size: 4,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let report = ae::train(&mut model, states, &[], &tc).unwrap();
    (model, report.train_loss)
}
