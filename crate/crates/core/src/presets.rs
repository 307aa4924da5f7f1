//! Full-size configurations of the three benchmark problems. Building these
//! is cheap; running them is not.

use crate::ae::{LayerSpec, TrainConfig};
use crate::coarsen::{line_radii, planar_radii};
use crate::error::Result;
use crate::fom::burgers::{self, BurgersConfig};
use crate::fom::euler::{self, EulerCase, EulerConfig};
use crate::mesh::{cylinder_front_mesh, unit_square_mesh, Mesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Problem {
    Burgers,
    Riemann,
    BowShock,
}

#[derive(Clone, Debug)]
pub struct Preset {
    pub problem: Problem,
    /// Training parameter vectors.
    pub params: Vec<Vec<f64>>,
    pub steps: usize,
    pub nq: usize,
    /// Physical cells.
    pub nc: usize,
    pub pad: (usize, usize),
    /// `|V^0|, |V^1|, ...` including padding at level 0.
    pub node_counts: Vec<usize>,
    pub widths: Vec<usize>,
    pub validation: usize,
    pub train: TrainConfig,
}

const BURGERS_PAD: usize = 30;

impl Preset {
    pub fn burgers() -> Self {
        let cfg = BurgersConfig::default();
        Self {
            problem: Problem::Burgers,
            params: burgers::param_grid(10, 8).iter().map(|m| m.to_vec()).collect(),
            steps: cfg.steps(),
            nq: 1,
            nc: cfg.cells,
            pad: (BURGERS_PAD, BURGERS_PAD),
            node_counts: vec![cfg.cells + 2 * BURGERS_PAD, 64, 16, 4, 2],
            widths: vec![1, 8, 16, 32, 64],
            validation: 4000,
            train: TrainConfig {
                epochs: 1000,
                ..TrainConfig::default()
            },
        }
    }

    pub fn riemann() -> Self {
        Self {
            problem: Problem::Riemann,
            params: euler::riemann_param_grid(5).iter().map(|m| m.to_vec()).collect(),
            steps: EulerConfig::riemann().steps(),
            nq: euler::NQ,
            nc: 4328,
            pad: (0, 0),
            node_counts: vec![4328, 512, 64, 8, 2],
            widths: vec![4, 16, 64, 128, 256],
            validation: 525,
            train: TrainConfig {
                epochs: 5000,
                ..TrainConfig::default()
            },
        }
    }

    pub fn bowshock() -> Self {
        Self {
            problem: Problem::BowShock,
            params: euler::bowshock_params().into_iter().map(|m| vec![m]).collect(),
            steps: EulerConfig::bowshock().steps(),
            nq: euler::NQ,
            nc: 4148,
            pad: (0, 0),
            node_counts: vec![4148, 512, 64, 8, 2],
            widths: vec![4, 16, 64, 128, 256],
            validation: 506,
            train: TrainConfig {
                epochs: 5000,
                ..TrainConfig::default()
            },
        }
    }

    pub fn all() -> [Preset; 3] {
        [Self::burgers(), Self::riemann(), Self::bowshock()]
    }

    pub fn name(&self) -> &'static str {
        match self.problem {
            Problem::Burgers => "burgers",
            Problem::Riemann => "riemann",
            Problem::BowShock => "bowshock",
        }
    }

    pub fn snapshots_per_run(&self) -> usize {
        self.steps + 1
    }

    pub fn total_snapshots(&self) -> usize {
        self.params.len() * self.snapshots_per_run()
    }

    pub fn training_snapshots(&self) -> usize {
        self.total_snapshots() - self.validation
    }

    /// Length of a physical state vector.
    pub fn fom_dim(&self) -> usize {
        self.nq * self.nc
    }

    pub fn layer_spec(&self, latent: usize) -> LayerSpec {
        LayerSpec::new(self.widths.clone(), latent)
    }

    /// Weights of the encoder dense layer per latent dimension.
    pub fn mlp_params_per_latent(&self) -> usize {
        self.layer_spec(1).mlp_params(*self.node_counts.last().unwrap())
    }

    /// The problem's mesh; `None` for the 1D case.
    pub fn mesh(&self) -> Result<Option<Mesh>> {
        Ok(match self.problem {
            Problem::Burgers => None,
            Problem::Riemann => Some(unit_square_mesh(4328)?),
            Problem::BowShock => Some(cylinder_front_mesh(61, 34)?),
        })
    }

    pub fn euler_case(&self) -> Option<EulerCase> {
        match self.problem {
            Problem::Burgers => None,
            Problem::Riemann => Some(EulerCase::Riemann),
            Problem::BowShock => Some(EulerCase::BowShock),
        }
    }

    /// Graph radii per level.
    pub fn radii(&self) -> Vec<f64> {
        match self.problem {
            Problem::Burgers => {
                let cfg = BurgersConfig::default();
                let pos = burgers::padded_positions(&cfg, self.pad.0, self.pad.1);
                line_radii(pos[(0, 0)], pos[(pos.rows() - 1, 0)], &self.node_counts)
            }
            _ => planar_radii(&self.node_counts),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn padded_burgers_graph_size() {
        let p = Preset::burgers();
        assert_eq!(p.node_counts[0], 316);
        assert_eq!(p.radii().len(), 5);
    }
}
