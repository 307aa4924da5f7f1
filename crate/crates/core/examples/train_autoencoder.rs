//! Train a small graph autoencoder on a coarse Burgers trajectory and report
//! the reconstruction error.
//!
//!     cargo run --release --example train_autoencoder -- 500

use gdlspg::ae::{self, AEModel, LayerSpec, Padding, TrainConfig};
use gdlspg::coarsen::{build_hierarchy, line_radii};
use gdlspg::fom::burgers::{self, Burgers, BurgersConfig};
use gdlspg::mesh::ScaleStats;
use gdlspg::metrics::ae_reconstruction_error;

fn main() -> gdlspg::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(500, |a| a.parse().expect("epochs"));
    let cfg = BurgersConfig {
        cells: 32,
        dt: 1.75,
        ..BurgersConfig::default()
    };
    let states = Burgers::from_config(&cfg, [4.75, 0.02])?.solve(cfg.dt, cfg.steps())?;

    let pos = burgers::padded_positions(&cfg, 0, 0);
    let counts = [32, 8, 2];
    let radii = line_radii(pos[(0, 0)], pos[(31, 0)], &counts);
    let hierarchy = build_hierarchy(pos, &counts, &radii, 0)?;
    let stats = ScaleStats::from_states(states.iter().map(Vec::as_slice), 1)?;
    let mut model = AEModel::new(LayerSpec::new(vec![1, 8, 16], 2), hierarchy, stats, Padding::default(), 0)?;
    println!("{} snapshots, {} parameters", states.len(), model.num_params());

    let tc = TrainConfig {
        epochs,
        batch_size: 4,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    let report = ae::train(&mut model, &states, &[], &tc)?;
    for (e, loss) in report.train_loss.iter().enumerate().step_by((epochs / 5).max(1)) {
        println!("epoch {e:5}  loss {loss:.4e}");
    }
    let err = ae_reconstruction_error(&model, states.iter().map(Vec::as_slice))?;
    println!("reconstruction error {err:.4e}");
    Ok(())
}
