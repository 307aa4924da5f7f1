//! GD-LSPG on Burgers: train a graph autoencoder, then march the latent
//! state with Gauss-Newton on the full-order residual.
//!
//!     cargo run --release --example gd_lspg_burgers -- 2000

use gdlspg::ae::{self, AEModel, LayerSpec, Padding, TrainConfig};
use gdlspg::coarsen::{build_hierarchy, line_radii};
use gdlspg::fom::burgers::{self, Burgers, BurgersConfig};
use gdlspg::fom::ResidualProblem;
use gdlspg::mesh::ScaleStats;
use gdlspg::metrics::relative_error;
use gdlspg::rom::{rom_solve, RomConfig, StepPolicy};

fn main() -> gdlspg::Result<()> {
    let epochs: usize = std::env::args().nth(1).map_or(2000, |a| a.parse().expect("epochs"));
    let cfg = BurgersConfig {
        cells: 32,
        dt: 1.75,
        ..BurgersConfig::default()
    };
    let fom = Burgers::from_config(&cfg, [4.75, 0.02])?;
    let states = fom.solve(cfg.dt, cfg.steps())?;

    let pos = burgers::padded_positions(&cfg, 0, 0);
    let counts = [32, 8, 2];
    let radii = line_radii(pos[(0, 0)], pos[(31, 0)], &counts);
    let hierarchy = build_hierarchy(pos, &counts, &radii, 0)?;
    let stats = ScaleStats::from_states(states.iter().map(Vec::as_slice), 1)?;
    let mut model = AEModel::new(LayerSpec::new(vec![1, 8, 16], 2), hierarchy, stats, Padding::default(), 0)?;
    let tc = TrainConfig {
        epochs,
        batch_size: 4,
        learning_rate: 1e-3,
        ..TrainConfig::default()
    };
    ae::train(&mut model, &states, &[], &tc)?;

    let scheme = burgers::scheme(&cfg)?;
    let problem = ResidualProblem::new(&fom, &scheme);
    let z0 = model.encode(&states[0])?;
    for (name, policy) in [("fixed", StepPolicy::unit()), ("armijo", StepPolicy::armijo())] {
        let rc = RomConfig {
            policy,
            ..RomConfig::gd_lspg()
        };
        let rom = rom_solve(&problem, &model.decoder(true), &z0, cfg.steps(), &rc)?;
        let err = relative_error(states.iter().map(Vec::as_slice), rom.states.iter().map(Vec::as_slice))?;
        let iters: usize = rom.iterations.iter().sum();
        println!("{name:7} state error {err:.4e}, {iters} iterations, final latent {:.4?}", rom.latents.last().unwrap());
    }
    Ok(())
}
