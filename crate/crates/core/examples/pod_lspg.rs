//! POD basis from two Burgers trajectories and a POD-LSPG solve at a new
//! parameter.
//!
//!     cargo run --release --example pod_lspg -- 10

use gdlspg::fom::burgers::{self, Burgers, BurgersConfig};
use gdlspg::fom::ResidualProblem;
use gdlspg::metrics::relative_error;
use gdlspg::rom::{pod_basis, pod_lspg, RomConfig};

fn main() -> gdlspg::Result<()> {
    let m: usize = std::env::args().nth(1).map_or(10, |a| a.parse().expect("basis size"));
    let cfg = BurgersConfig::default();
    let mut snaps = Vec::new();
    for mu in [[4.25, 0.015], [5.5, 0.03]] {
        snaps.extend(Burgers::from_config(&cfg, mu)?.solve(cfg.dt, cfg.steps())?);
    }
    let basis = pod_basis(&snaps, m)?;
    println!("basis {m}, leading singular values {:.3?}", &basis.singular_values[..4]);

    let test = Burgers::from_config(&cfg, [4.9, 0.022])?;
    let truth = test.solve(cfg.dt, cfg.steps())?;
    let scheme = burgers::scheme(&cfg)?;
    let problem = ResidualProblem::new(&test, &scheme);
    let x0 = basis.project(&truth[0])?;
    let rom = pod_lspg(&problem, &basis.phi, &x0, cfg.steps(), &RomConfig::pod_lspg())?;
    let err = relative_error(truth.iter().map(Vec::as_slice), rom.states.iter().map(Vec::as_slice))?;
    let iters: usize = rom.iterations.iter().sum();
    println!("state error {err:.4e}, {iters} Gauss-Newton iterations over {} steps", cfg.steps());
    Ok(())
}
