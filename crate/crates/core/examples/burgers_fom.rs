//! Full-order 1D Burgers run with backward Euler and Newton.
//!
//!     cargo run --release --example burgers_fom -- 4.3 0.021

use gdlspg::fom::burgers::{Burgers, BurgersConfig};

fn main() -> gdlspg::Result<()> {
    let mut args = std::env::args().skip(1);
    let mu1: f64 = args.next().map_or(4.3, |a| a.parse().expect("mu1"));
    let mu2: f64 = args.next().map_or(0.021, |a| a.parse().expect("mu2"));

    let cfg = BurgersConfig::default();
    let model = Burgers::from_config(&cfg, [mu1, mu2])?;
    let states = model.solve(cfg.dt, cfg.steps())?;
    println!("{} cells, {} steps of {}", cfg.cells, cfg.steps(), cfg.dt);

    // crude shock locator: first cell where the profile drops below the midpoint
    let x = model.centers();
    for n in (0..states.len()).step_by(states.len() / 5) {
        let s = &states[n];
        let mid = 0.5 * (s[0] + 1.0);
        let front = match s.iter().position(|&v| v < mid) {
            Some(i) if s[0] > 1.0 => format!("front near x = {:.2}", x[i]),
            _ => "no front in the domain".to_string(),
        };
        println!("t = {:6.2}  inlet {:.4}  {front}", n as f64 * cfg.dt, s[0]);
    }
    Ok(())
}
