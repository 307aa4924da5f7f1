//! 2D Riemann problem on the unit square plus a Sod shock tube on a strip.
//!
//!     cargo run --release --example euler_riemann -- -1.0 -0.5

use gdlspg::fom::euler::{self, Euler, EulerCase, EulerConfig, Primitive, GAMMA};
use gdlspg::mesh::{strip_mesh, unit_square_mesh};

fn main() -> gdlspg::Result<()> {
    let mut args = std::env::args().skip(1);
    let mu_u: f64 = args.next().map_or(-1.0, |a| a.parse().expect("mu_u"));
    let mu_v: f64 = args.next().map_or(-0.5, |a| a.parse().expect("mu_v"));

    let mesh = unit_square_mesh(2048)?;
    let cfg = EulerConfig {
        final_time: 0.1,
        ..EulerConfig::riemann()
    };
    let (traj, cfl) = euler::run_case(&mesh, EulerCase::Riemann, &[mu_u, mu_v], &cfg)?;
    let n = mesh.num_cells();
    let last = traj.states.last().unwrap();
    let (lo, hi) = last[..n].iter().fold((f64::MAX, f64::MIN), |(a, b), &r| (a.min(r), b.max(r)));
    println!("riemann mu = ({mu_u}, {mu_v}): {} steps, max CFL {cfl:.3}", cfg.steps());
    println!("density range at t = {}: [{lo:.4}, {hi:.4}]", cfg.final_time);

    let tube = Euler::new(strip_mesh(200)?, GAMMA)?;
    let x0 = tube.state_from(|_, c| {
        if c[0] < 0.5 {
            Primitive::new(1.0, 0.0, 0.0, 1.0)
        } else {
            Primitive::new(0.125, 0.0, 0.0, 0.1)
        }
    });
    let (states, cfl) = tube.solve(x0, 2e-4, 1000)?;
    let rho = &states.last().unwrap()[..tube.num_cells()];
    println!("sod at t = 0.2 (max CFL {cfl:.3}), density every 40th cell:");
    for i in (0..tube.num_cells()).step_by(40) {
        println!("  x = {:.3}  rho = {:.4}", tube.mesh().centers[i][0], rho[i]);
    }
    Ok(())
}
