//! Spectral clustering hierarchy on a square mesh, with per-level diagnostics.
//!
//!     cargo run --release --example coarsen_hierarchy

use gdlspg::coarsen::{build_hierarchy, planar_radii};
use gdlspg::mesh::unit_square_mesh;

fn main() -> gdlspg::Result<()> {
    let mesh = unit_square_mesh(512)?;
    let counts = [512, 64, 8, 2];
    let radii = planar_radii(&counts);
    let h = build_hierarchy(mesh.positions(), &counts, &radii, 0)?;

    for (level, g) in h.graphs.iter().enumerate() {
        println!(
            "level {level}: {:4} nodes, {:5} edges, radius {:.4}",
            g.num_nodes(),
            g.edges().len(),
            h.radii[level]
        );
    }
    println!();
    print!("{}", h.diagnostics_csv());
    println!("hash {}", h.hash());
    Ok(())
}
