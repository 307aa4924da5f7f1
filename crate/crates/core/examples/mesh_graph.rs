//! Generate a triangulated square, summarize it and build a radius graph on
//! the cell centers.
//!
//!     cargo run --release --example mesh_graph -- 800 0.08

use gdlspg::mesh::{unit_square_mesh, Graph};

fn main() -> gdlspg::Result<()> {
    let mut args = std::env::args().skip(1);
    let cells: usize = args.next().map_or(800, |a| a.parse().expect("cell count"));
    let radius: f64 = args.next().map_or(0.08, |a| a.parse().expect("radius"));

    let mesh = unit_square_mesh(cells)?;
    println!("{}", mesh.summary());
    println!("hash: {}", mesh.hash());

    let g = Graph::from_radius(mesh.positions(), radius)?;
    let mean_degree = 2.0 * g.edges().len() as f64 / g.num_nodes() as f64;
    println!(
        "radius {radius}: {} edges, mean degree {mean_degree:.2}, {} isolated, {} components",
        g.edges().len(),
        g.isolated_nodes(),
        g.components()
    );
    Ok(())
}
