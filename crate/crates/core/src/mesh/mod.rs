//! Meshes, level-0 graph construction and state/feature-matrix conversion.

mod features;
mod generate;
mod gmsh;
mod graph;
mod tri;

pub use features::{matricize, vectorize, ScaleStats};
pub use generate::{cylinder_front_mesh, strip_mesh, unit_square_mesh};
pub use gmsh::{parse_gmsh, parse_gmsh_str, write_msh22};
pub use graph::{radius_graph, Graph, RadiusGraph};
pub use tri::{hex_digest, rect_tri_mesh, square_tri_mesh, BoundaryTag, Face, FaceNeighbor, Mesh, MeshSummary, SideTags};
