use std::collections::HashMap;
use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::num::DenseMatrix;

/// Boundary condition attached to a boundary face.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Inflow,
    Outflow,
    SlipWall,
    LeftDirichlet,
}

impl BoundaryTag {
    /// Map a Gmsh physical-group name onto a tag.
    pub fn from_physical_name(name: &str) -> Option<Self> {
        let n = name.to_ascii_lowercase();
        if n.contains("inflow") || n.contains("inlet") {
            Some(Self::Inflow)
        } else if n.contains("outflow") || n.contains("outlet") || n.contains("farfield") {
            Some(Self::Outflow)
        } else if n.contains("wall") || n.contains("slip") || n.contains("cylinder") {
            Some(Self::SlipWall)
        } else if n.contains("dirichlet") {
            Some(Self::LeftDirichlet)
        } else {
            None
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Inflow => "inflow",
            Self::Outflow => "outflow",
            Self::SlipWall => "slip-wall",
            Self::LeftDirichlet => "left-dirichlet",
        }
    }
}

impl fmt::Display for BoundaryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FaceNeighbor {
    Cell(usize),
    Boundary(BoundaryTag),
}

/// A cell interface. `normal` points out of `left`.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub left: usize,
    pub right: FaceNeighbor,
    pub normal: [f64; 2],
    pub length: f64,
    pub vertices: [usize; 2],
}

impl Face {
    pub fn is_interior(&self) -> bool {
        matches!(self.right, FaceNeighbor::Cell(_))
    }
}

/// 2D triangular mesh with derived finite-volume geometry.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    pub centers: Vec<[f64; 2]>,
    pub areas: Vec<f64>,
    pub faces: Vec<Face>,
    /// Face indices touching each cell.
    pub cell_faces: Vec<Vec<usize>>,
}

/// Boundary tags for the four sides of a rectangle.
#[derive(Clone, Copy, Debug)]
pub struct SideTags {
    pub left: BoundaryTag,
    pub right: BoundaryTag,
    pub bottom: BoundaryTag,
    pub top: BoundaryTag,
}

impl SideTags {
    pub fn uniform(tag: BoundaryTag) -> Self {
        Self {
            left: tag,
            right: tag,
            bottom: tag,
            top: tag,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MeshSummary {
    pub cells: usize,
    pub vertices: usize,
    pub interior_faces: usize,
    pub boundary_faces: Vec<(BoundaryTag, usize)>,
    pub min_edge: f64,
    pub max_edge: f64,
    pub total_area: f64,
}

impl fmt::Display for MeshSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cells: {}", self.cells)?;
        writeln!(f, "vertices: {}", self.vertices)?;
        writeln!(f, "interior faces: {}", self.interior_faces)?;
        for (tag, n) in &self.boundary_faces {
            writeln!(f, "boundary {tag}: {n}")?;
        }
        writeln!(f, "edge length: min {:.6e}, max {:.6e}", self.min_edge, self.max_edge)?;
        write!(f, "total area: {:.12}", self.total_area)
    }
}

impl Mesh {
    /// Build a mesh from triangles. `boundary` assigns tags to boundary edges
    /// (unordered vertex pairs); untagged boundary edges become outflow.
    pub fn from_triangles(
        vertices: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: &HashMap<(usize, usize), BoundaryTag>,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Contract("mesh has no cells".into()));
        }
        let mut cells = Vec::with_capacity(triangles.len());
        let mut centers = Vec::with_capacity(triangles.len());
        let mut areas = Vec::with_capacity(triangles.len());
        for (c, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::Contract(format!("cell {c} references a missing vertex")));
            }
            let [a, b, d] = *tri;
            let signed = signed_area(vertices[a], vertices[b], vertices[d]);
            if signed == 0.0 {
                return Err(Error::Contract(format!("cell {c} is degenerate")));
            }
            let ccw = if signed > 0.0 { [a, b, d] } else { [a, d, b] };
            cells.push(ccw);
            areas.push(signed.abs());
            centers.push([
                (vertices[a][0] + vertices[b][0] + vertices[d][0]) / 3.0,
                (vertices[a][1] + vertices[b][1] + vertices[d][1]) / 3.0,
            ]);
        }

        // edge -> (owner cell, directed edge as traversed by the owner)
        let mut owner: HashMap<(usize, usize), (usize, [usize; 2])> = HashMap::new();
        let mut faces = Vec::new();
        let mut cell_faces = vec![Vec::with_capacity(3); cells.len()];
        let mut face_of_edge: HashMap<(usize, usize), usize> = HashMap::new();
        for (c, tri) in cells.iter().enumerate() {
            for k in 0..3 {
                let (p, q) = (tri[k], tri[(k + 1) % 3]);
                let key = (p.min(q), p.max(q));
                if let Some(&f) = face_of_edge.get(&key) {
                    let face: &mut Face = &mut faces[f];
                    if face.is_interior() {
                        return Err(Error::Contract(format!(
                            "edge ({p}, {q}) is shared by more than two cells"
                        )));
                    }
                    face.right = FaceNeighbor::Cell(c);
                    cell_faces[c].push(f);
                } else {
                    let (nrm, len) = outward_normal(vertices[p], vertices[q]);
                    owner.insert(key, (c, [p, q]));
                    face_of_edge.insert(key, faces.len());
                    cell_faces[c].push(faces.len());
                    faces.push(Face {
                        left: c,
                        right: FaceNeighbor::Boundary(BoundaryTag::Outflow),
                        normal: nrm,
                        length: len,
                        vertices: [p, q],
                    });
                }
            }
        }
        for face in faces.iter_mut() {
            if let FaceNeighbor::Boundary(_) = face.right {
                let key = (face.vertices[0].min(face.vertices[1]), face.vertices[0].max(face.vertices[1]));
                let tag = boundary.get(&key).copied().unwrap_or(BoundaryTag::Outflow);
                face.right = FaceNeighbor::Boundary(tag);
            }
        }
        Ok(Self {
            vertices,
            cells,
            centers,
            areas,
            faces,
            cell_faces,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Cell centers as a `Nc x 2` position matrix.
    pub fn positions(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.cells.len(), 2, |i, j| self.centers[i][j])
    }

    /// Cells sharing a face with `cell`.
    pub fn neighbors(&self, cell: usize) -> Vec<usize> {
        self.cell_faces[cell]
            .iter()
            .filter_map(|&f| {
                let face = &self.faces[f];
                match face.right {
                    FaceNeighbor::Cell(r) if face.left == cell => Some(r),
                    FaceNeighbor::Cell(_) => Some(face.left),
                    FaceNeighbor::Boundary(_) => None,
                }
            })
            .collect()
    }

    /// Outward normal of `face` as seen from `cell`.
    pub fn normal_from(&self, face: usize, cell: usize) -> [f64; 2] {
        let f = &self.faces[face];
        if f.left == cell {
            f.normal
        } else {
            [-f.normal[0], -f.normal[1]]
        }
    }

    pub fn summary(&self) -> MeshSummary {
        let mut counts: HashMap<BoundaryTag, usize> = HashMap::new();
        let mut interior = 0;
        let (mut min_edge, mut max_edge) = (f64::INFINITY, 0.0_f64);
        for f in &self.faces {
            min_edge = min_edge.min(f.length);
            max_edge = max_edge.max(f.length);
            match f.right {
                FaceNeighbor::Cell(_) => interior += 1,
                FaceNeighbor::Boundary(t) => *counts.entry(t).or_default() += 1,
            }
        }
        let mut boundary_faces: Vec<_> = counts.into_iter().collect();
        boundary_faces.sort();
        MeshSummary {
            cells: self.cells.len(),
            vertices: self.vertices.len(),
            interior_faces: interior,
            boundary_faces,
            min_edge,
            max_edge,
            total_area: self.areas.iter().sum(),
        }
    }

    /// SHA-256 over vertex coordinates and connectivity, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(b"mesh");
        for v in &self.vertices {
            h.update(v[0].to_le_bytes());
            h.update(v[1].to_le_bytes());
        }
        for c in &self.cells {
            for &v in c {
                h.update((v as u64).to_le_bytes());
            }
        }
        for f in &self.faces {
            if let FaceNeighbor::Boundary(t) = f.right {
                h.update([t as u8]);
            }
        }
        hex_digest(h)
    }
}

pub fn hex_digest(h: Sha256) -> String {
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Unit normal to the right of the directed edge `p -> q` and the edge length.
/// For a counter-clockwise cell this is the outward normal.
fn outward_normal(p: [f64; 2], q: [f64; 2]) -> ([f64; 2], f64) {
    let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
    let len = dx.hypot(dy);
    ([dy / len, -dx / len], len)
}

/// `[0, width] x [0, height]` split into `nx * ny` rectangles, each cut along
/// its lower-left/upper-right diagonal.
pub fn rect_tri_mesh(nx: usize, ny: usize, width: f64, height: f64, tags: SideTags) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Contract("mesh needs at least one division per side".into()));
    }
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([width * i as f64 / nx as f64, height * j as f64 / ny as f64]);
        }
    }
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    let mut boundary = HashMap::new();
    let mut tag_edge = |p: usize, q: usize, t: BoundaryTag| {
        boundary.insert((p.min(q), p.max(q)), t);
    };
    for i in 0..nx {
        tag_edge(vid(i, 0), vid(i + 1, 0), tags.bottom);
        tag_edge(vid(i, ny), vid(i + 1, ny), tags.top);
    }
    for j in 0..ny {
        tag_edge(vid(0, j), vid(0, j + 1), tags.left);
        tag_edge(vid(nx, j), vid(nx, j + 1), tags.right);
    }
    Mesh::from_triangles(vertices, tris, &boundary)
}

/// Unit square split into `2 n^2` right triangles, every side outflow.
pub fn square_tri_mesh(n: usize) -> Result<Mesh> {
    rect_tri_mesh(n, n, 1.0, 1.0, SideTags::uniform(BoundaryTag::Outflow))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_counts() {
        let m = square_tri_mesh(1).unwrap();
        assert_eq!(m.num_cells(), 2);
        let s = m.summary();
        assert_eq!(s.interior_faces, 1);
        assert_eq!(s.boundary_faces, vec![(BoundaryTag::Outflow, 4)]);
        assert_eq!(square_tri_mesh(2).unwrap().num_cells(), 8);
    }

    #[test]
    fn areas_partition_unit_square() {
        for n in [1, 3, 7] {
            let m = square_tri_mesh(n).unwrap();
            let total: f64 = m.areas.iter().sum();
            assert!((total - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn cell_normals_close() {
        let m = square_tri_mesh(4).unwrap();
        for c in 0..m.num_cells() {
            let mut s = [0.0, 0.0];
            for &f in &m.cell_faces[c] {
                let n = m.normal_from(f, c);
                s[0] += n[0] * m.faces[f].length;
                s[1] += n[1] * m.faces[f].length;
            }
            assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12);
        }
        for f in &m.faces {
            let n = f.normal;
            assert!(((n[0] * n[0] + n[1] * n[1]).sqrt() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interior_normal_points_to_right_cell() {
        let m = square_tri_mesh(3).unwrap();
        for f in &m.faces {
            if let FaceNeighbor::Cell(r) = f.right {
                let (cl, cr) = (m.centers[f.left], m.centers[r]);
                let d = [cr[0] - cl[0], cr[1] - cl[1]];
                assert!(d[0] * f.normal[0] + d[1] * f.normal[1] > 0.0);
            }
        }
    }

    #[test]
    fn side_tags_are_applied() {
        let tags = SideTags {
            left: BoundaryTag::Inflow,
            right: BoundaryTag::Outflow,
            bottom: BoundaryTag::SlipWall,
            top: BoundaryTag::SlipWall,
        };
        let m = rect_tri_mesh(4, 2, 2.0, 1.0, tags).unwrap();
        let s = m.summary();
        assert_eq!(
            s.boundary_faces,
            vec![(BoundaryTag::Inflow, 2), (BoundaryTag::Outflow, 2), (BoundaryTag::SlipWall, 8)]
        );
        for f in &m.faces {
            if f.right == FaceNeighbor::Boundary(BoundaryTag::Inflow) {
                assert_eq!(f.normal, [-1.0, 0.0]);
            }
        }
    }
}
