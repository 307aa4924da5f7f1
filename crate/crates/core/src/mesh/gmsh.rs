//! ASCII Gmsh MSH reader (versions 2.2 and 4.1) for 2D triangle meshes.
//!
//! Only nodes, 2-node lines, 3-node triangles and point elements are
//! understood. Line elements carry boundary tags through the name of their
//! physical group.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::tri::{BoundaryTag, FaceNeighbor, Mesh};
use crate::error::{Error, Result};

const ELEM_LINE: u32 = 1;
const ELEM_TRIANGLE: u32 = 2;
const ELEM_POINT: u32 = 15;

pub fn parse_gmsh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_gmsh_str(&text, path)
}

struct Lines<'a> {
    path: PathBuf,
    iter: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self) -> Option<&'a str> {
        for (i, l) in self.iter.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some(t);
            }
        }
        None
    }

    fn expect_line(&mut self, what: &str) -> Result<&'a str> {
        self.next_line()
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    fn tokens(&mut self, what: &str) -> Result<Vec<&'a str>> {
        Ok(self.expect_line(what)?.split_whitespace().collect())
    }

    fn parse<T: std::str::FromStr>(&self, tok: Option<&&str>, what: &str) -> Result<T> {
        tok.and_then(|t| t.parse().ok())
            .ok_or_else(|| self.err(format!("expected {what}")))
    }

    fn expect_end(&mut self, section: &str) -> Result<()> {
        let l = self.expect_line(&format!("$End{section}"))?;
        if l != format!("$End{section}") {
            return Err(self.err(format!("expected $End{section}, found {l:?}")));
        }
        Ok(())
    }

    fn skip_section(&mut self, section: &str) -> Result<()> {
        let end = format!("$End{section}");
        loop {
            if self.expect_line(&end)? == end {
                return Ok(());
            }
        }
    }
}

#[derive(Default)]
struct RawMesh {
    physical_names: HashMap<(u32, i64), String>,
    nodes: HashMap<u64, [f64; 2]>,
    node_lines: HashMap<u64, usize>,
    triangles: Vec<([u64; 3], usize)>,
    lines: Vec<([u64; 2], Option<i64>, usize)>,
    // (dim, entity tag) -> physical tags, from $Entities (4.1 only)
    entity_physicals: HashMap<(u32, i64), Vec<i64>>,
}

/// Parse MSH text. `path` is used only for error messages.
pub fn parse_gmsh_str(text: &str, path: impl AsRef<Path>) -> Result<Mesh> {
    let mut lines = Lines {
        path: path.as_ref().to_path_buf(),
        iter: text.lines().enumerate().peekable(),
        line: 0,
    };
    let mut raw = RawMesh::default();
    let mut version: Option<u32> = None;

    while let Some(header) = lines.next_line() {
        match header {
            "$MeshFormat" => {
                let toks = lines.tokens("format line")?;
                let v: String = lines.parse(toks.first(), "version")?;
                let file_type: u32 = lines.parse(toks.get(1), "file type")?;
                if file_type != 0 {
                    return Err(lines.err("binary MSH files are not supported"));
                }
                version = Some(match v.as_str() {
                    "2.2" => 2,
                    "4.1" => 4,
                    other => return Err(lines.err(format!("unsupported MSH version {other}"))),
                });
                lines.expect_end("MeshFormat")?;
            }
            "$PhysicalNames" => {
                let toks = lines.tokens("physical name count")?;
                let n: usize = lines.parse(toks.first(), "physical name count")?;
                for _ in 0..n {
                    let l = lines.expect_line("physical name")?;
                    let mut parts = l.splitn(3, char::is_whitespace);
                    let dim: u32 = lines.parse(parts.next().as_ref(), "dimension")?;
                    let tag: i64 = lines.parse(parts.next().as_ref(), "physical tag")?;
                    let name = parts
                        .next()
                        .map(|s| s.trim().trim_matches('"').to_string())
                        .ok_or_else(|| lines.err("missing physical name"))?;
                    raw.physical_names.insert((dim, tag), name);
                }
                lines.expect_end("PhysicalNames")?;
            }
            "$Entities" => {
                require_version(&lines, version, 4, "$Entities")?;
                parse_entities(&mut lines, &mut raw)?;
            }
            "$Nodes" => match version {
                Some(2) => parse_nodes_v2(&mut lines, &mut raw)?,
                Some(4) => parse_nodes_v4(&mut lines, &mut raw)?,
                _ => return Err(lines.err("$Nodes before $MeshFormat")),
            },
            "$Elements" => match version {
                Some(2) => parse_elements_v2(&mut lines, &mut raw)?,
                Some(4) => parse_elements_v4(&mut lines, &mut raw)?,
                _ => return Err(lines.err("$Elements before $MeshFormat")),
            },
            h if h.starts_with('$') => {
                let name = h.trim_start_matches('$').to_string();
                lines.skip_section(&name)?;
            }
            other => return Err(lines.err(format!("unexpected content {other:?}"))),
        }
    }
    if version.is_none() {
        return Err(lines.err("missing $MeshFormat section"));
    }
    assemble(raw, &lines)
}

fn require_version(lines: &Lines<'_>, version: Option<u32>, want: u32, what: &str) -> Result<()> {
    if version != Some(want) {
        return Err(lines.err(format!("{what} is only valid in MSH {want}.x files")));
    }
    Ok(())
}

fn parse_nodes_v2(lines: &mut Lines<'_>, raw: &mut RawMesh) -> Result<()> {
    let toks = lines.tokens("node count")?;
    let n: usize = lines.parse(toks.first(), "node count")?;
    for _ in 0..n {
        let toks = lines.tokens("node")?;
        let id: u64 = lines.parse(toks.first(), "node id")?;
        let x: f64 = lines.parse(toks.get(1), "x coordinate")?;
        let y: f64 = lines.parse(toks.get(2), "y coordinate")?;
        raw.nodes.insert(id, [x, y]);
        raw.node_lines.insert(id, lines.line);
    }
    lines.expect_end("Nodes")
}

fn parse_elements_v2(lines: &mut Lines<'_>, raw: &mut RawMesh) -> Result<()> {
    let toks = lines.tokens("element count")?;
    let n: usize = lines.parse(toks.first(), "element count")?;
    for _ in 0..n {
        let toks = lines.tokens("element")?;
        let etype: u32 = lines.parse(toks.get(1), "element type")?;
        let ntags: usize = lines.parse(toks.get(2), "tag count")?;
        let physical: Option<i64> = if ntags > 0 {
            Some(lines.parse(toks.get(3), "physical tag")?)
        } else {
            None
        };
        let first = 3 + ntags;
        let node = |k: usize| -> Result<u64> { lines.parse(toks.get(first + k), "node reference") };
        match etype {
            ELEM_TRIANGLE => raw.triangles.push(([node(0)?, node(1)?, node(2)?], lines.line)),
            ELEM_LINE => raw.lines.push(([node(0)?, node(1)?], physical, lines.line)),
            ELEM_POINT => {}
            other => return Err(lines.err(format!("unsupported element type {other}"))),
        }
    }
    lines.expect_end("Elements")
}

fn parse_entities(lines: &mut Lines<'_>, raw: &mut RawMesh) -> Result<()> {
    let toks = lines.tokens("entity counts")?;
    let counts: Vec<usize> = (0..4)
        .map(|k| lines.parse(toks.get(k), "entity count"))
        .collect::<Result<_>>()?;
    for (dim, &count) in counts.iter().enumerate() {
        for _ in 0..count {
            let toks = lines.tokens("entity")?;
            let tag: i64 = lines.parse(toks.first(), "entity tag")?;
            // points: tag x y z nphys ...; others: tag 6 bbox values nphys ...
            let nphys_at = if dim == 0 { 4 } else { 7 };
            let nphys: usize = lines.parse(toks.get(nphys_at), "physical tag count")?;
            let phys = (0..nphys)
                .map(|k| lines.parse(toks.get(nphys_at + 1 + k), "physical tag"))
                .collect::<Result<Vec<i64>>>()?;
            raw.entity_physicals.insert((dim as u32, tag), phys);
        }
    }
    lines.expect_end("Entities")
}

fn parse_nodes_v4(lines: &mut Lines<'_>, raw: &mut RawMesh) -> Result<()> {
    let toks = lines.tokens("node header")?;
    let blocks: usize = lines.parse(toks.first(), "entity block count")?;
    for _ in 0..blocks {
        let toks = lines.tokens("node block header")?;
        let parametric: u32 = lines.parse(toks.get(2), "parametric flag")?;
        let n: usize = lines.parse(toks.get(3), "nodes in block")?;
        if parametric != 0 {
            return Err(lines.err("parametric node blocks are not supported"));
        }
        let mut ids = Vec::with_capacity(n);
        for _ in 0..n {
            let toks = lines.tokens("node tag")?;
            ids.push(lines.parse::<u64>(toks.first(), "node tag")?);
        }
        for id in ids {
            let toks = lines.tokens("node coordinates")?;
            let x: f64 = lines.parse(toks.first(), "x coordinate")?;
            let y: f64 = lines.parse(toks.get(1), "y coordinate")?;
            raw.nodes.insert(id, [x, y]);
            raw.node_lines.insert(id, lines.line);
        }
    }
    lines.expect_end("Nodes")
}

fn parse_elements_v4(lines: &mut Lines<'_>, raw: &mut RawMesh) -> Result<()> {
    let toks = lines.tokens("element header")?;
    let blocks: usize = lines.parse(toks.first(), "entity block count")?;
    for _ in 0..blocks {
        let toks = lines.tokens("element block header")?;
        let dim: u32 = lines.parse(toks.first(), "entity dimension")?;
        let entity: i64 = lines.parse(toks.get(1), "entity tag")?;
        let etype: u32 = lines.parse(toks.get(2), "element type")?;
        let n: usize = lines.parse(toks.get(3), "elements in block")?;
        let physical = raw
            .entity_physicals
            .get(&(dim, entity))
            .and_then(|p| p.first().copied());
        for _ in 0..n {
            let toks = lines.tokens("element")?;
            let node = |k: usize| -> Result<u64> { lines.parse(toks.get(1 + k), "node reference") };
            match etype {
                ELEM_TRIANGLE => raw.triangles.push(([node(0)?, node(1)?, node(2)?], lines.line)),
                ELEM_LINE => raw.lines.push(([node(0)?, node(1)?], physical, lines.line)),
                ELEM_POINT => {}
                other => return Err(lines.err(format!("unsupported element type {other}"))),
            }
        }
    }
    lines.expect_end("Elements")
}

fn assemble(raw: RawMesh, lines: &Lines<'_>) -> Result<Mesh> {
    let err_at = |line: usize, message: String| Error::Parse {
        path: lines.path.clone(),
        line,
        message,
    };
    if raw.triangles.is_empty() {
        return Err(err_at(lines.line, "mesh contains no triangles".into()));
    }
    // Compact vertex numbering in ascending node-id order.
    let mut ids: Vec<u64> = raw.nodes.keys().copied().collect();
    ids.sort_unstable();
    let index: HashMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let vertices: Vec<[f64; 2]> = ids.iter().map(|id| raw.nodes[id]).collect();

    let lookup = |id: u64, line: usize| -> Result<usize> {
        index
            .get(&id)
            .copied()
            .ok_or_else(|| err_at(line, format!("reference to undefined node {id}")))
    };
    let mut tris = Vec::with_capacity(raw.triangles.len());
    for (nodes, line) in &raw.triangles {
        tris.push([lookup(nodes[0], *line)?, lookup(nodes[1], *line)?, lookup(nodes[2], *line)?]);
    }
    let mut boundary = HashMap::new();
    for (nodes, physical, line) in &raw.lines {
        let (a, b) = (lookup(nodes[0], *line)?, lookup(nodes[1], *line)?);
        let tag = match physical {
            None => BoundaryTag::Outflow,
            Some(p) => match raw.physical_names.get(&(1, *p)) {
                Some(name) => BoundaryTag::from_physical_name(name).ok_or_else(|| {
                    err_at(*line, format!("physical group {name:?} does not name a boundary condition"))
                })?,
                None => BoundaryTag::Outflow,
            },
        };
        boundary.insert((a.min(b), a.max(b)), tag);
    }
    Mesh::from_triangles(vertices, tris, &boundary).map_err(|e| err_at(lines.line, e.to_string()))
}

/// Write a mesh as ASCII MSH 2.2 with one physical line group per boundary tag.
pub fn write_msh22(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    let mut tags: Vec<BoundaryTag> = mesh
        .faces
        .iter()
        .filter_map(|f| match f.right {
            FaceNeighbor::Boundary(t) => Some(t),
            FaceNeighbor::Cell(_) => None,
        })
        .collect();
    tags.sort();
    tags.dedup();
    let phys_of = |t: BoundaryTag| tags.iter().position(|&u| u == t).unwrap() as i64 + 1;
    let domain_tag = tags.len() as i64 + 1;

    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    let _ = writeln!(s, "$PhysicalNames\n{}", tags.len() + 1);
    for &t in &tags {
        let _ = writeln!(s, "1 {} \"{}\"", phys_of(t), t.name());
    }
    let _ = writeln!(s, "2 {domain_tag} \"domain\"\n$EndPhysicalNames");
    let _ = writeln!(s, "$Nodes\n{}", mesh.vertices.len());
    for (i, v) in mesh.vertices.iter().enumerate() {
        let _ = writeln!(s, "{} {:.17e} {:.17e} 0", i + 1, v[0], v[1]);
    }
    s.push_str("$EndNodes\n");
    let boundary: Vec<_> = mesh
        .faces
        .iter()
        .filter_map(|f| match f.right {
            FaceNeighbor::Boundary(t) => Some((f.vertices, t)),
            FaceNeighbor::Cell(_) => None,
        })
        .collect();
    let _ = writeln!(s, "$Elements\n{}", boundary.len() + mesh.cells.len());
    let mut id = 1;
    for (v, t) in &boundary {
        let p = phys_of(*t);
        let _ = writeln!(s, "{id} 1 2 {p} {p} {} {}", v[0] + 1, v[1] + 1);
        id += 1;
    }
    for c in &mesh.cells {
        let _ = writeln!(s, "{id} 2 2 {domain_tag} 1 {} {} {}", c[0] + 1, c[1] + 1, c[2] + 1);
        id += 1;
    }
    s.push_str("$EndElements\n");
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::tri::{rect_tri_mesh, SideTags};

    const ONE_TRIANGLE: &str = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n\
$Elements\n1\n1 2 2 0 1 1 2 3\n$EndElements\n";

    #[test]
    fn single_triangle() {
        let m = parse_gmsh_str(ONE_TRIANGLE, "one.msh").unwrap();
        assert_eq!(m.num_cells(), 1);
        assert!((m.centers[0][0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.centers[0][1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.faces.len(), 3);
        assert!(m.faces.iter().all(|f| !f.is_interior()));
    }

    #[test]
    fn two_triangles_share_a_face() {
        // cells straddle the y-axis; shared edge from (0,-1) to (0,1)
        let text = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n\
$PhysicalNames\n1\n1 7 \"outflow\"\n$EndPhysicalNames\n\
$Nodes\n4\n1 0 -1 0\n2 0 1 0\n3 -1 0 0\n4 1 0 0\n$EndNodes\n\
$Elements\n3\n1 1 2 7 1 3 1\n2 2 2 0 1 1 2 3\n3 2 2 0 1 1 4 2\n$EndElements\n";
        let m = parse_gmsh_str(text, "two.msh").unwrap();
        let shared: Vec<_> = m.faces.iter().filter(|f| f.is_interior()).collect();
        assert_eq!(shared.len(), 1);
        let f = shared[0];
        let left_center = m.centers[f.left];
        let expected = if left_center[0] < 0.0 { [1.0, 0.0] } else { [-1.0, 0.0] };
        assert!((f.normal[0] - expected[0]).abs() < 1e-15 && f.normal[1].abs() < 1e-15);
    }

    #[test]
    fn msh41_roundtrip_structure() {
        let text = "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n\
$PhysicalNames\n2\n1 1 \"wall\"\n2 2 \"fluid\"\n$EndPhysicalNames\n\
$Entities\n0 1 1 0\n1 0 0 0 1 0 0 1 1 0\n1 0 0 0 1 1 0 1 2 0\n$EndEntities\n\
$Nodes\n1 4 1 4\n2 1 0 4\n1\n2\n3\n4\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n$EndNodes\n\
$Elements\n2 3 1 3\n1 1 1 1\n1 1 2\n2 1 2 2\n2 1 2 3\n3 1 3 4\n$EndElements\n";
        let m = parse_gmsh_str(text, "v41.msh").unwrap();
        assert_eq!(m.num_cells(), 2);
        let s = m.summary();
        assert_eq!(s.interior_faces, 1);
        assert!(s.boundary_faces.contains(&(BoundaryTag::SlipWall, 1)));
        assert!(s.boundary_faces.contains(&(BoundaryTag::Outflow, 3)));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad_type = ONE_TRIANGLE.replace("1 2 2 0 1 1 2 3", "1 3 2 0 1 1 2 3 4");
        match parse_gmsh_str(&bad_type, "q.msh") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 12);
                assert!(message.contains("unsupported element type 3"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let dangling = ONE_TRIANGLE.replace("1 2 3\n$EndElements", "1 2 9\n$EndElements");
        match parse_gmsh_str(&dangling, "d.msh") {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 12);
                assert!(message.contains("undefined node 9"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let truncated = "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n$Nodes\n3\n1 0 0 0\n";
        assert!(matches!(parse_gmsh_str(truncated, "t.msh"), Err(Error::Parse { .. })));
        let version = ONE_TRIANGLE.replace("2.2 0 8", "3.0 0 8");
        assert!(matches!(parse_gmsh_str(&version, "v.msh"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn writer_roundtrip() {
        let tags = SideTags {
            left: BoundaryTag::Inflow,
            right: BoundaryTag::Outflow,
            bottom: BoundaryTag::SlipWall,
            top: BoundaryTag::Outflow,
        };
        let m = rect_tri_mesh(3, 2, 1.5, 1.0, tags).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rect.msh");
        write_msh22(&m, &p).unwrap();
        let back = parse_gmsh(&p).unwrap();
        assert_eq!(back.num_cells(), m.num_cells());
        assert_eq!(back.summary().boundary_faces, m.summary().boundary_faces);
        for (a, b) in back.centers.iter().zip(&m.centers) {
            assert!((a[0] - b[0]).abs() < 1e-15 && (a[1] - b[1]).abs() < 1e-15);
        }
    }
}
