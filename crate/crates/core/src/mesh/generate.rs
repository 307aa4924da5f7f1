//! Procedural triangle meshes for the Euler cases.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::tri::{rect_tri_mesh, BoundaryTag, Mesh, SideTags};
use crate::error::{Error, Result};

fn edge_key(p: usize, q: usize) -> (usize, usize) {
    (p.min(q), p.max(q))
}

/// Unit square with exactly `cells` triangles, all sides outflow.
///
/// An `n x n` grid of quads is cut into two triangles each; `k` quads spread
/// evenly through the grid get a center vertex and four triangles instead, so
/// `cells = 2 n^2 + 2 k`.
pub fn unit_square_mesh(cells: usize) -> Result<Mesh> {
    if cells < 2 || !cells.is_multiple_of(2) {
        return Err(Error::Config(format!("square mesh cell count must be even and >= 2, got {cells}")));
    }
    let half = cells / 2;
    let n = (half as f64).sqrt().floor() as usize;
    let k = half - n * n;
    if k > n * n {
        return Err(Error::Config(format!("cannot build a {cells}-cell square mesh")));
    }
    let vid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1) + k);
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let quads = n * n;
    let mut split = vec![false; quads];
    for s in 0..k {
        split[s * quads / k.max(1)] = true;
    }
    let mut tris = Vec::with_capacity(cells);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            if split[j * n + i] {
                let e = vertices.len();
                vertices.push([(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64]);
                tris.extend([[a, b, e], [b, c, e], [c, d, e], [d, a, e]]);
            } else {
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            }
        }
    }
    Mesh::from_triangles(vertices, tris, &HashMap::new())
}

/// Region ahead of a unit-diameter cylinder centered at the origin, bounded by
/// `x = -1.5` (inflow), `y = +-1.5` (outflow) and the cylinder's vertical
/// diameter line (outflow). The cylinder surface is a slip wall.
///
/// Structured in angle (`n_theta` divisions over the front half) and radius
/// (`n_r` divisions); `2 n_theta n_r` triangles.
pub fn cylinder_front_mesh(n_theta: usize, n_r: usize) -> Result<Mesh> {
    if n_theta == 0 || n_r == 0 {
        return Err(Error::Config("cylinder mesh needs positive divisions".into()));
    }
    let radius = 0.5;
    let half = 1.5;
    let outer = |theta: f64| -> (f64, bool) {
        let (s, c) = theta.sin_cos();
        let mut t = f64::INFINITY;
        let mut on_left = false;
        if c < -1e-14 {
            t = -half / c;
            on_left = true;
        }
        if s.abs() > 1e-14 {
            let tv = half / s.abs();
            if tv < t {
                t = tv;
                on_left = false;
            }
        }
        (t, on_left)
    };
    let vid = |k: usize, j: usize| k * (n_r + 1) + j;
    let mut vertices = Vec::with_capacity((n_theta + 1) * (n_r + 1));
    let mut left_side = Vec::with_capacity(n_theta + 1);
    for k in 0..=n_theta {
        let theta = PI / 2.0 + PI * k as f64 / n_theta as f64;
        let (t, on_left) = outer(theta);
        left_side.push(on_left);
        let (s, c) = theta.sin_cos();
        for j in 0..=n_r {
            let frac = j as f64 / n_r as f64;
            let rho = (1.0 - frac) * radius + frac * t;
            vertices.push([rho * c, rho * s]);
        }
    }
    let mut tris = Vec::with_capacity(2 * n_theta * n_r);
    for k in 0..n_theta {
        for j in 0..n_r {
            let (a, b, c, d) = (vid(k, j), vid(k, j + 1), vid(k + 1, j + 1), vid(k + 1, j));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    let mut boundary = HashMap::new();
    for k in 0..n_theta {
        boundary.insert(edge_key(vid(k, 0), vid(k + 1, 0)), BoundaryTag::SlipWall);
        let tag = if left_side[k] && left_side[k + 1] {
            BoundaryTag::Inflow
        } else {
            BoundaryTag::Outflow
        };
        boundary.insert(edge_key(vid(k, n_r), vid(k + 1, n_r)), tag);
    }
    Mesh::from_triangles(vertices, tris, &boundary)
}

/// Quasi-1D strip `[0, 1] x [0, 1/nx]` with `nx` columns of two triangles;
/// outflow at both ends, slip walls on top and bottom.
pub fn strip_mesh(nx: usize) -> Result<Mesh> {
    rect_tri_mesh(
        nx,
        1,
        1.0,
        1.0 / nx as f64,
        SideTags {
            left: BoundaryTag::Outflow,
            right: BoundaryTag::Outflow,
            bottom: BoundaryTag::SlipWall,
            top: BoundaryTag::SlipWall,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_counts_are_exact() {
        for cells in [2, 8, 18, 4328] {
            let m = unit_square_mesh(cells).unwrap();
            assert_eq!(m.num_cells(), cells);
            assert!((m.summary().total_area - 1.0).abs() < 1e-12);
        }
        assert!(unit_square_mesh(7).is_err());
    }

    #[test]
    fn cylinder_mesh_tags() {
        let m = cylinder_front_mesh(61, 34).unwrap();
        assert_eq!(m.num_cells(), 4148);
        let s = m.summary();
        let count = |t| s.boundary_faces.iter().find(|(b, _)| *b == t).map_or(0, |(_, c)| *c);
        assert_eq!(count(BoundaryTag::SlipWall), 61);
        assert!(count(BoundaryTag::Inflow) > 0);
        assert!(count(BoundaryTag::Outflow) > 0);
        assert!(m.areas.iter().all(|&a| a > 0.0));
    }

    #[test]
    fn strip_mesh_is_two_triangles_per_column() {
        let m = strip_mesh(10).unwrap();
        assert_eq!(m.num_cells(), 20);
    }
}
