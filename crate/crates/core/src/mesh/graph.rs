use crate::error::{Error, Result};
use crate::num::DenseMatrix;

/// Undirected graph over positioned nodes.
///
/// Edges are stored once as sorted `(min, max)` pairs; the symmetric
/// adjacency lists are derived at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    positions: DenseMatrix,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

/// Output of [`radius_graph`].
#[derive(Clone, Debug, PartialEq)]
pub struct RadiusGraph {
    pub edges: Vec<(usize, usize)>,
    /// Nodes with no neighbor inside the radius.
    pub isolated: usize,
}

/// All pairs `j != k` with `||pos_j - pos_k|| <= r`.
pub fn radius_graph(pos: &DenseMatrix, r: f64) -> Result<RadiusGraph> {
    if !(r > 0.0) {
        return Err(Error::Contract(format!("radius must be positive, got {r}")));
    }
    if !pos.is_finite() {
        return Err(Error::Contract("positions must be finite".into()));
    }
    let n = pos.rows();
    let r2 = r * r;
    let mut edges = Vec::new();
    let mut degree = vec![0usize; n];
    for j in 0..n {
        let pj = pos.row(j);
        for k in (j + 1)..n {
            let d2: f64 = pj.iter().zip(pos.row(k)).map(|(a, b)| (a - b) * (a - b)).sum();
            if d2 <= r2 {
                edges.push((j, k));
                degree[j] += 1;
                degree[k] += 1;
            }
        }
    }
    Ok(RadiusGraph {
        edges,
        isolated: degree.iter().filter(|&&d| d == 0).count(),
    })
}

impl Graph {
    pub fn new(positions: DenseMatrix, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = positions.rows();
        let mut canon: Vec<(usize, usize)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Contract(format!("self-loop on node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::Contract(format!("edge ({a}, {b}) outside {n} nodes")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        canon.dedup();
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &canon {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in neighbors.iter_mut() {
            nb.sort_unstable();
        }
        Ok(Self {
            positions,
            edges: canon,
            neighbors,
        })
    }

    /// Graph whose edges come from [`radius_graph`].
    pub fn from_radius(positions: DenseMatrix, r: f64) -> Result<Self> {
        let rg = radius_graph(&positions, r)?;
        Self::new(positions, rg.edges)
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.rows()
    }

    pub fn dim(&self) -> usize {
        self.positions.cols()
    }

    pub fn positions(&self) -> &DenseMatrix {
        &self.positions
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, j: usize) -> &[usize] {
        &self.neighbors[j]
    }

    pub fn degree(&self, j: usize) -> usize {
        self.neighbors[j].len()
    }

    pub fn isolated_nodes(&self) -> usize {
        self.neighbors.iter().filter(|n| n.is_empty()).count()
    }

    pub fn adjacency(&self) -> DenseMatrix {
        let n = self.num_nodes();
        let mut a = DenseMatrix::zeros(n, n);
        for &(i, j) in &self.edges {
            a[(i, j)] = 1.0;
            a[(j, i)] = 1.0;
        }
        a
    }

    /// Unnormalized Laplacian `D - A`.
    pub fn laplacian(&self) -> DenseMatrix {
        let mut l = self.adjacency();
        l.scale_in_place(-1.0);
        for j in 0..self.num_nodes() {
            l[(j, j)] = self.degree(j) as f64;
        }
        l
    }

    /// Number of connected components.
    pub fn components(&self) -> usize {
        let n = self.num_nodes();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            count += 1;
            seen[s] = true;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points() {
        let pos = DenseMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let g = radius_graph(&pos, 1.5).unwrap();
        assert_eq!(g.edges, vec![(0, 1), (1, 2)]);
        assert_eq!(g.isolated, 0);
    }

    #[test]
    fn small_radius_gives_no_edges() {
        let pos = DenseMatrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.5], vec![3.0, 3.0]]).unwrap();
        let g = radius_graph(&pos, 0.5).unwrap();
        assert!(g.edges.is_empty());
        assert_eq!(g.isolated, 3);
    }

    #[test]
    fn unit_square_sides_only() {
        let pos = DenseMatrix::from_rows(&[
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        let g = radius_graph(&pos, 1.0).unwrap();
        assert_eq!(g.edges, vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        let pos = DenseMatrix::from_fn(6, 1, |i, _| i as f64);
        let g = Graph::from_radius(pos, 2.0).unwrap();
        let l = g.laplacian();
        for i in 0..6 {
            assert_eq!(l.row(i).iter().sum::<f64>(), 0.0);
        }
        assert_eq!(l.asymmetry(), 0.0);
        assert_eq!(g.components(), 1);
    }

    #[test]
    fn rejects_self_loops() {
        let pos = DenseMatrix::zeros(2, 1);
        assert!(Graph::new(pos, [(1, 1)]).is_err());
    }
}
