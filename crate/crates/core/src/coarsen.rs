//! Offline hierarchy of reduced graphs built by repeated spectral clustering.
//!
//! Each level: Laplacian `L = D - A`, spectral features from the
//! `target - 1` smallest eigenvectors after the constant one, K-means on those
//! rows, a cluster-mean assignment matrix, rescaled cluster-mean positions and
//! a fresh radius graph on the reduced nodes.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::binio::{read_all, write_atomic, Reader, Writer};
use crate::error::{Error, Result};
use crate::mesh::Graph;
use crate::num::{symmetric_eig, DenseMatrix};

const KMEANS_MAX_ITER: usize = 300;
const HIERARCHY_MAGIC: &[u8; 4] = b"GDHY";

/// Result of [`kmeans`].
#[derive(Clone, Debug)]
pub struct KMeans {
    pub labels: Vec<usize>,
    pub centroids: DenseMatrix,
    pub inertia: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's K-means with k-means++ seeding.
///
/// Empty clusters are refilled with the point farthest from its current
/// centroid. Deterministic for a fixed seed.
pub fn kmeans(features: &DenseMatrix, k: usize, seed: u64) -> Result<KMeans> {
    let n = features.rows();
    if k == 0 || k > n {
        return Err(Error::Contract(format!("cannot form {k} clusters from {n} points")));
    }
    if !features.is_finite() {
        return Err(Error::Contract("k-means features must be finite".into()));
    }
    let d = features.cols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut best_d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(features.row(i), features.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = best_d2.iter().sum();
        let next = if total > 0.0 {
            let mut t = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in best_d2.iter().enumerate() {
                if w > 0.0 && t < w {
                    pick = i;
                    break;
                }
                t -= w;
            }
            // guard against rounding landing on an already-chosen point
            if best_d2[pick] == 0.0 {
                (0..n).rfind(|&i| best_d2[i] > 0.0).unwrap_or(pick)
            } else {
                pick
            }
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, bd) in best_d2.iter_mut().enumerate() {
            *bd = bd.min(sq_dist(features.row(i), features.row(next)));
        }
    }
    let mut centroids = DenseMatrix::from_fn(k, d, |c, j| features[(chosen[c], j)]);

    let mut labels = vec![usize::MAX; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        let mut changed = false;
        for i in 0..n {
            let x = features.row(i);
            let mut best = 0;
            let mut bd = f64::INFINITY;
            for c in 0..k {
                let dd = sq_dist(x, centroids.row(c));
                if dd < bd {
                    bd = dd;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        changed |= repair_empty(features, &mut labels, &mut centroids, k);
        recompute_centroids(features, &labels, &mut centroids, k);
        if !changed {
            converged = true;
            break;
        }
    }
    let inertia = (0..n)
        .map(|i| sq_dist(features.row(i), centroids.row(labels[i])))
        .sum();
    Ok(KMeans {
        labels,
        centroids,
        inertia,
        iterations,
        converged,
    })
}

fn cluster_sizes(labels: &[usize], k: usize) -> Vec<usize> {
    let mut sizes = vec![0; k];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

/// Move the farthest point of a multi-member cluster into each empty cluster.
fn repair_empty(features: &DenseMatrix, labels: &mut [usize], centroids: &mut DenseMatrix, k: usize) -> bool {
    let mut repaired = false;
    loop {
        let sizes = cluster_sizes(labels, k);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return repaired;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &l) in labels.iter().enumerate() {
            if sizes[l] < 2 {
                continue;
            }
            let dd = sq_dist(features.row(i), centroids.row(l));
            if dd > far_d {
                far_d = dd;
                far = Some(i);
            }
        }
        let i = far.expect("some cluster has two members when one is empty");
        labels[i] = empty;
        centroids.row_mut(empty).copy_from_slice(features.row(i));
        repaired = true;
    }
}

fn recompute_centroids(features: &DenseMatrix, labels: &[usize], centroids: &mut DenseMatrix, k: usize) {
    let sizes = cluster_sizes(labels, k);
    let mut sums = DenseMatrix::zeros(k, features.cols());
    for (i, &l) in labels.iter().enumerate() {
        for (s, v) in sums.row_mut(l).iter_mut().zip(features.row(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        if sizes[c] > 0 {
            for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                *dst = s / sizes[c] as f64;
            }
        }
    }
}

/// Cluster-mean operator `S` (`clusters x nodes`), stored by labels.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentMatrix {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl AssignmentMatrix {
    pub fn from_labels(labels: Vec<usize>, clusters: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= clusters) {
            return Err(Error::Contract(format!("label {bad} out of range for {clusters} clusters")));
        }
        let sizes = cluster_sizes(&labels, clusters);
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::Contract(format!("cluster {empty} is empty")));
        }
        Ok(Self { labels, sizes })
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Rows of `S` (coarse nodes).
    pub fn clusters(&self) -> usize {
        self.sizes.len()
    }

    /// Columns of `S` (fine nodes).
    pub fn nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut m = vec![Vec::new(); self.clusters()];
        for (i, &l) in self.labels.iter().enumerate() {
            m[l].push(i);
        }
        m
    }

    pub fn weight(&self, node: usize) -> f64 {
        1.0 / self.sizes[self.labels[node]] as f64
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut s = DenseMatrix::zeros(self.clusters(), self.nodes());
        for (k, &l) in self.labels.iter().enumerate() {
            s[(l, k)] = 1.0 / self.sizes[l] as f64;
        }
        s
    }

    /// `S X`.
    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.nodes() {
            return Err(Error::Dimension(format!(
                "pooling {} rows with an assignment over {} nodes",
                x.rows(),
                self.nodes()
            )));
        }
        let mut out = DenseMatrix::zeros(self.clusters(), x.cols());
        for (k, &l) in self.labels.iter().enumerate() {
            let w = 1.0 / self.sizes[l] as f64;
            for (o, v) in out.row_mut(l).iter_mut().zip(x.row(k)) {
                *o += w * v;
            }
        }
        Ok(out)
    }

    /// `S^T Y`.
    pub fn apply_transpose(&self, y: &DenseMatrix) -> Result<DenseMatrix> {
        if y.rows() != self.clusters() {
            return Err(Error::Dimension(format!(
                "unpooling {} rows with an assignment over {} clusters",
                y.rows(),
                self.clusters()
            )));
        }
        let mut out = DenseMatrix::zeros(self.nodes(), y.cols());
        for (k, &l) in self.labels.iter().enumerate() {
            let w = 1.0 / self.sizes[l] as f64;
            for (o, v) in out.row_mut(k).iter_mut().zip(y.row(l)) {
                *o = w * v;
            }
        }
        Ok(out)
    }
}

/// `1/2 sum_k |edges leaving A_k| / |A_k|`.
pub fn ratio_cut(graph: &Graph, labels: &[usize], clusters: usize) -> Result<f64> {
    if labels.len() != graph.num_nodes() {
        return Err(Error::Contract(format!(
            "{} labels for {} nodes",
            labels.len(),
            graph.num_nodes()
        )));
    }
    let assignment = AssignmentMatrix::from_labels(labels.to_vec(), clusters)?;
    let mut leaving = vec![0usize; clusters];
    for &(u, v) in graph.edges() {
        if labels[u] != labels[v] {
            leaving[labels[u]] += 1;
            leaving[labels[v]] += 1;
        }
    }
    Ok(0.5
        * leaving
            .iter()
            .zip(assignment.sizes())
            .map(|(&c, &s)| c as f64 / s as f64)
            .sum::<f64>())
}

/// Affine per-dimension map so the extrema of `pos_new` match `pos_prev`.
/// A dimension with no spread is placed at the midpoint of the previous range.
pub fn rescale(pos_new: &DenseMatrix, pos_prev: &DenseMatrix) -> Result<DenseMatrix> {
    if pos_new.rows() == 0 || pos_prev.rows() == 0 {
        return Err(Error::Contract("rescale needs non-empty position sets".into()));
    }
    if pos_new.cols() != pos_prev.cols() {
        return Err(Error::Dimension("position dimensionality differs".into()));
    }
    let extrema = |p: &DenseMatrix, j: usize| {
        (0..p.rows()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
            (lo.min(p[(i, j)]), hi.max(p[(i, j)]))
        })
    };
    let mut out = pos_new.clone();
    for j in 0..pos_new.cols() {
        let (lo, hi) = extrema(pos_new, j);
        let (plo, phi) = extrema(pos_prev, j);
        for i in 0..out.rows() {
            out[(i, j)] = if hi > lo {
                let t = (pos_new[(i, j)] - lo) / (hi - lo);
                // pin the endpoints exactly
                if pos_new[(i, j)] == lo {
                    plo
                } else if pos_new[(i, j)] == hi {
                    phi
                } else {
                    plo + t * (phi - plo)
                }
            } else {
                0.5 * (plo + phi)
            };
        }
    }
    Ok(out)
}

/// Per-level diagnostics recorded during coarsening.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelDiagnostics {
    /// Level that was clustered.
    pub level: usize,
    pub ratio_cut: f64,
    /// Laplacian eigenvalues treated as zero (connected components).
    pub zero_eigenvalues: usize,
    pub kmeans_iterations: usize,
    pub kmeans_converged: bool,
    /// Isolated nodes in the newly built coarse graph.
    pub isolated_next: usize,
}

/// Spectral features: `target - 1` eigenvectors of the Laplacian after the
/// smallest. When the zero eigenvalue is repeated, its eigenspace is rotated so
/// the excluded vector is the constant one.
fn spectral_features(graph: &Graph, target: usize) -> Result<(DenseMatrix, usize)> {
    let n = graph.num_nodes();
    let eig = symmetric_eig(&graph.laplacian())?;
    let scale = eig.eigenvalues.last().copied().unwrap_or(0.0).abs().max(1.0);
    let zero_tol = 1e-9 * scale;
    let zeros = eig.eigenvalues.iter().take_while(|l| l.abs() <= zero_tol).count().max(1);
    let cols = target - 1;
    let mut basis: Vec<Vec<f64>> = (0..n.min(cols + 1)).map(|k| eig.eigenvector(k)).collect();
    if zeros > 1 && cols > 0 {
        let c = 1.0 / (n as f64).sqrt();
        let constant = vec![c; n];
        let mut null: Vec<Vec<f64>> = (0..zeros).map(|k| eig.eigenvector(k)).collect();
        // drop the null vector most aligned with the constant, orthogonalize the rest
        let drop = (0..zeros)
            .max_by(|&a, &b| {
                let da: f64 = null[a].iter().sum::<f64>().abs();
                let db: f64 = null[b].iter().sum::<f64>().abs();
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .unwrap();
        null.remove(drop);
        let mut rotated = vec![constant];
        for mut v in null {
            for q in &rotated {
                let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
            }
            let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= nv);
            rotated.push(v);
        }
        for (k, v) in rotated.into_iter().enumerate() {
            if k < basis.len() {
                basis[k] = v;
            }
        }
    }
    let features = DenseMatrix::from_fn(n, cols, |i, j| basis[j + 1][i]);
    Ok((features, zeros))
}

/// One level of spectral coarsening: cluster, pool positions, rebuild edges.
pub fn spectral_coarsen_level(
    graph: &Graph,
    target: usize,
    r_next: f64,
    seed: u64,
) -> Result<(AssignmentMatrix, Graph, LevelDiagnostics)> {
    let n = graph.num_nodes();
    if target == 0 || target >= n {
        return Err(Error::Contract(format!(
            "target cluster count {target} must be in 1..{n}"
        )));
    }
    let (labels, zeros, iters, conv) = if target == 1 {
        (vec![0; n], 0, 0, true)
    } else {
        let (features, zeros) = spectral_features(graph, target)?;
        let km = kmeans(&features, target, seed)?;
        (km.labels, zeros, km.iterations, km.converged)
    };
    let assignment = AssignmentMatrix::from_labels(labels, target)?;
    let rc = ratio_cut(graph, assignment.labels(), target)?;
    let pooled = assignment.apply(graph.positions())?;
    let positions = rescale(&pooled, graph.positions())?;
    let next = Graph::from_radius(positions, r_next)?;
    let diag = LevelDiagnostics {
        level: 0,
        ratio_cut: rc,
        zero_eigenvalues: zeros,
        kmeans_iterations: iters,
        kmeans_converged: conv,
        isolated_next: next.isolated_nodes(),
    };
    Ok((assignment, next, diag))
}

/// Radii aiming for roughly seven edges per node on a 1D line spanning
/// `[x_left, x_right]`.
pub fn line_radii(x_left: f64, x_right: f64, node_counts: &[usize]) -> Vec<f64> {
    node_counts
        .iter()
        .map(|&n| (x_right - x_left) * 7.0 / (2.0 * n as f64))
        .collect()
}

/// Radii aiming for roughly nine edges per node on a unit-area 2D domain.
pub fn planar_radii(node_counts: &[usize]) -> Vec<f64> {
    node_counts
        .iter()
        .map(|&n| (9.0 / (std::f64::consts::PI * n as f64)).sqrt())
        .collect()
}

/// Ladder of reduced graphs with their assignment matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchy {
    pub graphs: Vec<Graph>,
    /// `assignments[i]` maps level `i` to level `i + 1`.
    pub assignments: Vec<AssignmentMatrix>,
    pub radii: Vec<f64>,
    pub diagnostics: Vec<LevelDiagnostics>,
}

/// Per-level seed so each level draws an independent stream.
fn level_seed(seed: u64, level: usize) -> u64 {
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(level as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Build the full hierarchy from level-0 positions.
///
/// `node_counts[0]` must equal the number of positions; counts must be
/// strictly decreasing and `radii` has one entry per level.
pub fn build_hierarchy(positions: DenseMatrix, node_counts: &[usize], radii: &[f64], seed: u64) -> Result<Hierarchy> {
    if node_counts.is_empty() || node_counts[0] != positions.rows() {
        return Err(Error::Config(format!(
            "node_counts must start with the level-0 size {}",
            positions.rows()
        )));
    }
    if node_counts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("node counts must be strictly decreasing".into()));
    }
    if radii.len() != node_counts.len() {
        return Err(Error::Config(format!(
            "{} radii for {} levels",
            radii.len(),
            node_counts.len()
        )));
    }
    let g0 = Graph::from_radius(positions, radii[0]).map_err(|e| Error::Coarsen {
        level: 0,
        source: Box::new(e),
    })?;
    let mut graphs = vec![g0];
    let mut assignments = Vec::new();
    let mut diagnostics = Vec::new();
    for level in 0..node_counts.len() - 1 {
        let (s, g, mut d) = spectral_coarsen_level(
            &graphs[level],
            node_counts[level + 1],
            radii[level + 1],
            level_seed(seed, level),
        )
        .map_err(|e| Error::Coarsen {
            level,
            source: Box::new(e),
        })?;
        d.level = level;
        assignments.push(s);
        graphs.push(g);
        diagnostics.push(d);
    }
    Ok(Hierarchy {
        graphs,
        assignments,
        radii: radii.to_vec(),
        diagnostics,
    })
}

impl Hierarchy {
    pub fn num_levels(&self) -> usize {
        self.graphs.len()
    }

    pub fn node_counts(&self) -> Vec<usize> {
        self.graphs.iter().map(Graph::num_nodes).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(HIERARCHY_MAGIC);
        w.usize(self.graphs.len());
        w.usize(self.graphs[0].dim());
        for (g, &r) in self.graphs.iter().zip(&self.radii) {
            w.usize(g.num_nodes());
            w.f64(r);
            for &v in g.positions().as_slice() {
                w.f64(v);
            }
            w.usize(g.edges().len());
            for &(a, b) in g.edges() {
                w.usize(a);
                w.usize(b);
            }
        }
        for s in &self.assignments {
            // sparse triplets (row, col, value)
            w.usize(s.nodes());
            for (k, &l) in s.labels().iter().enumerate() {
                w.usize(l);
                w.usize(k);
                w.f64(s.weight(k));
            }
        }
        for d in &self.diagnostics {
            w.f64(d.ratio_cut);
            w.usize(d.zero_eigenvalues);
            w.usize(d.kmeans_iterations);
            w.u8(d.kmeans_converged as u8);
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, HIERARCHY_MAGIC)?;
        let levels = r.count(8)?;
        let dim = r.usize()?;
        if levels == 0 {
            return Err(Error::Format("hierarchy has no levels".into()));
        }
        let mut graphs = Vec::with_capacity(levels);
        let mut radii = Vec::with_capacity(levels);
        for _ in 0..levels {
            let n = r.count(8 * dim)?;
            radii.push(r.f64()?);
            let pos = (0..n * dim).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let ne = r.count(16)?;
            let edges = (0..ne)
                .map(|_| Ok((r.usize()?, r.usize()?)))
                .collect::<Result<Vec<_>>>()?;
            graphs.push(Graph::new(DenseMatrix::from_vec(n, dim, pos)?, edges)?);
        }
        let mut assignments = Vec::with_capacity(levels - 1);
        for level in 0..levels - 1 {
            let nnz = r.count(24)?;
            let clusters = graphs[level + 1].num_nodes();
            let mut labels = vec![usize::MAX; nnz];
            for _ in 0..nnz {
                let (row, col, _w) = (r.usize()?, r.usize()?, r.f64()?);
                if col >= nnz {
                    return Err(Error::Format("assignment column out of range".into()));
                }
                labels[col] = row;
            }
            if nnz != graphs[level].num_nodes() {
                return Err(Error::Format("assignment size does not match level".into()));
            }
            assignments.push(AssignmentMatrix::from_labels(labels, clusters)?);
        }
        let mut diagnostics = Vec::with_capacity(levels - 1);
        for level in 0..levels - 1 {
            let ratio_cut = r.f64()?;
            let zero_eigenvalues = r.usize()?;
            let kmeans_iterations = r.usize()?;
            let kmeans_converged = r.u8()? != 0;
            diagnostics.push(LevelDiagnostics {
                level,
                ratio_cut,
                zero_eigenvalues,
                kmeans_iterations,
                kmeans_converged,
                isolated_next: graphs[level + 1].isolated_nodes(),
            });
        }
        r.finish()?;
        Ok(Self {
            graphs,
            assignments,
            radii,
            diagnostics,
        })
    }

    /// SHA-256 of the serialized hierarchy, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.to_bytes());
        crate::mesh::hex_digest(h)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_all(path.as_ref())?)
    }

    /// Per-level diagnostics as CSV.
    pub fn diagnostics_csv(&self) -> String {
        let mut s = String::from("level,nodes,next_nodes,edges,ratio_cut,zero_eigenvalues,kmeans_iterations,isolated_next\n");
        for d in &self.diagnostics {
            let g = &self.graphs[d.level];
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                d.level,
                g.num_nodes(),
                self.graphs[d.level + 1].num_nodes(),
                g.edges().len(),
                d.ratio_cut,
                d.zero_eigenvalues,
                d.kmeans_iterations,
                d.isolated_next
            );
        }
        s
    }
}
