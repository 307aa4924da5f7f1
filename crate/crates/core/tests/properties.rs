mod common;

use gdlspg::coarsen::{kmeans, rescale, AssignmentMatrix};
use gdlspg::fom::euler::{hll_flux, normal_flux, Primitive};
use gdlspg::mesh::{radius_graph, Graph, ScaleStats};
use gdlspg::metrics::{pod_projection_error, relative_error};
use gdlspg::num::{symmetric_eig, DenseMatrix};
use gdlspg::rom::pod_basis;
use gdlspg::snapshot::{SnapshotSet, Trajectory};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(lo..hi, rows * cols).prop_map(move |v| DenseMatrix::from_vec(rows, cols, v).unwrap())
}

fn sized_matrix(max_rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = DenseMatrix> {
    (2..=max_rows).prop_flat_map(move |r| matrix(r, cols, lo, hi))
}

fn states(n: usize, count: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-5.0..5.0f64, n), count)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scale_inverse_roundtrip(m in sized_matrix(12, 3, -1e3, 1e3)) {
        let stats = ScaleStats::from_matrices([&m]).unwrap();
        let y = stats.scale(&m).unwrap();
        prop_assert!(y.as_slice().iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
        let back = stats.inv_scale(&y).unwrap();
        for (a, b) in back.as_slice().iter().zip(m.as_slice()) {
            prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0) * 1e3);
        }
    }

    #[test]
    fn radius_graph_matches_brute_force(pos in sized_matrix(25, 2, 0.0, 1.0), r in 0.05..0.6f64) {
        let g = radius_graph(&pos, r).unwrap();
        let n = pos.rows();
        let mut expect = Vec::new();
        for j in 0..n {
            for k in j + 1..n {
                let dx = pos[(j, 0)] - pos[(k, 0)];
                let dy = pos[(j, 1)] - pos[(k, 1)];
                if (dx * dx + dy * dy).sqrt() <= r * (1.0 - 1e-12) {
                    expect.push((j, k));
                }
            }
        }
        for e in &expect {
            prop_assert!(g.edges.contains(e));
        }
        let graph = Graph::new(pos.clone(), g.edges.clone()).unwrap();
        let a = graph.adjacency();
        prop_assert_eq!(a.asymmetry(), 0.0);
        let l = graph.laplacian();
        for j in 0..n {
            prop_assert_eq!(a[(j, j)], 0.0);
            prop_assert!(l.row(j).iter().sum::<f64>().abs() < 1e-12);
        }
        prop_assert_eq!(graph.isolated_nodes(), g.isolated);
    }

    #[test]
    fn assignment_rows_average_members(labels in prop::collection::vec(0usize..5, 5..30)) {
        // make every cluster non-empty
        let mut labels = labels;
        for c in 0..5 {
            labels[c] = c;
        }
        let n = labels.len();
        let s = AssignmentMatrix::from_labels(labels.clone(), 5).unwrap();
        let dense = s.to_dense();
        for c in 0..5 {
            prop_assert!((dense.row(c).iter().sum::<f64>() - 1.0).abs() < 1e-14);
        }
        let ones = DenseMatrix::from_fn(n, 2, |_, j| 1.0 + j as f64);
        let pooled = s.apply(&ones).unwrap();
        for c in 0..5 {
            prop_assert!((pooled[(c, 0)] - 1.0).abs() < 1e-14);
            prop_assert!((pooled[(c, 1)] - 2.0).abs() < 1e-14);
        }
        // adjoint identity <S x, y> = <x, S^T y>
        let x = DenseMatrix::from_fn(n, 1, |i, _| (i as f64 * 0.37).sin());
        let y = DenseMatrix::from_fn(5, 1, |i, _| (i as f64 * 1.3).cos());
        let lhs: f64 = s.apply(&x).unwrap().as_slice().iter().zip(y.as_slice()).map(|(a, b)| a * b).sum();
        let rhs: f64 = s.apply_transpose(&y).unwrap().as_slice().iter().zip(x.as_slice()).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn kmeans_labels_are_valid(pts in sized_matrix(30, 2, -1.0, 1.0), k in 1usize..5, seed in 0u64..100) {
        prop_assume!(k <= pts.rows());
        let km = kmeans(&pts, k, seed).unwrap();
        prop_assert_eq!(km.labels.len(), pts.rows());
        prop_assert!(km.labels.iter().all(|&l| l < k));
        prop_assert!(km.inertia >= 0.0);
        let again = kmeans(&pts, k, seed).unwrap();
        prop_assert_eq!(km.labels, again.labels);
    }

    #[test]
    fn rescale_keeps_extrema(prev in sized_matrix(20, 2, -3.0, 3.0), new in sized_matrix(8, 2, -1.0, 1.0)) {
        let out = rescale(&new, &prev).unwrap();
        for d in 0..2 {
            let col = |m: &DenseMatrix| m.column(d);
            let (lo_p, hi_p) = extrema(&col(&prev));
            let (lo_n, hi_n) = extrema(&col(&new));
            let (lo_o, hi_o) = extrema(&col(&out));
            if hi_n > lo_n {
                prop_assert!((lo_o - lo_p).abs() < 1e-12 && (hi_o - hi_p).abs() < 1e-12);
            } else {
                prop_assert!(lo_o.is_finite() && hi_o.is_finite());
            }
        }
    }

    #[test]
    fn symmetric_eig_reconstructs(v in prop::collection::vec(-2.0..2.0f64, 36)) {
        let b = DenseMatrix::from_vec(6, 6, v).unwrap();
        let a = DenseMatrix::from_fn(6, 6, |i, j| b[(i, j)] + b[(j, i)]);
        let e = symmetric_eig(&a).unwrap();
        prop_assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!((e.eigenvalues.iter().sum::<f64>() - a.trace()).abs() < 1e-9);
        let q = &e.eigenvectors;
        let qtq = q.t_matmul(q).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                prop_assert!((qtq[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn relative_error_is_scale_free(a in states(6, 4), b in states(6, 4), c in 0.01..100.0f64) {
        prop_assume!(a.iter().flatten().any(|v| v.abs() > 1e-3));
        let e = relative_error(a.iter().map(Vec::as_slice), b.iter().map(Vec::as_slice)).unwrap();
        let sa: Vec<Vec<f64>> = a.iter().map(|s| s.iter().map(|v| v * c).collect()).collect();
        let sb: Vec<Vec<f64>> = b.iter().map(|s| s.iter().map(|v| v * c).collect()).collect();
        let es = relative_error(sa.iter().map(Vec::as_slice), sb.iter().map(Vec::as_slice)).unwrap();
        prop_assert!((e - es).abs() <= 1e-12 * e.max(1.0));
        // summation order over snapshots does not matter
        let ra: Vec<&[f64]> = a.iter().rev().map(Vec::as_slice).collect();
        let rb: Vec<&[f64]> = b.iter().rev().map(Vec::as_slice).collect();
        let er = relative_error(ra, rb).unwrap();
        prop_assert!((e - er).abs() <= 1e-12 * e.max(1.0));
        prop_assert_eq!(relative_error(a.iter().map(Vec::as_slice), a.iter().map(Vec::as_slice)).unwrap(), 0.0);
    }

    #[test]
    fn pod_error_monotone_in_dimension(snaps in states(10, 7)) {
        let full = pod_basis(&snaps, 7).unwrap();
        let mut last = f64::INFINITY;
        for m in 1..=7 {
            let phi = full.truncate(m).unwrap();
            let e = pod_projection_error(snaps.iter().map(Vec::as_slice), &phi.phi).unwrap();
            prop_assert!(e <= last + 1e-12);
            last = e;
        }
        prop_assert!(last < 1e-10);
    }

    #[test]
    fn snapshot_roundtrip_bit_exact(
        pad in (0usize..3, 0usize..3),
        runs in prop::collection::vec((prop::collection::vec(any::<f64>(), 0..3), 1usize..4, any::<bool>()), 1..4),
        dt in 1e-6..10.0f64,
    ) {
        let (nq, nc) = (2, 3);
        let mut set = SnapshotSet::new("prop", nq, nc, dt, "h").with_padding(pad.0, pad.1);
        let n = set.state_len();
        for (k, (mu, count, lat)) in runs.into_iter().enumerate() {
            let states: Vec<Vec<f64>> = (0..count)
                .map(|s| (0..n).map(|i| ((k * 31 + s * 7 + i) as f64).sin() * 1e5).collect())
                .collect();
            let latents = lat.then(|| vec![vec![k as f64, -0.0]; count]);
            set.push(Trajectory { mu, states, latents }).unwrap();
        }
        let back = SnapshotSet::from_bytes(&set.to_bytes()).unwrap();
        prop_assert_eq!(back.to_bytes(), set.to_bytes());
        prop_assert_eq!(back.total_snapshots(), set.total_snapshots());
    }

    #[test]
    fn hll_is_consistent_and_conservative(
        rho in 0.1..5.0f64, u in -2.0..2.0f64, v in -2.0..2.0f64, p in 0.1..5.0f64,
        rho2 in 0.1..5.0f64, u2 in -2.0..2.0f64, v2 in -2.0..2.0f64, p2 in 0.1..5.0f64,
        theta in 0.0..std::f64::consts::TAU,
    ) {
        let g = 1.4;
        let n = [theta.cos(), theta.sin()];
        let wl = Primitive::new(rho, u, v, p).to_conserved(g);
        let wr = Primitive::new(rho2, u2, v2, p2).to_conserved(g);
        let same = hll_flux(&wl, &wl, n, g).unwrap();
        let exact = normal_flux(&wl, n, g).unwrap();
        for q in 0..4 {
            prop_assert!((same[q] - exact[q]).abs() <= 1e-12 * (1.0 + exact[q].abs()));
        }
        let f = hll_flux(&wl, &wr, n, g).unwrap();
        let b = hll_flux(&wr, &wl, [-n[0], -n[1]], g).unwrap();
        for q in 0..4 {
            prop_assert!((f[q] + b[q]).abs() <= 1e-12 * (1.0 + f[q].abs()));
        }
    }
}

fn extrema(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

#[test]
fn pod_matches_gram_oracle_on_random_data() {
    let snaps: Vec<Vec<f64>> = (0..9).map(|k| (0..14).map(|i| (((k * 14 + i) as f64).powi(2) * 0.731).sin()).collect()).collect();
    let (phi_ref, sig_ref) = common::gram_pod(&snaps, 4);
    let pod = pod_basis(&snaps, 4).unwrap();
    for k in 0..4 {
        assert!((pod.singular_values[k] - sig_ref[k]).abs() < 1e-10 * sig_ref[0]);
        for i in 0..14 {
            assert!((pod.phi[(i, k)] - phi_ref[(i, k)]).abs() < 1e-8);
        }
    }
}
