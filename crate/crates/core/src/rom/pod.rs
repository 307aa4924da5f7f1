use std::path::Path;

use nalgebra::DMatrix;

use crate::binio::{read_all, write_atomic, Reader, Writer};
use crate::error::{Error, Result};
use crate::num::DenseMatrix;

/// Leading left singular vectors of the snapshot matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PodBasis {
    /// `N x M`, orthonormal columns.
    pub phi: DenseMatrix,
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
}

/// Flip each column so its largest-magnitude entry is positive.
pub fn fix_signs(phi: &mut DenseMatrix) {
    for k in 0..phi.cols() {
        let col = phi.column(k);
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            let flipped: Vec<f64> = col.iter().map(|v| -v).collect();
            phi.set_column(k, &flipped);
        }
    }
}

/// POD basis of dimension `m` from snapshots (each of length `N`).
pub fn pod_basis(snapshots: &[Vec<f64>], m: usize) -> Result<PodBasis> {
    let ns = snapshots.len();
    let n = snapshots.first().map_or(0, Vec::len);
    if ns == 0 || n == 0 {
        return Err(Error::Contract("POD needs at least one non-empty snapshot".into()));
    }
    if m == 0 || m > n.min(ns) {
        return Err(Error::Config(format!(
            "POD dimension {m} must be in 1..={} for {n} x {ns} snapshots",
            n.min(ns)
        )));
    }
    if snapshots.iter().any(|s| s.len() != n) {
        return Err(Error::Dimension("snapshots differ in length".into()));
    }
    let x = DMatrix::from_fn(n, ns, |i, j| snapshots[j][i]);
    let svd = x.svd(true, false);
    let u = svd.u.ok_or_else(|| Error::Contract("SVD did not return left vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut phi = DenseMatrix::from_fn(n, m, |i, k| u[(i, order[k])]);
    fix_signs(&mut phi);
    Ok(PodBasis {
        phi,
        singular_values: order.iter().map(|&k| svd.singular_values[k]).collect(),
    })
}

impl PodBasis {
    pub fn dim(&self) -> usize {
        self.phi.cols()
    }

    /// `Phi^T x`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.phi.t_matvec(x)
    }

    /// `Phi xhat`.
    pub fn lift(&self, xhat: &[f64]) -> Result<Vec<f64>> {
        self.phi.matvec(xhat)
    }

    /// First `m` columns.
    pub fn truncate(&self, m: usize) -> Result<PodBasis> {
        if m == 0 || m > self.dim() {
            return Err(Error::Config(format!("cannot truncate a {}-column basis to {m}", self.dim())));
        }
        Ok(PodBasis {
            phi: DenseMatrix::from_fn(self.phi.rows(), m, |i, k| self.phi[(i, k)]),
            singular_values: self.singular_values.clone(),
        })
    }

    /// `max |Phi^T Phi - I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.phi.t_matmul(&self.phi).expect("square Gram");
        let mut worst = 0.0f64;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

const BASIS_MAGIC: &[u8; 4] = b"GDPB";

/// A basis together with the snapshot layout it was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredBasis {
    pub case: String,
    pub nq: usize,
    pub nc: usize,
    pub mesh_hash: String,
    pub basis: PodBasis,
}

impl StoredBasis {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(BASIS_MAGIC);
        w.str(&self.case);
        w.usize(self.nq);
        w.usize(self.nc);
        w.str(&self.mesh_hash);
        w.usize(self.basis.phi.rows());
        w.usize(self.basis.phi.cols());
        for &v in self.basis.phi.as_slice() {
            w.f64(v);
        }
        w.f64s(&self.basis.singular_values);
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, BASIS_MAGIC)?;
        let case = r.str()?;
        let nq = r.usize()?;
        let nc = r.usize()?;
        let mesh_hash = r.str()?;
        let rows = r.usize()?;
        let cols = r.usize()?;
        if rows != nq * nc {
            return Err(Error::Format(format!("basis has {rows} rows for nq {nq} x nc {nc}")));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("basis size overflows".into()))?;
        let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let phi = DenseMatrix::from_vec(rows, cols, data)?;
        let singular_values = r.f64s()?;
        r.finish()?;
        Ok(Self {
            case,
            nq,
            nc,
            mesh_hash,
            basis: PodBasis { phi, singular_values },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_all(path.as_ref())?)
    }
}
