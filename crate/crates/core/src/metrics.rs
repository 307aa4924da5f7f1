//! Relative error measures over snapshot collections and CSV export.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ae::AEModel;
use crate::error::{Error, Result};
use crate::num::DenseMatrix;
use crate::snapshot::SnapshotSet;

/// `sqrt(sum ||x - y||^2) / sqrt(sum ||x||^2)` over paired vectors.
pub fn relative_error<'a, 'b>(
    reference: impl IntoIterator<Item = &'a [f64]>,
    approx: impl IntoIterator<Item = &'b [f64]>,
) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut a = approx.into_iter();
    for (k, x) in reference.into_iter().enumerate() {
        let y = a
            .next()
            .ok_or_else(|| Error::Dimension(format!("approximation ends after {k} vectors")))?;
        if x.len() != y.len() {
            return Err(Error::Dimension(format!(
                "vector {k}: length {} vs {}",
                x.len(),
                y.len()
            )));
        }
        for (p, q) in x.iter().zip(y) {
            num += (p - q) * (p - q);
            den += p * p;
        }
    }
    if a.next().is_some() {
        return Err(Error::Dimension("approximation has more vectors than the reference".into()));
    }
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok((num / den).sqrt())
}

/// Autoencoder reconstruction error through an arbitrary reconstruction map.
pub fn reconstruction_error_with<'a>(
    snapshots: impl IntoIterator<Item = &'a [f64]>,
    mut reconstruct: impl FnMut(&[f64]) -> Result<Vec<f64>>,
) -> Result<f64> {
    let xs: Vec<&[f64]> = snapshots.into_iter().collect();
    let ys = xs.iter().map(|x| reconstruct(x)).collect::<Result<Vec<_>>>()?;
    relative_error(xs.iter().copied(), ys.iter().map(Vec::as_slice))
}

/// Reconstruction error of `Dec(Enc(x))` on the physical entries only.
pub fn ae_reconstruction_error<'a>(
    model: &AEModel,
    snapshots: impl IntoIterator<Item = &'a [f64]>,
) -> Result<f64> {
    let idx = model.physical_indices();
    let xs: Vec<&[f64]> = snapshots.into_iter().collect();
    let mut phys_x = Vec::with_capacity(xs.len());
    let mut phys_y = Vec::with_capacity(xs.len());
    for x in xs {
        let y = model.reconstruct(x)?;
        phys_x.push(idx.iter().map(|&i| x[i]).collect::<Vec<_>>());
        phys_y.push(idx.iter().map(|&i| y[i]).collect::<Vec<_>>());
    }
    relative_error(phys_x.iter().map(Vec::as_slice), phys_y.iter().map(Vec::as_slice))
}

/// `sqrt(sum ||(I - Phi Phi^T) x||^2) / sqrt(sum ||x||^2)`.
pub fn pod_projection_error<'a>(snapshots: impl IntoIterator<Item = &'a [f64]>, phi: &DenseMatrix) -> Result<f64> {
    reconstruction_error_with(snapshots, |x| phi.matvec(&phi.t_matvec(x)?))
}

fn check_pair(fom: &SnapshotSet, rom: &SnapshotSet) -> Result<()> {
    if fom.mesh_hash != rom.mesh_hash {
        return Err(Error::HashMismatch {
            expected: fom.mesh_hash.clone(),
            found: rom.mesh_hash.clone(),
        });
    }
    if fom.nq != rom.nq || fom.nc != rom.nc {
        return Err(Error::Dimension(format!(
            "fom has nq {} nc {}, rom has nq {} nc {}",
            fom.nq, fom.nc, rom.nq, rom.nc
        )));
    }
    if fom.runs.len() != rom.runs.len() {
        return Err(Error::Dimension(format!("{} fom runs vs {} rom runs", fom.runs.len(), rom.runs.len())));
    }
    for (k, (a, b)) in fom.runs.iter().zip(&rom.runs).enumerate() {
        if a.states.len() != b.states.len() {
            return Err(Error::Dimension(format!(
                "run {k}: {} fom states vs {} rom states",
                a.states.len(),
                b.states.len()
            )));
        }
    }
    Ok(())
}

/// State prediction error over every run and step, comparing physical cells.
/// Padding may differ between the two sets.
pub fn state_prediction_error(fom: &SnapshotSet, rom: &SnapshotSet) -> Result<f64> {
    check_pair(fom, rom)?;
    let x: Vec<Vec<f64>> = fom.states().map(|s| fom.physical(s)).collect();
    let y: Vec<Vec<f64>> = rom.states().map(|s| rom.physical(s)).collect();
    relative_error(x.iter().map(Vec::as_slice), y.iter().map(Vec::as_slice))
}

/// `x_rom - x_fom` per physical cell at one run/step, for one variable or
/// all of them (variable-major).
pub fn local_error_field(
    fom: &SnapshotSet,
    rom: &SnapshotSet,
    run: usize,
    step: usize,
    variable: Option<usize>,
) -> Result<Vec<f64>> {
    check_pair(fom, rom)?;
    let get = |set: &SnapshotSet| -> Result<Vec<f64>> {
        let s = set
            .runs
            .get(run)
            .and_then(|r| r.states.get(step))
            .ok_or_else(|| Error::Config(format!("run {run} step {step} out of range")))?;
        Ok(set.physical(s))
    };
    let (a, b) = (get(fom)?, get(rom)?);
    let diff: Vec<f64> = b.iter().zip(&a).map(|(r, f)| r - f).collect();
    match variable {
        None => Ok(diff),
        Some(q) if q < fom.nq => Ok(diff[q * fom.nc..(q + 1) * fom.nc].to_vec()),
        Some(q) => Err(Error::Config(format!("variable {q} out of range (nq = {})", fom.nq))),
    }
}

/// One row of a long-format metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub case: String,
    pub method: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub metric: String,
    pub value: f64,
}

/// A metrics file is a TOML document with one `[[record]]` table per row.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    #[serde(default, rename = "record")]
    pub records: Vec<MetricRecord>,
}

impl MetricsFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.as_ref().display())))
    }

    /// Load, or start empty when the file does not exist yet.
    pub fn load_or_default(path: impl AsRef<Path>) -> Result<Self> {
        if path.as_ref().exists() {
            Self::load(path)
        } else {
            Ok(Self::default())
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        crate::binio::write_atomic(path.as_ref(), text.as_bytes())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("case,method,M,metric,value\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{},{:e}", r.case, r.method, r.m, r.metric, r.value);
        }
        s
    }
}
