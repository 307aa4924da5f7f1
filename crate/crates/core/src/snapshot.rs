//! Trajectory storage shared by the FOM, training and ROM stages.
//!
//! A state vector is variable-major over all graph nodes (padding included):
//! entry `q * nodes + i` holds variable `q` at node `i`. Padding nodes sit
//! before and after the physical cells.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::binio::{read_all, write_atomic, Reader, Writer};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GDSS";

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub mu: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Latent coordinates, present for ROM output.
    pub latents: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSet {
    pub case: String,
    pub nq: usize,
    /// Physical cells.
    pub nc: usize,
    pub pad_left: usize,
    pub pad_right: usize,
    pub dt: f64,
    pub mesh_hash: String,
    pub runs: Vec<Trajectory>,
}

/// SHA-256 hex of an arbitrary descriptor, used for meshes without a file.
pub fn descriptor_hash(desc: &str) -> String {
    let mut h = Sha256::new();
    h.update(desc.as_bytes());
    crate::mesh::hex_digest(h)
}

impl SnapshotSet {
    pub fn new(case: impl Into<String>, nq: usize, nc: usize, dt: f64, mesh_hash: impl Into<String>) -> Self {
        Self {
            case: case.into(),
            nq,
            nc,
            pad_left: 0,
            pad_right: 0,
            dt,
            mesh_hash: mesh_hash.into(),
            runs: Vec::new(),
        }
    }

    pub fn with_padding(mut self, left: usize, right: usize) -> Self {
        self.pad_left = left;
        self.pad_right = right;
        self
    }

    /// Graph nodes per state including padding.
    pub fn nodes(&self) -> usize {
        self.pad_left + self.nc + self.pad_right
    }

    pub fn state_len(&self) -> usize {
        self.nq * self.nodes()
    }

    pub fn physical_len(&self) -> usize {
        self.nq * self.nc
    }

    pub fn has_padding(&self) -> bool {
        self.pad_left + self.pad_right > 0
    }

    /// Indices of physical entries inside a full state vector.
    pub fn physical_indices(&self) -> Vec<usize> {
        physical_indices(self.nq, self.nc, self.pad_left, self.pad_right)
    }

    pub fn physical(&self, state: &[f64]) -> Vec<f64> {
        if !self.has_padding() {
            return state.to_vec();
        }
        self.physical_indices().into_iter().map(|i| state[i]).collect()
    }

    pub fn total_snapshots(&self) -> usize {
        self.runs.iter().map(|r| r.states.len()).sum()
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> {
        self.runs.iter().flat_map(|r| r.states.iter().map(Vec::as_slice))
    }

    pub fn push(&mut self, run: Trajectory) -> Result<()> {
        let n = self.state_len();
        if let Some(bad) = run.states.iter().position(|s| s.len() != n) {
            return Err(Error::Dimension(format!(
                "state {bad} has length {}, expected {n}",
                run.states[bad].len()
            )));
        }
        if let Some(lat) = &run.latents {
            if lat.len() != run.states.len() {
                return Err(Error::Dimension("latent series length differs from states".into()));
            }
        }
        self.runs.push(run);
        Ok(())
    }

    /// Same case, layout, step and mesh; required for any cross-file operation.
    pub fn check_compatible(&self, other: &SnapshotSet) -> Result<()> {
        if self.mesh_hash != other.mesh_hash {
            return Err(Error::HashMismatch {
                expected: self.mesh_hash.clone(),
                found: other.mesh_hash.clone(),
            });
        }
        if (self.nq, self.nc, self.pad_left, self.pad_right) != (other.nq, other.nc, other.pad_left, other.pad_right) {
            return Err(Error::Dimension(format!(
                "layouts differ: (nq {}, nc {}, pad {}+{}) vs (nq {}, nc {}, pad {}+{})",
                self.nq, self.nc, self.pad_left, self.pad_right, other.nq, other.nc, other.pad_left, other.pad_right
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC);
        w.str(&self.case);
        w.usize(self.state_len());
        w.usize(self.nq);
        w.usize(self.nc);
        w.usize(self.pad_left);
        w.usize(self.pad_right);
        w.f64(self.dt);
        w.str(&self.mesh_hash);
        w.usize(self.runs.len());
        for run in &self.runs {
            w.f64s(&run.mu);
            w.usize(run.states.len());
            for s in &run.states {
                for &v in s {
                    w.f64(v);
                }
            }
            match &run.latents {
                None => w.u8(0),
                Some(lat) => {
                    w.u8(1);
                    w.usize(lat.first().map_or(0, Vec::len));
                    for l in lat {
                        for &v in l {
                            w.f64(v);
                        }
                    }
                }
            }
        }
        w.into_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, MAGIC)?;
        let case = r.str()?;
        let n = r.usize()?;
        let nq = r.usize()?;
        let nc = r.usize()?;
        let pad_left = r.usize()?;
        let pad_right = r.usize()?;
        if nq.checked_mul(pad_left + nc + pad_right) != Some(n) {
            return Err(Error::Format(format!("header state length {n} disagrees with layout")));
        }
        let dt = r.f64()?;
        let mesh_hash = r.str()?;
        let nruns = r.count(1)?;
        let mut set = Self {
            case,
            nq,
            nc,
            pad_left,
            pad_right,
            dt,
            mesh_hash,
            runs: Vec::with_capacity(nruns),
        };
        for _ in 0..nruns {
            let mu = r.f64s()?;
            let count = r.count(8 * n)?;
            let states = (0..count)
                .map(|_| (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            let latents = match r.u8()? {
                0 => None,
                1 => {
                    let m = r.usize()?;
                    Some(
                        (0..count)
                            .map(|_| (0..m).map(|_| r.f64()).collect::<Result<Vec<_>>>())
                            .collect::<Result<Vec<_>>>()?,
                    )
                }
                t => return Err(Error::Format(format!("bad latent flag {t}"))),
            };
            set.runs.push(Trajectory { mu, states, latents });
        }
        r.finish()?;
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&read_all(path.as_ref())?)
    }

    /// Hold out `n_val` randomly chosen snapshots for validation; returns
    /// `(train, validation)` in original order.
    pub fn split_random(&self, n_val: usize, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        let total = self.total_snapshots();
        if n_val > total {
            return Err(Error::Config(format!("cannot hold out {n_val} of {total} snapshots")));
        }
        let mut idx: Vec<usize> = (0..total).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut is_val = vec![false; total];
        for &i in &idx[..n_val] {
            is_val[i] = true;
        }
        let mut train = Vec::with_capacity(total - n_val);
        let mut val = Vec::with_capacity(n_val);
        for (k, s) in self.states().enumerate() {
            if is_val[k] {
                val.push(s.to_vec());
            } else {
                train.push(s.to_vec());
            }
        }
        Ok((train, val))
    }
}

pub fn physical_indices(nq: usize, nc: usize, pad_left: usize, pad_right: usize) -> Vec<usize> {
    let nodes = pad_left + nc + pad_right;
    (0..nq)
        .flat_map(|q| (0..nc).map(move |i| q * nodes + pad_left + i))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SnapshotSet {
        let mut s = SnapshotSet::new("demo", 2, 3, 0.5, "abc").with_padding(1, 2);
        let n = s.state_len();
        s.push(Trajectory {
            mu: vec![1.0, -2.0],
            states: (0..3).map(|k| (0..n).map(|i| (k * n + i) as f64 * 0.1).collect()).collect(),
            latents: Some(vec![vec![0.0, 1.0]; 3]),
        })
        .unwrap();
        s.push(Trajectory {
            mu: vec![3.0],
            states: vec![vec![f64::MIN_POSITIVE; n]],
            latents: None,
        })
        .unwrap();
        s
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let s = sample();
        let back = SnapshotSet::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.total_snapshots(), 4);
    }

    #[test]
    fn physical_slice_skips_padding() {
        let s = sample();
        assert_eq!(s.physical_indices(), vec![1, 2, 3, 7, 8, 9]);
        let st: Vec<f64> = (0..12).map(|i| i as f64).collect();
        assert_eq!(s.physical(&st), vec![1.0, 2.0, 3.0, 7.0, 8.0, 9.0]);
    }

    #[test]
    fn rejects_bad_input() {
        let mut s = sample();
        assert!(s
            .push(Trajectory {
                mu: vec![],
                states: vec![vec![0.0; 3]],
                latents: None
            })
            .is_err());
        let mut bytes = s.to_bytes();
        bytes.pop();
        assert!(SnapshotSet::from_bytes(&bytes).is_err());
        let other = SnapshotSet::new("demo", 2, 3, 0.5, "xyz").with_padding(1, 2);
        assert!(matches!(s.check_compatible(&other), Err(Error::HashMismatch { .. })));
    }

    #[test]
    fn random_split_counts_and_determinism() {
        let s = sample();
        let (train, val) = s.split_random(1, 7).unwrap();
        assert_eq!((train.len(), val.len()), (3, 1));
        assert_eq!(s.split_random(1, 7).unwrap().1, val);
        assert!(s.split_random(5, 0).is_err());
    }
}
