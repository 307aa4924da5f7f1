use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ops::{elu, elu_grad, mp_backward, mp_forward, mp_jvp, pool, pool_t, MpCache, Unpool};
use super::spec::LayerSpec;
use crate::binio::{read_all, write_atomic, Reader, Writer};
use crate::coarsen::Hierarchy;
use crate::error::{Error, Result};
use crate::mesh::{matricize, vectorize, ScaleStats};
use crate::num::{DenseMatrix, DifferentiableMap};
use crate::snapshot::physical_indices;

const MAGIC: &[u8; 4] = b"GDAE";

/// Padding nodes before and after the physical cells of a 1D graph.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Padding {
    pub left: usize,
    pub right: usize,
}

/// Graph autoencoder bound to one hierarchy.
#[derive(Clone, Debug)]
pub struct AEModel {
    spec: LayerSpec,
    hierarchy: Hierarchy,
    hierarchy_hash: String,
    scale: ScaleStats,
    padding: Padding,
    weights: Vec<DenseMatrix>,
    names: Vec<String>,
    enc_idx: Vec<Vec<usize>>,
    dec_idx: Vec<Vec<usize>>,
    enc_mlp: usize,
    dec_mlp: usize,
    unpools: Vec<Unpool>,
}

struct EncCache {
    mp: Vec<Vec<MpCache>>,
    flat: Vec<f64>,
}

struct DecCache {
    z0: Vec<f64>,
    /// Indexed by level `i - 1` the layer lands on.
    mp: Vec<Vec<MpCache>>,
}

/// Layout of every tensor in declared order: encoder MP ops, encoder dense,
/// decoder dense, decoder MP ops (coarse to fine).
fn layout(spec: &LayerSpec, coarsest: usize) -> (Vec<(String, usize, usize)>, Vec<Vec<usize>>, Vec<Vec<usize>>, usize, usize) {
    let levels = spec.levels();
    let mut shapes = Vec::new();
    let mut enc_idx = Vec::new();
    for i in 1..levels {
        let mut idx = Vec::new();
        for (k, (a, b)) in spec.encoder_ops(i).into_iter().enumerate() {
            idx.push(shapes.len());
            shapes.push((format!("enc{i}.mp{k}.w1"), a, b));
            shapes.push((format!("enc{i}.mp{k}.w2"), a, b));
        }
        enc_idx.push(idx);
    }
    let flat = coarsest * spec.widths[levels - 1];
    let enc_mlp = shapes.len();
    shapes.push(("enc.dense".into(), spec.latent, flat));
    let dec_mlp = shapes.len();
    shapes.push(("dec.dense".into(), flat, spec.latent));
    let mut dec_idx = vec![Vec::new(); levels.saturating_sub(1)];
    for i in (1..levels).rev() {
        for (k, (a, b)) in spec.decoder_ops(i).into_iter().enumerate() {
            dec_idx[i - 1].push(shapes.len());
            shapes.push((format!("dec{i}.mp{k}.w1"), a, b));
            shapes.push((format!("dec{i}.mp{k}.w2"), a, b));
        }
    }
    (shapes, enc_idx, dec_idx, enc_mlp, dec_mlp)
}

impl AEModel {
    /// Xavier-uniform initialized model.
    pub fn new(spec: LayerSpec, hierarchy: Hierarchy, scale: ScaleStats, padding: Padding, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::build(spec, hierarchy, scale, padding, |rows, cols| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-limit..=limit))
        })
    }

    fn build(
        spec: LayerSpec,
        hierarchy: Hierarchy,
        scale: ScaleStats,
        padding: Padding,
        mut init: impl FnMut(usize, usize) -> DenseMatrix,
    ) -> Result<Self> {
        let nq = scale.num_features();
        spec.validate(hierarchy.num_levels(), nq)?;
        let nodes0 = hierarchy.graphs[0].num_nodes();
        if padding.left + padding.right >= nodes0 {
            return Err(Error::Config("padding leaves no physical nodes".into()));
        }
        let coarsest = hierarchy.graphs[hierarchy.num_levels() - 1].num_nodes();
        let (shapes, enc_idx, dec_idx, enc_mlp, dec_mlp) = layout(&spec, coarsest);
        let weights = shapes.iter().map(|&(_, r, c)| init(r, c)).collect();
        let names = shapes.into_iter().map(|(n, _, _)| n).collect();
        let unpools = (1..hierarchy.num_levels())
            .map(|i| {
                Unpool::new(
                    hierarchy.graphs[i - 1].positions(),
                    hierarchy.graphs[i].positions(),
                    spec.unpool_k,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let hierarchy_hash = hierarchy.hash();
        Ok(Self {
            spec,
            hierarchy,
            hierarchy_hash,
            scale,
            padding,
            weights,
            names,
            enc_idx,
            dec_idx,
            enc_mlp,
            dec_mlp,
            unpools,
        })
    }

    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn hierarchy(&self) -> &Hierarchy {
        &self.hierarchy
    }

    pub fn hierarchy_hash(&self) -> &str {
        &self.hierarchy_hash
    }

    pub fn scale_stats(&self) -> &ScaleStats {
        &self.scale
    }

    pub fn padding(&self) -> Padding {
        self.padding
    }

    pub fn nq(&self) -> usize {
        self.scale.num_features()
    }

    pub fn nodes(&self) -> usize {
        self.hierarchy.graphs[0].num_nodes()
    }

    /// Length of a full (padded) state vector.
    pub fn input_len(&self) -> usize {
        self.nq() * self.nodes()
    }

    pub fn latent_dim(&self) -> usize {
        self.spec.latent
    }

    pub fn physical_indices(&self) -> Vec<usize> {
        let nc = self.nodes() - self.padding.left - self.padding.right;
        physical_indices(self.nq(), nc, self.padding.left, self.padding.right)
    }

    pub fn weights(&self) -> &[DenseMatrix] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [DenseMatrix] {
        &mut self.weights
    }

    pub fn weight_names(&self) -> &[String] {
        &self.names
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(|w| w.rows() * w.cols()).sum()
    }

    fn coarsest_width(&self) -> usize {
        self.spec.widths[self.spec.levels() - 1]
    }

    fn check_len(&self, x: &[f64], what: &str, expected: usize) -> Result<()> {
        if x.len() != expected {
            return Err(Error::Dimension(format!("{what} has length {}, expected {expected}", x.len())));
        }
        Ok(())
    }

    fn encode_cached(&self, x: &[f64]) -> Result<(Vec<f64>, EncCache)> {
        self.check_len(x, "state", self.input_len())?;
        let mut h = self.scale.scale(&matricize(x, self.nq())?)?;
        let mut caches = Vec::with_capacity(self.spec.levels());
        for i in 1..self.spec.levels() {
            let g = &self.hierarchy.graphs[i - 1];
            let mut layer = Vec::new();
            for &w in &self.enc_idx[i - 1] {
                let (y, c) = mp_forward(g, &h, &self.weights[w], &self.weights[w + 1], true)
                    .map_err(|e| level_error(i, e))?;
                h = y;
                layer.push(c);
            }
            h = pool(&self.hierarchy.assignments[i - 1], &h).map_err(|e| level_error(i, e))?;
            caches.push(layer);
        }
        let flat = h.into_vec();
        let xhat = self.weights[self.enc_mlp].matvec(&flat)?;
        Ok((xhat, EncCache { mp: caches, flat }))
    }

    pub fn encode(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.encode_cached(x)?.0)
    }

    fn decode_cached(&self, xhat: &[f64]) -> Result<(Vec<f64>, DecCache)> {
        self.check_len(xhat, "latent vector", self.latent_dim())?;
        let levels = self.spec.levels();
        let z0 = self.weights[self.dec_mlp].matvec(xhat)?;
        let coarsest = self.hierarchy.graphs[levels - 1].num_nodes();
        let mut h = DenseMatrix::from_vec(coarsest, self.coarsest_width(), z0.iter().map(|&v| elu(v)).collect())?;
        let mut caches: Vec<Vec<MpCache>> = (1..levels).map(|_| Vec::new()).collect();
        for i in (1..levels).rev() {
            h = self.unpools[i - 1].apply(&h).map_err(|e| level_error(i, e))?;
            let g = &self.hierarchy.graphs[i - 1];
            let ops = &self.dec_idx[i - 1];
            for (k, &w) in ops.iter().enumerate() {
                let activate = !(i == 1 && k + 1 == ops.len());
                let (y, c) = mp_forward(g, &h, &self.weights[w], &self.weights[w + 1], activate)
                    .map_err(|e| level_error(i, e))?;
                h = y;
                caches[i - 1].push(c);
            }
        }
        let out = vectorize(&self.scale.inv_scale(&h)?);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer: 0 });
        }
        Ok((out, DecCache { z0, mp: caches }))
    }

    pub fn decode(&self, xhat: &[f64]) -> Result<Vec<f64>> {
        Ok(self.decode_cached(xhat)?.0)
    }

    pub fn reconstruct(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.decode(&self.encode(x)?)
    }

    /// Decoder output and `J_dec(xhat) T` for `T` of shape `M x k`.
    pub fn decode_jvp(&self, xhat: &[f64], tangents: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
        if tangents.rows() != self.latent_dim() {
            return Err(Error::Dimension(format!(
                "{} tangent rows for latent dimension {}",
                tangents.rows(),
                self.latent_dim()
            )));
        }
        let (out, cache) = self.decode_cached(xhat)?;
        let levels = self.spec.levels();
        let coarsest = self.hierarchy.graphs[levels - 1].num_nodes();
        let dz0 = self.weights[self.dec_mlp].matmul(tangents)?;
        let nq = self.nq();
        let mut jac = DenseMatrix::zeros(self.input_len(), tangents.cols());
        for c in 0..tangents.cols() {
            let col: Vec<f64> = (0..dz0.rows()).map(|r| dz0[(r, c)] * elu_grad(cache.z0[r])).collect();
            let mut h = DenseMatrix::from_vec(coarsest, self.coarsest_width(), col)?;
            for i in (1..levels).rev() {
                h = self.unpools[i - 1].apply(&h)?;
                let g = &self.hierarchy.graphs[i - 1];
                let ops = &self.dec_idx[i - 1];
                for (k, &w) in ops.iter().enumerate() {
                    let activate = !(i == 1 && k + 1 == ops.len());
                    h = mp_jvp(g, &cache.mp[i - 1][k], &h, &self.weights[w], &self.weights[w + 1], activate)?;
                }
            }
            for j in 0..nq {
                let r = self.scale.range(j);
                for n in 0..h.rows() {
                    jac[(j * h.rows() + n, c)] = h[(n, j)] * r;
                }
            }
        }
        Ok((out, jac))
    }

    /// Exact decoder Jacobian (`N x M`).
    pub fn decoder_jacobian(&self, xhat: &[f64]) -> Result<DenseMatrix> {
        Ok(self.decode_jvp(xhat, &DenseMatrix::identity(self.latent_dim()))?.1)
    }

    /// `||x - Dec(Enc(x))||^2` over physical entries.
    pub fn loss(&self, x: &[f64]) -> Result<f64> {
        let out = self.reconstruct(x)?;
        Ok(self
            .physical_indices()
            .into_iter()
            .map(|i| (x[i] - out[i]).powi(2))
            .sum())
    }

    /// Loss and its gradient with respect to every weight tensor.
    pub fn loss_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<DenseMatrix>)> {
        let (xhat, enc) = self.encode_cached(x)?;
        let (out, dec) = self.decode_cached(&xhat)?;
        let mut dout = vec![0.0; out.len()];
        let mut loss = 0.0;
        for i in self.physical_indices() {
            let d = out[i] - x[i];
            loss += d * d;
            dout[i] = 2.0 * d;
        }
        let grads = self.backward(&xhat, &enc, &dec, &dout)?;
        Ok((loss, grads))
    }

    fn backward(&self, xhat: &[f64], enc: &EncCache, dec: &DecCache, dout: &[f64]) -> Result<Vec<DenseMatrix>> {
        let levels = self.spec.levels();
        let mut grads: Vec<DenseMatrix> = self.weights.iter().map(|w| DenseMatrix::zeros(w.rows(), w.cols())).collect();
        let nq = self.nq();
        let mut dh = matricize(dout, nq)?;
        for j in 0..nq {
            let r = self.scale.range(j);
            for n in 0..dh.rows() {
                dh[(n, j)] *= r;
            }
        }
        for i in 1..levels {
            let g = &self.hierarchy.graphs[i - 1];
            let ops = &self.dec_idx[i - 1];
            for k in (0..ops.len()).rev() {
                let w = ops[k];
                let activate = !(i == 1 && k + 1 == ops.len());
                let (dx, dw1, dw2) = mp_backward(g, &dec.mp[i - 1][k], &dh, &self.weights[w], &self.weights[w + 1], activate)?;
                grads[w] = dw1;
                grads[w + 1] = dw2;
                dh = dx;
            }
            dh = self.unpools[i - 1].apply_t(&dh)?;
        }
        // decoder dense layer
        let dz0: Vec<f64> = dh.as_slice().iter().zip(&dec.z0).map(|(d, z)| d * elu_grad(*z)).collect();
        let wdec = &self.weights[self.dec_mlp];
        grads[self.dec_mlp] = DenseMatrix::from_fn(wdec.rows(), wdec.cols(), |r, c| dz0[r] * xhat[c]);
        let dxhat = wdec.t_matvec(&dz0)?;
        // encoder dense layer
        let wenc = &self.weights[self.enc_mlp];
        grads[self.enc_mlp] = DenseMatrix::from_fn(wenc.rows(), wenc.cols(), |r, c| dxhat[r] * enc.flat[c]);
        let dflat = wenc.t_matvec(&dxhat)?;
        let coarsest = self.hierarchy.graphs[levels - 1].num_nodes();
        let mut dh = DenseMatrix::from_vec(coarsest, self.coarsest_width(), dflat)?;
        for i in (1..levels).rev() {
            dh = pool_t(&self.hierarchy.assignments[i - 1], &dh)?;
            let g = &self.hierarchy.graphs[i - 1];
            let ops = &self.enc_idx[i - 1];
            for k in (0..ops.len()).rev() {
                let w = ops[k];
                let (dx, dw1, dw2) = mp_backward(g, &enc.mp[i - 1][k], &dh, &self.weights[w], &self.weights[w + 1], true)?;
                grads[w] = dw1;
                grads[w + 1] = dw2;
                dh = dx;
            }
        }
        Ok(grads)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC);
        w.usizes(&self.spec.widths);
        w.usize(self.spec.latent);
        w.usize(self.spec.depth);
        w.usize(self.spec.unpool_k);
        w.str(&self.hierarchy_hash);
        w.f64s(&self.scale.min);
        w.f64s(&self.scale.max);
        w.usize(self.padding.left);
        w.usize(self.padding.right);
        w.usize(self.weights.len());
        for t in &self.weights {
            w.usize(t.rows());
            w.usize(t.cols());
            for &v in t.as_slice() {
                w.f64(v);
            }
        }
        w.into_bytes()
    }

    /// Decode a model file; the hierarchy must be the one it was trained on.
    pub fn from_bytes(bytes: &[u8], hierarchy: &Hierarchy) -> Result<Self> {
        let mut r = Reader::new(bytes, MAGIC)?;
        let widths = r.usizes()?;
        let spec = LayerSpec {
            widths,
            latent: r.usize()?,
            depth: r.usize()?,
            unpool_k: r.usize()?,
        };
        let stored = r.str()?;
        let found = hierarchy.hash();
        if stored != found {
            return Err(Error::HashMismatch { expected: stored, found });
        }
        let scale = ScaleStats::new(r.f64s()?, r.f64s()?)?;
        let padding = Padding {
            left: r.usize()?,
            right: r.usize()?,
        };
        let count = r.count(16)?;
        let mut tensors = Vec::with_capacity(count);
        for _ in 0..count {
            let rows = r.usize()?;
            let cols = r.usize()?;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Format("tensor shape overflows".into()))?;
            let data = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            tensors.push(DenseMatrix::from_vec(rows, cols, data)?);
        }
        r.finish()?;
        let mut it = tensors.into_iter();
        let model = Self::build(spec, hierarchy.clone(), scale, padding, |rows, cols| {
            it.next().filter(|t| t.shape() == (rows, cols)).unwrap_or_else(|| DenseMatrix::zeros(0, 0))
        })?;
        if model.weights.iter().any(|t| t.rows() * t.cols() == 0) || it.next().is_some() {
            return Err(Error::Format("weight tensors do not match the layer spec".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>, hierarchy: &Hierarchy) -> Result<Self> {
        Self::from_bytes(&read_all(path.as_ref())?, hierarchy)
    }

    /// Decoder as a differentiable map; `physical_only` restricts the output
    /// to non-padding entries.
    pub fn decoder(&self, physical_only: bool) -> DecoderMap<'_> {
        let rows = if physical_only && self.padding != Padding::default() {
            Some(self.physical_indices())
        } else {
            None
        };
        DecoderMap { model: self, rows }
    }
}

fn level_error(level: usize, e: Error) -> Error {
    match e {
        Error::Dimension(m) => Error::Dimension(format!("level {level}: {m}")),
        other => other,
    }
}

/// [`AEModel`] decoder viewed as `R^M -> R^N`.
pub struct DecoderMap<'a> {
    model: &'a AEModel,
    rows: Option<Vec<usize>>,
}

impl DifferentiableMap for DecoderMap<'_> {
    fn input_dim(&self) -> usize {
        self.model.latent_dim()
    }

    fn output_dim(&self) -> usize {
        self.rows.as_ref().map_or(self.model.input_len(), Vec::len)
    }

    fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let out = self.model.decode(x)?;
        Ok(match &self.rows {
            None => out,
            Some(r) => r.iter().map(|&i| out[i]).collect(),
        })
    }

    fn push_forward(&self, x: &[f64], tangents: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
        let (out, jac) = self.model.decode_jvp(x, tangents)?;
        Ok(match &self.rows {
            None => (out, jac),
            Some(r) => (
                r.iter().map(|&i| out[i]).collect(),
                DenseMatrix::from_fn(r.len(), jac.cols(), |a, b| jac[(r[a], b)]),
            ),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ae::{train, TrainConfig};
    use crate::coarsen::{build_hierarchy, line_radii};
    use crate::num::{fd_jacobian, jacobian, relative_frobenius};

    fn toy(seed: u64, padding: Padding) -> AEModel {
        let pos = DenseMatrix::from_fn(12, 1, |i, _| i as f64);
        let counts = [12, 4, 2];
        let h = build_hierarchy(pos, &counts, &line_radii(0.0, 11.0, &counts), 1).unwrap();
        let scale = ScaleStats::new(vec![0.5], vec![2.0]).unwrap();
        AEModel::new(LayerSpec::new(vec![1, 3, 4], 2), h, scale, padding, seed).unwrap()
    }

    fn sample(k: f64) -> Vec<f64> {
        (0..12).map(|i| 1.0 + 0.8 * ((i as f64 + k) * 0.5).sin()).collect()
    }

    #[test]
    fn jacobian_matches_differences() {
        let m = toy(3, Padding::default());
        let xhat = [0.3, -0.7];
        let dec = m.decoder(false);
        let j = jacobian(&dec, &xhat).unwrap();
        let fd = fd_jacobian(&dec, &xhat, 1e-6).unwrap();
        assert!(relative_frobenius(&j, &fd) < 1e-7);
        assert_eq!(j.shape(), (12, 2));
    }

    #[test]
    fn gradient_matches_differences() {
        let m = toy(5, Padding { left: 2, right: 1 });
        let x = sample(0.3);
        let (_, grads) = m.loss_and_grad(&x).unwrap();
        for (t, g) in grads.iter().enumerate() {
            let mut fd = DenseMatrix::zeros(g.rows(), g.cols());
            for r in 0..g.rows() {
                for c in 0..g.cols() {
                    let h = 1e-6;
                    let mut mp = m.clone();
                    mp.weights_mut()[t][(r, c)] += h;
                    let mut mm = m.clone();
                    mm.weights_mut()[t][(r, c)] -= h;
                    fd[(r, c)] = (mp.loss(&x).unwrap() - mm.loss(&x).unwrap()) / (2.0 * h);
                }
            }
            assert!(relative_frobenius(g, &fd) < 1e-6, "tensor {}", m.weight_names()[t]);
        }
    }

    #[test]
    fn zero_weights() {
        let mut m = toy(0, Padding::default());
        for w in m.weights_mut() {
            w.scale_in_place(0.0);
        }
        assert_eq!(m.encode(&sample(0.0)).unwrap(), vec![0.0, 0.0]);
        assert!(m.decode(&[1.0, -4.0]).unwrap().iter().all(|&v| v == 0.5));
        let x = sample(1.0);
        let expect: f64 = x.iter().map(|v| (v - 0.5).powi(2)).sum();
        assert!((m.loss(&x).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn io_roundtrip_and_hash_guard() {
        let m = toy(9, Padding { left: 1, right: 2 });
        let bytes = m.to_bytes();
        let back = AEModel::from_bytes(&bytes, m.hierarchy()).unwrap();
        assert_eq!(back.weights(), m.weights());
        assert_eq!(back.padding(), m.padding());
        let other = {
            let pos = DenseMatrix::from_fn(12, 1, |i, _| i as f64 * 2.0);
            let counts = [12, 4, 2];
            build_hierarchy(pos, &counts, &line_radii(0.0, 22.0, &counts), 1).unwrap()
        };
        assert!(matches!(AEModel::from_bytes(&bytes, &other), Err(Error::HashMismatch { .. })));
    }

    #[test]
    fn dimension_errors() {
        let m = toy(0, Padding::default());
        assert!(m.encode(&[1.0; 5]).is_err());
        assert!(m.decode(&[1.0]).is_err());
    }

    #[test]
    fn training_is_deterministic_and_reduces_loss() {
        let data: Vec<Vec<f64>> = vec![sample(0.0)];
        let cfg = TrainConfig {
            epochs: 100,
            batch_size: 1,
            learning_rate: 1e-3,
            seed: 4,
            ..Default::default()
        };
        let mut a = toy(2, Padding::default());
        let ra = train(&mut a, &data, &[], &cfg).unwrap();
        let mut b = toy(2, Padding::default());
        let rb = train(&mut b, &data, &[], &cfg).unwrap();
        assert_eq!(ra, rb);
        let first: f64 = ra.train_loss[..10].iter().sum();
        let last: f64 = ra.train_loss[90..].iter().sum();
        assert!(last < first);

        let mut c = toy(2, Padding::default());
        let before = c.weights().to_vec();
        train(&mut c, &data, &[], &TrainConfig { epochs: 0, ..cfg }).unwrap();
        assert_eq!(c.weights(), &before[..]);
    }
}
