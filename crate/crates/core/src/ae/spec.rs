use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widths, latent size and stacking of the graph autoencoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    /// Feature width at each hierarchy level; `widths[0]` is the number of
    /// state variables.
    pub widths: Vec<usize>,
    pub latent: usize,
    /// Message-passing operations per MPP/UMP layer.
    pub depth: usize,
    /// Coarse neighbors used when unpooling.
    pub unpool_k: usize,
}

impl LayerSpec {
    pub fn new(widths: Vec<usize>, latent: usize) -> Self {
        Self {
            widths,
            latent,
            depth: 2,
            unpool_k: 3,
        }
    }

    pub fn levels(&self) -> usize {
        self.widths.len()
    }

    pub fn validate(&self, levels: usize, nq: usize) -> Result<()> {
        if self.widths.len() != levels {
            return Err(Error::Config(format!(
                "{} feature widths for a {levels}-level hierarchy",
                self.widths.len()
            )));
        }
        if self.widths.contains(&0) || self.latent == 0 || self.depth == 0 || self.unpool_k == 0 {
            return Err(Error::Config("widths, latent size, depth and k must be positive".into()));
        }
        if self.widths[0] != nq {
            return Err(Error::Config(format!(
                "first width {} must equal the number of state variables {nq}",
                self.widths[0]
            )));
        }
        Ok(())
    }

    /// `(in, out)` of each message-passing op in encoder layer `i` (1-based),
    /// which acts on level `i - 1`.
    pub fn encoder_ops(&self, i: usize) -> Vec<(usize, usize)> {
        let (a, b) = (self.widths[i - 1], self.widths[i]);
        std::iter::once((a, b)).chain(std::iter::repeat_n((b, b), self.depth - 1)).collect()
    }

    /// Ops of the decoder layer that lands on level `i - 1` coming from
    /// level `i`.
    pub fn decoder_ops(&self, i: usize) -> Vec<(usize, usize)> {
        let (a, b) = (self.widths[i], self.widths[i - 1]);
        std::iter::repeat_n((a, a), self.depth - 1).chain(std::iter::once((a, b))).collect()
    }

    /// Weights in one MPP (or, by symmetry, UMP) layer.
    pub fn layer_params(&self, i: usize) -> usize {
        self.encoder_ops(i).iter().map(|(a, b)| 2 * a * b).sum()
    }

    pub fn decoder_layer_params(&self, i: usize) -> usize {
        self.decoder_ops(i).iter().map(|(a, b)| 2 * a * b).sum()
    }

    /// Weights in the encoder (equivalently decoder) dense layer given the
    /// node count of the coarsest graph.
    pub fn mlp_params(&self, coarsest_nodes: usize) -> usize {
        coarsest_nodes * self.widths[self.levels() - 1] * self.latent
    }

    pub fn total_params(&self, coarsest_nodes: usize) -> usize {
        let mp: usize = (1..self.levels())
            .map(|i| self.layer_params(i) + self.decoder_layer_params(i))
            .sum();
        mp + 2 * self.mlp_params(coarsest_nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burgers_and_euler_counts() {
        let b = LayerSpec::new(vec![1, 8, 16, 32, 64], 1);
        let enc: Vec<_> = (1..5).map(|i| b.layer_params(i)).collect();
        assert_eq!(enc, vec![144, 768, 3072, 12288]);
        let dec: Vec<_> = (1..5).map(|i| b.decoder_layer_params(i)).collect();
        assert_eq!(dec, enc);
        assert_eq!(b.mlp_params(2), 128);
        let e = LayerSpec::new(vec![4, 16, 64, 128, 256], 1);
        let enc: Vec<_> = (1..5).map(|i| e.layer_params(i)).collect();
        assert_eq!(enc, vec![640, 10240, 49152, 196608]);
        assert_eq!(e.mlp_params(2), 512);
    }

    #[test]
    fn op_shapes() {
        let s = LayerSpec::new(vec![1, 8], 2);
        assert_eq!(s.encoder_ops(1), vec![(1, 8), (8, 8)]);
        assert_eq!(s.decoder_ops(1), vec![(8, 8), (8, 1)]);
        assert!(s.validate(2, 1).is_ok());
        assert!(s.validate(3, 1).is_err());
        assert!(s.validate(2, 4).is_err());
    }
}
