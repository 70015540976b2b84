//! Decoder from latent space to the observation (color) space. The default
//! affine-tanh decoder makes the guidance gradient traverse a genuine
//! nonlinear decode stage.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diffgrad::{AffineMap, DifferentiableMap, IdentityMap, ScaleMap, TanhMap};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecoderKind {
    Identity,
    Affine,
    /// y = (tanh(Ax + b) + 1) / 2, mapping into the unit cube.
    AffineTanh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decoder {
    pub kind: DecoderKind,
    pub dim: usize,
    /// Row-major d x d; unused for the identity kind.
    pub matrix: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Decoder {
    pub fn identity(dim: usize) -> Self {
        Self {
            kind: DecoderKind::Identity,
            dim,
            matrix: Vec::new(),
            bias: Vec::new(),
        }
    }

    pub fn affine(dim: usize, matrix: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        let dec = Self {
            kind: DecoderKind::Affine,
            dim,
            matrix,
            bias,
        };
        dec.validate()?;
        Ok(dec)
    }

    pub fn affine_tanh(dim: usize, matrix: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        let dec = Self {
            kind: DecoderKind::AffineTanh,
            dim,
            matrix,
            bias,
        };
        dec.validate()?;
        Ok(dec)
    }

    /// Seeded random full-rank affine-tanh decoder: a Haar rotation with a
    /// mild anisotropic stretch and a small bias.
    pub fn random_affine_tanh(dim: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, 0x4445_4344);
        let rot = crate::sliced::haar_rotation(dim, &mut rng);
        let mut matrix = vec![0.0; dim * dim];
        for i in 0..dim {
            let stretch = 0.8 + 0.4 * rng.gen::<f64>();
            for j in 0..dim {
                matrix[i * dim + j] = stretch * rot.column(j)[i];
            }
        }
        let bias: Vec<f64> = (0..dim)
            .map(|_| 0.2 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            kind: DecoderKind::AffineTanh,
            dim,
            matrix,
            bias,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == DecoderKind::Identity {
            return Ok(());
        }
        if self.matrix.len() != self.dim * self.dim || self.bias.len() != self.dim {
            return Err(Error::DimensionMismatch(self.matrix.len(), self.dim * self.dim));
        }
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.matrix);
        let rank = m.rank(1e-10);
        if rank < self.dim {
            return Err(Error::Config(format!(
                "decoder matrix rank {rank} < {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// The decode pipeline as a chain of differentiable maps.
    pub fn maps(&self) -> Vec<Box<dyn DifferentiableMap>> {
        match self.kind {
            DecoderKind::Identity => vec![Box::new(IdentityMap::new("decoder", self.dim))],
            DecoderKind::Affine => vec![Box::new(AffineMap::new(
                "decoder-affine",
                self.dim,
                self.dim,
                self.matrix.clone(),
                self.bias.clone(),
            ))],
            DecoderKind::AffineTanh => vec![
                Box::new(AffineMap::new(
                    "decoder-affine",
                    self.dim,
                    self.dim,
                    self.matrix.clone(),
                    self.bias.clone(),
                )),
                Box::new(TanhMap::new("decoder-tanh", self.dim)),
                Box::new(ScaleMap::new("decoder-unit", self.dim, 0.5, 0.5)),
            ],
        }
    }

    pub fn decode(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for m in self.maps() {
            out = m.forward(&out);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_tanh_lands_in_unit_cube() {
        let dec = Decoder::random_affine_tanh(3, 7);
        for scale in [0.1, 1.0, 100.0] {
            let y = dec.decode(&[scale, -scale, scale]);
            assert!(y.iter().all(|&v| (0.0..=1.0).contains(&v)), "{y:?}");
        }
    }

    #[test]
    fn random_decoder_is_deterministic_and_full_rank() {
        let a = Decoder::random_affine_tanh(3, 5);
        let b = Decoder::random_affine_tanh(3, 5);
        assert_eq!(a, b);
        assert!(a.validate().is_ok());
    }

    #[test]
    fn singular_affine_rejected() {
        let err = Decoder::affine(2, vec![1.0, 1.0, 2.0, 2.0], vec![0.0, 0.0]);
        assert!(err.is_err());
    }

    #[test]
    fn identity_decoder_is_identity() {
        let dec = Decoder::identity(3);
        assert_eq!(dec.decode(&[0.1, 0.2, 0.3]), vec![0.1, 0.2, 0.3]);
    }
}
