//! Small deterministic model of the conditioning path of the generator:
//! a windowed style encoder without shifts or masks, cross-attention
//! injection of a condition sequence, and a sampler whose condition gate
//! opens only after a fixed number of steps.

mod attention;
mod sampler;

pub use attention::{
    cross_attention, cross_attention_traced, style_encode, window_attention, window_attention_traced, window_partition,
    AttentionTrace,
};
pub use sampler::{first_divergence, gated_sample, LatentState, SamplerConfig};

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConditioningError {
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("window size {window} does not divide {height}x{width}")]
    NonDivisible { window: usize, height: usize, width: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("invalid sampler config: {0}")]
    Config(String),
}

/// `L` tokens of dimension `d`, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence(DMatrix<f64>);

impl TokenSequence {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self, ConditioningError> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(ConditioningError::Shape(format!(
                "token sequence must be at least 1x1, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(ConditioningError::NonFinite("token sequence".into()));
        }
        Ok(TokenSequence(matrix))
    }

    pub fn from_rows(len: usize, dim: usize, values: &[f64]) -> Result<Self, ConditioningError> {
        if values.len() != len * dim {
            return Err(ConditioningError::Shape(format!(
                "{} values for {len}x{dim} tokens",
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(len, dim, values))
    }

    /// Uniform entries in `[-1, 1)` from the same generator as
    /// [`AttentionWeights::from_seed`].
    pub fn random(len: usize, dim: usize, seed: u64) -> Result<Self, ConditioningError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..len * dim).map(|_| unit_draw(&mut rng)).collect();
        Self::from_rows(len, dim, &values)
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.0.row(i).iter().copied().collect()
    }
}

/// Uniform draw in `[-1, 1)`: the top 53 bits of one `next_u64` mapped to
/// `[0, 1)`, then affinely to `[-1, 1)`.
fn unit_draw(rng: &mut ChaCha8Rng) -> f64 {
    let unit = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * unit - 1.0
}

/// Query/key/value projections, each `d x d`, applied as `tokens · W`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub wq: DMatrix<f64>,
    pub wk: DMatrix<f64>,
    pub wv: DMatrix<f64>,
    pub seed: Option<u64>,
}

impl AttentionWeights {
    pub fn new(wq: DMatrix<f64>, wk: DMatrix<f64>, wv: DMatrix<f64>) -> Result<Self, ConditioningError> {
        let d = wq.nrows();
        for (name, m) in [("wq", &wq), ("wk", &wk), ("wv", &wv)] {
            if m.nrows() != d || m.ncols() != d || d == 0 {
                return Err(ConditioningError::Shape(format!(
                    "{name} must be {d}x{d}, got {}x{}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(ConditioningError::NonFinite(name.into()));
            }
        }
        Ok(AttentionWeights { wq, wk, wv, seed: None })
    }

    /// Deterministic weights from a seed.
    ///
    /// A ChaCha8 stream seeded with `seed_from_u64(seed)` fills `wq`, `wk`,
    /// then `wv`, each row-major, with `u / sqrt(d)` where `u` is the
    /// `[-1, 1)` draw described on [`TokenSequence::random`].
    pub fn from_seed(dim: usize, seed: u64) -> Result<Self, ConditioningError> {
        if dim == 0 {
            return Err(ConditioningError::Shape("weight dim must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (dim as f64).sqrt();
        let mut draw = || {
            let vals: Vec<f64> = (0..dim * dim).map(|_| unit_draw(&mut rng) * scale).collect();
            DMatrix::from_row_slice(dim, dim, &vals)
        };
        let wq = draw();
        let wk = draw();
        let wv = draw();
        Ok(AttentionWeights {
            wq,
            wk,
            wv,
            seed: Some(seed),
        })
    }

    /// Zero query/key projections with identity values: every query
    /// attends uniformly.
    pub fn uniform(dim: usize) -> Result<Self, ConditioningError> {
        Self::new(
            DMatrix::zeros(dim, dim),
            DMatrix::zeros(dim, dim),
            DMatrix::identity(dim, dim),
        )
    }

    pub fn dim(&self) -> usize {
        self.wq.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub window_size: usize,
}

impl WindowConfig {
    pub fn new(window_size: usize) -> Result<Self, ConditioningError> {
        if window_size == 0 {
            return Err(ConditioningError::Shape("window size must be positive".into()));
        }
        Ok(WindowConfig { window_size })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_weights_are_reproducible() {
        let a = AttentionWeights::from_seed(4, 7).unwrap();
        let b = AttentionWeights::from_seed(4, 7).unwrap();
        let c = AttentionWeights::from_seed(4, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.wq, c.wq);
        let bound = 1.0 / 2.0;
        assert!(a
            .wq
            .iter()
            .chain(a.wk.iter())
            .chain(a.wv.iter())
            .all(|v| v.abs() <= bound));
    }

    #[test]
    fn weight_shapes_checked() {
        assert!(AttentionWeights::new(DMatrix::zeros(2, 2), DMatrix::zeros(2, 3), DMatrix::zeros(2, 2)).is_err());
        assert!(AttentionWeights::from_seed(0, 1).is_err());
    }

    #[test]
    fn token_sequence_rejects_nan_and_empty() {
        assert!(TokenSequence::from_rows(1, 1, &[f64::INFINITY]).is_err());
        assert!(TokenSequence::from_rows(0, 2, &[]).is_err());
    }
}
