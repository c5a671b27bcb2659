//! Evaluation metrics over precomputed features and embeddings.
//!
//! - style mean loss: mean squared Frobenius distance between the Gram
//!   matrix of a result and the Grams of every image in a style corpus;
//! - content matching score: cosine similarity of caption embeddings;
//! - Fréchet distance between Gaussian fits of embedding sets;
//! - CLIP score: `100 * max(cos, 0)` between an image embedding and a
//!   style text embedding.

mod fid;

pub use fid::{fid, gaussian_stats, matrix_sqrt_psd, GaussianStats};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Tolerance on symmetry and on negative eigenvalues of Gram/covariance input.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid shape: {0}")]
    Shape(String),
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("empty target list")]
    EmptyTargets,
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("need at least 2 samples for Gaussian statistics, got {0}")]
    TooFewSamples(usize),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    Asymmetric(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    Indefinite(f64),
    #[error("Fréchet distance {0:e} is negative beyond rounding tolerance")]
    NegativeDistance(f64),
}

/// A `C x H x W` activation tensor, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self, MetricsError> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(MetricsError::Shape(format!(
                "feature map dims must be positive, got {channels}x{height}x{width}"
            )));
        }
        if values.len() != channels * height * width {
            return Err(MetricsError::Shape(format!(
                "expected {} values for {channels}x{height}x{width}, got {}",
                channels * height * width,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite("feature map"));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            values,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self, MetricsError> {
        Self::new(channels, height, width, vec![0.0; channels * height * width])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }

    /// Feature vector (length `C`) at one spatial position.
    pub fn token(&self, y: usize, x: usize) -> Vec<f64> {
        (0..self.channels).map(|c| self.get(c, y, x)).collect()
    }
}

/// Symmetric PSD channel-correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix(DMatrix<f64>);

impl GramMatrix {
    /// Validates symmetry and positive semidefiniteness within [`PSD_TOL`].
    pub fn new(values: DMatrix<f64>) -> Result<Self, MetricsError> {
        check_psd(&values, PSD_TOL)?;
        Ok(GramMatrix(values))
    }

    pub fn from_row_slice(dim: usize, values: &[f64]) -> Result<Self, MetricsError> {
        if values.len() != dim * dim {
            return Err(MetricsError::Shape(format!(
                "{} values for a {dim}x{dim} Gram",
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, values))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }
}

/// A single embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVec(Vec<f64>);

impl EmbeddingVec {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::Shape("empty embedding".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite("embedding"));
        }
        Ok(EmbeddingVec(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// `m` embeddings of dimension `n`, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet(DMatrix<f64>);

impl EmbeddingSet {
    pub fn new(rows: usize, dim: usize, values: &[f64]) -> Result<Self, MetricsError> {
        if rows == 0 || dim == 0 || values.len() != rows * dim {
            return Err(MetricsError::Shape(format!(
                "embedding set {rows}x{dim} with {} values",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite("embedding set"));
        }
        Ok(EmbeddingSet(DMatrix::from_row_slice(rows, dim, values)))
    }

    pub fn from_rows(rows: &[EmbeddingVec]) -> Result<Self, MetricsError> {
        let dim = rows
            .first()
            .map(EmbeddingVec::dim)
            .ok_or(MetricsError::TooFewSamples(0))?;
        let mut flat = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.dim() != dim {
                return Err(MetricsError::DimMismatch {
                    left: dim,
                    right: row.dim(),
                });
            }
            flat.extend_from_slice(row.values());
        }
        Self::new(rows.len(), dim, &flat)
    }

    pub fn count(&self) -> usize {
        self.0.nrows()
    }

    pub fn dim(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

pub(crate) fn check_psd(m: &DMatrix<f64>, tol: f64) -> Result<(), MetricsError> {
    if !m.is_square() {
        return Err(MetricsError::Shape(format!(
            "{}x{} is not square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite("matrix"));
    }
    let asym = max_asymmetry(m);
    if asym > tol {
        return Err(MetricsError::Asymmetric(asym));
    }
    if m.nrows() == 0 {
        return Ok(());
    }
    let min_eig = m.clone().symmetric_eigenvalues().min();
    if min_eig < -tol {
        return Err(MetricsError::Indefinite(min_eig));
    }
    Ok(())
}

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// `G = F Fᵀ / (C·H·W)` with `F` the `C x (H·W)` flattening.
pub fn gram(fm: &FeatureMap) -> GramMatrix {
    let c = fm.channels();
    let hw = fm.height() * fm.width();
    let f = DMatrix::from_row_slice(c, hw, fm.values());
    let norm = (c * hw) as f64;
    let mut g = DMatrix::zeros(c, c);
    for i in 0..c {
        for j in i..c {
            let v = f.row(i).dot(&f.row(j)) / norm;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    GramMatrix(g)
}

/// Style mean loss: `(1/N) Σᵢ ‖G_res − G_targetᵢ‖²_F`.
pub fn sml(result: &GramMatrix, targets: &[GramMatrix]) -> Result<f64, MetricsError> {
    if targets.is_empty() {
        return Err(MetricsError::EmptyTargets);
    }
    let mut total = 0.0;
    for target in targets {
        if target.dim() != result.dim() {
            return Err(MetricsError::DimMismatch {
                left: result.dim(),
                right: target.dim(),
            });
        }
        total += (result.matrix() - target.matrix()).norm_squared();
    }
    Ok(total / targets.len() as f64)
}

fn cosine(a: &EmbeddingVec, b: &EmbeddingVec) -> Result<f64, MetricsError> {
    if a.dim() != b.dim() {
        return Err(MetricsError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let a = DVector::from_column_slice(a.values());
    let b = DVector::from_column_slice(b.values());
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(MetricsError::ZeroNorm);
    }
    Ok((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Content matching score: cosine similarity of two caption embeddings.
pub fn cms(a: &EmbeddingVec, b: &EmbeddingVec) -> Result<f64, MetricsError> {
    cosine(a, b)
}

/// CLIP score on the 0–100 scale, negative similarity clamped to 0.
pub fn clips(image_emb: &EmbeddingVec, text_emb: &EmbeddingVec) -> Result<f64, MetricsError> {
    Ok(100.0 * cosine(image_emb, text_emb)?.max(0.0))
}
