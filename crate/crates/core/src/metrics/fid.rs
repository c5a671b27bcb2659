use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{check_psd, max_asymmetry, EmbeddingSet, MetricsError, PSD_TOL};

/// Input tolerance for [`matrix_sqrt_psd`].
pub const SQRT_TOL: f64 = 1e-7;
/// Rounding slack below zero that [`fid`] clamps away.
pub const FID_CLAMP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
}

impl GaussianStats {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self, MetricsError> {
        if covariance.nrows() != mean.len() {
            return Err(MetricsError::DimMismatch {
                left: mean.len(),
                right: covariance.nrows(),
            });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite("mean"));
        }
        check_psd(&covariance, PSD_TOL)?;
        Ok(GaussianStats { mean, covariance })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }
}

/// Column mean and unbiased (`m - 1`) sample covariance.
pub fn gaussian_stats(set: &EmbeddingSet) -> Result<GaussianStats, MetricsError> {
    let m = set.count();
    if m < 2 {
        return Err(MetricsError::TooFewSamples(m));
    }
    let x = set.matrix();
    let mean: DVector<f64> = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut cov = centered.transpose() * &centered / (m - 1) as f64;
    symmetrize(&mut cov);
    Ok(GaussianStats { mean, covariance: cov })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Principal square root via symmetric eigendecomposition, eigenvalues
/// clamped at zero. No input checks.
fn sqrt_clamped(s: &DMatrix<f64>) -> DMatrix<f64> {
    let mut sym = s.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let mut r = v * DMatrix::from_diagonal(&roots) * v.transpose();
    symmetrize(&mut r);
    r
}

/// Symmetric PSD square root `R` with `R·R ≈ S`.
///
/// Accepts asymmetry and negative eigenvalues up to [`SQRT_TOL`]; small
/// negative eigenvalues are clamped to zero.
pub fn matrix_sqrt_psd(s: &DMatrix<f64>) -> Result<DMatrix<f64>, MetricsError> {
    if !s.is_square() {
        return Err(MetricsError::Shape(format!(
            "{}x{} is not square",
            s.nrows(),
            s.ncols()
        )));
    }
    if s.iter().any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite("matrix"));
    }
    let asym = max_asymmetry(s);
    if asym > SQRT_TOL {
        return Err(MetricsError::Asymmetric(asym));
    }
    if s.nrows() == 0 {
        return Ok(s.clone());
    }
    let min_eig = s.clone().symmetric_eigenvalues().min();
    if min_eig < -SQRT_TOL {
        return Err(MetricsError::Indefinite(min_eig));
    }
    Ok(sqrt_clamped(s))
}

/// Fréchet distance between two Gaussians:
/// `‖μa − μb‖² + Tr(Σa + Σb − 2 (Σa Σb)^{1/2})`.
///
/// The cross term is evaluated as `Tr((√Σa Σb √Σa)^{1/2})`, which has the
/// same spectrum as `(Σa Σb)^{1/2}` and stays symmetric.
pub fn fid(a: &GaussianStats, b: &GaussianStats) -> Result<f64, MetricsError> {
    if a.dim() != b.dim() {
        return Err(MetricsError::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let root_a = sqrt_clamped(&a.covariance);
    let inner = &root_a * &b.covariance * &root_a;
    let cross = sqrt_clamped(&inner).trace();
    let value = mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * cross;
    if value < -FID_CLAMP_TOL {
        return Err(MetricsError::NegativeDistance(value));
    }
    Ok(value.max(0.0))
}
