//! Fréchet distance between two embedding sets, plus the PSD matrix
//! square root it relies on.

use nalgebra::{DMatrix, DVector};
use stylevar::metrics::{fid, gaussian_stats, matrix_sqrt_psd, EmbeddingSet, GaussianStats};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let generated = EmbeddingSet::new(
        5,
        3,
        &[
            0.1, 0.2, 0.0, //
            0.3, 0.1, 0.2, //
            0.0, 0.4, 0.1, //
            0.2, 0.2, 0.3, //
            0.4, 0.0, 0.2,
        ],
    )?;
    let reference = EmbeddingSet::new(
        5,
        3,
        &[
            0.5, 0.2, 0.1, //
            0.6, 0.4, 0.0, //
            0.4, 0.3, 0.2, //
            0.7, 0.1, 0.1, //
            0.5, 0.5, 0.3,
        ],
    )?;
    let a = gaussian_stats(&generated)?;
    let b = gaussian_stats(&reference)?;
    println!("mean of generated: {}", a.mean().transpose());
    println!("fid(generated, reference) = {:.6}", fid(&a, &b)?);
    println!("fid(reference, generated) = {:.6}", fid(&b, &a)?);
    println!("fid(generated, generated) = {:.2e}", fid(&a, &a)?);

    // diagonal covariances have a closed form
    let da = GaussianStats::new(
        DVector::zeros(2),
        DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])),
    )?;
    let db = GaussianStats::new(
        DVector::zeros(2),
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 9.0])),
    )?;
    let closed: f64 = [(4.0f64, 1.0f64), (1.0, 9.0)]
        .iter()
        .map(|(x, y)| x + y - 2.0 * (x * y).sqrt())
        .sum();
    println!("diagonal case: {:.6} (closed form {closed:.6})", fid(&da, &db)?);

    let s = a.covariance().clone();
    let r = matrix_sqrt_psd(&s)?;
    let rel = (&r * &r - &s).norm() / s.norm();
    println!("sqrt reconstruction error: {rel:.2e}");
    Ok(())
}
