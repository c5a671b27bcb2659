//! Brute-force reference implementations shared by the integration tests.
//! Plain nested loops over `Vec`s; nothing here goes through nalgebra.

#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn zeros(r: usize, c: usize) -> Mat {
    vec![vec![0.0; c]; r]
}

pub fn identity(n: usize) -> Mat {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn from_flat(r: usize, c: usize, v: &[f64]) -> Mat {
    (0..r).map(|i| v[i * c..(i + 1) * c].to_vec()).collect()
}

pub fn flat(m: &Mat) -> Vec<f64> {
    m.iter().flatten().copied().collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    let mut out = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            out[j][i] = *v;
        }
    }
    out
}

pub fn add(a: &Mat, b: &Mat, scale_b: f64) -> Mat {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + scale_b * y).collect())
        .collect()
}

pub fn scale(a: &Mat, s: f64) -> Mat {
    a.iter().map(|r| r.iter().map(|x| x * s).collect()).collect()
}

pub fn trace(a: &Mat) -> f64 {
    (0..a.len()).map(|i| a[i][i]).sum()
}

pub fn frobenius(a: &Mat) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a.clone();
    let mut inv = identity(n);
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        inv.swap(col, pivot);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for j in 0..n {
            m[col][j] /= p;
            inv[col][j] /= p;
        }
        for i in 0..n {
            if i != col {
                let f = m[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        m[i][j] -= f * m[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    inv
}

/// Denman-Beavers iteration for the principal square root of a matrix with
/// positive real spectrum (it need not be symmetric).
pub fn sqrt_db(a: &Mat) -> Mat {
    let n = a.len();
    let mut y = a.clone();
    let mut z = identity(n);
    for _ in 0..100 {
        let yi = inverse(&y);
        let zi = inverse(&z);
        let ny = scale(&add(&y, &zi, 1.0), 0.5);
        let nz = scale(&add(&z, &yi, 1.0), 0.5);
        let delta = frobenius(&add(&ny, &y, -1.0)) / frobenius(&ny).max(1e-300);
        y = ny;
        z = nz;
        if delta < 1e-15 {
            break;
        }
    }
    y
}

/// `G[i][j] = Σ_{y,x} F[i,y,x] F[j,y,x] / (C·H·W)` with F channel-major.
pub fn gram(c: usize, h: usize, w: usize, f: &[f64]) -> Mat {
    let mut g = zeros(c, c);
    for i in 0..c {
        for j in 0..c {
            let mut s = 0.0;
            for y in 0..h {
                for x in 0..w {
                    s += f[i * h * w + y * w + x] * f[j * h * w + y * w + x];
                }
            }
            g[i][j] = s / (c * h * w) as f64;
        }
    }
    g
}

/// `(1/N) Σ_i Σ_{a,b} (R[a][b] − T_i[a][b])²`.
pub fn sml(result: &Mat, targets: &[Mat]) -> f64 {
    let mut total = 0.0;
    for t in targets {
        for a in 0..result.len() {
            for b in 0..result.len() {
                let d = result[a][b] - t[a][b];
                total += d * d;
            }
        }
    }
    total / targets.len() as f64
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Column means and unbiased covariance of row samples.
pub fn mean_cov(rows: &Mat) -> (Vec<f64>, Mat) {
    let (m, n) = (rows.len(), rows[0].len());
    let mut mean = vec![0.0; n];
    for r in rows {
        for j in 0..n {
            mean[j] += r[j] / m as f64;
        }
    }
    let mut cov = zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            let mut s = 0.0;
            for r in rows {
                s += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
            cov[a][b] = s / (m - 1) as f64;
        }
    }
    (mean, cov)
}

/// `‖μa − μb‖² + Tr Σa + Tr Σb − 2 Tr (Σa Σb)^{1/2}` with the cross term
/// from Denman-Beavers on the non-symmetric product.
pub fn fid(ma: &[f64], ca: &Mat, mb: &[f64], cb: &Mat) -> f64 {
    let mean: f64 = ma.iter().zip(mb).map(|(x, y)| (x - y) * (x - y)).sum();
    let cross = trace(&sqrt_db(&matmul(ca, cb)));
    mean + trace(ca) + trace(cb) - 2.0 * cross
}

/// Random symmetric positive definite `n x n`: `A Aᵀ / n + ridge·I`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, ridge: f64) -> Mat {
    let a = from_flat(n, n, &uniform(rng, n * n));
    let mut s = scale(&matmul(&a, &transpose(&a)), 1.0 / n as f64);
    for (i, row) in s.iter_mut().enumerate() {
        row[i] += ridge;
    }
    s
}

/// Random PSD of rank `rank ≤ n`: `B Bᵀ` with `B` of shape `n x rank`.
pub fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Mat {
    let b = from_flat(n, rank, &uniform(rng, n * rank));
    matmul(&b, &transpose(&b))
}

/// `softmax(Q Kᵀ/√d) V` with `Q = X Wq`, `K = Y Wk`, `V = Y Wv`, one
/// query row at a time. Returns (output, weights).
pub fn attention(x: &Mat, y: &Mat, wq: &Mat, wk: &Mat, wv: &Mat) -> (Mat, Mat) {
    let d = wq.len();
    let q = matmul(x, wq);
    let k = matmul(y, wk);
    let v = matmul(y, wv);
    let mut out = zeros(x.len(), d);
    let mut weights = zeros(x.len(), y.len());
    for i in 0..x.len() {
        let mut scores = vec![0.0; y.len()];
        for j in 0..y.len() {
            let mut s = 0.0;
            for t in 0..d {
                s += q[i][t] * k[j][t];
            }
            scores[j] = s / (d as f64).sqrt();
        }
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for j in 0..y.len() {
            weights[i][j] = exps[j] / total;
            for t in 0..d {
                out[i][t] += weights[i][j] * v[j][t];
            }
        }
    }
    (out, weights)
}

pub fn to_mat(m: &nalgebra::DMatrix<f64>) -> Mat {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    a.iter()
        .flatten()
        .zip(b.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns the
/// eigenvalues and a matrix whose columns are the eigenvectors.
pub fn jacobi_eigen(a: &Mat) -> (Vec<f64>, Mat) {
    let n = a.len();
    let mut a = a.clone();
    let mut v = identity(n);
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[k][p], v[k][q]);
                    v[k][p] = c * vkp - s * vkq;
                    v[k][q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

/// PSD square root through Jacobi, negative eigenvalues clamped to zero.
pub fn sqrt_jacobi(a: &Mat) -> Mat {
    let (vals, v) = jacobi_eigen(a);
    let n = a.len();
    let mut out = zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[i][j] = (0..n).map(|k| v[i][k] * vals[k].max(0.0).sqrt() * v[j][k]).sum();
        }
    }
    out
}

/// Same distance as [`fid`] but with the cross term taken as
/// `Tr (√Σb Σa √Σb)^{1/2}` via Jacobi, so singular covariances are fine.
pub fn fid_psd(ma: &[f64], ca: &Mat, mb: &[f64], cb: &Mat) -> f64 {
    let mean: f64 = ma.iter().zip(mb).map(|(x, y)| (x - y) * (x - y)).sum();
    let sb = sqrt_jacobi(cb);
    let (vals, _) = jacobi_eigen(&matmul(&matmul(&sb, ca), &sb));
    let cross: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    mean + trace(ca) + trace(cb) - 2.0 * cross
}
