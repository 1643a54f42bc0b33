//! Fréchet distance between Gaussian fits of two feature sets, with a
//! pluggable feature space. Covariance square roots go through a Jacobi
//! eigendecomposition with negative eigenvalues clamped to zero.

use crate::error::EvalError;

/// Column means of an N x d sample matrix (rows are samples).
fn mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len();
    let d = rows[0].len();
    let mut mu = vec![0f64; d];
    for r in rows {
        for (m, &v) in mu.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in mu.iter_mut() {
        *m /= n as f64;
    }
    mu
}

/// Unbiased sample covariance (d x d, row-major).
fn covariance(rows: &[Vec<f64>], mu: &[f64]) -> Vec<f64> {
    let n = rows.len();
    let d = mu.len();
    let mut cov = vec![0f64; d * d];
    for r in rows {
        for i in 0..d {
            let di = r[i] - mu[i];
            for j in i..d {
                cov[i * d + j] += di * (r[j] - mu[j]);
            }
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / denom;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    cov
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors as columns of V, row-major).
pub fn sym_eigen(a: &[f64], d: usize, sweeps: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = a.to_vec();
    let mut v = vec![0f64; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    for _ in 0..sweeps {
        let mut off = 0f64;
        for i in 0..d {
            for j in i + 1..d {
                off += m[i * d + j] * m[i * d + j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[p * d + q];
                if apq.abs() < 1e-18 {
                    continue;
                }
                let app = m[p * d + p];
                let aqq = m[q * d + q];
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[k * d + p];
                    let mkq = m[k * d + q];
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[p * d + k];
                    let mqk = m[q * d + k];
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let evals = (0..d).map(|i| m[i * d + i]).collect();
    (evals, v)
}

fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut c = vec![0f64; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                c[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    c
}

/// Symmetric PSD square root; negative eigenvalues are clamped to zero.
pub fn sym_sqrt(a: &[f64], d: usize) -> Result<Vec<f64>, EvalError> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::DegenerateCovariance);
    }
    let (evals, v) = sym_eigen(a, d, 48);
    let mut scaled = vec![0f64; d * d];
    for j in 0..d {
        let s = evals[j].max(0.0).sqrt();
        for i in 0..d {
            scaled[i * d + j] = v[i * d + j] * s;
        }
    }
    // sqrt = V diag(sqrt(lam)) V^T
    let mut out = vec![0f64; d * d];
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0f64;
            for k in 0..d {
                acc += scaled[i * d + k] * v[j * d + k];
            }
            out[i * d + j] = acc;
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(EvalError::DegenerateCovariance);
    }
    Ok(out)
}

const COV_REG: f64 = 1e-6;

/// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^(1/2)), computed via the
/// symmetric form sqrt(sqrt(Sa) Sb sqrt(Sa)).
pub fn frechet_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let d = a[0].len();
    if b[0].len() != d {
        return Err(EvalError::DimMismatch(d, b[0].len()));
    }
    let mu_a = mean(a);
    let mu_b = mean(b);
    let mut cov_a = covariance(a, &mu_a);
    let mut cov_b = covariance(b, &mu_b);
    for i in 0..d {
        cov_a[i * d + i] += COV_REG;
        cov_b[i * d + i] += COV_REG;
    }
    let sqrt_a = sym_sqrt(&cov_a, d)?;
    let inner = matmul(&matmul(&sqrt_a, &cov_b, d), &sqrt_a, d);
    // Symmetrize against accumulation noise before the final root.
    let mut sym_inner = vec![0f64; d * d];
    for i in 0..d {
        for j in 0..d {
            sym_inner[i * d + j] = 0.5 * (inner[i * d + j] + inner[j * d + i]);
        }
    }
    let (evals, _) = sym_eigen(&sym_inner, d, 48);
    let tr_sqrt: f64 = evals.iter().map(|&l| l.max(0.0).sqrt()).sum();
    let mut dist = 0f64;
    for i in 0..d {
        dist += (mu_a[i] - mu_b[i]).powi(2);
        dist += cov_a[i * d + i] + cov_b[i * d + i];
    }
    dist -= 2.0 * tr_sqrt;
    if !dist.is_finite() {
        return Err(EvalError::DegenerateCovariance);
    }
    // Distance is non-negative up to numerical slack.
    Ok(dist.max(0.0))
}
