//! Cyclic Jacobi eigendecomposition for small dense Hermitian matrices.
//!
//! Each rotation first removes the phase of the pivot element, then applies an ordinary
//! real plane rotation that zeroes it. Sweeps visit every `(p, q)` pair with `p < q` in
//! row order, so the result is bit-reproducible for a given input.

use num_complex::Complex64;

use crate::error::{QkdError, Result};

/// Off-diagonal Frobenius norm below which the matrix counts as diagonal.
pub const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;
/// Maximum number of full sweeps before giving up.
pub const MAX_SWEEPS: usize = 100;

/// Eigenvalues (ascending) and the matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    /// Column-major: `vectors[k]` is the eigenvector for `values[k]`.
    pub vectors: Vec<Vec<Complex64>>,
    pub sweeps: usize,
}

fn off_diagonal_norm(n: usize, a: &[Complex64]) -> f64 {
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[i * n + j].norm_sqr();
            }
        }
    }
    sum.sqrt()
}

/// Diagonalizes the `n × n` Hermitian matrix stored row-major in `matrix`.
///
/// Only the Hermitian part is meaningful; callers are expected to validate Hermiticity.
pub fn hermitian_eigen(n: usize, matrix: &[Complex64]) -> Result<HermitianEigen> {
    assert_eq!(matrix.len(), n * n, "matrix storage must be n*n");
    let mut a = matrix.to_vec();
    let mut v = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        v[i * n + i] = Complex64::new(1.0, 0.0);
        a[i * n + i] = Complex64::new(a[i * n + i].re, 0.0);
    }

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(n, &a);
        if off < OFF_DIAGONAL_TOLERANCE {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(QkdError::NoConvergence { sweeps, off_norm: off });
        }
        sweeps += 1;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                rotate(n, &mut a, &mut v, p, q);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].re.total_cmp(&a[j * n + j].re));
    let values = order.iter().map(|&i| a[i * n + i].re).collect();
    let vectors = order.iter().map(|&k| (0..n).map(|row| v[row * n + k]).collect()).collect();
    Ok(HermitianEigen { values, vectors, sweeps })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(n: usize, matrix: &[Complex64]) -> Result<Vec<f64>> {
    hermitian_eigen(n, matrix).map(|e| e.values)
}

fn rotate(n: usize, a: &mut [Complex64], v: &mut [Complex64], p: usize, q: usize) {
    let apq = a[p * n + q];
    let magnitude = apq.norm();
    if magnitude < 1e-300 {
        return;
    }
    let app = a[p * n + p].re;
    let aqq = a[q * n + q].re;

    // t = tan(theta) for the real symmetric block [[app, |apq|], [|apq|, aqq]]
    let theta = (aqq - app) / (2.0 * magnitude);
    let t = if theta.is_infinite() { 0.0 } else { theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt()) };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let phase = (apq / magnitude).conj(); // e^{-i phi}

    // U acts on columns p, q:
    //   U_pp = c, U_pq = s, U_qp = -s e^{-i phi}, U_qq = c e^{-i phi}
    let u_pp = Complex64::new(c, 0.0);
    let u_pq = Complex64::new(s, 0.0);
    let u_qp = -phase * s;
    let u_qq = phase * c;

    // A <- A U
    for k in 0..n {
        let akp = a[k * n + p];
        let akq = a[k * n + q];
        a[k * n + p] = akp * u_pp + akq * u_qp;
        a[k * n + q] = akp * u_pq + akq * u_qq;
    }
    // A <- U^dagger A
    for k in 0..n {
        let apk = a[p * n + k];
        let aqk = a[q * n + k];
        a[p * n + k] = u_pp.conj() * apk + u_qp.conj() * aqk;
        a[q * n + k] = u_pq.conj() * apk + u_qq.conj() * aqk;
    }
    a[p * n + q] = Complex64::new(0.0, 0.0);
    a[q * n + p] = Complex64::new(0.0, 0.0);
    a[p * n + p].im = 0.0;
    a[q * n + q].im = 0.0;

    // V <- V U
    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = vkp * u_pp + vkq * u_qp;
        v[k * n + q] = vkp * u_pq + vkq * u_qq;
    }
}
