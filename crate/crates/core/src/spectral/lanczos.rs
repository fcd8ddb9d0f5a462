//! Hermitian Lanczos with full reorthogonalization, with optional deflation
//! against already-converged vectors. Used on (A*A)^{-1} to extract the
//! smallest singular values of A through a factorization of A.

use num_complex::Complex64;

use super::vecops::{axpy, dot, norm, scale, start_vector};

pub struct LanczosResult {
    /// Ritz values, descending.
    pub values: Vec<f64>,
    /// Ritz vectors matching `values`.
    pub vectors: Vec<Vec<Complex64>>,
    /// Residual estimates |beta_m * y_last| per Ritz pair.
    pub residual_estimates: Vec<f64>,
}

/// Runs `m` Lanczos steps of the Hermitian `op`, keeping the basis orthogonal
/// to `deflate`.
pub fn lanczos_hermitian(
    dim: usize,
    m: usize,
    deflate: &[Vec<Complex64>],
    mut op: impl FnMut(&[Complex64], &mut [Complex64]),
) -> LanczosResult {
    let m = m.min(dim.saturating_sub(deflate.len()).max(1));
    let mut v0 = start_vector(dim);
    project_out(&mut v0, deflate);
    let n0 = norm(&v0);
    if n0 < 1e-300 {
        return LanczosResult {
            values: vec![],
            vectors: vec![],
            residual_estimates: vec![],
        };
    }
    scale(1.0 / n0, &mut v0);

    let mut basis = vec![v0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    for j in 0..m {
        op(&basis[j], &mut w);
        // full reorthogonalization against the basis and the deflation space
        let a = dot(&basis[j], &w).re;
        for pass in 0..2 {
            let _ = pass;
            for b in basis.iter() {
                let h = dot(b, &w);
                axpy(-h, b, &mut w);
            }
            project_out(&mut w, deflate);
        }
        alphas.push(a);
        let beta = norm(&w);
        if beta < 1e-14 || j + 1 == m {
            betas.push(beta);
            break;
        }
        betas.push(beta);
        let mut next = w.clone();
        scale(1.0 / beta, &mut next);
        basis.push(next);
    }

    // eigen-decomposition of the symmetric tridiagonal
    let k = alphas.len();
    let mut t = faer::Mat::<f64>::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = alphas[i];
        if i + 1 < k {
            t[(i, i + 1)] = betas[i];
            t[(i + 1, i)] = betas[i];
        }
    }
    let eig = t
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("tridiagonal eigendecomposition");
    let beta_last = *betas.last().unwrap_or(&0.0);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.S()[b].partial_cmp(&eig.S()[a]).unwrap());

    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for &p in &order {
        values.push(eig.S()[p]);
        residuals.push((beta_last * eig.U()[(k - 1, p)]).abs());
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        for (j, b) in basis.iter().enumerate() {
            let yj = eig.U()[(j, p)];
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += yj * bi;
            }
        }
        let n = norm(&v);
        if n > 0.0 {
            scale(1.0 / n, &mut v);
        }
        vectors.push(v);
    }
    LanczosResult {
        values,
        vectors,
        residual_estimates: residuals,
    }
}

fn project_out(w: &mut [Complex64], space: &[Vec<Complex64>]) {
    for v in space {
        let h = dot(v, w);
        axpy(-h, v, w);
    }
}
