//! Arnoldi iteration with full reorthogonalization for general complex
//! operators, used both directly (largest-magnitude modes) and on
//! shift-inverted operators.

use num_complex::Complex64;

use super::vecops::{norm, orthogonalize, scale, start_vector};

pub struct ArnoldiFactorization {
    /// Krylov basis, `steps + 1` vectors unless breakdown occurred.
    pub basis: Vec<Vec<Complex64>>,
    /// Upper Hessenberg coefficients: `h[j]` holds column j (length j+2).
    pub h: Vec<Vec<Complex64>>,
    pub steps: usize,
    pub breakdown: bool,
}

/// Runs `m` Arnoldi steps of `op` starting from a deterministic vector.
pub fn arnoldi(
    dim: usize,
    m: usize,
    mut op: impl FnMut(&[Complex64], &mut [Complex64]),
) -> ArnoldiFactorization {
    let m = m.min(dim);
    let mut basis = vec![start_vector(dim)];
    let mut h: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    let mut w = vec![Complex64::new(0.0, 0.0); dim];
    let mut breakdown = false;
    let mut steps = 0;
    for j in 0..m {
        op(&basis[j], &mut w);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); j + 1];
        orthogonalize(&mut w, &basis, &mut coeffs);
        let beta = norm(&w);
        let mut col = coeffs;
        col.push(Complex64::new(beta, 0.0));
        h.push(col);
        steps = j + 1;
        if beta < 1e-14 {
            breakdown = true;
            break;
        }
        let mut next = w.clone();
        scale(1.0 / beta, &mut next);
        basis.push(next);
    }
    ArnoldiFactorization {
        basis,
        h,
        steps,
        breakdown,
    }
}

/// Ritz pairs of the factorization: eigenpairs of the square Hessenberg block
/// lifted through the Krylov basis. Vectors are unit-normalized.
pub fn ritz_pairs(fact: &ArnoldiFactorization) -> Vec<(Complex64, Vec<Complex64>)> {
    let m = fact.steps;
    if m == 0 {
        return Vec::new();
    }
    let mut hm = faer::Mat::<Complex64>::zeros(m, m);
    for (j, col) in fact.h.iter().enumerate() {
        for (i, &v) in col.iter().enumerate().take(m) {
            if i < m {
                hm[(i, j)] = v;
            }
        }
    }
    let eig = match hm.eigen() {
        Ok(e) => e,
        Err(_) => return Vec::new(),
    };
    let dim = fact.basis[0].len();
    let mut out = Vec::with_capacity(m);
    for p in 0..m {
        let lambda = eig.S()[p];
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        for (j, b) in fact.basis.iter().enumerate().take(m) {
            let yj = eig.U()[(j, p)];
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi += yj * bi;
            }
        }
        let n = norm(&v);
        if n > 0.0 {
            scale(1.0 / n, &mut v);
        }
        out.push((lambda, v));
    }
    out
}
