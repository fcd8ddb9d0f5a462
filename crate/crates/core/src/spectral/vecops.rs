//! Small deterministic vector kernels for the Krylov drivers.

use num_complex::Complex64;

pub fn dot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| a.conj() * b)
        .sum()
}

pub fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [Complex64]) {
    for xi in x {
        *xi *= alpha;
    }
}

/// Deterministic, mildly irregular start vector.
pub fn start_vector(dim: usize) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = (0..dim)
        .map(|i| {
            let t = i as f64 + 1.0;
            Complex64::new(1.0 + 0.3 * (1.7 * t).sin(), 0.2 * (2.3 * t).cos())
        })
        .collect();
    let n = norm(&v);
    scale(1.0 / n, &mut v);
    v
}

/// Orthogonalizes `w` against `basis` twice (classical Gram-Schmidt with
/// reorthogonalization), returning the accumulated coefficients of the first
/// pass plus corrections.
pub fn orthogonalize(w: &mut [Complex64], basis: &[Vec<Complex64>], coeffs: &mut [Complex64]) {
    for pass in 0..2 {
        for (j, v) in basis.iter().enumerate() {
            let h = dot(v, w);
            axpy(-h, v, w);
            if pass == 0 {
                coeffs[j] = h;
            } else {
                coeffs[j] += h;
            }
        }
    }
}
