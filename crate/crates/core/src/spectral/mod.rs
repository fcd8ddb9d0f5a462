//! Solver contracts for complex non-Hermitian eigenproblems and smallest
//! singular values.
//!
//! Dense decompositions and sparse LU factorizations are delegated to faer;
//! the Krylov drivers (Arnoldi for eigenvalues, deflated Lanczos on
//! (A*A)^{-1} for singular values) live here. Small problems go straight to
//! dense decompositions; iterative paths fall back to dense for dimensions
//! up to [`DENSE_FALLBACK_MAX`] rather than reporting failure.

mod arnoldi;
mod lanczos;
mod vecops;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fourier_ops::{sparse_apply, sparse_to_dense};

pub use vecops::{dot, norm};

/// Dimension up to which a failed iterative solve falls back to a dense
/// decomposition (covers every two-block operator needed at N <= 32 and all
/// certification circle points for the first magic angle).
pub const DENSE_FALLBACK_MAX: usize = 5000;

/// Dimension below which dense decompositions are used directly.
const DENSE_DIRECT_MAX: usize = 1500;

/// Sigma below which a resolvent norm is reported as infinite.
pub const RESOLVENT_SINGULAR_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EigenMode {
    LargestMagnitude,
    NearestShift(Complex64),
}

#[derive(Debug, Clone)]
pub struct EigenRequest {
    pub mode: EigenMode,
    pub count: usize,
    /// Residual tolerance, relative to an operator-norm estimate.
    pub tol: f64,
    /// Cap on the Krylov subspace dimension.
    pub max_iter: usize,
    /// Also report the condition number of the returned eigenvector basis
    /// (non-normality diagnostic).
    pub report_basis_condition: bool,
}

impl EigenRequest {
    pub fn largest(count: usize) -> Self {
        EigenRequest {
            mode: EigenMode::LargestMagnitude,
            count,
            tol: 1e-10,
            max_iter: 300,
            report_basis_condition: false,
        }
    }

    pub fn nearest(shift: Complex64, count: usize) -> Self {
        EigenRequest {
            mode: EigenMode::NearestShift(shift),
            count,
            tol: 1e-10,
            max_iter: 300,
            report_basis_condition: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: Complex64,
    pub vector: Vec<Complex64>,
    /// ||A v - lambda v|| with unit v.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub pairs: Vec<EigenPair>,
    /// Condition number of the eigenvector basis when requested; large values
    /// flag non-normality (the precision limit for resonant computations).
    pub basis_condition: Option<f64>,
    pub converged: bool,
    /// Operator norm estimate used to scale residual tests.
    pub norm_scale: f64,
}

/// Cheap operator-norm estimate (max column 1-norm).
pub fn norm_estimate(a: &SparseColMat<usize, Complex64>) -> f64 {
    let mut best: f64 = 0.0;
    for j in 0..a.ncols() {
        let s: f64 = a.val_of_col(j).iter().map(|v| v.norm()).sum();
        best = best.max(s);
    }
    best.max(1e-300)
}

/// A - sigma I as a new sparse matrix.
pub fn shifted(a: &SparseColMat<usize, Complex64>, sigma: Complex64) -> SparseColMat<usize, Complex64> {
    let n = a.nrows();
    let mut t = Vec::with_capacity(a.compute_nnz() + n);
    for j in 0..n {
        for (i, v) in a.row_idx_of_col(j).zip(a.val_of_col(j).iter()) {
            t.push(Triplet::new(i, j, *v));
        }
        t.push(Triplet::new(j, j, -sigma));
    }
    SparseColMat::try_new_from_triplets(n, n, &t).expect("valid triplets")
}

fn mat_from_slice(x: &[Complex64]) -> faer::Mat<Complex64> {
    faer::Mat::from_fn(x.len(), 1, |i, _| x[i])
}

fn explicit_residual(
    a: &SparseColMat<usize, Complex64>,
    lambda: Complex64,
    v: &[Complex64],
) -> f64 {
    let mut av = vec![Complex64::new(0.0, 0.0); v.len()];
    sparse_apply(a, v, &mut av);
    for (avi, vi) in av.iter_mut().zip(v) {
        *avi -= lambda * vi;
    }
    norm(&av)
}

fn basis_condition_of(pairs: &[EigenPair]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let dim = pairs[0].vector.len();
    let m = faer::Mat::from_fn(dim, pairs.len(), |i, j| pairs[j].vector[i]);
    let svd = m.svd().ok()?;
    let s = svd.S();
    let smin = s[pairs.len() - 1].re;
    let smax = s[0].re;
    Some(if smin <= 0.0 { f64::INFINITY } else { smax / smin })
}

fn dense_eigs(a: &SparseColMat<usize, Complex64>, req: &EigenRequest) -> Result<EigenResult> {
    let n = a.nrows();
    let dense = sparse_to_dense(a);
    let eig = dense.eigen().map_err(|_| Error::NotConverged {
        best_residuals: vec![],
        tol: req.tol,
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    match req.mode {
        EigenMode::LargestMagnitude => {
            order.sort_by(|&i, &j| {
                eig.S()[j]
                    .norm()
                    .partial_cmp(&eig.S()[i].norm())
                    .unwrap()
            });
        }
        EigenMode::NearestShift(s) => {
            order.sort_by(|&i, &j| {
                (eig.S()[i] - s)
                    .norm()
                    .partial_cmp(&(eig.S()[j] - s).norm())
                    .unwrap()
            });
        }
    }
    let norm_scale = norm_estimate(a).max(1.0);
    let mut pairs = Vec::with_capacity(req.count.min(n));
    for &p in order.iter().take(req.count) {
        let mut v: Vec<Complex64> = (0..n).map(|i| eig.U()[(i, p)]).collect();
        let nv = norm(&v);
        if nv > 0.0 {
            for vi in &mut v {
                *vi /= nv;
            }
        }
        let lambda = eig.S()[p];
        let residual = explicit_residual(a, lambda, &v);
        pairs.push(EigenPair {
            value: lambda,
            vector: v,
            residual,
        });
    }
    let converged = pairs.iter().all(|p| p.residual <= req.tol * norm_scale);
    let basis_condition = if req.report_basis_condition {
        basis_condition_of(&pairs)
    } else {
        None
    };
    Ok(EigenResult {
        pairs,
        basis_condition,
        converged,
        norm_scale,
    })
}

fn arnoldi_eigs(a: &SparseColMat<usize, Complex64>, req: &EigenRequest) -> Result<EigenResult> {
    let n = a.nrows();
    let norm_scale = norm_estimate(a).max(1.0);

    // For shift-invert, factor (A - sigma I) once; retry with a perturbed
    // shift if the factorization lands exactly on an eigenvalue.
    let lu = match req.mode {
        EigenMode::NearestShift(sigma) => {
            let mut shift = sigma;
            let mut attempt = 0;
            loop {
                match shifted(a, shift).sp_lu() {
                    Ok(f) => break Some((f, shift)),
                    Err(_) if attempt == 0 => {
                        attempt = 1;
                        shift = if shift.norm() > 0.0 {
                            shift * (1.0 + 1e-8)
                        } else {
                            Complex64::new(1e-8 * norm_scale, 0.0)
                        };
                    }
                    Err(_) => {
                        return Err(Error::SingularShift {
                            shift: (sigma.re, sigma.im),
                        })
                    }
                }
            }
        }
        EigenMode::LargestMagnitude => None,
    };

    let mut m = (2 * req.count + 20).max(60).min(req.max_iter).min(n);
    for _attempt in 0..3 {
        let fact = match &lu {
            None => arnoldi::arnoldi(n, m, |x, y| sparse_apply(a, x, y)),
            Some((f, _)) => arnoldi::arnoldi(n, m, |x, y| {
                let sol = f.solve(mat_from_slice(x));
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = sol[(i, 0)];
                }
            }),
        };
        let mut ritz = arnoldi::ritz_pairs(&fact);
        match (&lu, req.mode) {
            (Some((_, shift)), _) => {
                // nu -> lambda = shift + 1/nu, ordered by |nu| descending
                ritz.sort_by(|x, y| y.0.norm().partial_cmp(&x.0.norm()).unwrap());
                for r in &mut ritz {
                    r.0 = shift + 1.0 / r.0;
                }
            }
            (None, _) => {
                ritz.sort_by(|x, y| y.0.norm().partial_cmp(&x.0.norm()).unwrap());
            }
        }
        let mut pairs = Vec::with_capacity(req.count);
        for (lambda, v) in ritz.into_iter().take(req.count) {
            let residual = explicit_residual(a, lambda, &v);
            pairs.push(EigenPair {
                value: lambda,
                vector: v,
                residual,
            });
        }
        let all_ok = pairs.len() == req.count.min(n)
            && pairs.iter().all(|p| p.residual <= req.tol * norm_scale);
        if all_ok || fact.breakdown {
            let basis_condition = if req.report_basis_condition {
                basis_condition_of(&pairs)
            } else {
                None
            };
            return Ok(EigenResult {
                pairs,
                basis_condition,
                converged: all_ok,
                norm_scale,
            });
        }
        if m >= n || m >= req.max_iter {
            // out of room to grow
            if n <= DENSE_FALLBACK_MAX {
                return dense_eigs(a, req);
            }
            return Err(Error::NotConverged {
                best_residuals: pairs.iter().map(|p| p.residual).collect(),
                tol: req.tol,
            });
        }
        m = (2 * m).min(req.max_iter).min(n);
    }
    if n <= DENSE_FALLBACK_MAX {
        dense_eigs(a, req)
    } else {
        Err(Error::NotConverged {
            best_residuals: vec![],
            tol: req.tol,
        })
    }
}

/// Computes `count` eigenpairs of a square sparse complex matrix.
pub fn eigs(a: &SparseColMat<usize, Complex64>, req: &EigenRequest) -> Result<EigenResult> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput("eigs needs a square matrix".into()));
    }
    if req.count == 0 || req.count >= a.nrows().max(2) {
        return Err(Error::InvalidInput(format!(
            "count {} out of range for dimension {}",
            req.count,
            a.nrows()
        )));
    }
    if a.nrows() <= DENSE_DIRECT_MAX {
        dense_eigs(a, req)
    } else {
        arnoldi_eigs(a, req)
    }
}

fn dense_smallest_singular(
    a: &SparseColMat<usize, Complex64>,
    count: usize,
) -> Result<Vec<(f64, Vec<Complex64>)>> {
    let n = a.ncols();
    let dense = sparse_to_dense(a);
    let svd = dense.svd().map_err(|_| Error::NotConverged {
        best_residuals: vec![],
        tol: 1e-8,
    })?;
    let mut out = Vec::with_capacity(count);
    for j in 0..count.min(n) {
        let col = n - 1 - j;
        let sigma = svd.S()[col].re;
        let v: Vec<Complex64> = (0..n).map(|i| svd.V()[(i, col)]).collect();
        out.push((sigma, v));
    }
    Ok(out)
}

/// LU + Lanczos route, exposed crate-internally for callers that make many
/// modest-size σ_min solves (circle sampling) where a dense SVD per point
/// would dominate the runtime.
pub(crate) fn iterative_smallest_singular(
    a: &SparseColMat<usize, Complex64>,
    count: usize,
) -> Result<Vec<(f64, Vec<Complex64>)>> {
    let n = a.ncols();
    let norm_scale = norm_estimate(a);
    let lu = match a.sp_lu() {
        Ok(f) => f,
        Err(_) => {
            // numerically singular beyond LU: smallest singular value is zero
            // at working precision; fall back to dense if we can to get the
            // vector, otherwise give up.
            if n <= DENSE_FALLBACK_MAX {
                return dense_smallest_singular(a, count);
            }
            return Err(Error::NotConverged {
                best_residuals: vec![],
                tol: 1e-8,
            });
        }
    };
    // y = (A^* A)^{-1} x -> solve A^* z = x, then A y = z
    let mut op = |x: &[Complex64], y: &mut [Complex64]| {
        let z = lu.solve_adjoint(mat_from_slice(x));
        let sol = lu.solve(z);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = sol[(i, 0)];
        }
    };

    let mut found: Vec<(f64, Vec<Complex64>)> = Vec::new();
    let mut deflate: Vec<Vec<Complex64>> = Vec::new();
    let mut m = 48.max(6 * count).min(n);
    let mut stall = 0;
    while found.len() < count {
        let res = lanczos::lanczos_hermitian(n, m, &deflate, &mut op);
        let mut accepted = 0;
        for ((theta, v), rest) in res
            .values
            .iter()
            .zip(res.vectors)
            .zip(res.residual_estimates)
        {
            if found.len() >= count {
                break;
            }
            if *theta <= 0.0 {
                continue;
            }
            if rest > 1e-10 * theta {
                continue;
            }
            // refine through the original matrix
            let mut av = vec![Complex64::new(0.0, 0.0); n];
            sparse_apply(a, &v, &mut av);
            let sigma = norm(&av);
            let mut aav = vec![Complex64::new(0.0, 0.0); n];
            adjoint_apply(a, &av, &mut aav);
            for (x, vi) in aav.iter_mut().zip(&v) {
                *x -= Complex64::new(sigma * sigma, 0.0) * vi;
            }
            if norm(&aav) > 1e-8 * norm_scale * norm_scale.max(1.0) {
                continue;
            }
            deflate.push(v.clone());
            found.push((sigma, v));
            accepted += 1;
        }
        if accepted == 0 {
            stall += 1;
            m = (2 * m).min(n);
            if stall > 3 {
                if n <= DENSE_FALLBACK_MAX {
                    return dense_smallest_singular(a, count);
                }
                return Err(Error::NotConverged {
                    best_residuals: found.iter().map(|f| f.0).collect(),
                    tol: 1e-8,
                });
            }
        }
    }
    found.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    Ok(found)
}

pub fn adjoint_apply(a: &SparseColMat<usize, Complex64>, x: &[Complex64], y: &mut [Complex64]) {
    assert_eq!(a.nrows(), x.len());
    assert_eq!(a.ncols(), y.len());
    for j in 0..a.ncols() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, v) in a.row_idx_of_col(j).zip(a.val_of_col(j).iter()) {
            acc += v.conj() * x[i];
        }
        y[j] = acc;
    }
}

/// The `count` smallest singular values of A in increasing order, with right
/// singular vectors.
pub fn smallest_singular(
    a: &SparseColMat<usize, Complex64>,
    count: usize,
) -> Result<Vec<(f64, Vec<Complex64>)>> {
    if count == 0 {
        return Ok(vec![]);
    }
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidInput(
            "smallest_singular expects a square operator".into(),
        ));
    }
    if a.nrows() <= DENSE_DIRECT_MAX {
        dense_smallest_singular(a, count)
    } else {
        iterative_smallest_singular(a, count)
    }
}

/// 1/sigma_min(A - lambda I), or +inf when the shifted operator is singular
/// to working precision.
pub fn resolvent_norm(a: &SparseColMat<usize, Complex64>, lambda: Complex64) -> Result<f64> {
    let sh = if lambda == Complex64::new(0.0, 0.0) {
        None
    } else {
        Some(shifted(a, lambda))
    };
    let target = sh.as_ref().unwrap_or(a);
    let sigma = smallest_singular(target, 1)?[0].0;
    Ok(if sigma < RESOLVENT_SINGULAR_TOL {
        f64::INFINITY
    } else {
        1.0 / sigma
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sparse_from_dense(d: &[&[Complex64]]) -> SparseColMat<usize, Complex64> {
        let mut t = Vec::new();
        for (i, row) in d.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != Complex64::new(0.0, 0.0) {
                    t.push(Triplet::new(i, j, v));
                }
            }
        }
        SparseColMat::try_new_from_triplets(d.len(), d[0].len(), &t).unwrap()
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn largest_of_diagonal() {
        let a = sparse_from_dense(&[
            &[c(1.0), c(0.0), c(0.0)],
            &[c(0.0), c(2.0), c(0.0)],
            &[c(0.0), c(0.0), c(3.0)],
        ]);
        let r = eigs(&a, &EigenRequest::largest(1)).unwrap();
        assert!((r.pairs[0].value - c(3.0)).norm() < 1e-12);
        assert!(r.pairs[0].residual < 1e-12);
        assert!((norm(&r.pairs[0].vector) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jordan_block_handled() {
        let a = sparse_from_dense(&[&[c(0.0), c(1.0)], &[c(0.0), c(0.0)]]);
        let mut req = EigenRequest::largest(1);
        req.count = 1;
        req.report_basis_condition = true;
        // ask for one pair (count must stay below the dimension)
        let r = eigs(&a, &req).unwrap();
        assert!(r.pairs[0].value.norm() < 1e-10);
        // the defective basis is flagged through a huge condition number when
        // two independent directions are requested; with a single vector the
        // residual itself stays meaningful
        assert!(r.pairs[0].residual < 1e-10);
    }

    #[test]
    fn identity_singular_values() {
        let a = sparse_from_dense(&[
            &[c(1.0), c(0.0), c(0.0), c(0.0), c(0.0)],
            &[c(0.0), c(1.0), c(0.0), c(0.0), c(0.0)],
            &[c(0.0), c(0.0), c(1.0), c(0.0), c(0.0)],
            &[c(0.0), c(0.0), c(0.0), c(1.0), c(0.0)],
            &[c(0.0), c(0.0), c(0.0), c(0.0), c(1.0)],
        ]);
        let s = smallest_singular(&a, 2).unwrap();
        assert!((s[0].0 - 1.0).abs() < 1e-14);
        assert!((s[1].0 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tiny_singular_value_resolved() {
        let a = sparse_from_dense(&[&[c(3.0), c(0.0)], &[c(0.0), c(1e-3)]]);
        let s = smallest_singular(&a, 1).unwrap();
        assert!((s[0].0 - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn resolvent_norm_examples() {
        let eye = sparse_from_dense(&[&[c(1.0), c(0.0)], &[c(0.0), c(1.0)]]);
        assert!((resolvent_norm(&eye, c(0.0)).unwrap() - 1.0).abs() < 1e-12);

        let d02 = sparse_from_dense(&[&[c(0.0), c(0.0)], &[c(0.0), c(2.0)]]);
        assert!((resolvent_norm(&d02, c(1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!(resolvent_norm(&d02, c(0.0)).unwrap().is_infinite());
    }

    #[test]
    fn iterative_matches_dense_on_random_matrix() {
        // 200x200 complex random-ish matrix, deterministic entries
        let n = 200;
        let mut t = Vec::new();
        let mut s = 1u64;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for i in 0..n {
            for j in 0..n {
                if (i + 3 * j) % 7 == 0 || i == j {
                    t.push(Triplet::new(i, j, Complex64::new(next(), next())));
                }
            }
        }
        let a = SparseColMat::try_new_from_triplets(n, n, &t).unwrap();
        let dense = dense_smallest_singular(&a, 3).unwrap();
        let iter = iterative_smallest_singular(&a, 3).unwrap();
        for (d, it) in dense.iter().zip(&iter) {
            assert!(
                (d.0 - it.0).abs() < 1e-10 * d.0.max(1.0),
                "dense {} vs iterative {}",
                d.0,
                it.0
            );
        }
    }

    #[test]
    fn shift_invert_finds_interior_eigenvalue() {
        let a = sparse_from_dense(&[
            &[c(1.0), c(0.2), c(0.0)],
            &[c(0.0), c(2.0), c(0.1)],
            &[c(0.0), c(0.0), c(2.6)],
        ]);
        let r = eigs(&a, &EigenRequest::nearest(c(2.1), 1)).unwrap();
        assert!((r.pairs[0].value - c(2.0)).norm() < 1e-10);
    }

    #[test]
    fn resolvent_times_sigma_is_one() {
        let a = sparse_from_dense(&[
            &[Complex64::new(1.0, 0.5), c(0.2)],
            &[c(0.3), Complex64::new(-0.7, 0.1)],
        ]);
        let lambda = Complex64::new(0.4, -0.2);
        let r = resolvent_norm(&a, lambda).unwrap();
        let s = smallest_singular(&shifted(&a, lambda), 1).unwrap()[0].0;
        assert!((r * s - 1.0).abs() < 1e-12);
    }
}
