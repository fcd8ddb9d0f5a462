//! A-posteriori certification of the leading magic angles: Schatten-norm
//! truncation bounds, circle sampling of the reduced resolvent to localize a
//! simple eigenvalue of B⁴, automatic selection of the truncation size N
//! that makes the estimates close, and the backward error of the computed
//! eigenpair.
//!
//! The chain of estimates: a circle of radius ε around the computed
//! eigenvalue μ_N of Π_N B⁴ Π_N carries a certified resolvent bound C_N(ε)
//! (finite sampling is promoted to the whole circle through the sine
//! inequality with margin δ = 1/2); the truncation error of B⁴ in operator
//! and trace norms then localizes exactly one eigenvalue of B⁴ in
//! D(μ_N, ε), and |β⁻⁸ − α⁻⁸| < β⁻⁸ − (β+δ)⁻⁸ pins α within δ of β.
//! Everything is rigorous modulo the numerical kernel named in the
//! certificate (smallest singular values of sparse matrices).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier_ops::{build_reduced_b, project_b4, sparse_apply, Truncation};
use crate::lattice::kpoint_from_coords;
use crate::spectral::{eigs, norm, EigenRequest};

/// Reference magic values consumed by the certification flow.
pub const ALPHA_REF: [f64; 3] = [0.585663, 2.221182, 3.7514055];

/// Isolation radii of the corresponding eigenvalues of B⁴ (supplied
/// constants; no derivation is given for other indices).
pub const RAD_REF: [f64; 3] = [72.2, 0.0017, 2.3830e-5];

/// Margin δ = 1/2 used in the circle-sampling and perturbation estimates.
pub const DELTA_MARGIN: f64 = 0.5;

/// ρ_j(N, p) = Π_{ℓ=0}^{p−1} (1 − (2ℓ+j)/N)^{−1+2j/p}.
pub fn rho(n: usize, p: u32, j: u32) -> Result<f64> {
    if n <= 2 * (p as usize - 1) + j as usize {
        return Err(Error::BadN {
            n,
            reason: format!("need N > 2(p-1)+j = {}", 2 * (p - 1) + j),
        });
    }
    let mut acc = 1.0f64;
    let expo = -1.0 + 2.0 * j as f64 / p as f64;
    for l in 0..p {
        let base = 1.0 - (2 * l + j) as f64 / n as f64;
        acc *= base.powf(expo);
    }
    Ok(acc)
}

/// Trace-class and operator-norm tail bounds for T^p − Π_N T^p Π_N
/// (standard potential; the multiplication symbol has norm ≤ 3).
pub fn schatten_tail_bound(n: usize, p: u32) -> Result<(f64, f64)> {
    if p < 3 || n < 2 * p as usize {
        return Err(Error::BadN {
            n,
            reason: format!("need N >= 2p >= 6, got p = {p}"),
        });
    }
    let pi = std::f64::consts::PI;
    let s3 = crate::lattice::SQRT_3;
    let trace = 4.0 * pi * 54f64.powf(p as f64 / 2.0) * rho(n, p, 1)?
        / (s3 * (p as f64 - 2.0) * (n as f64).powi(p as i32 - 2));
    let op = 6f64.powi(p as i32) * 2.0 * rho(n, p, 0)? / (n as f64).powi(p as i32);
    Ok((trace, op))
}

/// The sixth root of the symmetry-reduced trace bound for B⁴, and the
/// operator-norm bound (p = 8 specialization).
pub fn reduced_b4_bounds(n: usize) -> Result<(f64, f64)> {
    if n <= 15 {
        return Err(Error::BadN {
            n,
            reason: "reduced bounds need N > 15".into(),
        });
    }
    let trace_sixth_root = 10.23 * rho(n, 8, 1)?.powf(1.0 / 6.0) / n as f64;
    let op = 6f64.powi(8) * 2.0 * rho(n, 8, 0)? / (n as f64).powi(8);
    Ok((trace_sixth_root, op))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CertStatus {
    /// Bounds evaluated with the resolvent estimated at the probe size only.
    ProbeOnly,
    /// Full chain re-verified with the resolvent sampled at N_required.
    Certified,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    /// Magic-angle index, 1-based.
    pub target_index: usize,
    pub delta: f64,
    /// Reference value β = α_j.
    pub beta: f64,
    /// Localization radius in the eigenvalue plane of B⁴.
    pub epsilon: f64,
    /// Whether ε was capped by the isolation radius rather than by
    /// β⁻⁸ − (β+δ)⁻⁸.
    pub epsilon_cap_active: bool,
    pub n_required: usize,
    /// Circle sample count at which the sine criterion closed.
    pub j_samples: usize,
    /// Certified resolvent bound C_N(ε) from the last circle run.
    pub c_n_eps: f64,
    /// Eigenvalue of Π_N B⁴ Π_N nearest β⁻⁸ at the last probe.
    pub mu_re: f64,
    pub mu_im: f64,
    pub status: CertStatus,
    pub backward_error: Option<f64>,
    /// The numerical kernel this certificate trusts.
    pub trusted_kernel: String,
}

fn trusted_kernel() -> String {
    "smallest singular values and eigenpairs of sparse/dense complex matrices \
     (LU-based inverse iteration and QR-based decompositions)"
        .to_string()
}

#[derive(Debug, Clone)]
pub struct CircleNorm {
    /// C_N(ε) = C⁰/(1 − del) with the final sampling density.
    pub c: f64,
    /// Raw sampled maximum C⁰.
    pub c0: f64,
    pub j: usize,
    /// Final sine-margin del = 2·ε·C⁰·sin(π/2J).
    pub del: f64,
    pub mu: Complex64,
}

/// Samples ‖(Π_N B⁴ Π_N − λ)⁻¹‖ on J points of the circle |λ − μ_N| = ε,
/// doubling J until the sine criterion 2εC⁰sin(π/2J) ≤ 1/2 closes the
/// estimate for the whole circle.
pub fn circle_norm(epsilon: f64, n_probe: usize, beta: f64, j_init: usize) -> Result<CircleNorm> {
    if epsilon <= 0.0 {
        return Err(Error::InvalidInput("epsilon must be positive".into()));
    }
    let kp = kpoint_from_coords(0.5, 0.0);
    let b4 = project_b4(Truncation::new(n_probe), &kp)?;
    let b = beta.powi(-8);
    let near = eigs(&b4.matrix, &EigenRequest::nearest(Complex64::new(b, 0.0), 2))?;
    let mu = near.pairs[0].value;
    if near.pairs.len() > 1 {
        let second = near.pairs[1].value;
        let dist = (second - mu).norm();
        if dist < 2.0 * epsilon {
            return Err(Error::EigenvalueNotIsolated {
                distance: dist,
                two_eps: 2.0 * epsilon,
            });
        }
    }
    // When J doubles, the previous sample points are the even-indexed new
    // ones, so their resolvent values are reused.
    let sample = |idx: usize, j: usize| -> Result<f64> {
        let th = std::f64::consts::TAU * idx as f64 / j as f64;
        let lambda = mu + epsilon * Complex64::new(th.cos(), th.sin());
        let shifted = crate::spectral::shifted(&b4.matrix, lambda);
        let sigma = crate::spectral::iterative_smallest_singular(&shifted, 1)?[0].0;
        Ok(1.0 / sigma.max(1e-300))
    };
    let mut j = j_init.max(2);
    let mut values: Vec<f64> = (0..j)
        .into_par_iter()
        .map(|idx| sample(idx, j))
        .collect::<Result<_>>()?;
    loop {
        let c0 = values.iter().copied().fold(0.0f64, f64::max);
        let del = 2.0 * c0 * epsilon * (std::f64::consts::PI / (2 * j) as f64).sin();
        if del <= DELTA_MARGIN {
            return Ok(CircleNorm {
                c: c0 / (1.0 - del),
                c0,
                j,
                del,
                mu,
            });
        }
        j *= 2;
        if j > 20480 {
            return Err(Error::NotConverged {
                best_residuals: vec![del],
                tol: DELTA_MARGIN,
            });
        }
        let fresh: Vec<f64> = (0..j / 2)
            .into_par_iter()
            .map(|half| sample(2 * half + 1, j))
            .collect::<Result<_>>()?;
        let mut merged = Vec::with_capacity(j);
        for (old, new) in values.iter().zip(&fresh) {
            merged.push(*old);
            merged.push(*new);
        }
        values = merged;
    }
}

/// Computes the truncation size N guaranteeing |α_j − β| < δ, following the
/// reference flow: ε from the eighth-power map capped by the isolation
/// radius, the resolvent bound from a probe-size circle run, then two
/// monotone searches closing the operator-norm and trace-norm conditions.
pub fn guarantee(delta: f64, target: usize, n_probe: usize) -> Result<Certificate> {
    if delta <= 0.0 {
        return Err(Error::InvalidInput("delta must be positive".into()));
    }
    if !(1..=3).contains(&target) {
        return Err(Error::InvalidInput("target index must be 1, 2, or 3".into()));
    }
    let beta = ALPHA_REF[target - 1];
    let eps_map = beta.powi(-8) - (beta + delta).powi(-8);
    let eps_cap = RAD_REF[target - 1] / 5.0;
    let epsilon = eps_map.min(eps_cap);
    let epsilon_cap_active = eps_cap < eps_map;

    let circle = circle_norm(epsilon, n_probe, beta, 10)?;
    let cep = circle.c;

    // grow M until the operator-norm perturbation is under the margin
    let mut m = 16usize;
    let mut c0 = 2.0 * 6f64.powi(8) * rho(m, 8, 0)? * (m as f64).powi(-8) * cep;
    while c0 > DELTA_MARGIN {
        m += 1;
        c0 = cep * 2.0 * 6f64.powi(8) * rho(m, 8, 0)? * (m as f64).powi(-8);
    }
    // grow N until the trace-norm localization closes
    let mut n = m;
    let c0_corrected = cep * (1.0 - c0).recip();
    let mut c1 = 10.23 * rho(n, 8, 1)?.powf(1.0 / 6.0);
    while (c0_corrected * cep * epsilon).powf(1.0 / 6.0) * c1 > n as f64 {
        n += 1;
        c1 = 10.23 * rho(n, 8, 1)?.powf(1.0 / 6.0);
    }

    Ok(Certificate {
        target_index: target,
        delta,
        beta,
        epsilon,
        epsilon_cap_active,
        n_required: n,
        j_samples: circle.j,
        c_n_eps: cep,
        mu_re: circle.mu.re,
        mu_im: circle.mu.im,
        status: CertStatus::ProbeOnly,
        backward_error: None,
        trusted_kernel: trusted_kernel(),
    })
}

/// Re-runs the circle estimate at the certified size and checks the full
/// inequality chain; on success the certificate is upgraded to `Certified`,
/// meaning a unique eigenvalue of B⁴ lies in D(μ_N, ε) and hence
/// |α_j − β| < δ.
pub fn verify_guarantee(cert: &Certificate) -> Result<Certificate> {
    let n = cert.n_required;
    let circle = circle_norm(cert.epsilon, n, cert.beta, 10)?;
    let c_n = circle.c;

    // sine criterion at the verified size (already enforced by the loop, but
    // recorded as the first element of the chain)
    if circle.del >= DELTA_MARGIN {
        return Err(Error::CertificationFailed {
            inequality: "2 eps C0 sin(pi/2J) < 1/2".into(),
            lhs: circle.del,
            rhs: DELTA_MARGIN,
        });
    }
    // operator-norm perturbation: C_N(eps) * ||E_N|| < 1/2, so the Neumann
    // series for (B - lambda)^{-1} converges on the circle
    let (trace_sixth, op_bound) = reduced_b4_bounds(n)?;
    let lhs_op = c_n * op_bound;
    if lhs_op >= DELTA_MARGIN {
        return Err(Error::CertificationFailed {
            inequality: "C_N(eps) * opnorm(E_N) < 1/2".into(),
            lhs: lhs_op,
            rhs: DELTA_MARGIN,
        });
    }
    // trace-norm localization: eps C_N^2 ||E_N||_1 / (1 - d) < 1 with d the
    // actual perturbation margin just computed (the reference flow divides
    // by 1 - C0, not by the 1/2 threshold)
    let trace_bound = trace_sixth.powi(6);
    let lhs_tr = cert.epsilon * c_n * c_n * trace_bound / (1.0 - lhs_op);
    if lhs_tr >= 1.0 {
        return Err(Error::CertificationFailed {
            inequality: "eps C_N^2 tracenorm(E_N) / (1 - C_N opnorm(E_N)) < 1".into(),
            lhs: lhs_tr,
            rhs: 1.0,
        });
    }

    let be = backward_error(32.min(n.saturating_sub(1)).max(1), n, cert.target_index)?;
    Ok(Certificate {
        c_n_eps: c_n,
        j_samples: circle.j,
        mu_re: circle.mu.re,
        mu_im: circle.mu.im,
        status: CertStatus::Certified,
        backward_error: Some(be),
        ..cert.clone()
    })
}

/// Backward error of the small-truncation eigenpair inside the large
/// truncation: the eigenvector of B at `n_small` nearest 1/α_j² is extended
/// by zeros into the `n_large` grid and its residual there is measured.
/// Equal sizes degenerate to the solver residual itself.
pub fn backward_error(n_small: usize, n_large: usize, target: usize) -> Result<f64> {
    if !(1..=3).contains(&target) {
        return Err(Error::InvalidInput("target index must be 1, 2, or 3".into()));
    }
    if n_small > n_large {
        return Err(Error::InvalidInput(
            "n_small must not exceed n_large".into(),
        ));
    }
    let kp = kpoint_from_coords(0.5, 0.0);
    let alpha = ALPHA_REF[target - 1];
    let shift = Complex64::new(alpha.powi(-2), 0.0);
    let small = Truncation::new(n_small);
    let large = Truncation::new(n_large);
    let b_small = build_reduced_b(small, &kp)?;
    let pair = eigs(&b_small.matrix, &EigenRequest::nearest(shift, 1))?;
    let lambda = pair.pairs[0].value;
    let v_small = &pair.pairs[0].vector;
    if n_small == n_large {
        return Ok(pair.pairs[0].residual);
    }
    let b_large = build_reduced_b(large, &kp)?;
    let mut v = vec![Complex64::new(0.0, 0.0); large.dim_scalar()];
    for (idx, (m, nn)) in small.modes().enumerate() {
        v[large.index(m, nn)] = v_small[idx];
    }
    let nv = norm(&v);
    let mut bv = vec![Complex64::new(0.0, 0.0); large.dim_scalar()];
    sparse_apply(&b_large.matrix, &v, &mut bv);
    for (b, x) in bv.iter_mut().zip(&v) {
        *b -= lambda * x;
    }
    Ok(norm(&bv) / nv)
}
