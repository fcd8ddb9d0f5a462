//! Exact lattice sums and trace identities for the transfer operator of the
//! standard potential: tr A² = 4π/√3 in closed form, its direct mode-sum
//! verification, and truncated traces of T_k⁴ and T_k⁸ with Richardson
//! extrapolation against 72π/√3 and 740π/√3.
//!
//! Lattice sums here live on Γ = ωℤ ⊕ ℤ (not the moiré lattice):
//! K(γ₀) = Σ_{γ ∉ {0, γ₀}} γ⁻²(γ−γ₀)⁻².

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fourier_ops::{build_t_blocks, sparse_apply, Truncation};
use crate::lattice::{is_dual_lattice_point, omega, omega2, KPoint};
use crate::magic::ResonantSet;
use crate::potential::PotentialSpec;

/// γ = ωm + n on the sum lattice.
pub fn gamma_of(m: i64, n: i64) -> Complex64 {
    omega() * m as f64 + Complex64::new(n as f64, 0.0)
}

/// The residue-style evaluation −4πi(ω(2n−m) + n + m) / (3(ωm+n)³).
///
/// This is NOT the literal lattice sum: expanding the two excluded terms of
/// F(z, γ₀) = Σ_γ (γ−z)⁻²(γ−γ₀−z)⁻² around z = 0 leaves a finite residue
/// 6/γ₀⁴ that the contour bookkeeping absorbs, so this value overshoots the
/// absolutely convergent sum by exactly that amount. Its role is the trace
/// assembly, where the overshoot is cancelled by the (equally non-vanishing)
/// singular-mode limits; see [`tr_a2_exact`].
pub fn k_raw_formula(m: i64, n: i64) -> Result<Complex64> {
    if m == 0 && n == 0 {
        return Err(Error::ZeroGamma);
    }
    let pi = std::f64::consts::PI;
    let g = gamma_of(m, n);
    let numer = omega() * (2 * n - m) as f64 + Complex64::new((n + m) as f64, 0.0);
    Ok(-4.0 * pi * Complex64::new(0.0, 1.0) * numer / (3.0 * g * g * g))
}

/// Closed form of the literal sum K(γ₀) = Σ_{γ∉{0,γ₀}} γ⁻²(γ−γ₀)⁻²:
/// the residue-style value minus 6/γ₀⁴. Agrees with [`k_brute`] to the
/// O(R⁻²) truncation tail.
pub fn k_closed(m: i64, n: i64) -> Result<Complex64> {
    let g = gamma_of(m, n);
    Ok(k_raw_formula(m, n)? - 6.0 / (g * g * g * g))
}

/// Direct lattice sum over |γ| ≤ R, excluding {0, γ₀}; tail error O(R⁻²).
/// Terms are accumulated in ascending |γ| order for reproducibility.
pub fn k_brute(m: i64, n: i64, radius: f64) -> Result<Complex64> {
    if m == 0 && n == 0 {
        return Err(Error::ZeroGamma);
    }
    if radius < 10.0 {
        return Err(Error::InvalidInput("brute-force radius must be >= 10".into()));
    }
    let g0 = gamma_of(m, n);
    let bound = (radius * 2.0 / crate::lattice::SQRT_3).ceil() as i64 + 2;
    let mut terms: Vec<(f64, Complex64)> = Vec::new();
    for mm in -bound..=bound {
        for nn in -bound..=bound {
            // |omega m + n|^2 = m^2 - mn + n^2
            let norm2 = (mm * mm - mm * nn + nn * nn) as f64;
            if norm2 > radius * radius {
                continue;
            }
            if (mm == 0 && nn == 0) || (mm == m && nn == n) {
                continue;
            }
            let g = gamma_of(mm, nn);
            let d = g - g0;
            terms.push((norm2, 1.0 / (g * g * d * d)));
        }
    }
    terms.sort_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap()
            .then(a.1.re.partial_cmp(&b.1.re).unwrap())
            .then(a.1.im.partial_cmp(&b.1.im).unwrap())
    });
    Ok(terms.iter().map(|t| t.1).sum())
}

/// tr A² = 3·K_raw(2ω + 1) = 4π/√3 for the standard potential.
///
/// In terms of the literal lattice sums this is
/// ω̄K(1−ω) + K(2ω+1) + ωK(−ω−2) + 2, where the +2 is the k → 0 limit of
/// the two singular mode triples (each tends to 1, not 0: the vanishing
/// O(1) bracket is divided by the same |δ|² that blows up). The residue-style
/// K_raw absorbs exactly that amount, so the compact form below is exact.
pub fn tr_a2_exact() -> f64 {
    let v = 3.0 * k_raw_formula(2, 1).unwrap();
    debug_assert!(v.im.abs() < 1e-12);
    v.re
}

/// Direct diagonal sum for tr A² over modes |m|, |n| ≤ R at k = 0 with the
/// singular terms removed, plus their exact k → 0 limit contribution (+1 per
/// singular triple).
pub fn tr_a2_direct(radius: i64) -> Result<Complex64> {
    if radius < 50 {
        return Err(Error::InvalidInput("direct-sum radius must be >= 50".into()));
    }
    // Lambda at (m, n) is 1/(omega^2 m - omega n); the three shifted squares
    // carry weights 1, omega, omega^2 and offsets (1,1), (-2,1), (1,-2).
    let lam = |m: i64, n: i64| -> Option<Complex64> {
        if m == 0 && n == 0 {
            None
        } else {
            Some(1.0 / (omega2() * m as f64 - omega() * n as f64))
        }
    };
    let rows: Vec<Complex64> = (-radius..=radius)
        .into_par_iter()
        .map(|m| {
            let mut acc = Complex64::new(0.0, 0.0);
            for n in -radius..=radius {
                let l0 = match lam(m, n) {
                    Some(v) => v,
                    None => continue,
                };
                let l0sq = l0 * l0;
                for (w, (p, q)) in [
                    (Complex64::new(1.0, 0.0), (1i64, 1i64)),
                    (omega(), (-2, 1)),
                    (omega2(), (1, -2)),
                ] {
                    if let Some(ls) = lam(m + p, n + q) {
                        acc += w * l0sq * ls * ls;
                    }
                }
            }
            acc
        })
        .collect();
    Ok(rows.into_iter().sum::<Complex64>() + 2.0)
}

/// Trace of (T_k^N)^power for even power via column probing of the two
/// scalar blocks of T² (no dense matrix powers are formed).
pub fn trace_t_power(
    trunc: Truncation,
    kp: &KPoint,
    power: u32,
    spec: &PotentialSpec,
) -> Result<Complex64> {
    if power != 4 && power != 8 {
        return Err(Error::InvalidInput("power must be 4 or 8".into()));
    }
    if is_dual_lattice_point(kp) {
        return Err(Error::InvalidInput("k must avoid the dual lattice".into()));
    }
    let (tp, tm) = build_t_blocks(trunc, kp, spec)?;
    let k = trunc.dim_scalar();
    let half = power / 2; // applications of the two-factor block product
    let probe = |first: &faer::sparse::SparseColMat<usize, Complex64>,
                 second: &faer::sparse::SparseColMat<usize, Complex64>| {
        (0..k)
            .into_par_iter()
            .map(|c| {
                let mut x = vec![Complex64::new(0.0, 0.0); k];
                let mut y = vec![Complex64::new(0.0, 0.0); k];
                x[c] = Complex64::new(1.0, 0.0);
                for _ in 0..half {
                    sparse_apply(second, &x, &mut y);
                    sparse_apply(first, &y, &mut x);
                }
                x[c]
            })
            .collect::<Vec<Complex64>>()
            .into_iter()
            .sum::<Complex64>()
    };
    // T^2 = diag(P, Q), P = (D^{-1}V+)(D^{-1}V-), Q = (D^{-1}V-)(D^{-1}V+)
    let tr_p = probe(&tp, &tm);
    let tr_q = probe(&tm, &tp);
    Ok(tr_p + tr_q)
}

/// Richardson extrapolation in N⁻² from two truncations.
pub fn richardson_n2(n1: usize, v1: Complex64, n2: usize, v2: Complex64) -> Complex64 {
    let (a, b) = ((n1 * n1) as f64, (n2 * n2) as f64);
    (v2 * b - v1 * a) / (b - a)
}

/// Σ multiplicity·α^{−power} over computed resonances with |α| < radius;
/// a convergence diagnostic against the exact trace, never an equality.
pub fn partial_resonant_trace(rs: &ResonantSet, power: i32, radius: f64) -> Complex64 {
    rs.entries
        .iter()
        .filter(|e| e.alpha().norm() < radius)
        .map(|e| e.alpha().powi(-power) * e.multiplicity as f64)
        .sum()
}
