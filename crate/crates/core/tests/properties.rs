//! Cross-module oracles and property tests: the reduced operator embeds
//! spectrally into the full transfer operator, the resolvent route agrees
//! with the eigenvalue route, truncation stability, and randomized contract
//! checks for the solver layer.

use num_complex::Complex64;
use proptest::prelude::*;

use tbg_core::fourier_ops::{build_reduced_b, build_t, build_t_blocks, sparse_mul, Truncation};
use tbg_core::lattice::{complex_from_rect, is_dual_lattice_point, k_star, kpoint_from_coords, rect_from_complex, KPoint, SQRT_3};
use tbg_core::magic::{refine_alpha, resonant_set};
use tbg_core::potential::{bracket_sum, check_symmetries, eval_u, fourier_shifts, PotentialSpec, Reflect};
use tbg_core::spectral::{eigs, resolvent_norm, shifted, smallest_singular, EigenRequest};
use tbg_core::theta::{bloch_recipe, default_z_grid, kernel_vector, wronskian};
use tbg_core::traces::partial_resonant_trace;

fn std_pot() -> PotentialSpec {
    PotentialSpec::standard()
}

/// The reduced operator lives in a symmetry sector of the full transfer
/// operator: its leading eigenvalues must appear in the spectrum of the
/// upper-left block of T², computed at a slightly larger cutoff.
#[test]
fn reduced_b_spectrum_embeds_in_t_squared() {
    let kp = kpoint_from_coords(0.5, 0.0);
    let b = build_reduced_b(Truncation::new(16), &kp).unwrap();
    let rb = eigs(&b.matrix, &EigenRequest::largest(6)).unwrap();
    let (tp, tm) = build_t_blocks(Truncation::new(18), &kp, &std_pot()).unwrap();
    let t2 = sparse_mul(&tp, &tm);
    let rt = eigs(&t2, &EigenRequest::largest(60)).unwrap();
    for p in rb.pairs.iter().take(4) {
        let best = rt
            .pairs
            .iter()
            .map(|q| (q.value - p.value).norm())
            .fold(f64::INFINITY, f64::min);
        let rel = best / p.value.norm().max(1e-12);
        assert!(
            rel < 1e-8,
            "reduced eigenvalue {} not found in T^2 spectrum (rel distance {rel:.2e})",
            p.value
        );
    }
}

/// Theorem-level k-independence: the leading spectrum of T_k does not move
/// between two generic momenta.
#[test]
fn transfer_operator_spectrum_is_k_independent() {
    let spec = std_pot();
    let t1 = build_t(Truncation::new(24), &kpoint_from_coords(0.5, 0.0), &spec).unwrap();
    let t2 = build_t(Truncation::new(24), &kpoint_from_coords(0.3, 0.2), &spec).unwrap();
    let r1 = eigs(&t1.matrix, &EigenRequest::largest(10)).unwrap();
    let r2 = eigs(&t2.matrix, &EigenRequest::largest(10)).unwrap();
    for p in r1.pairs.iter() {
        let best = r2
            .pairs
            .iter()
            .map(|q| (q.value - p.value).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(
            best < 1e-6,
            "eigenvalue {} moved between momenta by {best:.2e}",
            p.value
        );
    }
}

/// The resolvent-maximization route reproduces the eigenvalue route for the
/// leading magic values (the third needs a larger cutoff before its
/// resolvent peak sharpens to the same accuracy).
#[test]
fn refine_alpha_agrees_with_eigenvalue_route() {
    let spec = std_pot();
    let kp = kpoint_from_coords(0.5, 0.0);
    let rs = resonant_set(Truncation::new(16), &kp, &spec, 40).unwrap();
    let magic: Vec<f64> = rs.magic_sublist().iter().take(3).map(|e| e.re).collect();
    assert_eq!(magic.len(), 3);
    for (alpha, n) in [(magic[0], 16usize), (magic[1], 16), (magic[2], 24)] {
        let refined = refine_alpha(alpha, Truncation::new(n), &k_star(), 0.01, &spec).unwrap();
        assert!(
            (refined - alpha).abs() < 1e-5,
            "refined {refined} vs eigenvalue route {alpha} at N = {n}"
        );
    }
}

/// Off-peak windows contain no interior resolvent maximum.
#[test]
fn refine_alpha_is_flat_between_peaks() {
    let r = refine_alpha(1.2, Truncation::new(16), &k_star(), 0.01, &std_pot());
    assert!(matches!(r, Err(tbg_core::Error::FlatObjective { .. })), "{r:?}");
}

/// Leading magic values are already converged at N = 12.
#[test]
fn magic_values_stable_in_truncation() {
    let spec = std_pot();
    let kp = kpoint_from_coords(0.5, 0.0);
    let r12 = resonant_set(Truncation::new(12), &kp, &spec, 40).unwrap();
    let r16 = resonant_set(Truncation::new(16), &kp, &spec, 40).unwrap();
    let m12: Vec<f64> = r12.magic_sublist().iter().take(3).map(|e| e.re).collect();
    let m16: Vec<f64> = r16.magic_sublist().iter().take(3).map(|e| e.re).collect();
    for (a, b) in m12.iter().zip(&m16) {
        assert!((a - b).abs() < 1e-6, "magic value moved: {a} -> {b}");
    }
}

/// Multiplicity clusters are tight: within a cluster the eigenvalue spread
/// stays far below the clustering tolerance times the value.
#[test]
fn resonant_clusters_are_tight() {
    let rs = resonant_set(
        Truncation::new(16),
        &kpoint_from_coords(0.5, 0.0),
        &std_pot(),
        30,
    )
    .unwrap();
    for e in &rs.entries {
        assert!(e.residual < 1e-8, "cluster residual {:.2e}", e.residual);
    }
}

/// The partial resonant trace over a symmetric window is real and stays
/// below the exact fourth-power trace (diagnostic, reported bound only).
#[test]
fn partial_resonant_trace_diagnostics() {
    // count must cover the window |alpha| < 5 with margin, otherwise the
    // retrieval boundary can split a conjugate pair and leave an
    // uncancelled imaginary part
    let rs = resonant_set(
        Truncation::new(16),
        &kpoint_from_coords(0.5, 0.0),
        &std_pot(),
        90,
    )
    .unwrap();
    // radius below the first resonance: empty sum
    let zero = partial_resonant_trace(&rs, 4, 0.5);
    assert_eq!(zero, Complex64::new(0.0, 0.0));
    let partial = partial_resonant_trace(&rs, 4, 5.0);
    assert!(partial.im.abs() < 1e-6, "imaginary part {:.2e}", partial.im);
    let exact = 18.0 * tbg_core::traces::tr_a2_exact();
    println!(
        "partial resonant trace to |alpha| < 5: {:.4} of exact {exact:.4} [reported]",
        partial.re
    );
}

/// Wronskian constancy defect scales with the kernel vector's window
/// boundary tail (the effective residual of the truncated eigenfunction).
#[test]
fn wronskian_defect_scales_with_boundary_tail() {
    for alpha in [0.2f64, 0.5, 1.0, 2.0] {
        let u = kernel_vector(Truncation::new(20), alpha).unwrap();
        let (_, dev) = wronskian(&u, &default_z_grid(4));
        let t = u.trunc();
        let mut tail = 0.0f64;
        for (idx, (m, n)) in t.modes().enumerate() {
            if m.abs().max(n.abs()) >= t.n as i64 - 1 {
                tail += u.coeffs1[idx].norm_sqr() + u.coeffs2[idx].norm_sqr();
            }
        }
        let tail = tail.sqrt();
        assert!(
            dev <= 20.0 * tail + 1e-13,
            "alpha {alpha}: deviation {dev:.2e} vs boundary tail {tail:.2e}"
        );
    }
}

/// The Bloch recipe succeeds at (near-)magic α and fails off it.
#[test]
fn bloch_recipe_residuals() {
    let spec = std_pot();
    let ahat = refine_alpha(0.5857, Truncation::new(16), &k_star(), 0.01, &spec).unwrap();
    let uhat = kernel_vector(Truncation::new(16), ahat).unwrap();
    let good = bloch_recipe(&uhat, &kpoint_from_coords(0.5, 0.0)).unwrap();
    assert!(good.residual < 1e-2, "residual at magic alpha: {}", good.residual);

    let u1 = kernel_vector(Truncation::new(16), 1.0).unwrap();
    let bad = bloch_recipe(&u1, &kpoint_from_coords(0.5, 0.0)).unwrap();
    assert!(bad.residual > 0.1, "recipe should fail off the magic set, residual {}", bad.residual);
}

/// ε-cap bookkeeping of the certification flow: the isolation radius caps ε
/// for coarse requests and stops binding for fine ones.
#[test]
fn certification_epsilon_cap_branches() {
    let coarse = tbg_core::certify::guarantee(1e-1, 1, 12).unwrap();
    assert!(coarse.epsilon_cap_active);
    let fine = tbg_core::certify::guarantee(1e-4, 1, 12).unwrap();
    assert!(!fine.epsilon_cap_active);
}

/// A deliberately undersized truncation cannot be verified: the chain fails
/// on the operator-norm inequality rather than silently passing.
#[test]
fn undersized_certificate_fails_verification() {
    let mut cert = tbg_core::certify::guarantee(1e-4, 1, 16).unwrap();
    assert_eq!(cert.n_required, 38);
    cert.n_required = 16;
    let res = tbg_core::certify::verify_guarantee(&cert);
    assert!(
        matches!(res, Err(tbg_core::Error::CertificationFailed { .. })),
        "expected certification failure, got {res:?}"
    );
}

/// Shift-invert route to the golden value: the eigenvalue of the reduced
/// operator nearest 1/0.5857² has 1/√λ equal to the reference fifteen-digit
/// value.
#[test]
fn shift_invert_reproduces_golden_value() {
    let b = build_reduced_b(Truncation::new(8), &kpoint_from_coords(0.5, 0.0)).unwrap();
    let shift = Complex64::new(1.0 / (0.5857f64 * 0.5857), 0.0);
    let r = eigs(&b.matrix, &EigenRequest::nearest(shift, 1)).unwrap();
    let alpha = (1.0 / r.pairs[0].value.sqrt()).re;
    assert!(
        (alpha - 0.585663558389558).abs() < 1e-12,
        "shift-invert alpha = {alpha:.15}"
    );
}

/// Band squeezing along the default display path at a moderate cutoff.
#[test]
fn default_path_bands_are_squeezed() {
    let path = tbg_core::bands::default_band_path(17);
    let table =
        tbg_core::bands::band_path(Truncation::new(32), &path, 5.0, 1, &std_pot()).unwrap();
    let bound = 10.0 * (-5.0f64).exp();
    let worst = table
        .bands
        .iter()
        .map(|row| row[0])
        .fold(0.0f64, f64::max);
    assert!(worst <= bound, "max E0 along path {worst:.3e} vs bound {bound:.3e}");
}

/// At the refined magic α the resolvent exceeds the display level on the
/// whole momentum window (the spectrum fills the plane).
#[test]
fn pseudospectrum_fully_marked_at_magic_alpha() {
    let ahat = refine_alpha(0.5857, Truncation::new(12), &k_star(), 0.01, &std_pot()).unwrap();
    let grid = tbg_core::bands::pseudospectrum_grid(
        ahat,
        (0.05, 0.45, 0.05, 0.45),
        3,
        Truncation::new(12),
        1e2,
        &std_pot(),
    )
    .unwrap();
    assert!(grid.points.iter().all(|p| p.3), "unmarked points at magic alpha");
}

/// The kernel vector flags pseudospectral delicacy exactly near the magic
/// set.
#[test]
fn kernel_vector_warns_near_magic() {
    let near = kernel_vector(Truncation::new(12), 0.5856635).unwrap();
    assert!(near.is_pseudospectrally_delicate(), "probe {:.2e}", near.wronskian_probe);
    let far = kernel_vector(Truncation::new(12), 1.0).unwrap();
    assert!(!far.is_pseudospectrally_delicate(), "probe {:.2e}", far.wronskian_probe);
}

/// Squeeze hypothesis bookkeeping for the degenerate two-term potential.
#[test]
fn degenerate_potential_fails_bracket_condition() {
    let degenerate = PotentialSpec::mu_family(0.5);
    assert_eq!(bracket_sum(&degenerate), 0.0);
    let ok = PotentialSpec::mu_family(-1.96);
    assert!(bracket_sum(&ok) != 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rect_coordinates_round_trip(re in -30.0f64..30.0, im in -30.0f64..30.0) {
        let z = Complex64::new(re, im);
        let (y1, y2) = rect_from_complex(z);
        let back = complex_from_rect(y1, y2);
        prop_assert!((back - z).norm() < 1e-12 * (1.0 + z.norm()));
    }

    #[test]
    fn kpoint_round_trip_and_membership(k1 in -5i32..5, k2 in -5i32..5, f1 in -0.49f64..0.49, f2 in -0.49f64..0.49) {
        let exact = kpoint_from_coords(k1 as f64, k2 as f64);
        prop_assert!(is_dual_lattice_point(&exact));
        let shifted_k = kpoint_from_coords(k1 as f64 + f1, k2 as f64 + f2);
        let back = KPoint::from_complex(shifted_k.k);
        let (b1, b2) = back.coords.unwrap();
        prop_assert!((b1 - (k1 as f64 + f1)).abs() < 1e-10);
        prop_assert!((b2 - (k2 as f64 + f2)).abs() < 1e-10);
        if f1.abs() > 1e-6 || f2.abs() > 1e-6 {
            prop_assert!(!is_dual_lattice_point(&shifted_k));
        }
    }

    #[test]
    fn potential_symmetries_hold_for_random_specs(
        a1 in -2.0f64..2.0,
        am2 in -2.0f64..2.0,
        a4 in -1.0f64..1.0,
        am5 in -1.0f64..1.0,
    ) {
        let spec = PotentialSpec::new([
            (1, Complex64::new(a1, 0.0)),
            (-2, Complex64::new(am2, 0.0)),
            (4, Complex64::new(a4, 0.0)),
            (-5, Complex64::new(am5, 0.0)),
        ]).unwrap();
        let rep = check_symmetries(&spec, 40).unwrap();
        prop_assert!(rep.max_defect() < 1e-11, "defect {}", rep.max_defect());
    }

    #[test]
    fn fourier_shifts_synthesize_the_potential(
        a1 in -2.0f64..2.0,
        am2 in -2.0f64..2.0,
        y1 in 0.0f64..6.28,
        y2 in 0.0f64..6.28,
    ) {
        let spec = PotentialSpec::new([
            (1, Complex64::new(a1, 0.3 * am2)),
            (-2, Complex64::new(am2, 0.0)),
        ]).unwrap();
        for reflect in [Reflect::Plus, Reflect::Minus] {
            let synth: Complex64 = fourier_shifts(&spec, reflect)
                .iter()
                .map(|&((s1, s2), w)| w * Complex64::new(0.0, s1 as f64 * y1 + s2 as f64 * y2).exp())
                .sum::<Complex64>() / SQRT_3;
            let direct = eval_u(&spec, complex_from_rect(y1, y2), reflect);
            prop_assert!((synth - direct).norm() < 1e-12 * (1.0 + direct.norm()));
        }
    }

    #[test]
    fn eigs_residual_contract_on_random_matrices(seed in 0u64..500) {
        let n = 8 + (seed % 20) as usize;
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j || (i + 2 * j) % 3 == 0 {
                    t.push(faer::sparse::Triplet::new(i, j, Complex64::new(next(), next())));
                }
            }
        }
        let a = faer::sparse::SparseColMat::try_new_from_triplets(n, n, &t).unwrap();
        let r = eigs(&a, &EigenRequest::largest(2)).unwrap();
        for p in &r.pairs {
            prop_assert!(p.residual <= 1e-10 * r.norm_scale || !r.converged);
            let nv: f64 = p.vector.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((nv - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn resolvent_and_sigma_are_reciprocal(seed in 0u64..200) {
        let n = 6 + (seed % 10) as usize;
        let mut state = seed.wrapping_mul(0x2545f4914f6cdd1d).wrapping_add(7);
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                t.push(faer::sparse::Triplet::new(i, j, Complex64::new(next(), next())));
            }
        }
        let a = faer::sparse::SparseColMat::try_new_from_triplets(n, n, &t).unwrap();
        let lambda = Complex64::new(next(), next());
        let rn = resolvent_norm(&a, lambda).unwrap();
        if rn.is_finite() {
            let sigma = smallest_singular(&shifted(&a, lambda), 1).unwrap()[0].0;
            prop_assert!((rn * sigma - 1.0).abs() < 1e-12);
        }
    }
}
