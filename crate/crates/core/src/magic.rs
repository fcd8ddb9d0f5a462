//! Resonant and magic sets: reciprocals of the spectrum of the compact
//! transfer operator, with multiplicities, refinement against the resolvent,
//! and symmetry diagnostics.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier_ops::{build_d_alpha, build_reduced_b, build_t, Truncation};
use crate::lattice::{is_dual_lattice_point, KPoint};
use crate::potential::PotentialSpec;
use crate::spectral::{eigs, smallest_singular, EigenRequest};

/// Relative clustering tolerance for multiplicities: well below the observed
/// spacing at desk truncations, well above solver residuals.
pub const CLUSTER_REL_TOL: f64 = 1e-6;

/// Beyond this magnitude the non-normality of the truncated operator limits
/// eigenvalue accuracy; entries get flagged.
pub const LOW_CONFIDENCE_ALPHA: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Source {
    TFull,
    BReduced,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Confidence {
    High,
    Low,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonantEntry {
    pub re: f64,
    pub im: f64,
    pub multiplicity: usize,
    pub residual: f64,
    pub confidence: Confidence,
}

impl ResonantEntry {
    pub fn alpha(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }

    /// Positive real test used for the magic sublist.
    pub fn is_positive_real(&self) -> bool {
        self.re > 0.0 && self.im.abs() <= 1e-6 * self.re.abs().max(1.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonantSet {
    pub entries: Vec<ResonantEntry>,
    pub n_used: usize,
    pub k_coords: (f64, f64),
    pub source: Source,
    pub potential_is_real: bool,
}

impl ResonantSet {
    /// Entries on the positive real axis, ascending.
    pub fn magic_sublist(&self) -> Vec<&ResonantEntry> {
        let mut v: Vec<&ResonantEntry> =
            self.entries.iter().filter(|e| e.is_positive_real()).collect();
        v.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        v
    }

    /// CSV with columns re,im,mult.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("re,im,mult\n");
        for e in &self.entries {
            s.push_str(&format!("{:.15e},{:.15e},{}\n", e.re, e.im, e.multiplicity));
        }
        s
    }
}

/// Default operator route: the symmetry-reduced B for the standard potential,
/// the full transfer operator otherwise.
pub fn default_source(spec: &PotentialSpec) -> Source {
    if spec.is_standard() {
        Source::BReduced
    } else {
        Source::TFull
    }
}

/// Computes the resonant set from `count` largest-magnitude eigenvalues of
/// the chosen operator route. For the reduced route each eigenvalue λ yields
/// the pair α = ±1/√λ (the set is symmetric for real coefficients).
pub fn resonant_set(
    trunc: Truncation,
    kp: &KPoint,
    spec: &PotentialSpec,
    count: usize,
) -> Result<ResonantSet> {
    resonant_set_with_source(trunc, kp, spec, count, default_source(spec))
}

pub fn resonant_set_with_source(
    trunc: Truncation,
    kp: &KPoint,
    spec: &PotentialSpec,
    count: usize,
    source: Source,
) -> Result<ResonantSet> {
    if is_dual_lattice_point(kp) {
        return Err(Error::InvalidInput(
            "resonant set requires k outside the dual lattice".into(),
        ));
    }
    let (matrix, dim) = match source {
        Source::BReduced => {
            let b = build_reduced_b(trunc, kp)?;
            let d = b.dim();
            (b.matrix, d)
        }
        Source::TFull => {
            let t = build_t(trunc, kp, spec)?;
            let d = t.dim();
            (t.matrix, d)
        }
    };
    let mut entries = Vec::new();
    if !spec.coeffs().is_empty() {
        let want = count.min(dim.saturating_sub(2)).max(1);
        let res = eigs(&matrix, &EigenRequest::largest(want))?;
        // ignore the numerically-zero tail of the compact operator's spectrum
        let floor = 1e-10 * res.norm_scale;
        let lambdas: Vec<(Complex64, f64)> = res
            .pairs
            .iter()
            .filter(|p| p.value.norm() > floor)
            .map(|p| (p.value, p.residual))
            .collect();
        for c in cluster(&lambdas) {
            match source {
                Source::TFull => {
                    entries.push(make_entry(1.0 / c.rep, c.count, c.residual));
                }
                Source::BReduced => {
                    let alpha = 1.0 / c.rep.sqrt();
                    entries.push(make_entry(alpha, c.count, c.residual));
                    entries.push(make_entry(-alpha, c.count, c.residual));
                }
            }
        }
    }
    entries.sort_by(|a, b| {
        let (na, nb) = (a.alpha().norm(), b.alpha().norm());
        na.partial_cmp(&nb)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
            .then(a.re.partial_cmp(&b.re).unwrap())
    });
    Ok(ResonantSet {
        entries,
        n_used: trunc.n,
        k_coords: kp.coords_or_computed(),
        source,
        potential_is_real: spec.is_real(),
    })
}

struct Cluster {
    rep: Complex64,
    count: usize,
    residual: f64,
}

fn cluster(values: &[(Complex64, f64)]) -> Vec<Cluster> {
    let mut sorted: Vec<(Complex64, f64)> = values.to_vec();
    sorted.sort_by(|a, b| {
        b.0.norm()
            .partial_cmp(&a.0.norm())
            .unwrap()
            .then(a.0.arg().partial_cmp(&b.0.arg()).unwrap())
    });
    let mut out: Vec<Cluster> = Vec::new();
    'next: for &(v, r) in &sorted {
        for c in &mut out {
            if (v - c.rep).norm() <= CLUSTER_REL_TOL * c.rep.norm().max(1e-300) {
                c.count += 1;
                c.residual = c.residual.max(r);
                continue 'next;
            }
        }
        out.push(Cluster {
            rep: v,
            count: 1,
            residual: r,
        });
    }
    out
}

fn make_entry(alpha: Complex64, multiplicity: usize, residual: f64) -> ResonantEntry {
    ResonantEntry {
        re: alpha.re,
        im: alpha.im,
        multiplicity,
        residual,
        confidence: if alpha.norm() > LOW_CONFIDENCE_ALPHA {
            Confidence::Low
        } else {
            Confidence::High
        },
    }
}

/// Sorted positive-real values with their consecutive gaps (reported, never
/// asserted against the conjectured 3/2 spacing).
pub fn magic_alphas(rs: &ResonantSet, jmax: usize) -> Result<Vec<(f64, Option<f64>)>> {
    if rs.entries.is_empty() {
        return Err(Error::InvalidInput("empty resonant set".into()));
    }
    let magic = rs.magic_sublist();
    if magic.len() < jmax {
        return Err(Error::InsufficientData {
            requested: jmax,
            found: magic.len(),
        });
    }
    let mut out = Vec::with_capacity(jmax);
    for j in 0..jmax {
        let gap = if j + 1 < magic.len() {
            Some(magic[j + 1].re - magic[j].re)
        } else {
            None
        };
        out.push((magic[j].re, gap));
    }
    Ok(out)
}

/// Sharpens a magic-angle estimate by maximizing the resolvent norm of the
/// truncated operator over [α₀ − w, α₀ + w] with a golden-section search on
/// log σ_min (40 iterations). Errors with `FlatObjective` when no interior
/// peak stands out of the endpoints by 1e-3 in log10.
pub fn refine_alpha(
    alpha0: f64,
    trunc: Truncation,
    kp: &KPoint,
    window: f64,
    spec: &PotentialSpec,
) -> Result<f64> {
    if alpha0 <= 0.0 {
        return Err(Error::InvalidInput("alpha0 must be positive".into()));
    }
    if window == 0.0 {
        return Ok(alpha0);
    }
    let lo = alpha0 - window;
    let hi = alpha0 + window;
    // objective: -log10 sigma_min, maximized
    let eval = |alpha: f64| -> Result<f64> {
        let op = build_d_alpha(trunc, kp, Complex64::new(alpha, 0.0), spec);
        let sigma = smallest_singular(&op.matrix, 1)?[0].0;
        Ok(-(sigma.max(1e-300)).log10())
    };
    let inv_phi = 0.6180339887498949_f64;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let f_lo = eval(lo)?;
    let f_hi = eval(hi)?;
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    let mut best = if fc > fd { (c, fc) } else { (d, fd) };
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
        }
        let (x, fx) = if fc > fd { (c, fc) } else { (d, fd) };
        if fx > best.1 {
            best = (x, fx);
        }
    }
    let peak_gain = best.1 - f_lo.max(f_hi);
    if peak_gain < 1e-3 {
        return Err(Error::FlatObjective {
            lo,
            hi,
            variation: peak_gain,
        });
    }
    Ok(best.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct KIndependenceReport {
    pub alpha: f64,
    pub n_used: usize,
    /// (k₁, k₂, resolvent norm of D^N(α) − k)
    pub per_k: Vec<(f64, f64, f64)>,
    pub min_resolvent: f64,
}

/// Resolvent norm of D^N(α) − k over a momentum grid; a magic α must make
/// every entry large simultaneously.
pub fn k_independence_check(
    alpha: f64,
    kgrid: &[KPoint],
    trunc: Truncation,
    spec: &PotentialSpec,
) -> Result<KIndependenceReport> {
    if kgrid.is_empty() {
        return Err(Error::InvalidInput("empty momentum grid".into()));
    }
    if kgrid.iter().any(is_dual_lattice_point) {
        return Err(Error::InvalidInput(
            "momentum grid intersects the dual lattice".into(),
        ));
    }
    let per_k: Result<Vec<(f64, f64, f64)>> = kgrid
        .par_iter()
        .map(|kp| {
            let op = build_d_alpha(trunc, &kp.negated(), Complex64::new(alpha, 0.0), spec);
            let sigma = smallest_singular(&op.matrix, 1)?[0].0;
            let rn = if sigma < crate::spectral::RESOLVENT_SINGULAR_TOL {
                f64::INFINITY
            } else {
                1.0 / sigma
            };
            let (k1, k2) = kp.coords_or_computed();
            Ok((k1, k2, rn))
        })
        .collect();
    let per_k = per_k?;
    let min_resolvent = per_k.iter().map(|x| x.2).fold(f64::INFINITY, f64::min);
    Ok(KIndependenceReport {
        alpha,
        n_used: trunc.n,
        per_k,
        min_resolvent,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetrySetReport {
    pub skipped: bool,
    pub checked: usize,
    pub matched: usize,
    pub exempted: usize,
    pub max_rel_defect: f64,
}

/// Verifies 𝒜 = -𝒜 = 𝒜̄ on a computed set (real-coefficient potentials
/// only; otherwise the check reports itself skipped). Entries within 10% of
/// the retrieval boundary are exempted since their partners may fall outside
/// the computed window.
pub fn symmetry_check(rs: &ResonantSet) -> SymmetrySetReport {
    if !rs.potential_is_real {
        return SymmetrySetReport {
            skipped: true,
            checked: 0,
            matched: 0,
            exempted: 0,
            max_rel_defect: 0.0,
        };
    }
    let rmax = rs
        .entries
        .iter()
        .map(|e| e.alpha().norm())
        .fold(0.0f64, f64::max);
    let boundary = 0.9 * rmax;
    let mut checked = 0;
    let mut matched = 0;
    let mut exempted = 0;
    let mut worst: f64 = 0.0;
    for e in &rs.entries {
        let a = e.alpha();
        if a.norm() > boundary {
            exempted += 1;
            continue;
        }
        checked += 1;
        let mut ok = true;
        for target in [-a, a.conj()] {
            let best = rs
                .entries
                .iter()
                .map(|f| (f.alpha() - target).norm())
                .fold(f64::INFINITY, f64::min);
            let rel = best / a.norm().max(1e-300);
            worst = worst.max(rel);
            if rel > 1e-5 {
                ok = false;
            }
        }
        if ok {
            matched += 1;
        }
    }
    SymmetrySetReport {
        skipped: false,
        checked,
        matched,
        exempted,
        max_rel_defect: worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::kpoint_from_coords;

    #[test]
    fn first_magic_alpha_at_n16() {
        let kp = kpoint_from_coords(0.5, 0.0);
        let rs = resonant_set(Truncation::new(16), &kp, &PotentialSpec::standard(), 12).unwrap();
        let magic = rs.magic_sublist();
        assert!(!magic.is_empty());
        assert!(
            (magic[0].re - 0.585663558389558).abs() < 1e-9,
            "alpha1 = {}",
            magic[0].re
        );
    }

    #[test]
    fn zero_potential_gives_empty_set() {
        let empty = PotentialSpec::new([]).unwrap();
        let rs =
            resonant_set(Truncation::new(6), &kpoint_from_coords(0.5, 0.0), &empty, 5).unwrap();
        assert!(rs.entries.is_empty());
    }

    #[test]
    fn k_in_dual_lattice_rejected() {
        let rs = resonant_set(
            Truncation::new(4),
            &kpoint_from_coords(0.0, 0.0),
            &PotentialSpec::standard(),
            4,
        );
        assert!(rs.is_err());
    }

    #[test]
    fn magic_alphas_gaps_and_insufficient() {
        let kp = kpoint_from_coords(0.5, 0.0);
        let rs = resonant_set(Truncation::new(12), &kp, &PotentialSpec::standard(), 30).unwrap();
        let m = magic_alphas(&rs, 2).unwrap();
        assert_eq!(m.len(), 2);
        assert!(m[0].1.unwrap() > 0.0);
        assert!(matches!(
            magic_alphas(&rs, 500),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn refine_alpha_trivial_window() {
        let kp = crate::lattice::k_star();
        assert_eq!(
            refine_alpha(
                0.5857,
                Truncation::new(8),
                &kp,
                0.0,
                &PotentialSpec::standard()
            )
            .unwrap(),
            0.5857
        );
    }

    #[test]
    fn symmetry_check_on_tiny_synthetic_set() {
        let mk = |re: f64, conf| ResonantEntry {
            re,
            im: 0.0,
            multiplicity: 1,
            residual: 0.0,
            confidence: conf,
        };
        let rs = ResonantSet {
            entries: vec![
                mk(0.5857, Confidence::High),
                mk(-0.5857, Confidence::High),
                mk(10.0, Confidence::Low),
            ],
            n_used: 8,
            k_coords: (0.5, 0.0),
            source: Source::BReduced,
            potential_is_real: true,
        };
        let rep = symmetry_check(&rs);
        assert!(!rep.skipped);
        assert_eq!(rep.matched, rep.checked);
        assert_eq!(rep.exempted, 1);
    }

    #[test]
    fn symmetry_check_skips_complex_potentials() {
        let spec = PotentialSpec::new([(1, Complex64::new(1.0, 0.3))]).unwrap();
        let rs = ResonantSet {
            entries: vec![],
            n_used: 4,
            k_coords: (0.5, 0.0),
            source: Source::TFull,
            potential_is_real: spec.is_real(),
        };
        assert!(symmetry_check(&rs).skipped);
    }
}
