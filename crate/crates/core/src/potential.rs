//! Generalized chiral tunnelling potentials U(z) = Σ aₙ fₙ(z), n ≡ 1 (mod 3).
//!
//! The building blocks are
//!   fₙ(z) = Σ_{k=0}^2 ω^k e^{(n/2)(z ω̄^k − z̄ ω^k)},
//! which satisfy fₙ(ωz) = ω fₙ(z) and fₙ(z + a) = ω̄ⁿ fₙ(z) for the Γ₃
//! generators a, so the required potential symmetries hold exactly when every
//! index is ≡ 1 mod 3. The standard potential is a₁ = 1.
//!
//! In rectangular coordinates fₙ is the trigonometric polynomial
//!   e^{-in(y₁+y₂)} + ω e^{in(2y₁-y₂)} + ω² e^{in(-y₁+2y₂)},
//! which is what [`fourier_shifts`] exposes to the operator assembler
//! (including the √3 normalization of the symbol 𝒱 = √3·U).

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lattice::{omega, omega2, SQRT_3};

/// Reflection tag: evaluate U(z) or U(-z).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reflect {
    Plus,
    Minus,
}

impl Reflect {
    pub fn sign(self) -> f64 {
        match self {
            Reflect::Plus => 1.0,
            Reflect::Minus => -1.0,
        }
    }
}

/// Finitely supported coefficient map n ↦ aₙ over n ≡ 1 (mod 3).
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    coeffs: BTreeMap<i64, Complex64>,
    n_max: u64,
    is_real: bool,
}

impl PotentialSpec {
    /// Builds a spec, rejecting indices with n ≢ 1 (mod 3) and dropping
    /// exactly-zero coefficients.
    pub fn new(coeffs: impl IntoIterator<Item = (i64, Complex64)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, a) in coeffs {
            if n.rem_euclid(3) != 1 {
                return Err(Error::InvalidInput(format!(
                    "potential index n = {n} violates n = 1 (mod 3)"
                )));
            }
            if a != Complex64::new(0.0, 0.0) {
                map.insert(n, a);
            }
        }
        let n_max = map.keys().map(|n| n.unsigned_abs()).max().unwrap_or(0);
        let is_real = map.values().all(|a| a.im == 0.0);
        Ok(PotentialSpec {
            coeffs: map,
            n_max,
            is_real,
        })
    }

    /// The standard potential: a₁ = 1.
    pub fn standard() -> Self {
        Self::new([(1, Complex64::new(1.0, 0.0))]).unwrap()
    }

    /// The two-term family a₁ = 1, a₋₂ = μ.
    pub fn mu_family(mu: f64) -> Self {
        Self::new([
            (1, Complex64::new(1.0, 0.0)),
            (-2, Complex64::new(mu, 0.0)),
        ])
        .unwrap()
    }

    pub fn coeffs(&self) -> &BTreeMap<i64, Complex64> {
        &self.coeffs
    }

    /// Max |n| over the support; multiplication by U propagates Fourier
    /// support by at most 2·n_max modes per axis.
    pub fn n_max(&self) -> u64 {
        self.n_max
    }

    /// True iff all coefficients are real, in which case 𝒜 = -𝒜 = 𝒜̄.
    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn is_standard(&self) -> bool {
        self.coeffs.len() == 1
            && self
                .coeffs
                .get(&1)
                .is_some_and(|a| (a - Complex64::new(1.0, 0.0)).norm() == 0.0)
    }
}

// JSON schema: {"coeffs": {"1": [re, im], "-2": [re, im], ...}}
impl Serialize for PotentialSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        struct CoeffMap<'a>(&'a BTreeMap<i64, Complex64>);
        impl Serialize for CoeffMap<'_> {
            fn serialize<S: Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                let mut m = serializer.serialize_map(Some(self.0.len()))?;
                for (n, a) in self.0 {
                    m.serialize_entry(&n.to_string(), &[a.re, a.im])?;
                }
                m.end()
            }
        }
        let mut s = serializer.serialize_struct("PotentialSpec", 1)?;
        s.serialize_field("coeffs", &CoeffMap(&self.coeffs))?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for PotentialSpec {
    fn deserialize<D: Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        struct SpecVisitor;
        impl<'de> Visitor<'de> for SpecVisitor {
            type Value = PotentialSpec;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a map with a \"coeffs\" field")
            }
            fn visit_map<A: MapAccess<'de>>(
                self,
                mut access: A,
            ) -> std::result::Result<Self::Value, A::Error> {
                let mut coeffs: Option<BTreeMap<String, [f64; 2]>> = None;
                while let Some(key) = access.next_key::<String>()? {
                    if key == "coeffs" {
                        coeffs = Some(access.next_value()?);
                    } else {
                        let _: serde::de::IgnoredAny = access.next_value()?;
                    }
                }
                let coeffs =
                    coeffs.ok_or_else(|| serde::de::Error::missing_field("coeffs"))?;
                let mut parsed = Vec::new();
                for (k, [re, im]) in coeffs {
                    let n: i64 = k.parse().map_err(|_| {
                        serde::de::Error::custom(format!("bad coefficient index {k:?}"))
                    })?;
                    parsed.push((n, Complex64::new(re, im)));
                }
                PotentialSpec::new(parsed).map_err(serde::de::Error::custom)
            }
        }
        deserializer.deserialize_map(SpecVisitor)
    }
}

/// fₙ(z) by direct 3-term evaluation.
pub fn eval_fn(n: i64, z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut wk = Complex64::new(1.0, 0.0);
    for _ in 0..3 {
        let e = 0.5 * n as f64 * (z * wk.conj() - z.conj() * wk);
        acc += wk * e.exp();
        wk *= omega();
    }
    acc
}

/// ∂_z fₙ(z) = (n/2) Σ_k e^{(n/2)(zω̄^k − z̄ω^k)} (term-by-term analytic).
pub fn dz_fn(n: i64, z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    let mut wk = Complex64::new(1.0, 0.0);
    for _ in 0..3 {
        let e = 0.5 * n as f64 * (z * wk.conj() - z.conj() * wk);
        acc += e.exp();
        wk *= omega();
    }
    0.5 * n as f64 * acc
}

/// U(±z) = Σ aₙ fₙ(±z).
pub fn eval_u(spec: &PotentialSpec, z: Complex64, reflect: Reflect) -> Complex64 {
    let zz = z * reflect.sign();
    spec.coeffs.iter().map(|(&n, &a)| a * eval_fn(n, zz)).sum()
}

/// ∂_z U(z).
pub fn dz_u(spec: &PotentialSpec, z: Complex64) -> Complex64 {
    spec.coeffs.iter().map(|(&n, &a)| a * dz_fn(n, z)).sum()
}

/// Result of sampling the two potential symmetries at random points.
#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub samples: usize,
    pub max_translation_defect: f64,
    pub max_rotation_defect: f64,
}

impl SymmetryReport {
    pub fn max_defect(&self) -> f64 {
        self.max_translation_defect.max(self.max_rotation_defect)
    }
}

/// Samples U(z + a) = ω̄U(z) (a the Γ₃ generators) and U(ωz) = ωU(z)
/// at pseudo-random z, reporting the worst absolute defect.
pub fn check_symmetries(spec: &PotentialSpec, samples: usize) -> Result<SymmetryReport> {
    if samples == 0 {
        return Err(Error::InvalidInput("samples must be >= 1".into()));
    }
    let mut rng = StdRng::seed_from_u64(0x7bc_1ecd);
    let i = Complex64::new(0.0, 1.0);
    let pi = std::f64::consts::PI;
    let mut tmax: f64 = 0.0;
    let mut rmax: f64 = 0.0;
    for _ in 0..samples {
        let z = Complex64::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
        let u = eval_u(spec, z, Reflect::Plus);
        for l in 1..=2u32 {
            let a = 4.0 / 3.0 * pi * i * omega().powu(l);
            let d = (eval_u(spec, z + a, Reflect::Plus) - omega2() * u).norm();
            tmax = tmax.max(d);
        }
        let r = (eval_u(spec, omega() * z, Reflect::Plus) - omega() * u).norm();
        rmax = rmax.max(r);
    }
    Ok(SymmetryReport {
        samples,
        max_translation_defect: tmax,
        max_rotation_defect: rmax,
    })
}

/// The non-degeneracy sum Σ n·Re(aₙ); squeezing requires it nonzero.
pub fn bracket_sum(spec: &PotentialSpec) -> f64 {
    spec.coeffs.iter().map(|(&n, a)| n as f64 * a.re).sum()
}

/// ∂_z U(0) = (3/2) Σ n aₙ.
pub fn dz_u_at_zero(spec: &PotentialSpec) -> Complex64 {
    1.5 * spec
        .coeffs
        .iter()
        .map(|(&n, &a)| n as f64 * a)
        .sum::<Complex64>()
}

/// |Im(V̄^{1/2} ∂_z V)| with V(z) = U(z)U(-z); the magnitude does not depend
/// on the branch of the square root. Differentiation is analytic, not finite
/// differences, to preserve the vanishing structure near z = 0.
pub fn bracket_field(spec: &PotentialSpec, z: Complex64) -> f64 {
    let up = eval_u(spec, z, Reflect::Plus);
    let um = eval_u(spec, z, Reflect::Minus);
    let dup = dz_u(spec, z);
    let dum = dz_u(spec, -z);
    let v = up * um;
    // d/dz [U(z)U(-z)] = U'(z)U(-z) - U(z)U'(-z)
    let dv = dup * um - up * dum;
    (v.conj().sqrt() * dv).im.abs()
}

/// Fourier-space description of multiplication by 𝒱(±y) = √3·U(±y): a list
/// of (shift, weight) pairs, where a mode c picks up weight·aₙ at mode
/// c + shift. The √3 of the symbol normalization lives here.
pub fn fourier_shifts(spec: &PotentialSpec, reflect: Reflect) -> Vec<((i64, i64), Complex64)> {
    let s = match reflect {
        Reflect::Plus => 1,
        Reflect::Minus => -1,
    };
    let mut out = Vec::with_capacity(3 * spec.coeffs.len());
    for (&n, &a) in &spec.coeffs {
        let w = SQRT_3 * a;
        out.push(((s * -n, s * -n), w));
        out.push(((s * 2 * n, s * -n), w * omega()));
        out.push(((s * -n, s * 2 * n), w * omega2()));
    }
    out
}
