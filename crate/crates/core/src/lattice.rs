//! Moiré lattice geometry.
//!
//! The model lives on the hexagonal lattice Γ = 4π(iωℤ ⊕ iω²ℤ) with
//! ω = e^{2πi/3}. Its dual is Γ* = (ωℤ ⊕ ω²ℤ)/√3 and Γ₃ = Γ/3 carries the
//! translation symmetry group Γ₃/Γ ≅ ℤ₃².
//!
//! Two coordinate systems are used throughout:
//! * complex position z = x₁ + ix₂ with z = 2iωy₁ + 2iω²y₂,
//! * rectangular y = (y₁, y₂) on the torus ℝ²/2πℤ² (one 2π period per Γ cell).
//!
//! Bloch momenta are written k = (ω²k₁ − ωk₂)/√3 so that k ∈ Γ* exactly when
//! (k₁, k₂) ∈ ℤ².

use num_complex::Complex64;

pub const SQRT_3: f64 = 1.7320508075688772935274463415058724_f64;

/// Tolerance for dual-lattice membership tests. All momenta handled here are
/// O(1), so an absolute tolerance is appropriate.
pub const LATTICE_TOL: f64 = 1e-12;

/// ω = e^{2πi/3}.
pub fn omega() -> Complex64 {
    Complex64::new(-0.5, 0.5 * SQRT_3)
}

/// ω² = ω̄ = e^{-2πi/3}.
pub fn omega2() -> Complex64 {
    Complex64::new(-0.5, -0.5 * SQRT_3)
}

/// The stacking point z_S = 4√3π/9, a fixed point of z ↦ ωz on ℂ/Γ₃.
pub fn stacking_point() -> Complex64 {
    Complex64::new(4.0 * SQRT_3 * std::f64::consts::PI / 9.0, 0.0)
}

/// The probe momentum k* = 1/(2√3) + i/6, equidistant from the three nearest
/// dual lattice points; dual coordinates (-2/3, 1/3).
pub fn k_star() -> KPoint {
    KPoint::from_coords(-2.0 / 3.0, 1.0 / 3.0)
}

/// Generators and special points of the hexagonal lattice.
#[derive(Debug, Clone)]
pub struct LatticeGeometry {
    /// Generators of Γ: 4πiω and 4πiω².
    pub gamma_basis: [Complex64; 2],
    /// Generators of Γ*: ω/√3 and ω²/√3.
    pub dual_basis: [Complex64; 2],
    /// Generators of Γ₃ = Γ/3.
    pub gamma3_basis: [Complex64; 2],
    pub omega: Complex64,
    pub z_s: Complex64,
    pub k_star: Complex64,
}

impl Default for LatticeGeometry {
    fn default() -> Self {
        Self::new()
    }
}

impl LatticeGeometry {
    pub fn new() -> Self {
        let i = Complex64::new(0.0, 1.0);
        let pi = std::f64::consts::PI;
        let g1 = 4.0 * pi * i * omega();
        let g2 = 4.0 * pi * i * omega2();
        LatticeGeometry {
            gamma_basis: [g1, g2],
            dual_basis: [omega() / SQRT_3, omega2() / SQRT_3],
            gamma3_basis: [g1 / 3.0, g2 / 3.0],
            omega: omega(),
            z_s: stacking_point(),
            k_star: k_star().k,
        }
    }

    /// Duality pairing ⟨γ, κ⟩ = (γκ̄ + γ̄κ)/2, in 2πℤ for γ ∈ Γ, κ ∈ Γ*.
    pub fn pairing(gamma: Complex64, kappa: Complex64) -> f64 {
        0.5 * (gamma * kappa.conj() + gamma.conj() * kappa).re
    }
}

/// Bloch momentum, stored as a complex number together with the dual-lattice
/// coordinates (k₁, k₂) of k = (ω²k₁ − ωk₂)/√3 when known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPoint {
    pub k: Complex64,
    pub coords: Option<(f64, f64)>,
}

/// Builds a momentum from dual coordinates.
pub fn kpoint_from_coords(k1: f64, k2: f64) -> KPoint {
    KPoint::from_coords(k1, k2)
}

impl KPoint {
    pub fn from_coords(k1: f64, k2: f64) -> Self {
        let k = (omega2() * k1 - omega() * k2) / SQRT_3;
        KPoint {
            k,
            coords: Some((k1, k2)),
        }
    }

    /// Recovers dual coordinates from the complex value: the linear map
    /// (k₁, k₂) ↦ (ω²k₁ − ωk₂)/√3 is invertible over ℝ².
    pub fn from_complex(k: Complex64) -> Self {
        let k1 = -SQRT_3 * k.re - k.im;
        let k2 = SQRT_3 * k.re - k.im;
        KPoint {
            k,
            coords: Some((k1, k2)),
        }
    }

    /// Dual coordinates, computing them from the complex value if absent.
    pub fn coords_or_computed(&self) -> (f64, f64) {
        match self.coords {
            Some(c) => c,
            None => Self::from_complex(self.k).coords.unwrap(),
        }
    }

    /// The momentum -k (both representations negated).
    pub fn negated(&self) -> Self {
        KPoint {
            k: -self.k,
            coords: self.coords.map(|(a, b)| (-a, -b)),
        }
    }
}

/// True iff k ∈ Γ*, i.e. both dual coordinates are integers to `LATTICE_TOL`.
pub fn is_dual_lattice_point(kp: &KPoint) -> bool {
    let (k1, k2) = kp.coords_or_computed();
    (k1 - k1.round()).abs() < LATTICE_TOL && (k2 - k2.round()).abs() < LATTICE_TOL
}

/// Rectangular coordinates (y₁, y₂) of z = 2iωy₁ + 2iω²y₂.
pub fn rect_from_complex(z: Complex64) -> (f64, f64) {
    let (x1, x2) = (z.re, z.im);
    let y1 = 0.5 * (-x2 - x1 / SQRT_3);
    let y2 = 0.5 * (-x2 + x1 / SQRT_3);
    (y1, y2)
}

/// Inverse of [`rect_from_complex`].
pub fn complex_from_rect(y1: f64, y2: f64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    2.0 * i * (omega() * y1 + omega2() * y2)
}
