//! Hermite and generalized Laguerre polynomials, and the eigenfunctions of
//! the harmonic oscillator `H_ω = −Δ + (ω²/4)|x|²` and of the symmetric-gauge
//! magnetic Hamiltonian `H(A) = −(∇ − iA)²`, `A = (b/2)(−x₂, x₁)`.
//!
//! Polynomials are evaluated with their three-term recurrences. Eigenfunctions
//! are normalised in closed form and carry the measured discrete norm.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, WaveField};

/// Eigenfunctions must fall below this fraction of their peak at the boundary.
pub const EIGEN_BOUNDARY_TOL: f64 = 1e-14;

/// Physicists' Hermite polynomial `H_m(x)`.
///
/// Fails with [`Error::Range`] once the value leaves the `f64` range, which
/// happens roughly when `m · ln(2|x|) > 709`.
pub fn hermite(m: usize, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("hermite argument must be finite, got {x}")));
    }
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..m {
        let next = 2.0 * x * cur - 2.0 * j as f64 * prev;
        prev = cur;
        cur = next;
    }
    if cur.is_finite() {
        Ok(cur)
    } else {
        Err(Error::Range { what: "hermite", m, x })
    }
}

/// Generalized Laguerre polynomial `L_m^{(α)}(x)` for `α ≥ 0`, `x ≥ 0`.
pub fn laguerre(m: usize, alpha: f64, x: f64) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Domain(format!("laguerre order must be finite and non-negative, got {alpha}")));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("laguerre argument must be finite and non-negative, got {x}")));
    }
    let (mut prev, mut cur) = (0.0, 1.0);
    for j in 0..m {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - x) * cur - (jf + alpha) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    if cur.is_finite() {
        Ok(cur)
    } else {
        Err(Error::Range { what: "laguerre", m, x })
    }
}

/// Normalised Hermite function `H_m(y) e^{−y²/2} / √(2^m m! √π)`.
///
/// Uses the recurrence on the normalised functions themselves, which stays in
/// range where `H_m` alone would overflow.
pub fn hermite_function(m: usize, y: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = std::f64::consts::PI.powf(-0.25) * (-0.5 * y * y).exp();
    for j in 0..m {
        let jf = j as f64;
        let next = (2.0 / (jf + 1.0)).sqrt() * y * cur - (jf / (jf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    cur
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSpectrumEntry {
    pub m: usize,
    pub omega: f64,
    pub energy: f64,
}

impl OscillatorSpectrumEntry {
    pub fn new(m: usize, omega: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Domain(format!("oscillator frequency must be positive, got {omega}")));
        }
        Ok(Self { m, omega, energy: omega * (m as f64 + 0.5) })
    }
}

/// Spectral data of `φ_{m,l}` for `H(A)`, `A = (b/2)(−x₂, x₁)`.
///
/// The level index is `k = m + (|l| − sgn(b)·l)/2`. With this normalisation
/// of `A` the eigenvalue is `|b|(2k + 1)`: `H(A) = H_b − bL` where
/// `H_b = −Δ + (b²/4)|x|²` has eigenvalue `|b|(2m + |l| + 1)` on `φ_{m,l}`
/// and the angular momentum `L` has eigenvalue `l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandauSpectrumEntry {
    pub m: usize,
    pub l: i64,
    pub b: f64,
    pub k: usize,
    pub energy: f64,
}

impl LandauSpectrumEntry {
    pub fn new(m: usize, l: i64, b: f64) -> Result<Self> {
        if b == 0.0 || !b.is_finite() {
            return Err(Error::Domain(format!("field strength must be finite and nonzero, got {b}")));
        }
        let sgn = if b > 0.0 { 1 } else { -1 };
        let k = m + ((l.abs() - sgn * l) / 2) as usize;
        Ok(Self { m, l, b, k, energy: landau_level(k, b) })
    }

    /// Eigenvalue of the radial oscillator part `H_b`.
    pub fn oscillator_energy(&self) -> f64 {
        self.b.abs() * (2 * self.m + self.l.unsigned_abs() as usize + 1) as f64
    }
}

/// `|b|(2k + 1)`.
pub fn landau_level(k: usize, b: f64) -> f64 {
    b.abs() * (2 * k + 1) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SpectrumEntry {
    Oscillator(OscillatorSpectrumEntry),
    Landau(LandauSpectrumEntry),
}

impl SpectrumEntry {
    pub fn energy(&self) -> f64 {
        match self {
            SpectrumEntry::Oscillator(e) => e.energy,
            SpectrumEntry::Landau(e) => e.energy,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EigenfunctionSample {
    pub entry: SpectrumEntry,
    pub field: WaveField,
    pub l2norm: f64,
}

/// `ψ_m(x) = h_m H_m(√(ω/2)x) e^{−ωx²/4}` with `h_m > 0` fixing unit norm.
pub fn qho_value(m: usize, omega: f64, x: f64) -> f64 {
    let s = (omega / 2.0).sqrt();
    s.sqrt() * hermite_function(m, s * x)
}

/// Samples `ψ_m` for frequency `omega` on a one-dimensional grid.
pub fn qho_eigenfunction(m: usize, omega: f64, grid: &GridSpec) -> Result<EigenfunctionSample> {
    let entry = OscillatorSpectrumEntry::new(m, omega)?;
    if grid.dim() != 1 {
        return Err(Error::Shape(format!("oscillator eigenfunctions need a 1D grid, got {}D", grid.dim())));
    }
    let field = WaveField::from_fn(*grid, 0.0, |x| Complex64::new(qho_value(m, omega, x[0]), 0.0));
    field.check_boundary(EIGEN_BOUNDARY_TOL)?;
    let l2norm = field.norm();
    Ok(EigenfunctionSample { entry: SpectrumEntry::Oscillator(entry), field, l2norm })
}

/// Positive normaliser `p_{m,l}` of `φ_{m,l}`.
pub fn landau_normalizer(m: usize, l: i64, b: f64) -> f64 {
    let a = l.unsigned_abs() as usize;
    let bb = b.abs();
    // (m+|l|)!/m!
    let ratio: f64 = (m + 1..=m + a).map(|j| j as f64).product();
    (bb / (2.0 * std::f64::consts::PI * (2.0 / bb).powi(a as i32) * ratio)).sqrt()
}

/// `φ_{m,l}(x) = p_{m,l} r^{|l|} L_m^{(|l|)}(|b|r²/2) e^{ilφ} e^{−|b|r²/4}`.
pub fn landau_value(m: usize, l: i64, b: f64, x: &[f64]) -> Result<Complex64> {
    let r2 = x[0] * x[0] + x[1] * x[1];
    let s = b.abs() * r2 / 2.0;
    let a = l.unsigned_abs() as i32;
    // r^{|l|} e^{ilφ} = (x₁ + i sgn(l) x₂)^{|l|}, smooth through the origin.
    let sgn = if l < 0 { -1.0 } else { 1.0 };
    let angular = Complex64::new(x[0], sgn * x[1]).powi(a);
    let radial = laguerre(m, a as f64, s)? * (-s / 2.0).exp();
    Ok(angular * landau_normalizer(m, l, b) * radial)
}

/// Samples `φ_{m,l}` on a two-dimensional grid.
pub fn landau_eigenfunction(m: usize, l: i64, b: f64, grid: &GridSpec) -> Result<EigenfunctionSample> {
    let entry = LandauSpectrumEntry::new(m, l, b)?;
    if grid.dim() != 2 {
        return Err(Error::Shape(format!("Landau eigenfunctions need a 2D grid, got {}D", grid.dim())));
    }
    // laguerre only fails on a non-finite argument, which the grid never produces
    let field = WaveField::from_fn(*grid, 0.0, |x| landau_value(m, l, b, x).unwrap_or_default());
    field.check_boundary(EIGEN_BOUNDARY_TOL)?;
    let l2norm = field.norm();
    Ok(EigenfunctionSample { entry: SpectrumEntry::Landau(entry), field, l2norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// `d^m/dx^m e^{−x²} = q_m(x) e^{−x²}` with `q_{m+1} = q_m' − 2x q_m`.
    fn rodrigues_hermite(m: usize, x: f64) -> f64 {
        let mut q = vec![1.0];
        for _ in 0..m {
            let mut next = vec![0.0; q.len() + 1];
            for (p, &c) in q.iter().enumerate() {
                if p > 0 {
                    next[p - 1] += p as f64 * c;
                }
                next[p + 1] -= 2.0 * c;
            }
            q = next;
        }
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        sign * q.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Leibniz expansion of `x^{−α} eˣ/m! · d^m(e^{−x} x^{m+α})`.
    fn rodrigues_laguerre(m: usize, alpha: f64, x: f64) -> f64 {
        let mut total = 0.0;
        for j in 0..=m {
            let binom: f64 = (0..j).map(|i| (m - i) as f64 / (i + 1) as f64).product();
            let falling: f64 = (0..j).map(|i| m as f64 + alpha - i as f64).product();
            let sign = if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
            total += binom * sign * falling * x.powi((m - j) as i32);
        }
        total / (1..=m).map(|i| i as f64).product::<f64>()
    }

    #[test]
    fn hermite_examples() {
        assert_eq!(hermite(0, 3.7).unwrap(), 1.0);
        assert_eq!(hermite(1, 2.0).unwrap(), 4.0);
        assert_eq!(hermite(2, 0.0).unwrap(), -2.0);
        assert_eq!(hermite(2, 0.0).unwrap(), rodrigues_hermite(2, 0.0));
    }

    #[test]
    fn laguerre_examples() {
        assert_eq!(laguerre(0, 2.0, 5.0).unwrap(), 1.0);
        assert_eq!(laguerre(1, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(laguerre(1, 2.0, 0.0).unwrap(), 3.0);
        assert_relative_eq!(rodrigues_laguerre(1, 2.0, 0.0), 3.0);
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(hermite(400, 1e6), Err(Error::Range { what: "hermite", .. })));
        assert!(matches!(laguerre(300, 0.0, 1e200), Err(Error::Range { .. })));
        assert!(laguerre(1, 0.0, -1.0).is_err());
        assert!(laguerre(1, -0.5, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn hermite_matches_rodrigues(m in 0usize..14, x in -3.0f64..3.0) {
            let a = hermite(m, x).unwrap();
            let b = rodrigues_hermite(m, x);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }

        #[test]
        fn hermite_parity(m in 0usize..20, x in -4.0f64..4.0) {
            let s = if m % 2 == 0 { 1.0 } else { -1.0 };
            prop_assert_eq!(hermite(m, -x).unwrap(), s * hermite(m, x).unwrap());
        }

        #[test]
        fn laguerre_matches_rodrigues(m in 0usize..10, alpha in 0.0f64..4.0, x in 0.0f64..8.0) {
            let a = laguerre(m, alpha, x).unwrap();
            let b = rodrigues_laguerre(m, alpha, x);
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn hermite_function_matches_definition() {
        for m in 0..8 {
            let norm = (2f64.powi(m as i32)
                * (1..=m).map(|i| i as f64).product::<f64>()
                * std::f64::consts::PI.sqrt())
            .sqrt();
            for &y in &[-2.5, -0.3, 0.0, 1.1, 3.0] {
                let direct = hermite(m, y).unwrap() * (-0.5 * y * y).exp() / norm;
                assert_relative_eq!(hermite_function(m, y), direct, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn oscillator_ground_state() {
        let g = GridSpec::standard(1);
        let s = qho_eigenfunction(0, 2.0, &g).unwrap();
        assert_eq!(s.entry.energy(), 1.0);
        assert_relative_eq!(s.l2norm, 1.0, epsilon = 1e-12);
        // e^{−x²/2}/π^{1/4}
        assert_relative_eq!(s.field.values[[512]].re, std::f64::consts::PI.powf(-0.25), epsilon = 1e-14);
        let odd = qho_eigenfunction(1, 2.0, &g).unwrap();
        assert_eq!(odd.field.values[[512]].re, 0.0);
    }

    #[test]
    fn oscillator_parity_exact() {
        let g = GridSpec::standard(1);
        for m in 0..6 {
            let s = qho_eigenfunction(m, 1.0, &g).unwrap();
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            for j in 1..1024 {
                assert_eq!(s.field.values[[j]].re, sign * s.field.values[[1024 - j]].re);
            }
        }
    }

    #[test]
    fn narrow_grid_rejected() {
        let g = GridSpec::new(1, 3.0, 64).unwrap();
        assert!(matches!(qho_eigenfunction(4, 1.0, &g), Err(Error::GridTooNarrow { .. })));
        assert!(qho_eigenfunction(0, 1.0, &GridSpec::standard(2)).is_err());
    }

    #[test]
    fn landau_levels() {
        let e = LandauSpectrumEntry::new(0, -1, 1.0).unwrap();
        assert_eq!(e.k, 1);
        assert_eq!(e.energy, 3.0);
        let e = LandauSpectrumEntry::new(0, 1, 1.0).unwrap();
        assert_eq!(e.k, 0);
        assert_eq!(e.energy, 1.0);
        let e = LandauSpectrumEntry::new(2, 3, -0.5).unwrap();
        assert_eq!(e.k, 5);
        assert_eq!(e.oscillator_energy() - e.b * e.l as f64, e.energy);
    }

    #[test]
    fn landau_normalised() {
        let g = GridSpec::new(2, 16.0, 256).unwrap();
        for (m, l) in [(0, 0), (1, -2), (0, 2), (2, 1)] {
            let s = landau_eigenfunction(m, l, 1.0, &g).unwrap();
            assert_relative_eq!(s.l2norm, 1.0, epsilon = 1e-12);
        }
        let s = landau_eigenfunction(0, 0, 1.0, &g).unwrap();
        let c = s.field.values[[128, 128]];
        assert_relative_eq!(c.re, (1.0 / (2.0 * std::f64::consts::PI)).sqrt(), epsilon = 1e-14);
    }
}
