//! Equations, spectral operators, the split-step propagator and exact oracles.
//!
//! Everything follows the sign convention
//! `i∂ₜu − Δ_A u + W u = 0`, i.e. `∂ₜu = −i(Δ_A u − W u)`, where `W` collects
//! `V + q|x|² + E·x + k`. Standing waves of `−Δ_A + …` with eigenvalue `λ`
//! evolve as `e^{+iλt}`.

mod ops;
mod oracle;
mod propagate;
mod residual;

pub use ops::{angular_momentum, laplacian, magnetic_laplacian};
pub use oracle::{free_propagate, harmonic_oracle, magnetic_oracle, repulsive_oracle};
pub use propagate::{propagate, propagate_with, PropagateOptions, Propagator};
pub use residual::{residual, time_derivative, FD_TIME_STEP};

use std::f64::consts::FRAC_PI_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{isotropic_strength, make_uniform_magnetic, ElectricPotential, MagneticPotential};

/// The theorem whose parameter bounds an equation must respect.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Regime {
    /// No theorem attached; only structural checks.
    General,
    Free,
    /// Needs `0 < ω < π/(2T)`.
    Harmonic { omega: f64 },
    /// Needs `0 < ν < 1/T`.
    Repulsive { nu: f64 },
    /// Needs `0 < b < π/(2T)` and even dimension.
    Magnetic { b: f64 },
}

#[derive(Clone, Debug)]
pub struct EquationSpec {
    pub electric: ElectricPotential,
    pub magnetic: MagneticPotential,
    pub window: (f64, f64),
    pub regime: Regime,
    /// Set when no coefficient depends on time; lets the propagator sample once.
    pub autonomous: bool,
}

impl EquationSpec {
    pub fn new(electric: ElectricPotential, magnetic: MagneticPotential, window: (f64, f64), regime: Regime) -> Result<Self> {
        if electric.dim != magnetic.dim {
            return Err(Error::Shape(format!(
                "electric data is {}D, magnetic data is {}D",
                electric.dim, magnetic.dim
            )));
        }
        let (t0, t1) = window;
        if !(t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::Domain(format!("time window [{t0}, {t1}] is empty")));
        }
        check_regime(regime, t1 - t0, electric.dim)?;
        Ok(Self { electric, magnetic, window, regime, autonomous: false })
    }

    pub fn free(dim: usize, window: (f64, f64)) -> Result<Self> {
        Ok(Self::new(ElectricPotential::zero(dim), MagneticPotential::zero(dim), window, Regime::Free)?.autonomous())
    }

    /// `i∂ₜu − Δu + (ω²/4)|x|²u = 0`.
    pub fn harmonic(dim: usize, omega: f64, window: (f64, f64)) -> Result<Self> {
        Ok(Self::new(
            ElectricPotential::harmonic(dim, omega),
            MagneticPotential::zero(dim),
            window,
            Regime::Harmonic { omega },
        )?
        .autonomous())
    }

    /// `i∂ₜu − Δu − (ν²/4)|x|²u = 0`.
    pub fn repulsive(dim: usize, nu: f64, window: (f64, f64)) -> Result<Self> {
        Ok(Self::new(
            ElectricPotential::repulsive(dim, nu),
            MagneticPotential::zero(dim),
            window,
            Regime::Repulsive { nu },
        )?
        .autonomous())
    }

    /// `i∂ₜu − Δ_A u = 0` with `A = Mx/2`, `M` built on consecutive axis pairs.
    pub fn uniform_magnetic(dim: usize, b: f64, window: (f64, f64)) -> Result<Self> {
        check_regime(Regime::Magnetic { b }, window.1 - window.0, dim)?;
        let m = make_uniform_magnetic(dim, b, &crate::fields::standard_pairing(dim))?;
        Ok(Self::new(ElectricPotential::zero(dim), m, window, Regime::Magnetic { b })?.autonomous())
    }

    pub fn autonomous(mut self) -> Self {
        self.autonomous = true;
        self
    }

    pub fn with_electric(mut self, electric: ElectricPotential) -> Self {
        self.electric = electric;
        self
    }

    pub fn dim(&self) -> usize {
        self.electric.dim
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-12 * (1.0 + self.window.0.abs().max(self.window.1.abs()));
        t >= self.window.0 - slack && t <= self.window.1 + slack
    }
}

/// Enforces the parameter bounds of the uniqueness theorems.
pub fn check_regime(regime: Regime, t_len: f64, dim: usize) -> Result<()> {
    match regime {
        Regime::General | Regime::Free => Ok(()),
        Regime::Harmonic { omega } => {
            if !(omega > 0.0 && omega * t_len < FRAC_PI_2) {
                return Err(Error::Guard(format!(
                    "harmonic regime needs 0 < ω < π/(2T); got ω = {omega}, T = {t_len}, ωT = {}",
                    omega * t_len
                )));
            }
            Ok(())
        }
        Regime::Repulsive { nu } => {
            if !(nu > 0.0 && nu * t_len < 1.0) {
                return Err(Error::Guard(format!(
                    "repulsive regime needs 0 < ν < 1/T; got ν = {nu}, T = {t_len}, νT = {}",
                    nu * t_len
                )));
            }
            Ok(())
        }
        Regime::Magnetic { b } => {
            if dim % 2 != 0 {
                return Err(Error::Guard(format!("uniform magnetic regime needs even n; got n = {dim}")));
            }
            if !(b > 0.0 && b * t_len < FRAC_PI_2) {
                return Err(Error::Guard(format!(
                    "magnetic regime needs 0 < b < π/(2T); got b = {b}, T = {t_len}, bT = {}",
                    b * t_len
                )));
            }
            Ok(())
        }
    }
}

/// Strength `b` of a purely uniform isotropic magnetic potential.
pub fn uniform_strength(m: &MagneticPotential) -> Option<f64> {
    if m.general.is_some() {
        return None;
    }
    m.uniform.as_ref().and_then(isotropic_strength)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn guards_quote_bounds() {
        let e = EquationSpec::harmonic(1, 4.0, (0.0, 0.5)).unwrap_err();
        assert!(e.to_string().contains("π/(2T)"));
        assert!(EquationSpec::harmonic(1, 1.0, (0.0, 0.5)).is_ok());
        assert!(EquationSpec::repulsive(1, 2.5, (0.0, 0.5)).is_err());
        assert!(EquationSpec::uniform_magnetic(2, 1.0, (0.0, 2.0)).is_err());
        assert!(EquationSpec::uniform_magnetic(3, 0.1, (0.0, 1.0)).is_err());
        assert!(EquationSpec::free(1, (1.0, 1.0)).is_err());
    }

    #[test]
    fn uniform_strength_detected() {
        let eq = EquationSpec::uniform_magnetic(2, 0.7, (0.0, 1.0)).unwrap();
        assert_eq!(uniform_strength(&eq.magnetic), Some(0.7));
        assert_eq!(uniform_strength(&MagneticPotential::zero(2)), None);
    }
}
