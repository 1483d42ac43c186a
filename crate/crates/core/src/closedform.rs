//! Explicit solutions with stronger-than-free Gaussian decay at two times, their
//! complex potentials, and the associated decay constants.
//!
//! The closed form is printed with an ambiguous imaginary exponent and in a
//! sign convention that may or may not match the equation it is claimed to
//! solve. [`Reading`] enumerates the interpretations; [`arbitrate`] evaluates
//! the PDE residual of each and keeps the one that solves the equation.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::engine::{residual, EquationSpec, Regime};
use crate::error::{Error, Result};
use crate::fields::{make_uniform_magnetic, ElectricPotential, MagneticPotential, TimeSlice};
use crate::grid::GridSpec;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// How to read the imaginary exponent `i tan ωt (1 − h²(1+tan²ωt)/(1+h²tan²ωt))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseReading {
    /// Exactly as printed, with no spatial factor.
    AsPrinted,
    /// Multiplied by `ω|x|²/4`.
    QuadraticPhase,
}

/// Whether the power base and the potential are taken literally, or
/// conjugated to `(1 − ih tan ωt)` and `−V̄` to match `i∂ₜu − Δu + Vu + … = 0`.
/// The displayed exponent is kept in both cases.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionAlignment {
    Literal,
    Conjugate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reading {
    pub phase: PhaseReading,
    pub convention: ConventionAlignment,
}

impl Reading {
    /// The reading selected by the residual arbiter.
    pub const SELECTED: Reading = Reading { phase: PhaseReading::QuadraticPhase, convention: ConventionAlignment::Conjugate };

    pub fn all() -> [Reading; 4] {
        use ConventionAlignment::*;
        use PhaseReading::*;
        [
            Reading { phase: AsPrinted, convention: Literal },
            Reading { phase: QuadraticPhase, convention: Literal },
            Reading { phase: AsPrinted, convention: Conjugate },
            Reading { phase: QuadraticPhase, convention: Conjugate },
        ]
    }

    pub fn label(&self) -> String {
        let p = match self.phase {
            PhaseReading::AsPrinted => "as_printed",
            PhaseReading::QuadraticPhase => "quadratic_phase",
        };
        let c = match self.convention {
            ConventionAlignment::Literal => "literal",
            ConventionAlignment::Conjugate => "conjugate",
        };
        format!("{p}+{c}")
    }
}

/// `h = (2 ± √3)/tan(ω/2)` for `0 < ω < π`.
pub fn h_constant(omega: f64, branch: Branch) -> Result<f64> {
    if !(omega > 0.0 && omega < PI) {
        return Err(Error::Domain(format!("h needs 0 < ω < π, got ω = {omega}")));
    }
    Ok((2.0 + branch.sign() * 3f64.sqrt()) / (omega / 2.0).tan())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleParams {
    pub omega: f64,
    pub n: usize,
    pub k: f64,
    pub branch: Branch,
    pub h: f64,
    pub reading: Reading,
}

impl CounterexampleParams {
    /// Harmonic family; needs `0 < ω < π` and `k > n/2`.
    pub fn new(omega: f64, n: usize, k: f64, branch: Branch) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("dimension must be positive".into()));
        }
        if !(k > n as f64 / 2.0) {
            return Err(Error::Guard(format!("the closed form needs k > n/2; got k = {k}, n = {n}")));
        }
        let h = h_constant(omega, branch)?;
        Ok(Self { omega, n, k, branch, h, reading: Reading::SELECTED })
    }

    /// Magnetic family with `ω = b`; needs `n = 2` and `k > 4`.
    pub fn magnetic(b: f64, k: f64, branch: Branch) -> Result<Self> {
        if !(k > 4.0) {
            return Err(Error::Guard(format!("the magnetic closed form needs n = 2 and k > 4; got k = {k}")));
        }
        Self::new(b, 2, k, branch)
    }

    pub fn with_reading(mut self, reading: Reading) -> Self {
        self.reading = reading;
        self
    }

    /// `1 + h²tan²(ω/2) − 4h·tan(ω/2)`, zero for both branches.
    pub fn h_identity_defect(&self) -> f64 {
        let y = self.h * (self.omega / 2.0).tan();
        1.0 + y * y - 4.0 * y
    }
}

/// Time window of the closed form.
pub const HALF_WINDOW: f64 = 0.5;

fn check_time(t: f64) -> Result<()> {
    if !(t.abs() <= HALF_WINDOW + 1e-12) {
        return Err(Error::Domain(format!("closed form is defined for t ∈ [−1/2, 1/2], got t = {t}")));
    }
    Ok(())
}

/// `(ln|u|, arg u)` at `|x|² = r2`.
fn log_polar(r2: f64, t: f64, p: &CounterexampleParams) -> (f64, f64) {
    let (w, h, n, k) = (p.omega, p.h, p.n as f64, p.k);
    let (s, c) = (w * t).sin_cos();
    let ta = s / c;
    let base = match p.reading.convention {
        ConventionAlignment::Literal => Complex64::new(1.0, h * ta),
        ConventionAlignment::Conjugate => Complex64::new(1.0, -h * ta),
    };
    // Re(base) = 1, so the principal logarithm is continuous in t
    let lp = base.ln() * (2.0 * k - n / 2.0);
    let gauss = h * w * r2 / (4.0 * (c * c + h * h * s * s));
    let mut phase = ta * (1.0 - h * h * (1.0 + ta * ta) / (1.0 + h * h * ta * ta));
    if p.reading.phase == PhaseReading::QuadraticPhase {
        phase *= w * r2 / 4.0;
    }
    let log_mod = -n / 2.0 * c.ln() + lp.re - k * (1.0 + h * w * r2 / (c * c)).ln() - gauss;
    (log_mod, lp.im + phase)
}

fn u_unchecked(x: &[f64], t: f64, p: &CounterexampleParams) -> Complex64 {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let (lm, arg) = log_polar(r2, t, p);
    Complex64::from_polar(lm.exp(), arg)
}

/// The closed-form solution under `p.reading`.
pub fn counterexample_u(x: &[f64], t: f64, p: &CounterexampleParams) -> Result<Complex64> {
    check_time(t)?;
    Ok(u_unchecked(x, t, p))
}

/// `ln|u(x,t)|`; finite far beyond where `u` itself underflows.
pub fn counterexample_log_abs(r: f64, t: f64, p: &CounterexampleParams) -> Result<f64> {
    check_time(t)?;
    Ok(log_polar(r * r, t, p).0)
}

fn v_printed_unchecked(r2: f64, t: f64, p: &CounterexampleParams) -> Complex64 {
    let (w, h, n, k) = (p.omega, p.h, p.n as f64, p.k);
    let (s, c) = (w * t).sin_cos();
    let d = c * c / (h * w) + r2;
    let inner = Complex64::new(1.0, h * s / c).inv() + n - 2.0 * (1.0 + k) * r2 / d;
    inner * (2.0 * k / d)
}

/// The potential exactly as printed.
pub fn counterexample_v_printed(x: &[f64], t: f64, p: &CounterexampleParams) -> Result<Complex64> {
    check_time(t)?;
    Ok(v_printed_unchecked(x.iter().map(|v| v * v).sum(), t, p))
}

/// The potential matching `p.reading`: printed, or `−V̄` under conjugation.
pub fn counterexample_v(x: &[f64], t: f64, p: &CounterexampleParams) -> Result<Complex64> {
    check_time(t)?;
    Ok(v_for_reading(x.iter().map(|v| v * v).sum(), t, p))
}

fn v_for_reading(r2: f64, t: f64, p: &CounterexampleParams) -> Complex64 {
    let v = v_printed_unchecked(r2, t, p);
    match p.reading.convention {
        ConventionAlignment::Literal => v,
        ConventionAlignment::Conjugate => -v.conj(),
    }
}

fn potential(p: &CounterexampleParams) -> TimeSlice<Complex64> {
    let p = *p;
    Arc::new(move |t| Arc::new(move |x: &[f64]| v_for_reading(x.iter().map(|v| v * v).sum(), t, &p)))
}

/// `i∂ₜu − Δu + Vu + (ω²/4)|x|²u = 0` on `[−1/2, 1/2]`.
pub fn harmonic_equation(p: &CounterexampleParams) -> Result<EquationSpec> {
    let el = ElectricPotential::harmonic(p.n, p.omega).with_v2(potential(p));
    EquationSpec::new(el, MagneticPotential::zero(p.n), (-HALF_WINDOW, HALF_WINDOW), Regime::General)
}

/// `i∂ₜu − Δ_A u + Vu = 0` with `A = (b/2)(−x₂, x₁)`, `b = ω`, on `[−1/2, 1/2]`.
pub fn magnetic_equation(p: &CounterexampleParams) -> Result<EquationSpec> {
    if p.n != 2 {
        return Err(Error::Guard(format!("the magnetic closed form needs n = 2; got n = {}", p.n)));
    }
    let a = make_uniform_magnetic(2, p.omega, &[(0, 1)])?;
    let el = ElectricPotential::zero(2).with_v2(potential(p));
    EquationSpec::new(el, a, (-HALF_WINDOW, HALF_WINDOW), Regime::General)
}

/// Time step of the difference quotient in closed-form residuals.
pub const CLOSED_FORM_FD_STEP: f64 = 5e-4;

/// Relative residual `‖i∂ₜu − Δ_A u + Wu‖₂ / ‖u‖₂` of the closed form at each time.
pub fn closed_form_residuals(p: &CounterexampleParams, eq: &EquationSpec, grid: &GridSpec, times: &[f64]) -> Result<Vec<f64>> {
    let pp = *p;
    let u = move |x: &[f64], t: f64| u_unchecked(x, t, &pp);
    times
        .iter()
        .map(|&t| {
            check_time(t + 2.0 * CLOSED_FORM_FD_STEP * t.signum())?;
            let r = residual(&u, eq, grid, t, CLOSED_FORM_FD_STEP)?;
            let un = grid.sample(|x| u(x, t));
            let norm = un.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            Ok(r.values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt() / norm)
        })
        .collect()
}

/// `n` equally spaced times in `[−t_max, t_max]`.
pub fn sample_times(n: usize, t_max: f64) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -t_max + 2.0 * t_max * i as f64 / (n - 1) as f64).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ReadingResidual {
    pub reading: Reading,
    pub label: String,
    pub max_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ArbiterReport {
    pub readings: Vec<ReadingResidual>,
    pub threshold: f64,
    /// The unique reading under the threshold, if there is exactly one.
    pub selected: Option<Reading>,
}

/// Which equation the closed form is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Harmonic,
    Magnetic,
}

/// Evaluate every reading's residual and keep the one that solves the equation.
pub fn arbitrate(p: &CounterexampleParams, family: Family, grid: &GridSpec, times: &[f64], threshold: f64) -> Result<ArbiterReport> {
    let mut readings = Vec::new();
    for r in Reading::all() {
        let q = p.with_reading(r);
        let eq = match family {
            Family::Harmonic => harmonic_equation(&q)?,
            Family::Magnetic => magnetic_equation(&q)?,
        };
        let res = closed_form_residuals(&q, &eq, grid, times)?;
        let max_residual = res.iter().fold(0.0f64, |m, &v| m.max(v));
        readings.push(ReadingResidual { reading: r, label: r.label(), max_residual });
    }
    let passing: Vec<_> = readings.iter().filter(|r| r.max_residual < threshold).collect();
    let selected = if passing.len() == 1 { Some(passing[0].reading) } else { None };
    Ok(ArbiterReport { readings, threshold, selected })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SharpKind {
    Harmonic,
    Magnetic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SharpThreshold {
    pub kind: SharpKind,
    pub parameter: f64,
    pub alpha_tilde_sq: f64,
}

/// `α̃² = 4 sin(p)/p` for `p ∈ (0, π)`.
pub fn alpha_tilde_sq(kind: SharpKind, parameter: f64) -> Result<SharpThreshold> {
    if !(parameter > 0.0 && parameter < PI) {
        return Err(Error::Domain(format!("α̃² needs a parameter in (0, π), got {parameter}")));
    }
    Ok(SharpThreshold { kind, parameter, alpha_tilde_sq: 4.0 * parameter.sin() / parameter })
}

/// Gaussian rate of `|u(·, ±1/2)|`: `hω/(4(cos² + h²sin²))` at `ω/2`, which the
/// h-identity reduces to `ω/(8 sin ω)`.
pub fn exact_endpoint_rate(p: &CounterexampleParams) -> f64 {
    let (s, c) = (p.omega / 2.0).sin_cos();
    p.h * p.omega / (4.0 * (c * c + p.h * p.h * s * s))
}

/// Gaussian rate at `t = 0`: `hω/4`.
pub fn initial_rate(p: &CounterexampleParams) -> f64 {
    p.h * p.omega / 4.0
}

#[derive(Clone, Debug, Serialize)]
pub struct EndpointRate {
    pub time: f64,
    pub rate: f64,
    pub window: (f64, f64),
    pub fit_residual: f64,
}

/// Fit `ln|u(r, t)| + 2k ln r ≈ a − c r²` along a ray on `[r_min, r_max]`.
pub fn measured_endpoint_rate(p: &CounterexampleParams, t: f64, window: (f64, f64)) -> Result<EndpointRate> {
    let (r0, r1) = window;
    if !(r0 > 0.0 && r1 > r0) {
        return Err(Error::Domain(format!("fit window [{r0}, {r1}] is invalid")));
    }
    let samples = 200;
    let mut xs = Vec::with_capacity(samples);
    let mut ys = Vec::with_capacity(samples);
    for i in 0..samples {
        let r = r0 + (r1 - r0) * i as f64 / (samples - 1) as f64;
        xs.push(r * r);
        ys.push(counterexample_log_abs(r, t, p)? + 2.0 * p.k * r.ln());
    }
    let n = samples as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum::<f64>() / n).sqrt();
    let fit_residual = rms / ys.iter().map(|y| (y - my).abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if !fit_residual.is_finite() || fit_residual > 1e-2 {
        return Err(Error::Fit(format!("endpoint fit residual {fit_residual:.3e} on [{r0}, {r1}]")));
    }
    Ok(EndpointRate { time: t, rate: -slope, window, fit_residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn h_examples() {
        let half_pi = PI / 2.0;
        assert_relative_eq!(h_constant(half_pi, Branch::Plus).unwrap(), 2.0 + 3f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(h_constant(half_pi, Branch::Minus).unwrap(), 2.0 - 3f64.sqrt(), max_relative = 1e-14);
        assert!(h_constant(PI, Branch::Plus).is_err());
        assert!(h_constant(0.0, Branch::Plus).is_err());
    }

    proptest! {
        #[test]
        fn h_identity(omega in 0.01f64..3.1, plus in any::<bool>()) {
            let b = if plus { Branch::Plus } else { Branch::Minus };
            let p = CounterexampleParams::new(omega, 1, 1.0, b).unwrap();
            prop_assert!(p.h > 0.0);
            prop_assert!(p.h_identity_defect().abs() < 1e-12 * (1.0 + (p.h * (omega / 2.0).tan()).powi(2)));
        }

        #[test]
        fn endpoint_moduli_agree(r in 0.0f64..6.0, omega in 0.1f64..3.0) {
            let p = CounterexampleParams::new(omega, 1, 1.0, Branch::Plus).unwrap();
            let a = counterexample_u(&[r], 0.5, &p).unwrap().norm();
            let b = counterexample_u(&[r], -0.5, &p).unwrap().norm();
            prop_assert!((a - b).abs() <= 1e-13 * a.max(1e-300));
        }
    }

    #[test]
    fn values_at_origin() {
        for r in Reading::all() {
            let p = CounterexampleParams::new(1.0, 1, 1.0, Branch::Plus).unwrap().with_reading(r);
            assert!((counterexample_u(&[0.0], 0.0, &p).unwrap() - 1.0).norm() < 1e-15);
        }
        let p = CounterexampleParams::new(1.0, 2, 1.5, Branch::Minus).unwrap();
        let v = counterexample_v_printed(&[0.0, 0.0], 0.0, &p).unwrap();
        assert_relative_eq!(v.re, 2.0 * 1.5 * p.h * 1.0 * 3.0, max_relative = 1e-14);
        assert_eq!(v.im, 0.0);
        assert!(counterexample_u(&[0.0], 0.6, &p).is_err());
    }

    #[test]
    fn initial_profile() {
        let p = CounterexampleParams::new(0.8, 1, 2.0, Branch::Plus).unwrap();
        for x in [0.3, 1.0, 2.5] {
            let hw = p.h * p.omega;
            let expect = (1.0 + hw * x * x).powf(-2.0) * (-hw * x * x / 4.0).exp();
            assert_relative_eq!(counterexample_u(&[x], 0.0, &p).unwrap().re, expect, max_relative = 1e-13);
        }
    }

    #[test]
    fn guards() {
        assert!(matches!(CounterexampleParams::new(1.0, 2, 1.0, Branch::Plus), Err(Error::Guard(_))));
        assert!(matches!(CounterexampleParams::magnetic(1.0, 4.0, Branch::Plus), Err(Error::Guard(_))));
        assert!(CounterexampleParams::magnetic(1.0, 5.0, Branch::Plus).is_ok());
    }

    #[test]
    fn endpoint_rate_reduces() {
        for omega in [0.5, 1.0, PI / 2.0] {
            for b in [Branch::Plus, Branch::Minus] {
                let p = CounterexampleParams::new(omega, 1, 1.0, b).unwrap();
                assert_relative_eq!(exact_endpoint_rate(&p), omega / (8.0 * omega.sin()), max_relative = 1e-12);
            }
        }
        let p = CounterexampleParams::new(1.0, 1, 1.0, Branch::Plus).unwrap();
        let m = measured_endpoint_rate(&p, 0.5, (5.0, 40.0)).unwrap();
        assert_relative_eq!(m.rate, 1.0 / (8.0 * 1f64.sin()), max_relative = 1e-3);
        let m0 = measured_endpoint_rate(&p, 0.0, (5.0, 40.0)).unwrap();
        assert_relative_eq!(m0.rate, initial_rate(&p), max_relative = 1e-3);
    }

    #[test]
    fn alpha_tilde() {
        assert_relative_eq!(alpha_tilde_sq(SharpKind::Harmonic, PI / 2.0).unwrap().alpha_tilde_sq, 8.0 / PI);
        assert_relative_eq!(alpha_tilde_sq(SharpKind::Harmonic, 1e-8).unwrap().alpha_tilde_sq, 4.0, max_relative = 1e-15);
        assert_relative_eq!(alpha_tilde_sq(SharpKind::Magnetic, 1.0).unwrap().alpha_tilde_sq, 4.0 * 1f64.sin());
        assert!(alpha_tilde_sq(SharpKind::Magnetic, PI).is_err());
    }

    #[test]
    fn potential_bounded_and_complex() {
        let p = CounterexampleParams::new(1.0, 1, 1.0, Branch::Plus).unwrap();
        let sup = |m: usize| {
            let mut s = 0.0f64;
            let mut im = 0.0f64;
            for i in 0..=m {
                let t = -0.5 + i as f64 / m as f64;
                for j in 0..=4 * m {
                    let x = 20.0 * j as f64 / (4 * m) as f64;
                    let v = counterexample_v(&[x], t, &p).unwrap();
                    s = s.max(v.norm());
                    im = im.max(v.im.abs());
                }
            }
            (s, im)
        };
        let (a, im) = sup(200);
        let (b, _) = sup(400);
        assert!(a.is_finite() && im > 0.0);
        assert!((a - b).abs() < 1e-2 * a);
    }

    #[test]
    fn arbiter_selects_one_reading() {
        let g = GridSpec::new(1, 20.0, 1024).unwrap();
        let p = CounterexampleParams::new(1.0, 1, 1.0, Branch::Plus).unwrap();
        let rep = arbitrate(&p, Family::Harmonic, &g, &[-0.3, 0.1, 0.4], 1e-6).unwrap();
        assert_eq!(rep.selected, Some(Reading::SELECTED), "{:?}", rep.readings);
        for r in &rep.readings {
            if r.reading != Reading::SELECTED {
                assert!(r.max_residual > 1e-2, "{}: {}", r.label, r.max_residual);
            }
        }
    }
}
