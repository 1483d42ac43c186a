//! Weighted Gaussian norms, decay-rate fits and threshold classification.
//!
//! Rates follow `|u(x)| ≍ |x|^p e^{−c|x|²}` with `c = 1/α²`. All radial
//! statistics use shells of one grid spacing centred on the origin.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayD, Dimension, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, WaveField};
use crate::spectral::Spectral;

/// Magnitudes below this are treated as underflowed.
pub const NUMERICAL_FLOOR: f64 = 1e-280;

/// Relative tolerance for `at_threshold`.
pub const THRESHOLD_RTOL: f64 = 1e-12;

/// Fraction of outer shells inspected for divergence.
pub const OUTER_FRACTION: f64 = 0.1;

/// Result of [`weighted_norm`]. `log_norm` is `ln‖e^{|x|²/α²}u‖₂` over the box;
/// when `divergent` is set the box value is only a lower bound.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightedNorm {
    pub alpha_sq: f64,
    pub log_norm: f64,
    pub divergent: bool,
    /// `(r, ln mean |e^{|x|²/α²}u|²)` per shell out to the inscribed radius.
    pub shell_profile: Vec<(f64, f64)>,
}

impl WeightedNorm {
    /// The norm, or `+∞` for the divergence marker.
    pub fn value(&self) -> f64 {
        if self.divergent {
            f64::INFINITY
        } else {
            self.log_norm.exp()
        }
    }

    pub fn is_finite(&self) -> bool {
        !self.divergent
    }
}

fn shell_index(r: f64, dr: f64) -> usize {
    (r / dr + 0.5).floor() as usize
}

fn log_sum_exp(v: impl Iterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = v.collect();
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Slope of the least-squares line through `ys` against their index.
fn index_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (y - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// `‖e^{|x|²/α²}u‖₂` by grid quadrature, accumulated in the log domain.
///
/// Divergence is declared when the mean weighted integrand over the outermost
/// tenth of the shells does not decrease.
pub fn weighted_norm(field: &WaveField, alpha_sq: f64) -> Result<WeightedNorm> {
    if !(alpha_sq > 0.0 && alpha_sq.is_finite()) {
        return Err(Error::Domain(format!("α² must be positive, got {alpha_sq}")));
    }
    let g = field.grid;
    let dr = g.spacing();
    let r_in = g.half_width();
    let nshell = shell_index(r_in, dr) + 1;
    let mut logs = Vec::with_capacity(g.len());
    let mut shell_logs: Vec<Vec<f64>> = vec![Vec::new(); nshell];
    let mut x = vec![0.0; g.dim()];
    for (flat, z) in field.values.iter().enumerate() {
        g.point(flat, &mut x);
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let l = 2.0 * z.norm().ln() + 2.0 * r2 / alpha_sq;
        logs.push(l);
        let r = r2.sqrt();
        if r <= r_in {
            shell_logs[shell_index(r, dr)].push(l);
        }
    }
    let log_norm = 0.5 * (log_sum_exp(logs.into_iter()) + g.cell_volume().ln());
    let shell_profile: Vec<(f64, f64)> = shell_logs
        .into_iter()
        .enumerate()
        .filter(|(_, s)| !s.is_empty())
        .map(|(i, s)| {
            let n = s.len() as f64;
            (i as f64 * dr, log_sum_exp(s.into_iter()) - n.ln())
        })
        .collect();
    let outer = ((shell_profile.len() as f64 * OUTER_FRACTION).ceil() as usize).max(3);
    let tail: Vec<f64> = shell_profile[shell_profile.len().saturating_sub(outer)..].iter().map(|s| s.1).collect();
    let divergent = if tail.iter().any(|v| !v.is_finite()) {
        false
    } else {
        let scale = tail.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        index_slope(&tail) >= -1e-12 * scale
    };
    Ok(WeightedNorm { alpha_sq, log_norm, divergent, shell_profile })
}

/// Fitted `ln|u| ≈ a + p ln r − c r²` over radial shells.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub rate: f64,
    pub poly_correction: f64,
    pub fit_window: (f64, f64),
    /// RMS misfit of the shell means over their spread.
    pub fit_residual: f64,
    pub floor_hit: bool,
    pub shells: usize,
    pub condition: f64,
    pub trusted: bool,
}

impl DecayReport {
    /// `α² = 1/c`.
    pub fn alpha_sq(&self) -> f64 {
        1.0 / self.rate
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitOptions {
    /// Largest `fit_residual` of a trusted report.
    pub max_residual: f64,
    pub floor: f64,
    pub max_condition: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_residual: 1e-3, floor: NUMERICAL_FLOOR, max_condition: 1e12 }
    }
}

pub fn fit_rate(field: &WaveField, window: (f64, f64)) -> Result<DecayReport> {
    fit_rate_with(field, window, &FitOptions::default())
}

pub fn fit_rate_with(field: &WaveField, window: (f64, f64), opts: &FitOptions) -> Result<DecayReport> {
    let (r0, r1) = window;
    if !(r0 > 0.0 && r1 > r0 && r1.is_finite()) {
        return Err(Error::Domain(format!("fit window [{r0}, {r1}] must satisfy 0 < r_min < r_max")));
    }
    let g = field.grid;
    let dr = g.spacing();
    let mut sums: std::collections::BTreeMap<usize, ([f64; 3], usize)> = Default::default();
    let mut floor_hit = false;
    let mut x = vec![0.0; g.dim()];
    for (flat, z) in field.values.iter().enumerate() {
        g.point(flat, &mut x);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r < r0 || r > r1 {
            continue;
        }
        let m = z.norm();
        if !(m > opts.floor) {
            floor_hit = true;
            continue;
        }
        let e = sums.entry(shell_index(r, dr)).or_insert(([0.0; 3], 0));
        e.0[0] += m.ln();
        e.0[1] += r.ln();
        e.0[2] += r * r;
        e.1 += 1;
    }
    let shells = sums.len();
    let untrusted = |floor_hit, condition| DecayReport {
        rate: f64::NAN,
        poly_correction: f64::NAN,
        fit_window: window,
        fit_residual: f64::INFINITY,
        floor_hit,
        shells,
        condition,
        trusted: false,
    };
    if shells < 4 {
        return Ok(untrusted(floor_hit, f64::INFINITY));
    }
    // shell means of ln|u| are exactly linear in the shell means of the basis
    let mut a = DMatrix::zeros(shells, 3);
    let mut y = DVector::zeros(shells);
    for (i, (s, n)) in sums.values().enumerate() {
        let n = *n as f64;
        a[(i, 0)] = 1.0;
        a[(i, 1)] = s[1] / n;
        a[(i, 2)] = s[2] / n;
        y[i] = s[0] / n;
    }
    // column scaling keeps the condition number meaningful
    let scales: Vec<f64> = (0..3).map(|j| a.column(j).amax().max(f64::MIN_POSITIVE)).collect();
    for (j, &s) in scales.iter().enumerate() {
        a.column_mut(j).iter_mut().for_each(|v| *v /= s);
    }
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let condition = sv.max() / sv.min();
    if !condition.is_finite() || condition > opts.max_condition {
        return Ok(untrusted(floor_hit, condition));
    }
    let coef = svd.solve(&y, 0.0).map_err(|e| Error::Fit(e.to_string()))?;
    let resid = &y - &a * &coef;
    let rms = (resid.norm_squared() / shells as f64).sqrt();
    let spread = y.max() - y.min();
    let fit_residual = if spread > 0.0 { rms / spread } else { f64::INFINITY };
    let rate = -coef[2] / scales[2];
    let poly_correction = coef[1] / scales[1];
    let trusted = !floor_hit && fit_residual <= opts.max_residual && rate.is_finite();
    Ok(DecayReport { rate, poly_correction, fit_window: window, fit_residual, floor_hit, shells, condition, trusted })
}

/// Radii where `|u|` falls from `hi` to `lo` of its peak, along the shell maxima,
/// capped at 0.95 of the inscribed radius.
pub fn suggest_window(field: &WaveField, hi: f64, lo: f64) -> Result<(f64, f64)> {
    let g = field.grid;
    let dr = g.spacing();
    let r_in = g.half_width();
    let mut maxima = vec![0.0f64; shell_index(r_in, dr) + 1];
    let mut x = vec![0.0; g.dim()];
    for (flat, z) in field.values.iter().enumerate() {
        g.point(flat, &mut x);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r <= r_in {
            let m = &mut maxima[shell_index(r, dr)];
            *m = m.max(z.norm());
        }
    }
    let peak = maxima.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::Fit("field vanishes".into()));
    }
    let r_start = maxima.iter().rposition(|&m| m >= hi * peak).map(|i| i as f64 * dr);
    let r_end = maxima.iter().position(|&m| m > 0.0 && m < lo * peak).map(|i| i as f64 * dr);
    let r0 = r_start.unwrap_or(0.0).max(dr);
    let r1 = r_end.unwrap_or(r_in).min(0.95 * r_in);
    if r1 <= r0 + 3.0 * dr {
        return Err(Error::Fit(format!("no decay window between {hi:e} and {lo:e} of the peak")));
    }
    Ok((r0, r1))
}

/// `|f̂|` on the frequency variable `η = 2ξ`, where `f̂(ξ) = ∫f(x)e^{−ix·ξ}dx`.
///
/// In `η` a Gaussian `e^{−|x|²/β²}` has transform rate `β²/16`, so spatial and
/// frequency rates `1/β²` and `1/α²` multiply to `1/16` exactly when `αβ = 4`.
pub fn fourier_field(field: &WaveField) -> Result<WaveField> {
    let g = field.grid;
    let s = Spectral::new(g);
    let mut v = field.values.clone();
    s.forward(&mut v);
    let n = g.points();
    let dk = PI / g.half_width();
    let eg = GridSpec::new(g.dim(), 2.0 * dk * (n / 2) as f64, n)?;
    let vol = g.cell_volume();
    let mut out = ArrayD::<Complex64>::zeros(IxDyn(&eg.shape()));
    for (idx, o) in out.indexed_iter_mut() {
        let src: Vec<usize> = idx.as_array_view().iter().map(|&i| (i + n / 2) % n).collect();
        *o = v[IxDyn(&src)] * vol;
    }
    WaveField::new(eg, out, field.time)
}

pub fn fourier_decay(field: &WaveField, window: (f64, f64)) -> Result<DecayReport> {
    fit_rate(&fourier_field(field)?, window)
}

/// Which sharp threshold applies, with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ThresholdKind {
    #[serde(rename = "free_4T")]
    Free { t: f64 },
    #[serde(rename = "harmonic_4sin")]
    Harmonic { omega: f64, t: f64 },
    #[serde(rename = "repulsive_4sinh")]
    Repulsive { nu: f64, t: f64 },
    #[serde(rename = "magnetic_4sin")]
    Magnetic { b: f64, t: f64 },
}

impl ThresholdKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Free { .. } => "free_4T",
            Self::Harmonic { .. } => "harmonic_4sin",
            Self::Repulsive { .. } => "repulsive_4sinh",
            Self::Magnetic { .. } => "magnetic_4sin",
        }
    }

    pub fn horizon(&self) -> f64 {
        match *self {
            Self::Free { t } | Self::Harmonic { t, .. } | Self::Repulsive { t, .. } | Self::Magnetic { t, .. } => t,
        }
    }

    /// The frequency parameter (`0` for the free case).
    pub fn parameter(&self) -> f64 {
        match *self {
            Self::Free { .. } => 0.0,
            Self::Harmonic { omega, .. } => omega,
            Self::Repulsive { nu, .. } => nu,
            Self::Magnetic { b, .. } => b,
        }
    }

    pub fn check(&self) -> Result<()> {
        let t = self.horizon();
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!("T must be positive, got {t}")));
        }
        let p = self.parameter();
        if !(p >= 0.0 && p.is_finite()) {
            return Err(Error::Domain(format!("frequency parameter must be non-negative, got {p}")));
        }
        match self {
            Self::Free { .. } => Ok(()),
            Self::Harmonic { .. } if p * t >= PI / 2.0 => {
                Err(Error::Guard(format!("need ω < π/(2T) = {:.6}; got ω = {p}", PI / (2.0 * t))))
            }
            Self::Repulsive { .. } if p * t >= 1.0 => {
                Err(Error::Guard(format!("need ν < 1/T = {:.6}; got ν = {p}", 1.0 / t)))
            }
            Self::Magnetic { .. } if p * t >= PI / 2.0 => {
                Err(Error::Guard(format!("need b < π/(2T) = {:.6}; got b = {p}", PI / (2.0 * t))))
            }
            _ => Ok(()),
        }
    }

    /// `4T`, `4 sin(ωT)/ω`, `4 sinh(νT)/ν` or `4 sin(bT)/b`.
    pub fn threshold(&self) -> f64 {
        let t = self.horizon();
        let p = self.parameter();
        if p == 0.0 {
            return 4.0 * t;
        }
        match self {
            Self::Free { .. } => 4.0 * t,
            Self::Harmonic { .. } | Self::Magnetic { .. } => 4.0 * (p * t).sin() / p,
            Self::Repulsive { .. } => 4.0 * (p * t).sinh() / p,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    /// Only the zero solution can decay this fast.
    BelowThreshold,
    AtThreshold,
    AboveThreshold,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdVerdict {
    pub product: f64,
    pub threshold: f64,
    pub kind: ThresholdKind,
    pub classification: Classification,
}

/// Compare `αβ = √(α²β²)` with the sharp threshold of `kind`.
pub fn classify(alpha_sq: f64, beta_sq: f64, kind: ThresholdKind) -> Result<ThresholdVerdict> {
    for (name, v) in [("α²", alpha_sq), ("β²", beta_sq)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    kind.check()?;
    let product = (alpha_sq * beta_sq).sqrt();
    let threshold = kind.threshold();
    let classification = if (product - threshold).abs() <= THRESHOLD_RTOL * threshold {
        Classification::AtThreshold
    } else if product < threshold {
        Classification::BelowThreshold
    } else {
        Classification::AboveThreshold
    };
    Ok(ThresholdVerdict { product, threshold, kind, classification })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::qho_eigenfunction;
    use approx::assert_relative_eq;

    fn radial(g: GridSpec, f: impl Fn(f64) -> f64 + Sync) -> WaveField {
        WaveField::from_fn(g, 0.0, |x| Complex64::new(f(x.iter().map(|v| v * v).sum::<f64>().sqrt()), 0.0))
    }

    #[test]
    fn gaussian_weighted_norm() {
        let g = GridSpec::new(1, 20.0, 1024).unwrap();
        let u = radial(g, |r| (-r * r).exp());
        let w = weighted_norm(&u, 2.0).unwrap();
        assert!(!w.divergent);
        assert_relative_eq!(w.value(), PI.powf(0.25), max_relative = 1e-12);
        assert!(weighted_norm(&u, 1.0).unwrap().divergent);
        assert!(weighted_norm(&u, 0.0).is_err());
    }

    #[test]
    fn ground_state_decay_condition() {
        let g = GridSpec::new(1, 20.0, 1024).unwrap();
        for omega in [1.0, 2.0] {
            let psi = qho_eigenfunction(0, omega, &g).unwrap().field;
            assert!(weighted_norm(&psi, 4.0 / omega * 1.05).unwrap().is_finite());
            assert!(weighted_norm(&psi, 4.0 / omega * 0.95).unwrap().divergent);
        }
    }

    #[test]
    fn exact_model_recovered() {
        let g = GridSpec::new(2, 6.0, 128).unwrap();
        let u = radial(g, |r| (-3.0 * r * r).exp());
        let rep = fit_rate(&u, (0.5, 3.0)).unwrap();
        assert!(rep.trusted);
        assert_relative_eq!(rep.rate, 3.0, epsilon = 1e-6);
        assert!(rep.poly_correction.abs() < 1e-6);
    }

    #[test]
    fn hermite_tail() {
        let g = GridSpec::new(1, 20.0, 1024).unwrap();
        let psi = qho_eigenfunction(5, 2.0, &g).unwrap().field;
        let rep = fit_rate(&psi, (6.0, 14.0)).unwrap();
        assert!(rep.trusted, "{rep:?}");
        assert!((rep.rate - 0.5).abs() < 0.005, "{}", rep.rate);
        assert!((rep.poly_correction - 5.0).abs() < 0.5, "{}", rep.poly_correction);
    }

    #[test]
    fn compact_bump_is_untrusted() {
        let g = GridSpec::new(1, 10.0, 256).unwrap();
        let u = radial(g, |r| if r < 2.0 { (1.0 - r * r / 4.0).powi(2) * (1.0 + 0.3 * (7.0 * r).sin()) } else { 0.0 });
        let rep = fit_rate(&u, (0.5, 6.0)).unwrap();
        assert!(!rep.trusted && rep.floor_hit);
    }

    #[test]
    fn self_dual_gaussian() {
        let g = GridSpec::new(1, 20.0, 512).unwrap();
        let u = radial(g, |r| (-r * r / 4.0).exp());
        let x = fit_rate(&u, (1.0, 8.0)).unwrap();
        let f = fourier_decay(&u, (1.0, 8.0)).unwrap();
        assert!(f.trusted);
        let ab = (x.alpha_sq() * f.alpha_sq()).sqrt();
        assert_relative_eq!(ab, 4.0, max_relative = 1e-9);
        let wide = radial(g, |r| (-r * r / 9.0).exp());
        assert!(fourier_decay(&wide, (1.0, 5.0)).unwrap().rate > f.rate);
    }

    #[test]
    fn classifier_examples() {
        let v = classify(4.0, 4.0, ThresholdKind::Free { t: 1.0 }).unwrap();
        assert_eq!(v.classification, Classification::AtThreshold);
        let s = 4.0 * 1f64.sin();
        let v = classify(s, s, ThresholdKind::Harmonic { omega: 1.0, t: 1.0 }).unwrap();
        assert_eq!(v.classification, Classification::AtThreshold);
        let v = classify(4.0, 4.0, ThresholdKind::Harmonic { omega: 1.0, t: 1.0 }).unwrap();
        assert_eq!(v.classification, Classification::AboveThreshold);
        let v = classify(1.0, 1.0, ThresholdKind::Repulsive { nu: 0.5, t: 1.0 }).unwrap();
        assert_eq!(v.classification, Classification::BelowThreshold);
        for k in [ThresholdKind::Repulsive { nu: 1e-7, t: 1.0 }, ThresholdKind::Magnetic { b: 1e-7, t: 1.0 }] {
            assert!((k.threshold() - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn classifier_guards() {
        let e = classify(1.0, 1.0, ThresholdKind::Harmonic { omega: 2.0, t: 1.0 }).unwrap_err();
        assert!(e.to_string().contains("π/(2T)"));
        let e = classify(1.0, 1.0, ThresholdKind::Repulsive { nu: 1.0, t: 1.0 }).unwrap_err();
        assert!(e.to_string().contains("1/T"));
        assert!(classify(1.0, 1.0, ThresholdKind::Magnetic { b: 1.6, t: 1.0 }).is_err());
        assert!(classify(-1.0, 1.0, ThresholdKind::Free { t: 1.0 }).is_err());
    }

    #[test]
    fn verdict_serialises_with_kind_names() {
        let v = classify(4.0, 4.0, ThresholdKind::Free { t: 1.0 }).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        assert!(s.contains("\"free_4T\"") && s.contains("at_threshold"), "{s}");
    }
}
