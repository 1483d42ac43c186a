use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{make_uniform_magnetic, standard_pairing};
use crate::grid::WaveField;
use crate::spectral::Spectral;
use crate::transforms::records::{harmonic_removal_on, repulsive_removal_on, rotating_frame, TransformRecord};

/// Exact free flow `e^{i|k|²t}` on the grid, from `field.time` to `t`.
pub fn free_propagate(field: &WaveField, t: f64) -> WaveField {
    let s = Spectral::new(field.grid);
    let dt = t - field.time;
    let m = s.k_squared().mapv(|k2| Complex64::from_polar(1.0, k2 * dt));
    WaveField { grid: field.grid, values: s.apply_symbol(&field.values, &m), time: t }
}

/// Run `data` (taken as the state at time 0) through `rec`, flow freely, and map back.
fn through_free_frame(rec: &TransformRecord, data: &WaveField, t: f64) -> Result<WaveField> {
    let start = WaveField { time: 0.0, ..data.clone() };
    let phi0 = rec.apply(&start)?;
    let phi = free_propagate(&phi0, rec.target_time(t));
    rec.inverse().apply(&phi)
}

fn window(t: f64) -> (f64, f64) {
    (t.min(0.0), t.max(0.0))
}

/// Solution at `data.time + t` of `i∂ₜu − Δu + (ω²/4)|x|²u = 0`, for `|ωt| < π/2`.
pub fn harmonic_oracle(data: &WaveField, omega: f64, t: f64) -> Result<WaveField> {
    if t == 0.0 {
        return Ok(data.clone());
    }
    let rec = harmonic_removal_on(data.grid.dim(), omega, window(t))?;
    let mut u = through_free_frame(&rec, data, t)?;
    u.time = data.time + t;
    Ok(u)
}

/// Solution at `data.time + t` of `i∂ₜu − Δu − (ν²/4)|x|²u = 0`, for `|νt| < 1`.
pub fn repulsive_oracle(data: &WaveField, nu: f64, t: f64) -> Result<WaveField> {
    if t == 0.0 {
        return Ok(data.clone());
    }
    let rec = repulsive_removal_on(data.grid.dim(), nu, window(t))?;
    let mut u = through_free_frame(&rec, data, t)?;
    u.time = data.time + t;
    Ok(u)
}

/// Solution at `data.time + t` of `i∂ₜu − Δ_A u = 0` with the uniform potential
/// `A = Mx/2` of strength `b` on consecutive axis pairs, for `|bt| < π/2`.
///
/// In the rotating frame `φ(x,t) = u(e^{Mt}x, t)` the equation is the
/// oscillator with `ω = b`, so `u(y,t) = φ(e^{−Mt}y, t)`.
pub fn magnetic_oracle(data: &WaveField, b: f64, t: f64) -> Result<WaveField> {
    let dim = data.grid.dim();
    if dim % 2 != 0 {
        return Err(Error::Guard(format!("uniform magnetic oracle needs even n; got n = {dim}")));
    }
    if t == 0.0 {
        return Ok(data.clone());
    }
    let m = make_uniform_magnetic(dim, b, &standard_pairing(dim))?
        .uniform
        .expect("uniform part is set");
    let start = WaveField { time: 0.0, ..data.clone() };
    let phi = harmonic_oracle(&start, b, t)?;
    let mut u = rotating_frame(m, window(t))?.inverse().apply(&phi)?;
    u.time = data.time + t;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{propagate, EquationSpec};
    use crate::grid::GridSpec;

    fn packet(g: GridSpec) -> WaveField {
        WaveField::from_fn(g, 0.0, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex64::new(1.0, 0.5 * x[0]) * (-(r2 / 2.0) + 0.3 * x[0]).exp()
        })
    }

    #[test]
    fn free_matches_gaussian_formula() {
        let g = GridSpec::new(1, 20.0, 512).unwrap();
        let u0 = WaveField::from_fn(g, 0.0, |x| Complex64::new((-(x[0] * x[0])).exp(), 0.0));
        let u = free_propagate(&u0, 0.4);
        let d = Complex64::new(1.0, -1.6);
        let exact = WaveField::from_fn(g, 0.4, |x| d.powf(-0.5) * (-(x[0] * x[0]) / d).exp());
        assert!(u.max_pointwise_distance(&exact) < 1e-12);
    }

    #[test]
    fn harmonic_oracle_matches_stepper() {
        let g = GridSpec::new(1, 20.0, 512).unwrap();
        let u0 = packet(g);
        for t in [0.4f64, -0.3] {
            let eq = EquationSpec::harmonic(1, 1.0, (t.min(0.0), t.max(0.0))).unwrap();
            let a = harmonic_oracle(&u0, 1.0, t).unwrap();
            let b = propagate(&u0, &eq, t, 1e-3).unwrap();
            assert!(a.relative_distance(&b) < 1e-6, "t={t}: {}", a.relative_distance(&b));
        }
    }

    #[test]
    fn repulsive_oracle_matches_stepper() {
        let g = GridSpec::new(1, 24.0, 512).unwrap();
        let u0 = packet(g);
        let eq = EquationSpec::repulsive(1, 0.8, (0.0, 0.5)).unwrap();
        let a = repulsive_oracle(&u0, 0.8, 0.5).unwrap();
        let b = propagate(&u0, &eq, 0.5, 1e-3).unwrap();
        assert!(a.relative_distance(&b) < 1e-6, "{}", a.relative_distance(&b));
    }

    #[test]
    fn magnetic_oracle_matches_stepper() {
        let g = GridSpec::new(2, 16.0, 160).unwrap();
        let u0 = packet(g);
        let eq = EquationSpec::uniform_magnetic(2, 1.0, (0.0, 0.6)).unwrap();
        let a = magnetic_oracle(&u0, 1.0, 0.6).unwrap();
        let b = propagate(&u0, &eq, 0.6, 2e-3).unwrap();
        assert!(a.relative_distance(&b) < 1e-5, "{}", a.relative_distance(&b));
    }
}
