use num_complex::Complex64;

use super::ops::magnetic_laplacian_values;
use super::EquationSpec;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, WaveField};
use crate::spectral::Spectral;

/// Default step for the time difference quotient.
pub const FD_TIME_STEP: f64 = 1e-3;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `∂ₜu` at time `t` on the grid by the fourth-order central quotient.
pub fn time_derivative<F>(u: &F, grid: &GridSpec, t: f64, h: f64) -> WaveField
where
    F: Fn(&[f64], f64) -> Complex64 + Sync,
{
    let values = grid.sample(|x| {
        (u(x, t - 2.0 * h) - 8.0 * u(x, t - h) + 8.0 * u(x, t + h) - u(x, t + 2.0 * h)) / (12.0 * h)
    });
    WaveField { grid: *grid, values, time: t }
}

/// `i∂ₜu − Δ_A u + W u` for a candidate solution given pointwise.
///
/// Space derivatives are spectral, so `u(·, t)` must be resolved and decayed on
/// the grid; the time derivative uses steps of `h`.
pub fn residual<F>(u: &F, eq: &EquationSpec, grid: &GridSpec, t: f64, h: f64) -> Result<WaveField>
where
    F: Fn(&[f64], f64) -> Complex64 + Sync,
{
    if grid.dim() != eq.dim() {
        return Err(Error::Shape(format!("grid is {}D, equation is {}D", grid.dim(), eq.dim())));
    }
    let s = Spectral::new(*grid);
    let now = grid.sample(|x| u(x, t));
    let dt = time_derivative(u, grid, t, h);
    let lap = magnetic_laplacian_values(&s, &now, &eq.magnetic, t);
    let w = eq.electric.at(t);
    let wv = grid.sample(|x| w(x));
    let mut r = dt.values.mapv(|z| I * z);
    r -= &lap;
    r += &(&wv * &now);
    WaveField::new(*grid, r, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_free_solution_has_small_residual() {
        // u = (1 − 4it)^{-1/2} exp(−|x|²/(1 − 4it)) solves i∂ₜu − Δu = 0
        let g = GridSpec::new(1, 12.0, 256).unwrap();
        let eq = EquationSpec::free(1, (0.0, 1.0)).unwrap();
        let u = |x: &[f64], t: f64| {
            let d = Complex64::new(1.0, -4.0 * t);
            d.powf(-0.5) * (-(x[0] * x[0]) / d).exp()
        };
        let r = residual(&u, &eq, &g, 0.3, 1e-3).unwrap();
        assert!(r.max_abs() < 1e-9, "{}", r.max_abs());
        let wrong = |x: &[f64], t: f64| u(x, -t);
        assert!(residual(&wrong, &eq, &g, 0.3, 1e-3).unwrap().max_abs() > 1e-2);
    }
}
