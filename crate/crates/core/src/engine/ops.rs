use ndarray::ArrayD;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::MagneticPotential;
use crate::grid::WaveField;
use crate::spectral::Spectral;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Spectral `Δu`.
pub fn laplacian(field: &WaveField) -> WaveField {
    let s = Spectral::new(field.grid);
    WaveField { grid: field.grid, values: s.laplacian(&field.values), time: field.time }
}

/// `Δ_A u = Δu − i(div A)u − 2iA·∇u − |A|²u` with `A` taken at `field.time`.
pub fn magnetic_laplacian(field: &WaveField, a: &MagneticPotential) -> WaveField {
    let s = Spectral::new(field.grid);
    let values = magnetic_laplacian_values(&s, &field.values, a, field.time);
    WaveField { grid: field.grid, values, time: field.time }
}

pub(crate) fn magnetic_laplacian_values(s: &Spectral, u: &ArrayD<Complex64>, a: &MagneticPotential, t: f64) -> ArrayD<Complex64> {
    let mut out = s.laplacian(u);
    if a.is_zero() {
        return out;
    }
    let grid = s.grid();
    let af = a.at(t);
    let div = a.divergence_at(t);
    let av = grid.sample_vec(grid.dim(), |x| af(x));
    let dv = grid.sample(|x| div(x));
    let grad = s.gradient(u);
    for (idx, o) in out.indexed_iter_mut() {
        let mut adotgrad = Complex64::new(0.0, 0.0);
        let mut a2 = 0.0;
        for (g, a) in grad.iter().zip(av.iter()) {
            let ai = a[&idx];
            adotgrad += g[&idx] * ai;
            a2 += ai * ai;
        }
        let ui = u[&idx];
        *o += -I * dv[&idx] * ui - 2.0 * I * adotgrad - a2 * ui;
    }
    out
}

/// `L u = −i(x₁∂₂ − x₂∂₁)u` on a 2D grid.
pub fn angular_momentum(field: &WaveField) -> Result<WaveField> {
    if field.grid.dim() != 2 {
        return Err(Error::Shape("angular momentum is defined on 2D grids".into()));
    }
    let s = Spectral::new(field.grid);
    let grad = s.gradient(&field.values);
    let x = field.grid.axis();
    let mut out = field.values.clone();
    for (idx, o) in out.indexed_iter_mut() {
        let (x1, x2) = (x[idx[0]], x[idx[1]]);
        *o = -I * (x1 * grad[1][&idx] - x2 * grad[0][&idx]);
    }
    Ok(WaveField { grid: field.grid, values: out, time: field.time })
}
