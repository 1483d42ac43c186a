//! Fourier transforms along every axis of a grid field, and the spectral
//! derivatives built on them.

use std::sync::Arc;

use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::GridSpec;

/// FFT plans and wavenumbers for one grid. Cheap to clone.
#[derive(Clone)]
pub struct Spectral {
    grid: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish_non_exhaustive()
    }
}

impl Spectral {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(grid.points());
        let inv = planner.plan_fft_inverse(grid.points());
        Self { grid, fwd, inv, k: grid.wavenumbers() }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.k
    }

    fn transform(&self, a: &mut ArrayD<Complex64>, plan: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points();
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for d in 0..a.ndim() {
            for mut lane in a.lanes_mut(Axis(d)) {
                match lane.as_slice_mut() {
                    Some(s) => plan.process_with_scratch(s, &mut scratch),
                    None => {
                        for (b, v) in buf.iter_mut().zip(lane.iter()) {
                            *b = *v;
                        }
                        plan.process_with_scratch(&mut buf, &mut scratch);
                        for (v, b) in lane.iter_mut().zip(buf.iter()) {
                            *v = *b;
                        }
                    }
                }
            }
        }
    }

    /// Unnormalised forward DFT over all axes.
    pub fn forward(&self, a: &mut ArrayD<Complex64>) {
        self.transform(a, &self.fwd);
    }

    /// Inverse DFT over all axes, scaled so that `inverse(forward(a)) == a`.
    pub fn inverse(&self, a: &mut ArrayD<Complex64>) {
        self.transform(a, &self.inv);
        let scale = 1.0 / self.grid.len() as f64;
        a.mapv_inplace(|z| z * scale);
    }

    /// Values of `f(k)` on the FFT-ordered wavenumber lattice.
    pub fn symbol<F>(&self, f: F) -> ArrayD<Complex64>
    where
        F: Fn(&[f64]) -> Complex64,
    {
        let dim = self.grid.dim();
        let mut kv = vec![0.0; dim];
        ArrayD::from_shape_fn(IxDyn(&self.grid.shape()), |idx| {
            for (d, slot) in kv.iter_mut().enumerate() {
                *slot = self.k[idx[d]];
            }
            f(&kv)
        })
    }

    /// `|k|²` on the wavenumber lattice.
    pub fn k_squared(&self) -> ArrayD<f64> {
        let dim = self.grid.dim();
        ArrayD::from_shape_fn(IxDyn(&self.grid.shape()), |idx| {
            (0..dim).map(|d| self.k[idx[d]] * self.k[idx[d]]).sum()
        })
    }

    /// `F⁻¹[m · F[a]]`.
    pub fn apply_symbol(&self, a: &ArrayD<Complex64>, m: &ArrayD<Complex64>) -> ArrayD<Complex64> {
        let mut h = a.clone();
        self.forward(&mut h);
        h.zip_mut_with(m, |x, y| *x *= *y);
        self.inverse(&mut h);
        h
    }

    pub fn laplacian(&self, a: &ArrayD<Complex64>) -> ArrayD<Complex64> {
        let mut h = a.clone();
        self.forward(&mut h);
        h.zip_mut_with(&self.k_squared(), |x, k2| *x *= -k2);
        self.inverse(&mut h);
        h
    }

    /// Spectral gradient; the Nyquist mode of each odd derivative is dropped
    /// so that real fields stay real.
    pub fn gradient(&self, a: &ArrayD<Complex64>) -> Vec<ArrayD<Complex64>> {
        let mut h = a.clone();
        self.forward(&mut h);
        let nyq = self.grid.points() / 2;
        (0..self.grid.dim())
            .map(|d| {
                let mut g = h.clone();
                for (idx, z) in g.indexed_iter_mut() {
                    let j = idx[d];
                    *z *= if j == nyq { Complex64::new(0.0, 0.0) } else { Complex64::new(0.0, self.k[j]) };
                }
                self.inverse(&mut g);
                g
            })
            .collect()
    }

    /// Spectral divergence of a vector field given as components.
    pub fn divergence(&self, comps: &[ArrayD<Complex64>]) -> ArrayD<Complex64> {
        let mut out = ArrayD::zeros(IxDyn(&self.grid.shape()));
        for (d, c) in comps.iter().enumerate() {
            let g = self.gradient(c).swap_remove(d);
            out += &g;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::WaveField;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn round_trip_is_identity() {
        let g = GridSpec::new(2, 3.0, 16).unwrap();
        let s = Spectral::new(g);
        let f = WaveField::from_fn(g, 0.0, |x| Complex64::new(x[0].sin(), x[1] * x[0]));
        let mut a = f.values.clone();
        s.forward(&mut a);
        s.inverse(&mut a);
        let err = a.iter().zip(f.values.iter()).fold(0.0f64, |m, (p, q)| m.max((p - q).norm()));
        assert!(err < 1e-13);
    }

    #[test]
    fn plane_wave_is_eigenfunction() {
        let g = GridSpec::new(1, std::f64::consts::PI, 32).unwrap();
        let s = Spectral::new(g);
        let f = WaveField::from_fn(g, 0.0, |x| Complex64::new(0.0, 3.0 * x[0]).exp());
        let lap = s.laplacian(&f.values);
        for (l, u) in lap.iter().zip(f.values.iter()) {
            assert!((l + 9.0 * u).norm() < 1e-11);
        }
    }

    #[test]
    fn gaussian_derivatives() {
        let g = GridSpec::new(1, 10.0, 256).unwrap();
        let s = Spectral::new(g);
        let f = WaveField::from_fn(g, 0.0, |x| c((-x[0] * x[0]).exp()));
        let lap = s.laplacian(&f.values);
        let grad = s.gradient(&f.values);
        let x = g.axis();
        for j in 0..256 {
            let e = (-x[j] * x[j]).exp();
            assert!((lap[[j]] - c((4.0 * x[j] * x[j] - 2.0) * e)).norm() < 1e-10);
            assert!((grad[0][[j]] - c(-2.0 * x[j] * e)).norm() < 1e-10);
        }
    }

    #[test]
    fn constant_has_zero_laplacian() {
        let g = GridSpec::new(2, 5.0, 16).unwrap();
        let s = Spectral::new(g);
        let a = ArrayD::from_elem(IxDyn(&[16, 16]), c(2.5));
        assert!(s.laplacian(&a).iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn divergence_of_rotation_field_vanishes() {
        let g = GridSpec::new(2, 8.0, 64).unwrap();
        let s = Spectral::new(g);
        let w = |x: &[f64]| (-(x[0] * x[0] + x[1] * x[1])).exp();
        let a1 = g.sample(|x| c(-x[1] * w(x)));
        let a2 = g.sample(|x| c(x[0] * w(x)));
        let div = s.divergence(&[a1, a2]);
        assert!(div.iter().all(|z| z.norm() < 1e-11));
    }
}
