//! Band-limited resampling of grid fields under affine maps `x ↦ aRx + S`.
//!
//! The map is applied as translation, then dilation, then rotation:
//! `v(x) = u(aRx + S)`. Translations are Fourier phase shifts. Dilations use
//! the periodic sinc (trigonometric) interpolant along each axis. Rotations
//! are factored into Givens plane rotations; each plane rotation is a number
//! of exact quarter turns followed by three Fourier shears.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use ndarray::{ArrayD, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::spectral::Spectral;

/// `x ↦ scale · rotation · x + shift`.
#[derive(Clone, Debug, PartialEq)]
pub struct Affine {
    pub scale: f64,
    pub rotation: DMatrix<f64>,
    pub shift: DVector<f64>,
}

impl Affine {
    pub fn identity(n: usize) -> Self {
        Self { scale: 1.0, rotation: DMatrix::identity(n, n), shift: DVector::zeros(n) }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn scaling(n: usize, a: f64) -> Self {
        Self { scale: a, ..Self::identity(n) }
    }

    pub fn translation(shift: Vec<f64>) -> Self {
        let n = shift.len();
        Self { shift: DVector::from_vec(shift), ..Self::identity(n) }
    }

    pub fn rotation(r: DMatrix<f64>) -> Self {
        let n = r.nrows();
        Self { rotation: r, ..Self::identity(n) }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        (&self.rotation * xv * self.scale + &self.shift).iter().copied().collect()
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        let shift = -(&rt * &self.shift) / self.scale;
        Self { scale: 1.0 / self.scale, rotation: rt, shift }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Affine) -> Self {
        Self {
            scale: self.scale * other.scale,
            rotation: &self.rotation * &other.rotation,
            shift: &self.rotation * &other.shift * self.scale + &self.shift,
        }
    }

    fn has_rotation(&self) -> bool {
        (&self.rotation - DMatrix::identity(self.dim(), self.dim())).amax() > 1e-15
    }
}

/// Default relative magnitude above which dropped or wrapped content is an error.
pub const TRUNCATION_TOL: f64 = 1e-10;

/// Fraction of the box radius that survives every intermediate shear of a
/// rotation without wrapping.
const ROTATION_SAFE_RADIUS: f64 = 0.65;

/// Largest magnitude, relative to the peak, of samples of `u` that the map
/// cannot represent faithfully: content outside the image of the box, or
/// close enough to the boundary to wrap during shears.
pub fn truncation_ratio(u: &ArrayD<Complex64>, grid: &GridSpec, map: &Affine) -> f64 {
    let peak = u.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    if peak == 0.0 {
        return 0.0;
    }
    let l = grid.half_width();
    // translation wraps periodically, so content must also stay inside `S + box`
    let reach = map.scale.min(1.0) * l;
    let rotates = map.has_rotation() && !is_signed_permutation(&map.rotation);
    let mut x = vec![0.0; grid.dim()];
    let mut worst = 0.0f64;
    for (i, z) in u.iter().enumerate() {
        let m = z.norm();
        if m <= worst {
            continue;
        }
        grid.point(i, &mut x);
        let outside = if rotates {
            let r2: f64 = x.iter().zip(map.shift.iter()).map(|(a, s)| (a - s) * (a - s)).sum();
            r2.sqrt() > ROTATION_SAFE_RADIUS * reach
        } else {
            x.iter().zip(map.shift.iter()).any(|(a, s)| (a - s).abs() >= reach)
        };
        if outside {
            worst = m;
        }
    }
    worst / peak
}

fn is_signed_permutation(r: &DMatrix<f64>) -> bool {
    r.iter().all(|&v| v == 0.0 || v.abs() == 1.0)
}

/// `v(x) = u(map(x))` on the same grid.
pub fn resample(u: &ArrayD<Complex64>, spectral: &Spectral, map: &Affine, tol: f64) -> Result<ArrayD<Complex64>> {
    let grid = *spectral.grid();
    if map.dim() != grid.dim() {
        return Err(Error::Shape(format!("map acts in {}D, grid is {}D", map.dim(), grid.dim())));
    }
    if !(map.scale > 0.0 && map.scale.is_finite()) {
        return Err(Error::Domain(format!("dilation factor must be positive, got {}", map.scale)));
    }
    let ratio = truncation_ratio(u, &grid, map);
    if ratio > tol {
        return Err(Error::Truncation { ratio });
    }
    let mut v = u.clone();
    if map.shift.iter().any(|&s| s != 0.0) {
        v = translate(&v, spectral, map.shift.as_slice());
    }
    if map.scale != 1.0 {
        v = dilate(&v, &grid, map.scale);
    }
    if map.has_rotation() {
        v = rotate(&v, spectral, &map.rotation)?;
    }
    Ok(v)
}

/// `v(z) = u(z + s)`; unitary on the grid, Nyquist mode included.
pub fn translate(u: &ArrayD<Complex64>, spectral: &Spectral, s: &[f64]) -> ArrayD<Complex64> {
    let m = spectral.symbol(|k| {
        let phase: f64 = k.iter().zip(s).map(|(a, b)| a * b).sum();
        Complex64::from_polar(1.0, phase)
    });
    spectral.apply_symbol(u, &m)
}

/// Periodic sinc interpolation matrix from grid points to `a·x_i`; rows for
/// targets outside `[−L, L)` are zero.
pub fn dilation_matrix(grid: &GridSpec, a: f64) -> DMatrix<f64> {
    let n = grid.points();
    let l = grid.half_width();
    let x = grid.axis();
    let nf = n as f64;
    DMatrix::from_fn(n, n, |i, j| {
        let y = a * x[i];
        if y < -l || y >= l {
            return 0.0;
        }
        let theta = PI * (y - x[j]) / l;
        let half = (theta / 2.0).sin();
        if half.abs() < 1e-14 {
            1.0
        } else {
            (nf * theta / 2.0).sin() * (theta / 2.0).cos() / half / nf
        }
    })
}

/// `v(w) = u(a·w)` by trigonometric interpolation along every axis.
pub fn dilate(u: &ArrayD<Complex64>, grid: &GridSpec, a: f64) -> ArrayD<Complex64> {
    let p = dilation_matrix(grid, a);
    let n = grid.points();
    let mut v = u.clone();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for d in 0..grid.dim() {
        for mut lane in v.lanes_mut(Axis(d)) {
            for (i, b) in buf.iter_mut().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, z) in lane.iter().enumerate() {
                    acc += z * p[(i, j)];
                }
                *b = acc;
            }
            for (z, b) in lane.iter_mut().zip(buf.iter()) {
                *z = *b;
            }
        }
    }
    v
}

/// One plane rotation `G` acting on axes `(p, q)` by angle `theta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Givens {
    pub p: usize,
    pub q: usize,
    pub theta: f64,
}

impl Givens {
    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        let mut g = DMatrix::identity(n, n);
        let (s, c) = self.theta.sin_cos();
        g[(self.p, self.p)] = c;
        g[(self.p, self.q)] = -s;
        g[(self.q, self.p)] = s;
        g[(self.q, self.q)] = c;
        g
    }
}

/// Factor an orthogonal `R` as `G₁ G₂ ⋯ Gₘ D` with plane rotations `Gₖ` and a
/// diagonal `D` of signs.
pub fn givens_factor(r: &DMatrix<f64>) -> Result<(Vec<Givens>, Vec<f64>)> {
    let n = r.nrows();
    if r.ncols() != n || (r.transpose() * r - DMatrix::identity(n, n)).amax() > 1e-10 {
        return Err(Error::Invalid("rotation matrix is not orthogonal".into()));
    }
    let mut q = r.clone();
    let mut gs = Vec::new();
    for j in 0..n {
        for i in (j + 1..n).rev() {
            let (a, b) = (q[(i - 1, j)], q[(i, j)]);
            if b == 0.0 {
                continue;
            }
            let g = Givens { p: i - 1, q: i, theta: b.atan2(a) };
            q = g.matrix(n).transpose() * q;
            gs.push(g);
        }
    }
    let signs = (0..n).map(|i| if q[(i, i)] < 0.0 { -1.0 } else { 1.0 }).collect();
    Ok((gs, signs))
}

/// `v(x) = u(Rx)` for orthogonal `R`.
pub fn rotate(u: &ArrayD<Complex64>, spectral: &Spectral, r: &DMatrix<f64>) -> Result<ArrayD<Complex64>> {
    let (gs, signs) = givens_factor(r)?;
    let mut v = u.clone();
    for g in gs {
        v = rotate_plane(&v, spectral, g.p, g.q, g.theta);
    }
    for (axis, s) in signs.iter().enumerate() {
        if *s < 0.0 {
            v = reflect(&v, axis);
        }
    }
    Ok(v)
}

/// `v(x) = u(x)` with `x_axis ↦ −x_axis`; exact on the symmetric grid.
pub fn reflect(u: &ArrayD<Complex64>, axis: usize) -> ArrayD<Complex64> {
    let n = u.shape()[axis];
    let mut v = u.clone();
    for (mut dst, src) in v.lanes_mut(Axis(axis)).into_iter().zip(u.lanes(Axis(axis))) {
        for i in 0..n {
            dst[i] = src[(n - i) % n];
        }
    }
    v
}

/// `v(x) = u(G x)` for the rotation by `theta` in the `(p, q)` plane.
pub fn rotate_plane(u: &ArrayD<Complex64>, spectral: &Spectral, p: usize, q: usize, theta: f64) -> ArrayD<Complex64> {
    let turns = (theta / FRAC_PI_2).round();
    let rest = theta - turns * FRAC_PI_2;
    debug_assert!(rest.abs() <= FRAC_PI_4 + 1e-12);
    let mut v = u.clone();
    for _ in 0..(turns as i64).rem_euclid(4) {
        v = quarter_turn(&v, p, q);
    }
    if rest != 0.0 {
        let a = -(rest / 2.0).tan();
        let b = rest.sin();
        v = shear(&v, spectral, p, q, a);
        v = shear(&v, spectral, q, p, b);
        v = shear(&v, spectral, p, q, a);
    }
    v
}

/// `v(x) = u(x_p ↦ −x_q, x_q ↦ x_p)`, i.e. composition with a quarter turn.
fn quarter_turn(u: &ArrayD<Complex64>, p: usize, q: usize) -> ArrayD<Complex64> {
    let n = u.shape()[p];
    let mut v = u.clone();
    for (idx, z) in v.indexed_iter_mut() {
        let mut src = idx.clone();
        src[p] = (n - idx[q]) % n;
        src[q] = idx[p];
        *z = u[src];
    }
    v
}

/// `v(x) = u(x + c·x_src·e_dst)`: shift along axis `dst` proportional to `x_src`.
fn shear(u: &ArrayD<Complex64>, spectral: &Spectral, dst: usize, src: usize, c: f64) -> ArrayD<Complex64> {
    let grid = spectral.grid();
    let n = grid.points();
    let x = grid.axis();
    let k = spectral.wavenumbers();
    let fft = rustfft::FftPlanner::new().plan_fft_forward(n);
    let ifft = rustfft::FftPlanner::new().plan_fft_inverse(n);
    let mut v = u.clone();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    // lanes along `dst` enumerate the remaining axes in row-major order
    let shape = u.shape().to_vec();
    let stride_src: usize = shape.iter().enumerate().filter(|&(d, _)| d != dst && d > src).map(|(_, &s)| s).product();
    for (li, mut lane) in v.lanes_mut(Axis(dst)).into_iter().enumerate() {
        let i_src = (li / stride_src) % n;
        let delta = c * x[i_src];
        for (b, z) in buf.iter_mut().zip(lane.iter()) {
            *b = *z;
        }
        fft.process(&mut buf);
        for (b, kk) in buf.iter_mut().zip(k) {
            *b *= Complex64::from_polar(1.0 / n as f64, kk * delta);
        }
        ifft.process(&mut buf);
        for (z, b) in lane.iter_mut().zip(buf.iter()) {
            *z = *b;
        }
    }
    v
}
