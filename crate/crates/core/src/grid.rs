//! Uniform periodic grids and complex field snapshots.
//!
//! A [`GridSpec`] is the box `[-L, L)^n` with `N` points per axis; coordinates
//! are `x_j = -L + j * 2L/N`, so the origin is a grid point and the grid is
//! symmetric under `x -> -x` modulo the periodic image of `-L`. Fields on it
//! stand in for functions on ℝⁿ as long as they are negligible at the
//! boundary.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{ArrayD, Dimension, IxDyn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative boundary magnitude below which a field counts as compactly supported.
pub const BOUNDARY_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    points: usize,
}

impl GridSpec {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("grid dimension must be at least 1".into()));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Invalid(format!("half width must be positive, got {half_width}")));
        }
        if points < 16 || points % 2 != 0 {
            return Err(Error::Invalid(format!(
                "points per axis must be even and at least 16, got {points}"
            )));
        }
        Ok(Self { dim, half_width, points })
    }

    /// Desk-scale defaults: `L = 20, N = 1024` in 1D and `L = 12, N = 256` in 2D.
    pub fn standard(dim: usize) -> Self {
        match dim {
            1 => Self { dim, half_width: 20.0, points: 1024 },
            2 => Self { dim, half_width: 12.0, points: 256 },
            _ => Self { dim, half_width: 10.0, points: 64 },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn shape(&self) -> Vec<usize> {
        vec![self.points; self.dim]
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Largest resolved wavenumber, `π / Δx`.
    pub fn kmax(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }

    /// Coordinates along one axis.
    pub fn axis(&self) -> Vec<f64> {
        let dx = self.spacing();
        (0..self.points).map(|j| -self.half_width + j as f64 * dx).collect()
    }

    /// FFT-ordered angular wavenumbers along one axis; the Nyquist entry is negative.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = std::f64::consts::PI / self.half_width;
        let n = self.points as i64;
        (0..n).map(|j| if j < n / 2 { j as f64 * dk } else { (j - n) as f64 * dk }).collect()
    }

    /// Writes the coordinates of flat (row-major) index `flat` into `out`.
    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let dx = self.spacing();
        let mut rem = flat;
        for d in (0..self.dim).rev() {
            let i = rem % self.points;
            rem /= self.points;
            out[d] = -self.half_width + i as f64 * dx;
        }
    }

    /// Multi-index of flat index `flat`.
    pub fn index(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        let mut rem = flat;
        for d in (0..self.dim).rev() {
            idx[d] = rem % self.points;
            rem /= self.points;
        }
        idx
    }

    /// Evaluate `f` at every grid point (in parallel).
    pub fn sample<T, F>(&self, f: F) -> ArrayD<T>
    where
        T: Send + Copy,
        F: Fn(&[f64]) -> T + Sync,
    {
        let dim = self.dim;
        let data: Vec<T> = (0..self.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; dim],
                |x, i| {
                    self.point(i, x);
                    f(x)
                },
            )
            .collect();
        ArrayD::from_shape_vec(IxDyn(&self.shape()), data).expect("shape matches length")
    }

    /// Evaluate a vector-valued `f` with `comps` components; one array per component.
    pub fn sample_vec<F>(&self, comps: usize, f: F) -> Vec<ArrayD<f64>>
    where
        F: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        let dim = self.dim;
        let flat: Vec<Vec<f64>> = (0..self.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; dim],
                |x, i| {
                    self.point(i, x);
                    f(x)
                },
            )
            .collect();
        (0..comps)
            .map(|c| {
                let data = flat.iter().map(|v| v[c]).collect();
                ArrayD::from_shape_vec(IxDyn(&self.shape()), data).expect("shape matches length")
            })
            .collect()
    }

    /// `|x|²` at every grid point.
    pub fn radius_sq(&self) -> ArrayD<f64> {
        self.sample(|x| x.iter().map(|v| v * v).sum())
    }

    /// Whether `x` lies in the half-open box `[-L, L)^n`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|&v| v >= -self.half_width && v < self.half_width)
    }
}

/// A complex field on a grid at a time instant.
#[derive(Clone, Debug)]
pub struct WaveField {
    pub grid: GridSpec,
    pub values: ArrayD<Complex64>,
    pub time: f64,
}

impl WaveField {
    pub fn new(grid: GridSpec, values: ArrayD<Complex64>, time: f64) -> Result<Self> {
        if values.shape() != grid.shape().as_slice() {
            return Err(Error::Shape(format!(
                "values have shape {:?}, grid expects {:?}",
                values.shape(),
                grid.shape()
            )));
        }
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Invalid("field contains non-finite values".into()));
        }
        Ok(Self { grid, values, time })
    }

    pub fn from_fn<F>(grid: GridSpec, time: f64, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        Self { grid, values: grid.sample(f), time }
    }

    pub fn zeros(grid: GridSpec, time: f64) -> Self {
        Self { grid, values: ArrayD::zeros(IxDyn(&grid.shape())), time }
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Discrete L² norm (trapezoid rule, spectrally accurate for decaying fields).
    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Discrete `⟨self, other⟩ = ∫ conj(self) other`.
    pub fn inner(&self, other: &WaveField) -> Complex64 {
        self.values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// `‖self − other‖₂`.
    pub fn distance(&self, other: &WaveField) -> f64 {
        let s: f64 = self.values.iter().zip(other.values.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// `‖self − other‖₂ / ‖other‖₂`.
    pub fn relative_distance(&self, other: &WaveField) -> f64 {
        self.distance(other) / other.norm()
    }

    pub fn max_pointwise_distance(&self, other: &WaveField) -> f64 {
        self.values.iter().zip(other.values.iter()).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Largest magnitude on the outermost layer of cells, relative to the peak.
    pub fn boundary_ratio(&self) -> f64 {
        let peak = self.max_abs();
        if peak == 0.0 {
            return 0.0;
        }
        let n = self.grid.points;
        let edge = self
            .values
            .indexed_iter()
            .filter(|(idx, _)| idx.slice().iter().any(|&i| i == 0 || i == n - 1))
            .fold(0.0f64, |m, (_, z)| m.max(z.norm()));
        edge / peak
    }

    /// Fails when the field is not negligible on the boundary.
    pub fn check_boundary(&self, tolerance: f64) -> Result<()> {
        let ratio = self.boundary_ratio();
        if ratio > tolerance {
            return Err(Error::GridTooNarrow { ratio, tolerance });
        }
        Ok(())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.mapv(|z| z * c), time: self.time }
    }

    /// Pointwise multiplication by `f(x)`.
    pub fn multiply_by<F>(&mut self, f: F)
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let w = self.grid.sample(f);
        self.values.zip_mut_with(&w, |a, b| *a *= *b);
    }

    /// Write the binary snapshot and its JSON sidecar (`<path>.json`).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        let sidecar = SnapshotDescriptor::of(self);
        fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    /// Little-endian layout: `dim` (u64), `N` per axis (u64 each), `L` (f64),
    /// `time` (f64), then interleaved `re, im` f64 pairs in row-major order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let g = &self.grid;
        let mut out = Vec::with_capacity(8 * (3 + g.dim + 2 * g.len()));
        out.extend_from_slice(&(g.dim as u64).to_le_bytes());
        for _ in 0..g.dim {
            out.extend_from_slice(&(g.points as u64).to_le_bytes());
        }
        out.extend_from_slice(&g.half_width.to_le_bytes());
        out.extend_from_slice(&self.time.to_le_bytes());
        for z in self.values.iter() {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut words = bytes.chunks_exact(8).map(|c| <[u8; 8]>::try_from(c).unwrap());
        let bad = || Error::Invalid("truncated field snapshot".into());
        if bytes.len() % 8 != 0 {
            return Err(Error::Invalid("snapshot length is not a multiple of 8".into()));
        }
        let dim = u64::from_le_bytes(words.next().ok_or_else(bad)?) as usize;
        if dim == 0 || dim > 8 {
            return Err(Error::Invalid(format!("snapshot dimension {dim} out of range")));
        }
        let mut per_axis = Vec::with_capacity(dim);
        for _ in 0..dim {
            per_axis.push(u64::from_le_bytes(words.next().ok_or_else(bad)?) as usize);
        }
        if per_axis.iter().any(|&p| p != per_axis[0]) {
            return Err(Error::Invalid("snapshots with unequal axis sizes are not supported".into()));
        }
        let half_width = f64::from_le_bytes(words.next().ok_or_else(bad)?);
        let time = f64::from_le_bytes(words.next().ok_or_else(bad)?);
        let grid = GridSpec::new(dim, half_width, per_axis[0])?;
        let mut data = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = f64::from_le_bytes(words.next().ok_or_else(bad)?);
            let im = f64::from_le_bytes(words.next().ok_or_else(bad)?);
            data.push(Complex64::new(re, im));
        }
        if words.next().is_some() {
            return Err(Error::Invalid("trailing bytes after snapshot payload".into()));
        }
        let values = ArrayD::from_shape_vec(IxDyn(&grid.shape()), data).expect("shape matches length");
        WaveField::new(grid, values, time)
    }
}

/// JSON sidecar describing a binary snapshot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotDescriptor {
    pub dim: usize,
    pub points: Vec<usize>,
    pub half_width: f64,
    pub time: f64,
    pub header_bytes: usize,
    pub layout: String,
    pub l2_norm: f64,
}

impl SnapshotDescriptor {
    pub fn of(field: &WaveField) -> Self {
        let g = field.grid;
        Self {
            dim: g.dim,
            points: g.shape(),
            half_width: g.half_width,
            time: field.time,
            header_bytes: 8 * (3 + g.dim),
            layout: "little-endian; u64 dim; u64 points per axis; f64 half_width; f64 time; \
                     then interleaved f64 re/im, row-major"
                .into(),
            l2_norm: field.norm(),
        }
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(1, 10.0, 15).is_err());
        assert!(GridSpec::new(1, 10.0, 8).is_err());
        assert!(GridSpec::new(0, 10.0, 64).is_err());
        assert!(GridSpec::new(1, -1.0, 64).is_err());
    }

    #[test]
    fn axis_is_symmetric_about_origin() {
        let g = GridSpec::new(1, 5.0, 32).unwrap();
        let x = g.axis();
        assert_eq!(x[16], 0.0);
        for j in 1..32 {
            assert_relative_eq!(x[j], -x[32 - j], epsilon = 1e-15);
        }
    }

    #[test]
    fn wavenumbers_fft_order() {
        let g = GridSpec::new(1, std::f64::consts::PI, 16).unwrap();
        let k = g.wavenumbers();
        assert_eq!(k[0], 0.0);
        assert_eq!(k[1], 1.0);
        assert_eq!(k[8], -8.0);
        assert_eq!(k[15], -1.0);
    }

    #[test]
    fn point_matches_index() {
        let g = GridSpec::new(2, 4.0, 16).unwrap();
        let mut x = [0.0; 2];
        g.point(16 * 3 + 5, &mut x);
        let ax = g.axis();
        assert_eq!(x, [ax[3], ax[5]]);
        assert_eq!(g.index(16 * 3 + 5), vec![3, 5]);
    }

    #[test]
    fn gaussian_norm() {
        let g = GridSpec::new(1, 10.0, 256).unwrap();
        let f = WaveField::from_fn(g, 0.0, |x| Complex64::new((-x[0] * x[0]).exp(), 0.0));
        // ∫ e^{-2x²} = sqrt(π/2)
        assert_relative_eq!(f.norm_sq(), (std::f64::consts::PI / 2.0).sqrt(), max_relative = 1e-13);
        assert!(f.boundary_ratio() < 1e-40);
    }

    #[test]
    fn snapshot_round_trip() {
        let g = GridSpec::new(2, 3.0, 16).unwrap();
        let f = WaveField::from_fn(g, 0.25, |x| Complex64::new(x[0], -x[1]));
        let back = WaveField::from_bytes(&f.to_bytes()).unwrap();
        assert_eq!(back.grid, g);
        assert_eq!(back.time, 0.25);
        assert_eq!(back.values, f.values);
        assert!(WaveField::from_bytes(&f.to_bytes()[..40]).is_err());
    }
}
