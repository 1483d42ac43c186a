use ndarray::ArrayD;
use num_complex::Complex64;

use super::EquationSpec;
use crate::error::{Error, Result};
use crate::grid::{GridSpec, WaveField};
use crate::spectral::Spectral;
use crate::transforms::resample::rotate;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Clone, Debug)]
pub struct PropagateOptions {
    /// Boundary/peak ratio that aborts the run; `None` disables the check.
    pub boundary_tol: Option<f64>,
    /// Steps between boundary checks.
    pub check_every: usize,
    /// Bound on `sup|A|·kmax·dt` for the explicit transport substeps.
    pub cfl: f64,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self { boundary_tol: Some(1e-8), check_every: 16, cfl: 0.5 }
    }
}

/// Coefficients sampled on the grid at one instant.
struct Sampled {
    /// `W + |A|²`.
    w: ArrayD<Complex64>,
    /// General (non-uniform) part of `A`, one array per component.
    a: Option<Vec<ArrayD<f64>>>,
    div: Option<ArrayD<f64>>,
    a_sup: f64,
}

/// Strang splitting `P(h/2) M(h/2) K(h) M(h/2) P(h/2)` with `K` the exact free
/// flow, `P` the potential multiplier at the step midpoint and `M` the
/// magnetic transport `−2A·∇ − div A`. The uniform part of `A` transports by an
/// exact rotation; the rest uses RK4.
pub struct Propagator<'a> {
    eq: &'a EquationSpec,
    spectral: Spectral,
    opts: PropagateOptions,
    k2: ArrayD<f64>,
    cache: Option<Sampled>,
}

impl<'a> Propagator<'a> {
    pub fn new(eq: &'a EquationSpec, grid: GridSpec, opts: PropagateOptions) -> Result<Self> {
        if grid.dim() != eq.dim() {
            return Err(Error::Shape(format!("grid is {}D, equation is {}D", grid.dim(), eq.dim())));
        }
        let spectral = Spectral::new(grid);
        let k2 = spectral.k_squared();
        Ok(Self { eq, spectral, opts, k2, cache: None })
    }

    fn sample(&self, t: f64) -> Sampled {
        let grid = self.spectral.grid();
        let mag = &self.eq.magnetic;
        let wf = self.eq.electric.at(t);
        let atot = mag.at(t);
        let w = if mag.is_zero() {
            grid.sample(|x| wf(x))
        } else {
            grid.sample(|x| wf(x) + atot(x).iter().map(|v| v * v).sum::<f64>())
        };
        let (a, div, a_sup) = match &mag.general {
            None => (None, None, 0.0),
            Some(g) => {
                let gt = g(t);
                let comps = grid.sample_vec(grid.dim(), |x| gt(x));
                let dfn = mag.divergence_at(t);
                let div = grid.sample(|x| dfn(x));
                let mut sup: f64 = 0.0;
                for i in 0..grid.len() {
                    let s: f64 = comps.iter().map(|c| c.as_slice().expect("standard layout")[i].powi(2)).sum();
                    sup = sup.max(s.sqrt());
                }
                (Some(comps), Some(div), sup)
            }
        };
        Sampled { w, a, div, a_sup }
    }

    fn coefficients(&mut self, t: f64) -> Sampled {
        if self.eq.autonomous {
            if self.cache.is_none() {
                self.cache = Some(self.sample(t));
            }
            let c = self.cache.as_ref().expect("cache filled above");
            Sampled { w: c.w.clone(), a: c.a.clone(), div: c.div.clone(), a_sup: c.a_sup }
        } else {
            self.sample(t)
        }
    }

    fn transport_rhs(&self, u: &ArrayD<Complex64>, a: &[ArrayD<f64>], div: &ArrayD<f64>) -> ArrayD<Complex64> {
        let grad = self.spectral.gradient(u);
        let mut out = u * &div.mapv(|d| Complex64::new(-d, 0.0));
        for (g, ad) in grad.iter().zip(a.iter()) {
            ndarray::Zip::from(&mut out).and(g).and(ad).for_each(|o, &gi, &ai| *o -= 2.0 * ai * gi);
        }
        out
    }

    fn transport(&self, u: &mut ArrayD<Complex64>, c: &Sampled, h: f64) -> Result<()> {
        if let (Some(a), Some(div)) = (&c.a, &c.div) {
            let k1 = self.transport_rhs(u, a, div);
            let k2 = self.transport_rhs(&(&*u + &(&k1 * (h / 2.0))), a, div);
            let k3 = self.transport_rhs(&(&*u + &(&k2 * (h / 2.0))), a, div);
            let k4 = self.transport_rhs(&(&*u + &(&k3 * h)), a, div);
            *u = &*u + &((&k1 + &(&k2 * 2.0) + &(&k3 * 2.0) + &k4) * (h / 6.0));
        }
        if let Some(m) = &self.eq.magnetic.uniform {
            // u_t = −(Mx)·∇u is solved by u(e^{−Mh}x)
            let r = (-m * h).exp();
            *u = rotate(u, &self.spectral, &r)?;
        }
        Ok(())
    }

    /// Advance `field` from `field.time` to `t_target` with steps no longer than `dt`.
    pub fn advance(&mut self, field: &WaveField, t_target: f64, dt: f64) -> Result<WaveField> {
        if field.grid != *self.spectral.grid() {
            return Err(Error::Shape("field grid differs from propagator grid".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Invalid(format!("time step must be positive, got {dt}")));
        }
        for t in [field.time, t_target] {
            if !self.eq.contains(t) {
                return Err(Error::Domain(format!(
                    "time {t} lies outside the window [{}, {}]",
                    self.eq.window.0, self.eq.window.1
                )));
            }
        }
        let span = t_target - field.time;
        if span == 0.0 {
            return Ok(field.clone());
        }
        let steps = ((span.abs() / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        let kin = self.k2.mapv(|k2| Complex64::from_polar(1.0, k2 * h));
        let has_transport = !self.eq.magnetic.is_zero();
        let kmax = self.spectral.grid().kmax();

        let mut u = field.values.clone();
        let mut t = field.time;
        for step in 0..steps {
            let c = self.coefficients(t + h / 2.0);
            if c.a.is_some() && c.a_sup * kmax * h.abs() >= self.opts.cfl {
                return Err(Error::Step(format!(
                    "sup|A|·kmax·dt = {:.3} must stay below {}; reduce dt",
                    c.a_sup * kmax * h.abs(),
                    self.opts.cfl
                )));
            }
            let half = c.w.mapv(|w| (I * w * (h / 2.0)).exp());
            u *= &half;
            if has_transport {
                self.transport(&mut u, &c, h / 2.0)?;
            }
            self.spectral.forward(&mut u);
            u *= &kin;
            self.spectral.inverse(&mut u);
            if has_transport {
                self.transport(&mut u, &c, h / 2.0)?;
            }
            u *= &half;
            t = field.time + span * (step + 1) as f64 / steps as f64;
            if let Some(tol) = self.opts.boundary_tol {
                if (step + 1) % self.opts.check_every.max(1) == 0 || step + 1 == steps {
                    WaveField { grid: field.grid, values: u.clone(), time: t }.check_boundary(tol)?;
                }
            }
        }
        WaveField::new(field.grid, u, t_target)
    }
}

pub fn propagate(field: &WaveField, eq: &EquationSpec, t_target: f64, dt: f64) -> Result<WaveField> {
    propagate_with(field, eq, t_target, dt, &PropagateOptions::default())
}

pub fn propagate_with(field: &WaveField, eq: &EquationSpec, t_target: f64, dt: f64, opts: &PropagateOptions) -> Result<WaveField> {
    Propagator::new(eq, field.grid, opts.clone())?.advance(field, t_target, dt)
}
