use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::resample::{resample, Affine, TRUNCATION_TOL};
use crate::engine::{EquationSpec, Regime};
use crate::error::{Error, Result};
use crate::fields::{ElectricPotential, MagneticPotential, Spatial, TimeFn, TimeSlice, VecTimeFn};
use crate::grid::WaveField;
use crate::quad;
use crate::spectral::Spectral;

/// Relative tolerance for the time integrals inside weights and paths.
pub const TIME_QUAD_TOL: f64 = 1e-12;

type SpaceMap = Arc<dyn Fn(f64) -> Affine + Send + Sync>;
type Rewrite = Arc<dyn Fn(&EquationSpec) -> Result<EquationSpec> + Send + Sync>;

/// A change of variables `φ(x, s) = W(x, s) · u(X(x, s), τ(s))` with `X` affine.
///
/// `s` ranges over `domain`; `source_time` is `τ` and `target_time` its inverse.
#[derive(Clone)]
pub struct TransformRecord {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub dim: usize,
    pub domain: (f64, f64),
    source_time: TimeFn,
    target_time: TimeFn,
    space: SpaceMap,
    weight: TimeSlice<Complex64>,
    rewrite: Option<Rewrite>,
}

impl fmt::Debug for TransformRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransformRecord")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

/// Serializable summary of a record.
#[derive(Clone, Debug, Serialize)]
pub struct RecordSummary {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub dim: usize,
    pub domain: (f64, f64),
    pub has_rewrite: bool,
}

impl TransformRecord {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        params: BTreeMap<String, f64>,
        dim: usize,
        domain: (f64, f64),
        source_time: TimeFn,
        target_time: TimeFn,
        space: SpaceMap,
        weight: TimeSlice<Complex64>,
        rewrite: Option<Rewrite>,
    ) -> Result<Self> {
        if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 <= domain.1) {
            return Err(Error::Domain(format!("transform domain [{}, {}] is invalid", domain.0, domain.1)));
        }
        Ok(Self { name: name.into(), params, dim, domain, source_time, target_time, space, weight, rewrite })
    }

    pub fn summary(&self) -> RecordSummary {
        RecordSummary {
            name: self.name.clone(),
            params: self.params.clone(),
            dim: self.dim,
            domain: self.domain,
            has_rewrite: self.rewrite.is_some(),
        }
    }

    /// `τ(s)`: the time of the input field that feeds new time `s`.
    pub fn source_time(&self, s: f64) -> f64 {
        (self.source_time)(s)
    }

    /// `τ⁻¹(t)`.
    pub fn target_time(&self, t: f64) -> f64 {
        (self.target_time)(t)
    }

    pub fn space_map(&self, s: f64) -> Affine {
        (self.space)(s)
    }

    pub fn weight_at(&self, s: f64) -> Spatial<Complex64> {
        (self.weight)(s)
    }

    /// Range of input times covered by the domain.
    pub fn source_range(&self) -> (f64, f64) {
        let (a, b) = (self.source_time(self.domain.0), self.source_time(self.domain.1));
        (a.min(b), a.max(b))
    }

    pub fn in_domain(&self, s: f64) -> bool {
        let slack = 1e-12 * (1.0 + self.domain.0.abs().max(self.domain.1.abs()));
        s >= self.domain.0 - slack && s <= self.domain.1 + slack
    }

    pub fn apply(&self, u: &WaveField) -> Result<WaveField> {
        self.apply_with(u, TRUNCATION_TOL)
    }

    /// Transform a field at time `τ(s)` into the new field at time `s`.
    pub fn apply_with(&self, u: &WaveField, tol: f64) -> Result<WaveField> {
        if u.grid.dim() != self.dim {
            return Err(Error::Shape(format!("{} acts in {}D, field is {}D", self.name, self.dim, u.grid.dim())));
        }
        let s = self.target_time(u.time);
        if !self.in_domain(s) {
            return Err(Error::Domain(format!(
                "{}: field time {} maps to s = {s}, outside [{}, {}]",
                self.name, u.time, self.domain.0, self.domain.1
            )));
        }
        let spectral = Spectral::new(u.grid);
        let v = resample(&u.values, &spectral, &self.space_map(s), tol)?;
        let mut out = WaveField::new(u.grid, v, s)?;
        let w = self.weight_at(s);
        out.multiply_by(|x| w(x));
        Ok(out)
    }

    /// The equation satisfied by the transformed field.
    pub fn rewrite(&self, eq: &EquationSpec) -> Result<EquationSpec> {
        match &self.rewrite {
            Some(r) => r(eq),
            None => Err(Error::Invalid(format!("{} carries no potential rewrite", self.name))),
        }
    }

    /// `u(y, t) = φ(X⁻¹y, s) / W(X⁻¹y, s)` with `s = τ⁻¹(t)`.
    pub fn inverse(&self) -> TransformRecord {
        let space = self.space.clone();
        let to_s = self.target_time.clone();
        let inv_space: SpaceMap = Arc::new(move |t| space(to_s(t)).inverse());
        let space = self.space.clone();
        let weight = self.weight.clone();
        let to_s = self.target_time.clone();
        let inv_weight: TimeSlice<Complex64> = Arc::new(move |t| {
            let s = to_s(t);
            let m = space(s).inverse();
            let w = weight(s);
            Arc::new(move |y: &[f64]| 1.0 / w(&m.apply(y)))
        });
        TransformRecord {
            name: format!("inverse_{}", self.name),
            params: self.params.clone(),
            dim: self.dim,
            domain: self.source_range(),
            source_time: self.target_time.clone(),
            target_time: self.source_time.clone(),
            space: inv_space,
            weight: inv_weight,
            rewrite: None,
        }
    }
}

/// A sequence of records applied left to right.
#[derive(Clone, Debug)]
pub struct TransformChain {
    pub records: Vec<TransformRecord>,
}

impl TransformChain {
    pub fn new(records: Vec<TransformRecord>) -> Result<Self> {
        for pair in records.windows(2) {
            let (first, second) = (&pair[0], &pair[1]);
            if first.dim != second.dim {
                return Err(Error::Shape(format!("{} is {}D, {} is {}D", first.name, first.dim, second.name, second.dim)));
            }
            let (a, b) = second.source_range();
            if b < first.domain.0 - 1e-12 || a > first.domain.1 + 1e-12 {
                return Err(Error::Domain(format!(
                    "{} needs input times in [{a}, {b}] but {} produces [{}, {}]",
                    second.name, first.name, first.domain.0, first.domain.1
                )));
            }
        }
        Ok(Self { records })
    }

    pub fn apply(&self, u: &WaveField) -> Result<WaveField> {
        let mut v = u.clone();
        for r in &self.records {
            v = r.apply(&v)?;
        }
        Ok(v)
    }

    pub fn rewrite(&self, eq: &EquationSpec) -> Result<EquationSpec> {
        let mut e = eq.clone();
        for r in &self.records {
            e = r.rewrite(&e)?;
        }
        Ok(e)
    }

    pub fn inverse(&self) -> Result<Self> {
        Self::new(self.records.iter().rev().map(TransformRecord::inverse).collect())
    }
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn identity_time() -> TimeFn {
    Arc::new(|t| t)
}

/// `∫₀ᵗ f`.
fn integral_from_zero(f: impl Fn(f64) -> f64, t: f64) -> Result<f64> {
    quad::integrate(f, 0.0, t, TIME_QUAD_TOL)
}

/// Window of the rewritten equation: the image of the old one, clipped to the domain.
fn new_window(record: &TransformRecord, eq: &EquationSpec) -> Result<(f64, f64)> {
    let (a, b) = (record.target_time(eq.window.0), record.target_time(eq.window.1));
    let lo = a.min(b).max(record.domain.0);
    let hi = a.max(b).min(record.domain.1);
    if hi <= lo {
        return Err(Error::Domain(format!(
            "{}: equation window [{}, {}] does not meet the domain [{}, {}]",
            record.name, eq.window.0, eq.window.1, record.domain.0, record.domain.1
        )));
    }
    Ok((lo, hi))
}

fn check_dim(record_dim: usize, eq: &EquationSpec) -> Result<()> {
    if eq.dim() != record_dim {
        return Err(Error::Shape(format!("transform is {record_dim}D, equation is {}D", eq.dim())));
    }
    Ok(())
}

/// `φ = e^{−i∫₀ᵗ k} u` removes the spatially constant term `k(t)`.
pub fn phase_removal(dim: usize, k: TimeFn, domain: (f64, f64)) -> Result<TransformRecord> {
    let kk = k.clone();
    let weight: TimeSlice<Complex64> = Arc::new(move |s| {
        let theta = integral_from_zero(|t| kk(t), s).unwrap_or(f64::NAN);
        let w = Complex64::from_polar(1.0, -theta);
        Arc::new(move |_| w)
    });
    let space: SpaceMap = Arc::new(move |_| Affine::identity(dim));
    let rewrite: Rewrite = Arc::new(move |eq| {
        check_dim(dim, eq)?;
        let mut e = eq.clone();
        let old = eq.electric.phase_drive.clone();
        let k = k.clone();
        e.electric.phase_drive = match old {
            None => Some(Arc::new(move |t| -k(t))),
            Some(o) => Some(Arc::new(move |t| o(t) - k(t))),
        };
        e.regime = Regime::General;
        Ok(e)
    });
    TransformRecord::new("phase_removal", BTreeMap::new(), dim, domain, identity_time(), identity_time(), space, weight, Some(rewrite))
}

/// A translation path `S(t)` with its first two derivatives.
#[derive(Clone)]
pub struct Path {
    pub position: VecTimeFn,
    pub velocity: VecTimeFn,
    pub acceleration: VecTimeFn,
}

impl Path {
    /// `S(t) = −2(∫₀ᵗ(t−τ)E(τ)dτ − (t/T)∫₀ᵀ(T−τ)E(τ)dτ)`, so `S(0) = S(T) = 0`
    /// and `S̈ = −2E`.
    pub fn from_electric(dim: usize, e: VecTimeFn, t_end: f64) -> Result<Self> {
        if !(t_end > 0.0) {
            return Err(Error::Domain(format!("electric removal needs T > 0, got {t_end}")));
        }
        let moment = move |e: &VecTimeFn, t: f64| -> Result<(Vec<f64>, Vec<f64>)> {
            let i1 = quad::integrate_vec(|s, out| out.copy_from_slice(&e(s)), dim, 0.0, t, TIME_QUAD_TOL)?;
            let i2 = quad::integrate_vec(
                |s, out| {
                    for (o, v) in out.iter_mut().zip(e(s)) {
                        *o = (t - s) * v;
                    }
                },
                dim,
                0.0,
                t,
                TIME_QUAD_TOL,
            )?;
            Ok((i1, i2))
        };
        let (_, i2_end) = moment(&e, t_end)?;
        let e1 = e.clone();
        let end1 = i2_end.clone();
        let position: VecTimeFn = Arc::new(move |t| match moment(&e1, t) {
            Ok((_, i2)) => i2.iter().zip(&end1).map(|(a, b)| -2.0 * (a - t / t_end * b)).collect(),
            Err(_) => vec![f64::NAN; dim],
        });
        let e2 = e.clone();
        let velocity: VecTimeFn = Arc::new(move |t| match moment(&e2, t) {
            Ok((i1, _)) => i1.iter().zip(&i2_end).map(|(a, b)| -2.0 * (a - b / t_end)).collect(),
            Err(_) => vec![f64::NAN; dim],
        });
        let acceleration: VecTimeFn = Arc::new(move |t| e(t).iter().map(|v| -2.0 * v).collect());
        Ok(Self { position, velocity, acceleration })
    }

    /// `S(t) = S₀ + tV`.
    pub fn linear(s0: Vec<f64>, v: Vec<f64>) -> Self {
        let n = v.len();
        let v2 = v.clone();
        Self {
            position: Arc::new(move |t| s0.iter().zip(&v).map(|(a, b)| a + t * b).collect()),
            velocity: Arc::new(move |_| v2.clone()),
            acceleration: Arc::new(move |_| vec![0.0; n]),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn shifted(x: &[f64], s: &[f64]) -> Vec<f64> {
    x.iter().zip(s).map(|(a, b)| a + b).collect()
}

/// `φ(x,t) = exp[iṠ·x/2 + i∫₀ᵗ(|Ṡ|²/4 − E·S)] · u(x + S(t), t)`, optionally
/// also removing a phase drive `k`.
pub fn galilean(dim: usize, path: Path, e: Option<VecTimeFn>, k: Option<TimeFn>, domain: (f64, f64)) -> Result<TransformRecord> {
    galilean_named("galilean", BTreeMap::new(), dim, path, e, k, domain)
}

fn galilean_named(
    name: &str,
    params: BTreeMap<String, f64>,
    dim: usize,
    path: Path,
    e: Option<VecTimeFn>,
    k: Option<TimeFn>,
    domain: (f64, f64),
) -> Result<TransformRecord> {
    let p = path.clone();
    let ew = e.clone();
    let kw = k.clone();
    let weight: TimeSlice<Complex64> = Arc::new(move |s| {
        let g = integral_from_zero(
            |t| {
                let v = (p.velocity)(t);
                let mut r = dot(&v, &v) / 4.0;
                if let Some(e) = &ew {
                    r -= dot(&e(t), &(p.position)(t));
                }
                if let Some(k) = &kw {
                    r -= k(t);
                }
                r
            },
            s,
        )
        .unwrap_or(f64::NAN);
        let half_v: Vec<f64> = (p.velocity)(s).iter().map(|v| v / 2.0).collect();
        Arc::new(move |x| Complex64::from_polar(1.0, dot(&half_v, x) + g))
    });
    let ps = path.clone();
    let space: SpaceMap = Arc::new(move |s| Affine::translation((ps.position)(s)));
    let rw_path = path;
    let rewrite: Rewrite = Arc::new(move |eq| {
        check_dim(dim, eq)?;
        galilean_rewrite(eq, &rw_path, k.is_some())
    });
    TransformRecord::new(name, params, dim, domain, identity_time(), identity_time(), space, weight, Some(rewrite))
}

fn galilean_rewrite(eq: &EquationSpec, path: &Path, drop_phase: bool) -> Result<EquationSpec> {
    let old_e = &eq.electric;
    let old_m = &eq.magnetic;
    let dim = eq.dim();

    // Ã(x,t) = A(x + S, t); the uniform part splits into Mx/2 plus a constant
    let mut mag = MagneticPotential { general: None, b_matrix: None, ..old_m.clone() };
    let gen = old_m.general.clone();
    let uni = old_m.uniform.clone();
    if gen.is_some() || uni.is_some() {
        let pos = path.position.clone();
        if gen.is_some() || uni.as_ref().is_some_and(|m| m.iter().any(|&v| v != 0.0)) {
            let gen = gen.clone();
            let uni = uni.clone();
            mag.general = Some(Arc::new(move |t| {
                let s = pos(t);
                let g = gen.as_ref().map(|f| f(t));
                let shift: Vec<f64> = match &uni {
                    Some(m) => (m * DVector::from_column_slice(&s) / 2.0).iter().copied().collect(),
                    None => vec![0.0; s.len()],
                };
                Arc::new(move |x: &[f64]| {
                    let mut a = match &g {
                        Some(f) => f(&shifted(x, &s)),
                        None => vec![0.0; x.len()],
                    };
                    for (ai, si) in a.iter_mut().zip(&shift) {
                        *ai += si;
                    }
                    a
                })
            }));
        }
    }

    let total_a: Option<TimeSlice<Vec<f64>>> = if old_m.is_zero() {
        None
    } else {
        let m = old_m.clone();
        let pos = path.position.clone();
        Some(Arc::new(move |t| {
            let a = m.at(t);
            let s = pos(t);
            Arc::new(move |x: &[f64]| a(&shifted(x, &s)))
        }))
    };

    let mut el = ElectricPotential::zero(dim);
    let v1 = old_e.v1.clone();
    if v1.is_some() || total_a.is_some() {
        let pos = path.position.clone();
        let vel = path.velocity.clone();
        el.v1 = Some(Arc::new(move |t| {
            let s = pos(t);
            let sd = vel(t);
            let f = v1.as_ref().map(|f| f(t));
            let a = total_a.as_ref().map(|f| f(t));
            Arc::new(move |x: &[f64]| {
                let mut r = 0.0;
                if let Some(f) = &f {
                    r += f(&shifted(x, &s));
                }
                if let Some(a) = &a {
                    r += dot(&sd, &a(x));
                }
                r
            })
        }));
    }
    if let Some(v2) = old_e.v2.clone() {
        let pos = path.position.clone();
        el.v2 = Some(Arc::new(move |t| {
            let s = pos(t);
            let f = v2(t);
            Arc::new(move |x: &[f64]| f(&shifted(x, &s)))
        }));
    }
    el.quadratic = old_e.quadratic.clone();
    {
        let q = old_e.quadratic.clone();
        let e = old_e.e_drive.clone();
        let pos = path.position.clone();
        let acc = path.acceleration.clone();
        el.e_drive = Some(Arc::new(move |t| {
            let mut out: Vec<f64> = (acc)(t).iter().map(|v| v / 2.0).collect();
            if let Some(e) = &e {
                for (o, v) in out.iter_mut().zip(e(t)) {
                    *o += v;
                }
            }
            if let Some(q) = &q {
                let qt = q(t);
                for (o, s) in out.iter_mut().zip(pos(t)) {
                    *o += 2.0 * qt * s;
                }
            }
            out
        }));
    }
    {
        let q = old_e.quadratic.clone();
        let k = if drop_phase { None } else { old_e.phase_drive.clone() };
        let pos = path.position.clone();
        if q.is_some() || k.is_some() {
            el.phase_drive = Some(Arc::new(move |t| {
                let mut r = k.as_ref().map_or(0.0, |k| k(t));
                if let Some(q) = &q {
                    let s = pos(t);
                    r += q(t) * dot(&s, &s);
                }
                r
            }));
        }
    }
    EquationSpec::new(el, mag, eq.window, Regime::General)
}

/// Removes the drive `E(t)·x` (and optionally `k(t)`) on `[0, T]` by a
/// translation along the path with `S(0) = S(T) = 0`.
pub fn electric_removal(dim: usize, e: VecTimeFn, k: Option<TimeFn>, t_end: f64) -> Result<TransformRecord> {
    let path = Path::from_electric(dim, e.clone(), t_end)?;
    galilean_named("electric_removal", params(&[("T", t_end)]), dim, path, Some(e), k, (0.0, t_end))
}

/// Scale factor of a comoving frame with its first two derivatives.
#[derive(Clone)]
pub struct Scale {
    pub a: TimeFn,
    pub a_dot: TimeFn,
    pub a_ddot: TimeFn,
}

/// `φ(x,s) = a^{−n/2} e^{−i(ȧ/4a)|x|²} u(x/a, τ(s))`, `τ' = a^{−2}`, `τ(0) = 0`.
pub fn comoving(dim: usize, scale: Scale, domain: (f64, f64)) -> Result<TransformRecord> {
    let a = scale.a.clone();
    let tau: TimeFn = Arc::new(move |s| integral_from_zero(|r| a(r).powi(-2), s).unwrap_or(f64::NAN));
    let tau2 = tau.clone();
    let (lo, hi) = domain;
    // τ is increasing, so its inverse is found by bisection
    let inv: TimeFn = Arc::new(move |t| {
        let (mut a, mut b) = (lo, hi);
        let (fa, fb) = (tau2(a) - t, tau2(b) - t);
        if fa > 0.0 || fb < 0.0 {
            return f64::NAN;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if tau2(m) - t > 0.0 {
                b = m;
            } else {
                a = m;
            }
            if b - a < 1e-15 * (1.0 + m.abs()) {
                break;
            }
        }
        0.5 * (a + b)
    });
    comoving_with_times("comoving", BTreeMap::new(), dim, scale, domain, tau, inv, None)
}

#[allow(clippy::too_many_arguments)]
fn comoving_with_times(
    name: &str,
    params: BTreeMap<String, f64>,
    dim: usize,
    scale: Scale,
    domain: (f64, f64),
    tau: TimeFn,
    tau_inv: TimeFn,
    pure_quadratic: Option<f64>,
) -> Result<TransformRecord> {
    let sc = scale.clone();
    let space: SpaceMap = Arc::new(move |s| Affine::scaling(dim, 1.0 / (sc.a)(s)));
    let sc = scale.clone();
    let weight: TimeSlice<Complex64> = Arc::new(move |s| {
        let a = (sc.a)(s);
        let c = (sc.a_dot)(s) / (4.0 * a);
        let amp = a.powf(-(dim as f64) / 2.0);
        Arc::new(move |x: &[f64]| Complex64::from_polar(amp, -c * dot(x, x)))
    });
    let rec_scale = scale;
    let rec_tau = tau.clone();
    let holder: Arc<std::sync::OnceLock<TransformRecord>> = Arc::new(std::sync::OnceLock::new());
    let holder2 = holder.clone();
    let rewrite: Rewrite = Arc::new(move |eq| {
        check_dim(dim, eq)?;
        let rec = holder2.get().expect("record registered");
        let window = new_window(rec, eq)?;
        if let Some(q) = pure_quadratic {
            if is_pure_quadratic(eq, q) {
                return EquationSpec::free(dim, window);
            }
        }
        comoving_rewrite(eq, &rec_scale, &rec_tau, window)
    });
    let rec = TransformRecord::new(name, params, dim, domain, tau, tau_inv, space, weight, Some(rewrite))?;
    let _ = holder.set(rec.clone());
    Ok(rec)
}

fn is_pure_quadratic(eq: &EquationSpec, q: f64) -> bool {
    let e = &eq.electric;
    eq.magnetic.is_zero()
        && e.v1.is_none()
        && e.v2.is_none()
        && e.e_drive.is_none()
        && e.phase_drive.is_none()
        && eq.autonomous
        && (e.quadratic_at(eq.window.0) - q).abs() <= 1e-14 * q.abs().max(1.0)
}

fn comoving_rewrite(eq: &EquationSpec, scale: &Scale, tau: &TimeFn, window: (f64, f64)) -> Result<EquationSpec> {
    let dim = eq.dim();
    let old_e = eq.electric.clone();
    let old_m = eq.magnetic.clone();

    let a_tilde: Option<TimeSlice<Vec<f64>>> = if old_m.is_zero() {
        None
    } else {
        let (a, tau, m) = (scale.a.clone(), tau.clone(), old_m.clone());
        Some(Arc::new(move |s| {
            let av = a(s);
            let at = m.at(tau(s));
            Arc::new(move |x: &[f64]| {
                let y: Vec<f64> = x.iter().map(|v| v / av).collect();
                at(&y).iter().map(|v| v / av).collect()
            })
        }))
    };
    let mut mag = MagneticPotential::zero(dim);
    mag.general = a_tilde.clone();
    mag.xi = old_m.xi.clone();

    let mut el = ElectricPotential::zero(dim);
    {
        let (a, tau) = (scale.a.clone(), tau.clone());
        let (a_dot, q) = (scale.a_ddot.clone(), old_e.quadratic.clone());
        el.quadratic = Some(Arc::new(move |s| {
            let av = a(s);
            q.as_ref().map_or(0.0, |q| q(tau(s))) / av.powi(4) - a_dot(s) / (4.0 * av)
        }));
    }
    if old_e.v1.is_some() || a_tilde.is_some() {
        let (a, a_dot, tau) = (scale.a.clone(), scale.a_dot.clone(), tau.clone());
        let v1 = old_e.v1.clone();
        el.v1 = Some(Arc::new(move |s| {
            let av = a(s);
            let rate = a_dot(s) / av;
            let f = v1.as_ref().map(|f| f(tau(s)));
            let at = a_tilde.as_ref().map(|f| f(s));
            Arc::new(move |x: &[f64]| {
                let mut r = 0.0;
                if let Some(f) = &f {
                    let y: Vec<f64> = x.iter().map(|v| v / av).collect();
                    r += f(&y) / (av * av);
                }
                if let Some(at) = &at {
                    r -= rate * dot(x, &at(x));
                }
                r
            })
        }));
    }
    if let Some(v2) = old_e.v2.clone() {
        let (a, tau) = (scale.a.clone(), tau.clone());
        el.v2 = Some(Arc::new(move |s| {
            let av = a(s);
            let f = v2(tau(s));
            Arc::new(move |x: &[f64]| {
                let y: Vec<f64> = x.iter().map(|v| v / av).collect();
                f(&y) / (av * av)
            })
        }));
    }
    if let Some(e) = old_e.e_drive.clone() {
        let (a, tau) = (scale.a.clone(), tau.clone());
        el.e_drive = Some(Arc::new(move |s| {
            let av = a(s);
            e(tau(s)).iter().map(|v| v / av.powi(3)).collect()
        }));
    }
    if let Some(k) = old_e.phase_drive.clone() {
        let (a, tau) = (scale.a.clone(), tau.clone());
        el.phase_drive = Some(Arc::new(move |s| k(tau(s)) / a(s).powi(2)));
    }
    EquationSpec::new(el, mag, window, Regime::General)
}

fn oscillator_scale(sign: f64, w: f64) -> Scale {
    // a = √(1 + sign·w²s²)
    Scale {
        a: Arc::new(move |s| (1.0 + sign * w * w * s * s).sqrt()),
        a_dot: Arc::new(move |s| sign * w * w * s / (1.0 + sign * w * w * s * s).sqrt()),
        a_ddot: Arc::new(move |s| sign * w * w / (1.0 + sign * w * w * s * s).powf(1.5)),
    }
}

/// Comoving frame with `a = √(1 + ω²s²)`, `τ = arctan(ωs)/ω`, for `u` on `[t₀, t₁]`
/// with `|ω t| < π/2`.
pub fn harmonic_removal_on(dim: usize, omega: f64, window: (f64, f64)) -> Result<TransformRecord> {
    let (t0, t1) = window;
    if !(omega > 0.0) || omega * t0.abs().max(t1.abs()) >= FRAC_PI_2 {
        return Err(Error::Guard(format!(
            "harmonic removal needs 0 < ω < π/(2T); got ω = {omega} on [{t0}, {t1}]"
        )));
    }
    let tau: TimeFn = Arc::new(move |s| (omega * s).atan() / omega);
    let inv: TimeFn = Arc::new(move |t| (omega * t).tan() / omega);
    let domain = (inv(t0), inv(t1));
    let p = params(&[("omega", omega), ("t0", t0), ("t1", t1)]);
    comoving_with_times("harmonic_removal", p, dim, oscillator_scale(1.0, omega), domain, tau, inv, Some(omega * omega / 4.0))
}

pub fn harmonic_removal(dim: usize, omega: f64, t_end: f64) -> Result<TransformRecord> {
    harmonic_removal_on(dim, omega, (0.0, t_end))
}

/// Comoving frame with `a = √(1 − ν²s²)`, `τ = artanh(νs)/ν`, for `u` on `[t₀, t₁]`
/// with `|ν t| < 1`.
pub fn repulsive_removal_on(dim: usize, nu: f64, window: (f64, f64)) -> Result<TransformRecord> {
    let (t0, t1) = window;
    if !(nu > 0.0) || nu * t0.abs().max(t1.abs()) >= 1.0 {
        return Err(Error::Guard(format!("repulsive removal needs 0 < ν < 1/T; got ν = {nu} on [{t0}, {t1}]")));
    }
    let tau: TimeFn = Arc::new(move |s| (nu * s).atanh() / nu);
    let inv: TimeFn = Arc::new(move |t| (nu * t).tanh() / nu);
    let domain = (inv(t0), inv(t1));
    let p = params(&[("nu", nu), ("t0", t0), ("t1", t1)]);
    comoving_with_times("repulsive_removal", p, dim, oscillator_scale(-1.0, nu), domain, tau, inv, Some(-nu * nu / 4.0))
}

pub fn repulsive_removal(dim: usize, nu: f64, t_end: f64) -> Result<TransformRecord> {
    repulsive_removal_on(dim, nu, (0.0, t_end))
}

/// `φ(x,t) = u(e^{Mt}x, t)` for antisymmetric `M`.
pub fn rotating_frame(m: DMatrix<f64>, domain: (f64, f64)) -> Result<TransformRecord> {
    let n = m.nrows();
    if m.ncols() != n || (&m + m.transpose()).amax() > 1e-14 * (1.0 + m.amax()) {
        return Err(Error::Invalid("rotating frame needs an antisymmetric generator".into()));
    }
    let mm = m.clone();
    let space: SpaceMap = Arc::new(move |t| Affine::rotation((&mm * t).exp()));
    let weight: TimeSlice<Complex64> = Arc::new(|_| Arc::new(|_| Complex64::new(1.0, 0.0)));
    let b = crate::fields::isotropic_strength(&m).unwrap_or(f64::NAN);
    let mm = m.clone();
    let rewrite: Rewrite = Arc::new(move |eq| {
        check_dim(n, eq)?;
        rotating_rewrite(eq, &mm)
    });
    TransformRecord::new("rotating_frame", params(&[("b", b)]), n, domain, identity_time(), identity_time(), space, weight, Some(rewrite))
}

fn rotating_rewrite(eq: &EquationSpec, m: &DMatrix<f64>) -> Result<EquationSpec> {
    let dim = eq.dim();
    let old_e = eq.electric.clone();
    let old_m = eq.magnetic.clone();
    let rot = {
        let m = m.clone();
        move |t: f64| (&m * t).exp()
    };
    let mx = {
        let m = m.clone();
        move |x: &[f64]| -> Vec<f64> { (&m * DVector::from_column_slice(x)).iter().copied().collect() }
    };
    let same_uniform = old_m.general.is_none()
        && old_m.uniform.as_ref().is_some_and(|u| (u - m).amax() <= 1e-14 * (1.0 + m.amax()));
    let iso = crate::fields::isotropic_strength(m);

    let mut mag = MagneticPotential::zero(dim);
    let mut el = ElectricPotential::zero(dim);
    el.quadratic = old_e.quadratic.clone();
    el.phase_drive = old_e.phase_drive.clone();

    // V(Rx) + Ȃ·Mx − |Mx|²/4 with Ȃ = RᵗA(Rx), Ã = Ȃ − Mx/2
    let mut extra_v1: Option<TimeSlice<f64>> = None;
    if let (true, Some(b)) = (same_uniform, iso) {
        let q = old_e.quadratic.clone();
        el.quadratic = Some(Arc::new(move |t| q.as_ref().map_or(0.0, |q| q(t)) + b * b / 4.0));
    } else {
        let om = old_m.clone();
        let (rot1, mx1) = (rot.clone(), mx.clone());
        let hat: TimeSlice<Vec<f64>> = Arc::new(move |t| {
            let r = rot1(t);
            let a = om.at(t);
            Arc::new(move |x: &[f64]| {
                let y: Vec<f64> = (&r * DVector::from_column_slice(x)).iter().copied().collect();
                (r.transpose() * DVector::from_vec(a(&y))).iter().copied().collect()
            })
        });
        let hat2 = hat.clone();
        let mx2 = mx1.clone();
        mag.general = Some(Arc::new(move |t| {
            let h = hat2(t);
            let mx = mx2.clone();
            Arc::new(move |x: &[f64]| h(x).iter().zip(mx(x)).map(|(a, b)| a - b / 2.0).collect())
        }));
        extra_v1 = Some(Arc::new(move |t| {
            let h = hat(t);
            let mx = mx1.clone();
            Arc::new(move |x: &[f64]| {
                let v = mx(x);
                dot(&h(x), &v) - dot(&v, &v) / 4.0
            })
        }));
    }
    if old_e.v1.is_some() || extra_v1.is_some() {
        let v1 = old_e.v1.clone();
        let rot1 = rot.clone();
        el.v1 = Some(Arc::new(move |t| {
            let r = rot1(t);
            let f = v1.as_ref().map(|f| f(t));
            let g = extra_v1.as_ref().map(|f| f(t));
            Arc::new(move |x: &[f64]| {
                let mut s = 0.0;
                if let Some(f) = &f {
                    let y: Vec<f64> = (&r * DVector::from_column_slice(x)).iter().copied().collect();
                    s += f(&y);
                }
                if let Some(g) = &g {
                    s += g(x);
                }
                s
            })
        }));
    }
    if let Some(v2) = old_e.v2.clone() {
        let rot1 = rot.clone();
        el.v2 = Some(Arc::new(move |t| {
            let r = rot1(t);
            let f = v2(t);
            Arc::new(move |x: &[f64]| {
                let y: Vec<f64> = (&r * DVector::from_column_slice(x)).iter().copied().collect();
                f(&y)
            })
        }));
    }
    if let Some(e) = old_e.e_drive.clone() {
        el.e_drive = Some(Arc::new(move |t| {
            let r = rot(t);
            (r.transpose() * DVector::from_vec(e(t))).iter().copied().collect()
        }));
    }
    let autonomous = eq.autonomous && same_uniform && old_e.v1.is_none() && old_e.v2.is_none() && old_e.e_drive.is_none();
    let regime = match (autonomous, iso, old_e.quadratic.is_none() && old_e.phase_drive.is_none()) {
        (true, Some(b), true) => Regime::Harmonic { omega: b },
        _ => Regime::General,
    };
    let mut out = EquationSpec::new(el, mag, eq.window, Regime::General)?;
    out.regime = regime;
    out.autonomous = autonomous;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{propagate, residual};
    use crate::fields::make_uniform_magnetic;
    use crate::grid::GridSpec;

    fn packet(g: GridSpec, t: f64) -> WaveField {
        WaveField::from_fn(g, t, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            Complex64::new(1.0, 0.4 * x[0]) * (-r2 / 2.0).exp()
        })
    }

    #[test]
    fn records_are_unitary_and_invertible() {
        let g = GridSpec::new(2, 14.0, 128).unwrap();
        let m = make_uniform_magnetic(2, 0.6, &[(0, 1)]).unwrap().uniform.unwrap();
        let recs = vec![
            harmonic_removal(2, 1.0, 0.5).unwrap(),
            repulsive_removal(2, 0.8, 0.5).unwrap(),
            galilean(2, Path::linear(vec![0.3, -0.2], vec![0.5, 0.1]), None, None, (0.0, 1.0)).unwrap(),
            rotating_frame(m, (0.0, 1.0)).unwrap(),
        ];
        for r in recs {
            let t = r.source_time(r.domain.1 * 0.7);
            let u = packet(g, t);
            let v = r.apply(&u).unwrap();
            assert!((v.norm() - u.norm()).abs() < 1e-9, "{}", r.name);
            let back = r.inverse().apply(&v).unwrap();
            assert!((back.time - u.time).abs() < 1e-12);
            assert!(back.distance(&u) < 1e-8, "{}: {}", r.name, back.distance(&u));
        }
    }

    #[test]
    fn generic_comoving_matches_closed_form_times() {
        let h = harmonic_removal(1, 1.2, 0.6).unwrap();
        let c = comoving(1, oscillator_scale(1.0, 1.2), h.domain).unwrap();
        for s in [0.1, 0.4, h.domain.1] {
            assert!((h.source_time(s) - c.source_time(s)).abs() < 1e-12);
            let t = h.source_time(s);
            assert!((c.target_time(t) - s).abs() < 1e-12);
        }
    }

    #[test]
    fn harmonic_removal_rewrites_to_free() {
        let eq = EquationSpec::harmonic(1, 1.0, (0.0, 0.5)).unwrap();
        let r = harmonic_removal(1, 1.0, 0.5).unwrap();
        let free = r.rewrite(&eq).unwrap();
        assert_eq!(free.regime, Regime::Free);
        assert!((free.window.1 - 0.5f64.tan()).abs() < 1e-15);
    }

    #[test]
    fn chain_rejects_disjoint_domains() {
        let a = harmonic_removal(1, 1.0, 0.5).unwrap();
        let b = phase_removal(1, Arc::new(|_| 1.0), (2.0, 3.0)).unwrap();
        assert!(TransformChain::new(vec![a.clone(), b]).is_err());
        let c = phase_removal(1, Arc::new(|_| 1.0), (0.0, 0.5)).unwrap();
        assert!(TransformChain::new(vec![a, c]).is_ok());
    }

    #[test]
    fn guards() {
        assert!(matches!(harmonic_removal(1, 4.0, 0.5), Err(Error::Guard(_))));
        assert!(matches!(repulsive_removal(1, 2.0, 0.5), Err(Error::Guard(_))));
        assert!(rotating_frame(DMatrix::identity(2, 2), (0.0, 1.0)).is_err());
    }

    /// Transform a known solution; the result must solve the rewritten equation.
    fn check_rewrite(rec: &TransformRecord, eq: &EquationSpec, g: GridSpec, u0: &WaveField, s: f64, tol: f64) {
        let new_eq = rec.rewrite(eq).unwrap();
        let h = 1e-3;
        let mut u = u0.clone();
        let mut fields = Vec::new();
        for j in -2..=2 {
            let t_old = rec.source_time(s + j as f64 * h);
            u = propagate(&u, eq, t_old, 5e-4).unwrap();
            fields.push(rec.apply(&u).unwrap());
        }
        let lookup = |x: &[f64], t: f64| -> Complex64 {
            let j = ((t - s) / h).round() as i64 + 2;
            let mut idx = vec![0usize; x.len()];
            for (d, v) in x.iter().enumerate() {
                idx[d] = ((v + g.half_width()) / g.spacing()).round() as usize;
            }
            fields[j as usize].values[ndarray::IxDyn(&idx)]
        };
        let r = residual(&lookup, &new_eq, &g, s, h).unwrap();
        assert!(r.max_abs() < tol, "{}: residual {}", rec.name, r.max_abs());
    }

    #[test]
    fn galilean_rewrite_with_drive() {
        let g = GridSpec::new(1, 16.0, 256).unwrap();
        let e: VecTimeFn = Arc::new(|t| vec![(2.0 * t).sin()]);
        let eq = EquationSpec::new(
            ElectricPotential::zero(1).with_e_drive(e.clone()).with_static_v1(|x| 0.5 * (-(x[0] * x[0])).exp()),
            MagneticPotential::zero(1),
            (0.0, 1.0),
            Regime::General,
        )
        .unwrap();
        let rec = electric_removal(1, e, None, 1.0).unwrap();
        let u0 = packet(g, 0.0);
        check_rewrite(&rec, &eq, g, &u0, 0.5, 1e-5);
    }

    #[test]
    fn comoving_rewrite_with_potential() {
        let g = GridSpec::new(1, 16.0, 256).unwrap();
        let eq = EquationSpec::new(
            ElectricPotential::harmonic(1, 1.0).with_static_v1(|x| 0.5 * (-(x[0] * x[0])).exp()),
            MagneticPotential::zero(1),
            (0.0, 0.5),
            Regime::General,
        )
        .unwrap()
        .autonomous();
        let rec = harmonic_removal(1, 1.0, 0.5).unwrap();
        let u0 = packet(g, 0.0);
        check_rewrite(&rec, &eq, g, &u0, 0.3, 1e-5);
    }

    #[test]
    fn rotating_rewrite_with_general_field() {
        let g = GridSpec::new(2, 16.0, 128).unwrap();
        let mut mag = MagneticPotential::from_static(2, |x: &[f64]| {
            let e = 0.3 * (-(x[0] * x[0] + x[1] * x[1]) / 2.0).exp();
            vec![e, -x[0] * e]
        });
        let m = make_uniform_magnetic(2, 0.7, &[(0, 1)]).unwrap().uniform.unwrap();
        mag.uniform = Some(m.clone());
        let eq = EquationSpec::new(ElectricPotential::zero(2), mag, (0.0, 1.0), Regime::General).unwrap().autonomous();
        let rec = rotating_frame(m, (0.0, 1.0)).unwrap();
        let u0 = packet(g, 0.0);
        check_rewrite(&rec, &eq, g, &u0, 0.4, 1e-4);
    }
}
