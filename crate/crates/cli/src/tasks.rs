//! Scenario preparation (parsing and guards, before any compute) and execution.

use std::f64::consts::PI;

use anyhow::{bail, Context, Result};
use gaussdecay::closedform::{
    alpha_tilde_sq, arbitrate, closed_form_residuals, exact_endpoint_rate, harmonic_equation, magnetic_equation,
    measured_endpoint_rate, sample_times, CounterexampleParams, Family, Reading, SharpKind,
};
use gaussdecay::decay::{classify, fit_rate, fourier_field, suggest_window, weighted_norm, Classification, ThresholdKind};
use gaussdecay::engine::{
    free_propagate, harmonic_oracle, laplacian, magnetic_laplacian, magnetic_oracle, repulsive_oracle, EquationSpec,
    PropagateOptions, Propagator, Regime,
};
use gaussdecay::fields::{cronstrom_gauge, make_uniform_magnetic};
use gaussdecay::grid::{GridSpec, WaveField};
use gaussdecay::specfun::{landau_eigenfunction, qho_eigenfunction, LandauSpectrumEntry, OscillatorSpectrumEntry};
use gaussdecay::transforms::TransformChain;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::build;
use crate::config::{Scenario, Task};
use crate::registry::Call;

/// Deterministic number formatting for reports.
pub fn num(v: f64) -> String {
    if v == 0.0 || (1e-4..1e6).contains(&v.abs()) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub struct Outcome {
    pub name: String,
    pub task: Task,
    pub pass: bool,
    pub detail: String,
    pub table: Table,
    pub summary: Value,
    pub snapshots: Vec<(String, WaveField)>,
}

enum EigenKind {
    Oscillator { omega: f64 },
    Landau { b: f64 },
}

enum Plan {
    ClosedForm { params: CounterexampleParams, family: Family, grid: GridSpec, times: Vec<f64>, window: (f64, f64) },
    Simulate { eq: Box<EquationSpec>, u0: WaveField, times: Vec<f64> },
    Transform { u0: WaveField, chain: TransformChain },
    Gauge { case: build::GaugeCase },
    Eigen { kind: EigenKind, grid: GridSpec },
    Thresholds { items: Vec<(String, ThresholdKind, f64, f64)> },
    DecayFit { u: WaveField },
    HardyFree { times: Vec<f64>, beta_factor: f64, chirp: f64 },
}

pub struct Prepared {
    pub scenario: Scenario,
    plan: Plan,
}

fn call(field: &Option<String>, what: &str) -> Result<Call> {
    field.as_deref().with_context(|| format!("scenario needs `{what}`"))?.parse()
}

fn dim_of(s: &Scenario, calls: &[&Call]) -> Result<usize> {
    let mut dim = s.grid.map(|g| g.dim);
    for c in calls {
        if let Some(d) = build::implied_dim(c)? {
            if let Some(prev) = dim {
                if prev != d {
                    bail!("`{c}` is {d}D but the scenario is {prev}D");
                }
            }
            dim = Some(d);
        }
    }
    Ok(dim.unwrap_or(1))
}

/// Parse references, build objects and run every guard. Failures here are configuration errors.
pub fn prepare(s: &Scenario) -> Result<Prepared> {
    let pr = &s.probes;
    let plan = match s.task {
        Task::VerifyClosedForm => {
            let data = call(&s.data, "data")?;
            let params = build::closed_form_params(&data)?;
            let family = match s.equation.as_deref().map(str::parse::<Call>).transpose()?.map(|c| c.name) {
                None => Family::Harmonic,
                Some(n) if n == "harmonic" => Family::Harmonic,
                Some(n) if n == "magnetic" => Family::Magnetic,
                Some(n) => bail!("closed forms are checked against `harmonic` or `magnetic`, not `{n}`"),
            };
            if family == Family::Magnetic && (params.n != 2 || params.k <= 4.0) {
                bail!("the uniform-field closed form needs n = 2 and k > 4; use closed_form{{b=..., k=...}}");
            }
            let grid = build::grid(s.grid, params.n)?;
            let times = if pr.times.is_empty() { sample_times(pr.count, 0.45) } else { pr.times.clone() };
            for &t in &times {
                if t.abs() > 0.5 - 2e-3 {
                    bail!("closed-form residual times must satisfy |t| < 1/2 − 2·10⁻³, got {t}");
                }
            }
            ClosedForm { params, family, grid, times, window: pr.fit_window.unwrap_or((5.0, 40.0)) }
        }
        Task::Simulate => {
            let eqc = call(&s.equation, "equation")?;
            let datac = call(&s.data, "data")?;
            let dim = dim_of(s, &[&eqc, &datac])?;
            let grid = build::grid(s.grid, dim)?;
            let u0 = build::data(&datac, grid)?;
            if pr.times.is_empty() {
                bail!("simulate needs probes.times");
            }
            let lo = pr.times.iter().copied().fold(u0.time, f64::min);
            let hi = pr.horizon.unwrap_or(pr.times.iter().copied().fold(u0.time, f64::max));
            let eq = build::equation(&eqc, u0.grid.dim(), (lo, hi))?;
            if !(pr.dt > 0.0) {
                bail!("probes.dt must be positive");
            }
            Simulate { eq: Box::new(eq), u0, times: pr.times.clone() }
        }
        Task::Transform => {
            let datac = call(&s.data, "data")?;
            let dim = dim_of(s, &[&datac])?;
            let u0 = build::data(&datac, build::grid(s.grid, dim)?)?;
            if s.transforms.is_empty() {
                bail!("transform needs at least one entry in `transforms`");
            }
            let horizon = pr.horizon.unwrap_or(0.5);
            let recs = s
                .transforms
                .iter()
                .map(|t| build::record(&t.parse()?, u0.grid.dim(), horizon))
                .collect::<Result<Vec<_>>>()?;
            Transform { u0, chain: TransformChain::new(recs)? }
        }
        Task::Gauge => {
            let c: Call = s.equation.as_deref().unwrap_or("gradient").parse()?;
            Gauge { case: build::gauge_case(&c)? }
        }
        Task::Eigen => {
            let c = call(&s.equation, "equation")?;
            let kind = match c.name.as_str() {
                "harmonic" => {
                    c.expect_keys(&["omega"])?;
                    let omega = c.f64("omega")?;
                    OscillatorSpectrumEntry::new(0, omega)?;
                    EigenKind::Oscillator { omega }
                }
                "magnetic" => {
                    c.expect_keys(&["b"])?;
                    let b = c.f64("b")?;
                    LandauSpectrumEntry::new(0, 0, b)?;
                    EigenKind::Landau { b }
                }
                n => bail!("eigen tables exist for `harmonic` and `magnetic`, not `{n}`"),
            };
            let dim = if matches!(kind, EigenKind::Oscillator { .. }) { 1 } else { 2 };
            Eigen { kind, grid: build::grid(s.grid, dim)? }
        }
        Task::Thresholds => {
            if pr.thresholds.is_empty() {
                bail!("thresholds needs probes.thresholds");
            }
            let mut items = Vec::new();
            for t in &pr.thresholds {
                let c: Call = t.parse()?;
                let (kind, a2, b2) = build::threshold(&c)?;
                classify(a2, b2, kind)?;
                items.push((c.to_string(), kind, a2, b2));
            }
            Thresholds { items }
        }
        Task::DecayFit => {
            let datac = call(&s.data, "data")?;
            let dim = dim_of(s, &[&datac])?;
            DecayFit { u: build::data(&datac, build::grid(s.grid, dim)?)? }
        }
        Task::HardyFree => {
            let c: Call = s.data.as_deref().unwrap_or("gaussian").parse()?;
            if c.name != "gaussian" {
                bail!("hardy-free evolves `gaussian` data");
            }
            c.expect_keys(&["beta_factor", "chirp"])?;
            let times = if pr.times.is_empty() { vec![0.25, 0.5, 1.0] } else { pr.times.clone() };
            if times.iter().any(|&t| !(t > 0.0)) {
                bail!("hardy-free times must be positive");
            }
            HardyFree { times, beta_factor: c.f64_or("beta_factor", 0.15)?, chirp: c.f64_or("chirp", 0.0)? }
        }
    };
    Ok(Prepared { scenario: s.clone(), plan })
}

use Plan::*;

/// FNV-1a, so the jitter stream of a scenario does not depend on its position.
fn stream_seed(seed: u64, name: &str) -> u64 {
    name.bytes().fold(0xcbf29ce484222325u64 ^ seed, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

pub fn execute(p: &Prepared, seed: u64) -> Outcome {
    let s = &p.scenario;
    let mut out = Outcome {
        name: s.name.clone(),
        task: s.task,
        pass: false,
        detail: String::new(),
        table: Table::default(),
        summary: Value::Null,
        snapshots: Vec::new(),
    };
    let res = match &p.plan {
        ClosedForm { params, family, grid, times, window } => closed_form(s, params, *family, grid, times, *window, &mut out),
        Simulate { eq, u0, times } => simulate(s, eq, u0, times, &mut out),
        Transform { u0, chain } => transform(s, u0, chain, &mut out),
        Gauge { case } => gauge(s, case, &mut out),
        Eigen { kind, grid } => eigen(s, kind, *grid, &mut out),
        Thresholds { items } => thresholds(items, &mut out),
        DecayFit { u } => decay_fit(s, u, stream_seed(seed, &s.name), &mut out),
        HardyFree { times, beta_factor, chirp } => hardy_free(s, times, *beta_factor, *chirp, &mut out),
    };
    if let Err(e) = res {
        out.pass = false;
        out.detail = format!("error: {e:#}");
    }
    out.summary = json!({
        "name": out.name,
        "task": s.task.name(),
        "pass": out.pass,
        "detail": out.detail,
        "result": out.summary,
    });
    out
}

fn closed_form(
    s: &Scenario,
    p: &CounterexampleParams,
    family: Family,
    grid: &GridSpec,
    times: &[f64],
    window: (f64, f64),
    out: &mut Outcome,
) -> Result<()> {
    let c = &s.checks;
    let (reading, arbiter) = match family {
        Family::Harmonic => {
            let rep = arbitrate(p, family, grid, times, c.max_residual)?;
            (rep.selected, Some(rep))
        }
        Family::Magnetic => (Some(Reading::SELECTED), None),
    };
    let q = p.with_reading(reading.unwrap_or(Reading::SELECTED));
    let eq = match family {
        Family::Harmonic => harmonic_equation(&q)?,
        Family::Magnetic => magnetic_equation(&q)?,
    };
    let res = closed_form_residuals(&q, &eq, grid, times)?;
    let worst = res.iter().copied().fold(0.0, f64::max);
    out.table = Table::new(&["time", "relative_residual"]);
    for (t, r) in times.iter().zip(&res) {
        out.table.push(vec![num(*t), num(*r)]);
    }
    let exact = exact_endpoint_rate(&q);
    let mut rates = Vec::new();
    let mut rate_ok = true;
    for t in [-0.5, 0.5] {
        match measured_endpoint_rate(&q, t, window) {
            Ok(m) => {
                let err = (m.rate - exact).abs() / exact;
                rate_ok &= err < c.max_rate_error;
                rates.push(json!({"time": t, "rate": m.rate, "relative_error": err, "fit_residual": m.fit_residual}));
            }
            Err(e) => {
                rate_ok = false;
                rates.push(json!({"time": t, "error": e.to_string()}));
            }
        }
    }
    let kind = if family == Family::Harmonic { SharpKind::Harmonic } else { SharpKind::Magnetic };
    let at = alpha_tilde_sq(kind, q.omega).ok();
    out.pass = reading.is_some() && worst < c.max_residual && rate_ok;
    out.detail = format!(
        "reading {}, max residual {} over {} times, endpoint rate {}",
        reading.map(|r| r.label()).unwrap_or_else(|| "none".into()),
        num(worst),
        times.len(),
        num(exact)
    );
    out.summary = json!({
        "params": q,
        "family": family,
        "reading": reading.map(|r| r.label()),
        "arbiter": arbiter,
        "max_residual": worst,
        "endpoint_rate_exact": exact,
        "initial_rate": gaussdecay::closedform::initial_rate(&q),
        "endpoint_rates": rates,
        "alpha_tilde_sq": at.map(|a| a.alpha_tilde_sq),
    });
    Ok(())
}

fn oracle(eq: &EquationSpec, u0: &WaveField, t: f64) -> Option<Result<WaveField>> {
    let dt = t - u0.time;
    let r = match eq.regime {
        Regime::Free => Ok(free_propagate(u0, t)),
        Regime::Harmonic { omega } if (omega * dt).abs() < PI / 2.0 => harmonic_oracle(u0, omega, dt),
        Regime::Repulsive { nu } if (nu * dt).abs() < 1.0 => repulsive_oracle(u0, nu, dt),
        Regime::Magnetic { b } if u0.grid.dim() % 2 == 0 && (b * dt).abs() < PI / 2.0 => magnetic_oracle(u0, b, dt),
        _ => return None,
    };
    Some(r.map_err(Into::into))
}

/// Zero values below `rel` of the peak. Propagated fields carry round-off near
/// 1e-16 of the peak, which any Gaussian weight eventually amplifies.
fn trimmed(u: &WaveField, rel: f64) -> WaveField {
    let cut = rel * u.max_abs();
    let mut v = u.clone();
    v.values.mapv_inplace(|z| if z.norm() < cut { Complex64::new(0.0, 0.0) } else { z });
    v
}

const NOISE_TRIM: f64 = 1e-12;

fn simulate(s: &Scenario, eq: &EquationSpec, u0: &WaveField, times: &[f64], out: &mut Outcome) -> Result<()> {
    let pr = &s.probes;
    let mut header = vec!["time", "norm", "boundary_ratio", "oracle_distance", "rate", "poly_correction", "fit_trusted"];
    let alpha_cols: Vec<String> = pr.alpha_sq.iter().map(|a| format!("log_weighted_norm_trimmed_{}", num(*a))).collect();
    header.extend(alpha_cols.iter().map(String::as_str));
    out.table = Table::new(&header);
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut prop = Propagator::new(eq, u0.grid, PropagateOptions::default())?;
    let mut u = u0.clone();
    let mut worst: f64 = 0.0;
    let mut have_oracle = false;
    for (i, &t) in sorted.iter().enumerate() {
        u = prop.advance(&u, t, pr.dt)?;
        let od = match oracle(eq, u0, t) {
            Some(o) => {
                have_oracle = true;
                let d = u.relative_distance(&o?);
                worst = worst.max(d);
                num(d)
            }
            None => String::new(),
        };
        let window = match pr.fit_window {
            Some(w) => Ok(w),
            None => suggest_window(&u, 0.5, 1e-8).map_err(anyhow::Error::from),
        };
        let fit = window.and_then(|w| Ok(fit_rate(&u, w)?)).ok();
        let (rate, poly, trusted) = match &fit {
            Some(r) => (num(r.rate), num(r.poly_correction), r.trusted.to_string()),
            None => (String::new(), String::new(), "false".into()),
        };
        let mut row = vec![num(t), num(u.norm()), num(u.boundary_ratio()), od, rate, poly, trusted];
        let quiet = trimmed(&u, NOISE_TRIM);
        for &a in &pr.alpha_sq {
            // the tail beyond the noise level is read off the fitted rate
            let diverges = match &fit {
                Some(r) if r.trusted => 1.0 / a >= r.rate,
                _ => weighted_norm(&u, a)?.divergent,
            };
            row.push(if diverges { "inf".into() } else { num(weighted_norm(&quiet, a)?.log_norm) });
        }
        out.table.push(row);
        if s.outputs.snapshots {
            out.snapshots.push((format!("{}_{i}", s.name), u.clone()));
        }
    }
    out.pass = !have_oracle || worst < s.checks.max_oracle_distance;
    out.detail = if have_oracle {
        format!("{} probes, max oracle distance {}", sorted.len(), num(worst))
    } else {
        format!("{} probes, no oracle for this equation", sorted.len())
    };
    out.summary = json!({"probes": sorted.len(), "max_oracle_distance": have_oracle.then_some(worst), "final_norm": u.norm()});
    Ok(())
}

fn transform(s: &Scenario, u0: &WaveField, chain: &TransformChain, out: &mut Outcome) -> Result<()> {
    out.table = Table::new(&["record", "time_in", "time_out", "norm_in", "norm_out"]);
    let mut u = u0.clone();
    for r in &chain.records {
        let v = r.apply(&u)?;
        out.table.push(vec![r.name.clone(), num(u.time), num(v.time), num(u.norm()), num(v.norm())]);
        u = v;
    }
    let back = chain.inverse()?.apply(&u)?;
    let err = back.max_pointwise_distance(u0);
    out.pass = err < s.checks.max_roundtrip;
    out.detail = format!("{} records, round-trip max error {}", chain.records.len(), num(err));
    out.summary = json!({
        "records": chain.records.iter().map(|r| r.summary()).collect::<Vec<_>>(),
        "roundtrip_max_error": err,
    });
    if s.outputs.snapshots {
        out.snapshots.push((format!("{}_out", s.name), u));
    }
    Ok(())
}

fn gauge(s: &Scenario, case: &build::GaugeCase, out: &mut Outcome) -> Result<()> {
    let g = cronstrom_gauge(&case.potential, 0.0);
    out.table = Table::new(&["x1", "x2", "a_tilde_1", "a_tilde_2", "x_dot_a_tilde", "deviation", "identity_residual"]);
    let (mut xdot, mut dev, mut ident, mut sup) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for r in [0.25, 0.75, 1.5, 2.5] {
        for i in 0..8 {
            let th = 2.0 * PI * i as f64 / 8.0 + 0.1;
            let x = [r * th.cos(), r * th.sin()];
            let a = g.a_tilde(&x)?;
            let e = (case.expected)(&x);
            let xd = (x[0] * a[0] + x[1] * a[1]).abs();
            let d = (a[0] - e[0]).abs().max((a[1] - e[1]).abs());
            let id = g.derivative_identity_residual(&x)?;
            xdot = xdot.max(xd);
            dev = dev.max(d);
            ident = ident.max(id);
            sup = sup.max(a[0].hypot(a[1]));
            out.table.push(vec![num(x[0]), num(x[1]), num(a[0]), num(a[1]), num(xd), num(d), num(id)]);
        }
    }
    let tol = s.checks.max_gauge_error;
    out.pass = xdot < 1e-9 && dev < tol && ident < tol;
    out.detail = format!("sup|Ã| {}, max |x·Ã| {}, deviation {}, identity {}", num(sup), num(xdot), num(dev), num(ident));
    out.summary = json!({"sup_a_tilde": sup, "max_x_dot_a_tilde": xdot, "max_deviation": dev, "max_identity_residual": ident});
    Ok(())
}

fn eigen(s: &Scenario, kind: &EigenKind, grid: GridSpec, out: &mut Outcome) -> Result<()> {
    let pr = &s.probes;
    let mut worst: f64 = 0.0;
    let resid = |hu: &WaveField, e: f64, u: &WaveField| hu.distance(&u.scaled(Complex64::new(e, 0.0))) / u.norm();
    match *kind {
        EigenKind::Oscillator { omega } => {
            out.table = Table::new(&["m", "energy", "residual"]);
            let w = gaussdecay::fields::ElectricPotential::harmonic(1, omega).at(0.0);
            for m in 0..=pr.max_m {
                let e = OscillatorSpectrumEntry::new(m, omega)?.energy;
                let psi = qho_eigenfunction(m, omega, &grid)?.field;
                let mut hu = laplacian(&psi).scaled(Complex64::new(-1.0, 0.0));
                let mut wu = psi.clone();
                wu.multiply_by(|x| w(x));
                hu.values += &wu.values;
                let r = resid(&hu, e, &psi);
                worst = worst.max(r);
                out.table.push(vec![m.to_string(), num(e), num(r)]);
            }
        }
        EigenKind::Landau { b } => {
            out.table = Table::new(&["m", "l", "k", "energy", "residual"]);
            let a = make_uniform_magnetic(2, b, &[(0, 1)])?;
            for m in 0..=pr.max_m {
                for l in -pr.l_max..=pr.l_max {
                    let entry = LandauSpectrumEntry::new(m, l, b)?;
                    let phi = landau_eigenfunction(m, l, b, &grid)?.field;
                    let hu = magnetic_laplacian(&phi, &a).scaled(Complex64::new(-1.0, 0.0));
                    let r = resid(&hu, entry.energy, &phi);
                    worst = worst.max(r);
                    out.table.push(vec![m.to_string(), l.to_string(), entry.k.to_string(), num(entry.energy), num(r)]);
                }
            }
        }
    }
    out.pass = worst < s.checks.max_eigen_residual;
    out.detail = format!("{} eigenpairs, max residual {}", out.table.rows.len(), num(worst));
    out.summary = json!({"eigenpairs": out.table.rows.len(), "max_residual": worst});
    Ok(())
}

fn thresholds(items: &[(String, ThresholdKind, f64, f64)], out: &mut Outcome) -> Result<()> {
    out.table = Table::new(&["case", "kind", "T", "parameter", "alpha_sq", "beta_sq", "product", "threshold", "classification"]);
    let mut verdicts = Vec::new();
    for (label, kind, a2, b2) in items {
        let v = classify(*a2, *b2, *kind)?;
        let cls = serde_json::to_value(v.classification)?.as_str().unwrap_or_default().to_string();
        out.table.push(vec![
            label.clone(),
            kind.name().into(),
            num(kind.horizon()),
            num(kind.parameter()),
            num(*a2),
            num(*b2),
            num(v.product),
            num(v.threshold),
            cls,
        ]);
        verdicts.push(v);
    }
    out.pass = true;
    out.detail = format!("{} cases classified", items.len());
    out.summary = json!({ "verdicts": verdicts });
    Ok(())
}

fn jittered(w: (f64, f64), amount: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let a = w.0 * (1.0 + amount * rng.random_range(-1.0..1.0));
    let b = w.1 * (1.0 + amount * rng.random_range(-1.0..1.0));
    (a.min(b), a.max(b))
}

fn decay_fit(s: &Scenario, u: &WaveField, seed: u64, out: &mut Outcome) -> Result<()> {
    let pr = &s.probes;
    let window = match pr.fit_window {
        Some(w) => w,
        None => suggest_window(u, 0.5, 1e-10)?,
    };
    let rep = fit_rate(u, window)?;
    let fu = fourier_field(u)?;
    let fwin = match pr.fourier_window {
        Some(w) => Some(w),
        None => suggest_window(&fu, 0.5, 1e-10).ok(),
    };
    let frep = fwin.map(|w| fit_rate(&fu, w)).transpose()?;
    out.table = Table::new(&["side", "window_min", "window_max", "rate", "poly_correction", "fit_residual", "floor_hit", "trusted"]);
    let row = |side: &str, r: &gaussdecay::decay::DecayReport| {
        vec![
            side.to_string(),
            num(r.fit_window.0),
            num(r.fit_window.1),
            num(r.rate),
            num(r.poly_correction),
            num(r.fit_residual),
            r.floor_hit.to_string(),
            r.trusted.to_string(),
        ]
    };
    out.table.push(row("space", &rep));
    if let Some(f) = &frep {
        out.table.push(row("fourier", f));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rates = Vec::new();
    for i in 0..pr.jitter_samples {
        let w = jittered(window, pr.jitter, &mut rng);
        let r = fit_rate(u, w)?;
        out.table.push(row(&format!("jitter_{i}"), &r));
        rates.push(r.rate);
    }
    let spread = if rates.is_empty() {
        None
    } else {
        let (lo, hi) = rates.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
        Some((hi - lo) / rep.rate.abs())
    };
    let norms: Vec<Value> = pr
        .alpha_sq
        .iter()
        .map(|&a| weighted_norm(u, a).map(|w| json!({"alpha_sq": a, "log_norm": w.log_norm, "divergent": w.divergent})))
        .collect::<gaussdecay::Result<_>>()?;
    out.pass = rep.trusted;
    out.detail = format!("rate {} (α² {}), poly {}, trusted {}", num(rep.rate), num(rep.alpha_sq()), num(rep.poly_correction), rep.trusted);
    out.summary = json!({
        "space": rep,
        "fourier": frep,
        "product_alpha_beta": frep.as_ref().map(|f| (rep.alpha_sq() * f.alpha_sq()).sqrt()),
        "jitter_relative_spread": spread,
        "weighted_norms": norms,
    });
    Ok(())
}

fn hardy_free(s: &Scenario, times: &[f64], beta_factor: f64, chirp: f64, out: &mut Outcome) -> Result<()> {
    out.table = Table::new(&["T", "beta_sq", "alpha_sq", "alpha_beta", "ratio", "classification"]);
    let mut pass = true;
    let mut worst: f64 = 1.0;
    for &t in times {
        let beta_sq = beta_factor * t;
        let z = Complex64::new(1.0 / beta_sq, chirp);
        // |u(T)| has rate Re(z/(1 − 4izT))
        let rate_t = (z / (Complex64::new(1.0, 0.0) - Complex64::new(0.0, 4.0 * t) * z)).re;
        let grid = match s.grid {
            Some(g) => build::grid(Some(g), 1)?,
            None => GridSpec::new(1, (30.0 / rate_t).sqrt(), 2048)?,
        };
        let u0 = WaveField::from_fn(grid, 0.0, |x| (-z * x[0] * x[0]).exp());
        let ut = free_propagate(&u0, t);
        let r0 = fit_rate(&u0, suggest_window(&u0, 0.5, 1e-8)?)?;
        let rt = fit_rate(&ut, suggest_window(&ut, 0.5, 1e-8)?)?;
        if !(r0.trusted && rt.trusted) {
            bail!("untrusted fit at T = {t}");
        }
        let v = classify(rt.alpha_sq(), r0.alpha_sq(), ThresholdKind::Free { t })?;
        let ratio = v.product / (4.0 * t);
        pass &= (1.0..=1.0 + s.checks.ratio_tol).contains(&ratio) && v.classification != Classification::BelowThreshold;
        worst = worst.max(ratio);
        let cls = serde_json::to_value(v.classification)?.as_str().unwrap_or_default().to_string();
        out.table.push(vec![num(t), num(r0.alpha_sq()), num(rt.alpha_sq()), num(v.product), num(ratio), cls]);
    }
    out.pass = pass;
    out.detail = format!("{} horizons, αβ/4T up to {}", times.len(), num(worst));
    out.summary = json!({"max_ratio": worst, "beta_factor": beta_factor, "chirp": chirp});
    Ok(())
}
