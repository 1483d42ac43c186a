//! Registry lookups: grids, equations, fields, transforms, potentials, threshold kinds.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use gaussdecay::closedform::{counterexample_u, Branch, CounterexampleParams};
use gaussdecay::decay::ThresholdKind;
use gaussdecay::engine::{EquationSpec, Regime};
use gaussdecay::fields::{make_uniform_magnetic, standard_pairing, ElectricPotential, MagneticPotential, Spatial, VecTimeFn};
use gaussdecay::grid::{GridSpec, WaveField};
use gaussdecay::specfun::{landau_eigenfunction, qho_eigenfunction};
use gaussdecay::transforms::{
    electric_removal, harmonic_removal, phase_removal, repulsive_removal, rotating_frame, TransformRecord,
};
use num_complex::Complex64;

use crate::config::GridCfg;
use crate::registry::Call;

pub fn grid(cfg: Option<GridCfg>, dim: usize) -> Result<GridSpec> {
    match cfg {
        Some(g) => {
            if g.dim != dim {
                bail!("grid is {}D but the scenario needs {dim}D", g.dim);
            }
            Ok(GridSpec::new(g.dim, g.half_width, g.points)?)
        }
        None => Ok(GridSpec::standard(dim)),
    }
}

/// Dimension implied by a registry reference, if it fixes one.
pub fn implied_dim(call: &Call) -> Result<Option<usize>> {
    Ok(match call.name.as_str() {
        "magnetic" | "landau" => Some(call.usize_or("dim", 2)?),
        "oscillator" => Some(1),
        "closed_form" => Some(call.usize_or("n", 1)?),
        "file" => None,
        _ => call.params.get("dim").map(|_| call.usize_or("dim", 1)).transpose()?,
    })
}

fn sine_drive(call: &Call, dim: usize) -> Result<VecTimeFn> {
    let amp = call.f64("amp")?;
    let freq = call.f64_or("freq", 1.0)?;
    let axis = call.usize_or("axis", 0)?;
    if axis >= dim {
        bail!("axis {axis} out of range for {dim}D");
    }
    Ok(Arc::new(move |t| {
        let mut e = vec![0.0; dim];
        e[axis] = amp * (freq * t).sin();
        e
    }))
}

pub fn equation(call: &Call, dim: usize, window: (f64, f64)) -> Result<EquationSpec> {
    let eq = match call.name.as_str() {
        "free" => {
            call.expect_keys(&["dim"])?;
            EquationSpec::free(dim, window)?
        }
        "harmonic" => {
            call.expect_keys(&["dim", "omega"])?;
            EquationSpec::harmonic(dim, call.f64("omega")?, window)?
        }
        "repulsive" => {
            call.expect_keys(&["dim", "nu"])?;
            EquationSpec::repulsive(dim, call.f64("nu")?, window)?
        }
        "magnetic" => {
            call.expect_keys(&["dim", "b"])?;
            EquationSpec::uniform_magnetic(dim, call.f64("b")?, window)?
        }
        "electric" => {
            call.expect_keys(&["dim", "amp", "freq", "axis"])?;
            let e = sine_drive(call, dim)?;
            EquationSpec::new(ElectricPotential::zero(dim).with_e_drive(e), MagneticPotential::zero(dim), window, Regime::General)?
        }
        other => bail!("unknown equation `{other}` (free, harmonic, repulsive, magnetic, electric)"),
    };
    Ok(eq)
}

pub fn closed_form_params(call: &Call) -> Result<CounterexampleParams> {
    call.expect_keys(&["omega", "b", "n", "k", "branch", "t"])?;
    let branch = match call.str_or("branch", "plus") {
        "plus" => Branch::Plus,
        "minus" => Branch::Minus,
        b => bail!("branch must be plus or minus, got `{b}`"),
    };
    let k = call.f64_or("k", 1.0)?;
    if call.params.contains_key("b") {
        return Ok(CounterexampleParams::magnetic(call.f64("b")?, k, branch)?);
    }
    Ok(CounterexampleParams::new(call.f64_or("omega", 1.0)?, call.usize_or("n", 1)?, k, branch)?)
}

/// The initial or stored field. `grid` is ignored for `file{path=...}`.
pub fn data(call: &Call, grid: GridSpec) -> Result<WaveField> {
    let dim = grid.dim();
    let f = match call.name.as_str() {
        "gaussian" => {
            call.expect_keys(&["dim", "beta_sq", "chirp", "x0", "p0", "t"])?;
            let beta_sq = call.f64_or("beta_sq", 1.0)?;
            if !(beta_sq > 0.0) {
                bail!("beta_sq must be positive");
            }
            let z = Complex64::new(1.0 / beta_sq, call.f64_or("chirp", 0.0)?);
            let (x0, p0) = (call.f64_or("x0", 0.0)?, call.f64_or("p0", 0.0)?);
            WaveField::from_fn(grid, call.f64_or("t", 0.0)?, move |x| {
                let r2: f64 = x.iter().enumerate().map(|(i, v)| if i == 0 { (v - x0).powi(2) } else { v * v }).sum();
                (-z * r2 + Complex64::new(0.0, p0 * x[0])).exp()
            })
        }
        "packet" => {
            call.expect_keys(&["dim", "t"])?;
            WaveField::from_fn(grid, call.f64_or("t", 0.0)?, |x| {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                Complex64::new(1.0, 0.5 * x[0]) * (-(r2 / 2.0) + 0.3 * x[0]).exp()
            })
        }
        "oscillator" => {
            call.expect_keys(&["m", "omega"])?;
            qho_eigenfunction(call.usize_or("m", 0)?, call.f64("omega")?, &grid)?.field
        }
        "landau" => {
            call.expect_keys(&["dim", "m", "l", "b"])?;
            landau_eigenfunction(call.usize_or("m", 0)?, call.i64_or("l", 0)?, call.f64("b")?, &grid)?.field
        }
        "closed_form" => {
            let p = closed_form_params(call)?;
            if p.n != dim {
                bail!("closed form is {}D, grid is {dim}D", p.n);
            }
            let t = call.f64_or("t", 0.0)?;
            counterexample_u(&vec![0.0; dim], t, &p)?;
            WaveField::from_fn(grid, t, move |x| counterexample_u(x, t, &p).expect("time checked above"))
        }
        "file" => {
            call.expect_keys(&["path"])?;
            let path = call.params.get("path").context("`file` needs `path`")?;
            WaveField::load(Path::new(path)).with_context(|| format!("loading snapshot {path}"))?
        }
        other => bail!("unknown data `{other}` (gaussian, packet, oscillator, landau, closed_form, file)"),
    };
    Ok(f)
}

pub fn record(call: &Call, dim: usize, horizon: f64) -> Result<TransformRecord> {
    let r = match call.name.as_str() {
        "harmonic_removal" => {
            call.expect_keys(&["omega"])?;
            harmonic_removal(dim, call.f64("omega")?, horizon)?
        }
        "repulsive_removal" => {
            call.expect_keys(&["nu"])?;
            repulsive_removal(dim, call.f64("nu")?, horizon)?
        }
        "electric_removal" => {
            call.expect_keys(&["amp", "freq", "axis"])?;
            electric_removal(dim, sine_drive(call, dim)?, None, horizon)?
        }
        "rotating_frame" => {
            call.expect_keys(&["b"])?;
            let m = make_uniform_magnetic(dim, call.f64("b")?, &standard_pairing(dim))?.uniform.expect("uniform part is set");
            rotating_frame(m, (0.0, horizon))?
        }
        "phase_removal" => {
            call.expect_keys(&["k"])?;
            let k = call.f64("k")?;
            phase_removal(dim, Arc::new(move |_| k), (0.0, horizon))?
        }
        other => bail!(
            "unknown transform `{other}` (harmonic_removal, repulsive_removal, electric_removal, rotating_frame, phase_removal)"
        ),
    };
    Ok(r)
}

/// A 2D vector potential for the gauge report, with the transverse part it should reduce to.
pub struct GaugeCase {
    pub potential: MagneticPotential,
    pub expected: Spatial<Vec<f64>>,
}

pub fn gauge_case(call: &Call) -> Result<GaugeCase> {
    let c = call.f64_or("c", 1.0)?;
    let b = call.f64_or("b", 1.0)?;
    let grad = move |x: &[f64]| {
        let chi = c * (-(x[0] * x[0] + x[1] * x[1])).exp();
        vec![-2.0 * x[0] * chi, -2.0 * x[1] * chi]
    };
    let transverse = move |x: &[f64]| {
        let e = b * (-(x[0] * x[0] + x[1] * x[1]) / 3.0).exp();
        vec![-x[1] * e, x[0] * e]
    };
    let case = match call.name.as_str() {
        "gradient" => {
            call.expect_keys(&["c"])?;
            GaugeCase { potential: MagneticPotential::from_static(2, grad), expected: Arc::new(|_| vec![0.0, 0.0]) }
        }
        "symmetric" => {
            call.expect_keys(&["b"])?;
            let a = move |x: &[f64]| vec![-0.5 * b * x[1], 0.5 * b * x[0]];
            GaugeCase { potential: MagneticPotential::from_static(2, a), expected: Arc::new(a) }
        }
        "transverse_plus_gradient" => {
            call.expect_keys(&["b", "c"])?;
            let a = move |x: &[f64]| {
                let (t, g) = (transverse(x), grad(x));
                vec![t[0] + g[0], t[1] + g[1]]
            };
            GaugeCase { potential: MagneticPotential::from_static(2, a), expected: Arc::new(transverse) }
        }
        other => bail!("unknown potential `{other}` (gradient, symmetric, transverse_plus_gradient)"),
    };
    Ok(case)
}

/// Threshold kind plus `(α², β²)` from `harmonic{omega=1, T=1, alpha=2, beta=2}`.
pub fn threshold(call: &Call) -> Result<(ThresholdKind, f64, f64)> {
    call.expect_keys(&["T", "omega", "nu", "b", "alpha", "beta", "alpha_sq", "beta_sq"])?;
    let t = call.f64("T")?;
    let kind = match call.name.as_str() {
        "free" => ThresholdKind::Free { t },
        "harmonic" => ThresholdKind::Harmonic { omega: call.f64("omega")?, t },
        "repulsive" => ThresholdKind::Repulsive { nu: call.f64("nu")?, t },
        "magnetic" => ThresholdKind::Magnetic { b: call.f64("b")?, t },
        other => bail!("unknown threshold kind `{other}` (free, harmonic, repulsive, magnetic)"),
    };
    let sq = |v: &str, sq: &str| -> Result<f64> {
        if call.params.contains_key(sq) {
            call.f64(sq)
        } else {
            Ok(call.f64(v)?.powi(2))
        }
    };
    Ok((kind, sq("alpha", "alpha_sq")?, sq("beta", "beta_sq")?))
}
