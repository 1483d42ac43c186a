//! Adaptive Gauss–Legendre quadrature on finite intervals.
//!
//! The panel rule comes from `gauss-quad`; refinement bisects a panel until the
//! one-panel and two-half-panel estimates agree to the requested tolerance.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};

const DEGREE: usize = 12;
const MAX_DEPTH: u32 = 40;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(NonZeroUsize::new(DEGREE).unwrap()))
}

/// Integrate `f` over `[a, b]` to relative tolerance `rel_tol`.
///
/// An absolute floor of `rel_tol * 1e-3` keeps integrands that vanish
/// identically from refining forever.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = rule();
    let whole = rule.integrate(a, b, &f);
    let abs_floor = rel_tol * 1e-3;
    refine(&f, rule, a, b, whole, rel_tol, abs_floor, 0)
}

#[allow(clippy::too_many_arguments)]
fn refine<F: Fn(f64) -> f64>(
    f: &F,
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    whole: f64,
    rel_tol: f64,
    abs_floor: f64,
    depth: u32,
) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(a, mid, f);
    let right = rule.integrate(mid, b, f);
    let halves = left + right;
    let err = (halves - whole).abs();
    if !halves.is_finite() {
        return Err(Error::Quadrature { a, b, estimate: halves });
    }
    if err <= rel_tol * halves.abs() || err <= abs_floor {
        return Ok(halves);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::Quadrature { a, b, estimate: halves });
    }
    let l = refine(f, rule, a, mid, left, rel_tol, abs_floor * 0.5, depth + 1)?;
    let r = refine(f, rule, mid, b, right, rel_tol, abs_floor * 0.5, depth + 1)?;
    Ok(l + r)
}

/// Component-wise quadrature of a vector-valued integrand.
pub fn integrate_vec<F: Fn(f64, &mut [f64])>(
    f: F,
    dim: usize,
    a: f64,
    b: f64,
    rel_tol: f64,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; dim];
    for (c, slot) in out.iter_mut().enumerate() {
        // Components are integrated separately so each gets its own refinement.
        *slot = integrate(
            |s| {
                let mut v = vec![0.0; dim];
                f(s, &mut v);
                v[c]
            },
            a,
            b,
            rel_tol,
        )?;
    }
    Ok(out)
}
