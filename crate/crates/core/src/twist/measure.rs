//! The measure estimate behind the boundedness of the twisted comultiplication,
//! and the decomposition identity relating the twisted and untwisted
//! second multiplications on dilations.

use num_complex::Complex64 as C64;

use super::DoubleGroup as D;
use crate::error::{Error, Result};
use crate::funcspace::{integrate_intervals, Interval, QuadratureSpec};
use crate::group::{GroupElement, DEFAULT_ZERO_TOL};

fn check_args(z2: f64, m: f64, delta: f64) -> Result<()> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidArgument(format!("need 0 < m < 1, got {m}")));
    }
    if !(delta > 0.0 && delta < (1.0 + z2).abs()) {
        return Err(Error::OutsideDomain(format!("need 0 < δ < |1 + z₂| = {}, got δ = {delta}", (1.0 + z2).abs())));
    }
    Ok(())
}

/// `{c : m ≤ |c| ≤ 1/m, |z₁/c + z₂ + 1| < δ}` as disjoint open intervals.
pub fn mu_solution_set(z1: f64, z2: f64, m: f64, delta: f64) -> Result<Vec<Interval>> {
    check_args(z2, m, delta)?;
    if z1 == 0.0 {
        return Ok(Vec::new());
    }
    // z₁/c ranges over an interval not containing 0, so c = z₁/w does too.
    let w = Interval::new(-1.0 - z2 - delta, -1.0 - z2 + delta);
    let (u, v) = (z1 / w.lo, z1 / w.hi);
    let c = Interval::new(u.min(v), u.max(v));
    let allowed = if c.lo > 0.0 { Interval::new(m, 1.0 / m) } else { Interval::new(-1.0 / m, -m) };
    Ok(c.intersect(&allowed).filter(|iv| iv.width() > 0.0).into_iter().collect())
}

/// `∫_Z dc/|c|` by adaptive quadrature over the solution intervals.
pub fn mu_measure(z1: f64, z2: f64, m: f64, delta: f64, spec: &QuadratureSpec) -> Result<f64> {
    let set: Vec<(f64, f64)> = mu_solution_set(z1, z2, m, delta)?.iter().map(|iv| (iv.lo, iv.hi)).collect();
    let r = integrate_intervals(|c| C64::new(1.0 / c.abs(), 0.0), &set, spec);
    if !r.converged {
        return Err(Error::QuadratureNotConverged { lo: z1, hi: z2, estimate: r.error });
    }
    Ok(r.value.re)
}

/// Same measure from the antiderivative `ln|c|`.
pub fn mu_measure_analytic(z1: f64, z2: f64, m: f64, delta: f64) -> Result<f64> {
    Ok(mu_solution_set(z1, z2, m, delta)?.iter().map(|iv| (iv.hi.abs() / iv.lo.abs()).ln().abs()).sum())
}

/// `2δ|z₁| / (m (|1 + z₂|² - δ²))`.
pub fn mu_bound_pointwise(z1: f64, z2: f64, m: f64, delta: f64) -> f64 {
    2.0 * delta * z1.abs() / (m * ((1.0 + z2).powi(2) - delta * delta))
}

/// `δ · 8M³ / (3m)`, valid for `|z₁| ≤ M`, `1/M ≤ |1 + z₂| ≤ M`, `δ ≤ 1/(2M)`.
pub fn mu_bound_uniform(big_m: f64, m: f64, delta: f64) -> f64 {
    delta * 8.0 * big_m.powi(3) / (3.0 * m)
}

/// Both sides of the decomposition identity for `a₁ = (0, α₁)`,
/// `a₂ = (0, α₂)` and the unit-slope element with parameter `gamma`:
///
/// `b_R[b_R(a₁a₂) b_R(a₂)⁻¹ c̃_L(b_R(a₂))] · c̃_L(b_R(a₂))⁻¹ · c_L(b_R(a₂)c₂) · c̃_L(b_R(b_R(a₂)c₂))`
/// against `b_R(a₁) c₁` with `c₁ = c̃_L(a₂c₂)`.
pub fn dilation_decomposition_sides(alpha1: f64, alpha2: f64, gamma: f64) -> Result<(GroupElement, GroupElement)> {
    if alpha1 == 0.0 || alpha2 == 0.0 || gamma == 0.0 {
        return Err(Error::InvalidArgument("scale parameters must be nonzero".into()));
    }
    let a1 = D::A.element(alpha1);
    let a2 = D::A.element(alpha2);
    let c2 = D::unit_slope(gamma);
    let strict = |g: &GroupElement| -> Result<GroupElement> {
        if !D::in_ca(g, 1e3 * DEFAULT_ZERO_TOL) {
            return Err(Error::NotDecomposable(format!("{g:?} is not in CA")));
        }
        D::c_tilde_left(g)
    };
    let br2 = D::b_right(&a2)?;
    let ct = strict(&br2)?;
    let inner = D::b_right(&a1.mul(&a2))?.mul(&br2.inverse()).mul(&ct);
    let moved = D::b_right(&br2.mul(&c2))?;
    let lhs = D::b_right(&inner)?.mul(&ct.inverse()).mul(&D::c_left(&br2.mul(&c2))?).mul(&strict(&moved)?);
    let c1 = strict(&a2.mul(&c2))?;
    let rhs = D::b_right(&a1)?.mul(&c1);
    Ok((lhs, rhs))
}
