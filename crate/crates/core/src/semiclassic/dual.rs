//! The Fourier side of `Γ_0`: the bracket on grid functions, the dual
//! group law and the comultiplication it induces.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::coproduct::DeltaS;
use super::{delta_s_hat, poisson_bracket, DeformationParam, DEFAULT_K};
use crate::algebra::AlgebraElement;
use crate::error::{Error, Result};
use crate::funcspace::quad::composite_nodes;
use crate::funcspace::{
    fourier_point, partial_fourier, Field, FourierWindow, GridFn, Interval, QuadratureSpec, SmoothFn, UniformAxis,
};

/// `(β₁, a₁)(β₂, a₂) = (β₁ + β₂/a₁, a₁a₂)`.
pub fn dual_group(beta1: f64, a1: f64, beta2: f64, a2: f64) -> Result<(f64, f64)> {
    if a1 == 0.0 || a2 == 0.0 {
        return Err(Error::InvalidArgument("dual group elements need a ≠ 0".into()));
    }
    Ok((beta1 + beta2 / a1, a1 * a2))
}

pub fn dual_inverse(beta: f64, a: f64) -> Result<(f64, f64)> {
    if a == 0.0 {
        return Err(Error::InvalidArgument("dual group elements need a ≠ 0".into()));
    }
    Ok((-a * beta, 1.0 / a))
}

/// `(a - 1)/(2π) (∂_a F ∂_β G - ∂_a G ∂_β F)` on the interior of the grid.
pub fn fourier_bracket(f: &GridFn, g: &GridFn) -> Result<GridFn> {
    if f.beta != g.beta || f.a != g.a {
        return Err(Error::GridMismatch(format!("β axes {:?} / {:?}, a axes {:?} / {:?}", f.beta, g.beta, f.a, g.a)));
    }
    if f.beta.len < 5 || f.a.len < 5 {
        return Err(Error::GridMismatch("the difference stencil needs 5 points per axis".into()));
    }
    let first = f.d_a().zip_with(&g.d_beta(), |x, y| x * y)?;
    let second = g.d_a().zip_with(&f.d_beta(), |x, y| x * y)?;
    let diff = first.zip_with(&second, |x, y| x - y)?;
    Ok(diff.map(|_, a, v| v * ((a - 1.0) / (2.0 * PI))))
}

/// `max |{F,{G,H}} + {G,{H,F}} + {H,{F,G}}|` on the common interior grid.
pub fn grid_jacobi_residual(f: &GridFn, g: &GridFn, h: &GridFn) -> Result<f64> {
    // The outer brackets need both arguments on one grid.
    let outer = |x: &GridFn, inner: &GridFn| -> Result<GridFn> {
        let x = x.restrict(&inner.beta, &inner.a)?;
        fourier_bracket(&x, inner)
    };
    let t1 = outer(f, &fourier_bracket(g, h)?)?;
    let t2 = outer(g, &fourier_bracket(h, f)?)?;
    let t3 = outer(h, &fourier_bracket(f, g)?)?;
    Ok(t1.zip_with(&t2, |x, y| x + y)?.zip_with(&t3, |x, y| x + y)?.max_abs())
}

/// A residual with the size of the compared quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualCheck {
    pub residual: f64,
    pub scale: f64,
}

/// Compare the grid bracket of `ℱf, ℱg` with `-i ℱ({f, g})` on the
/// interior grid.
pub fn bracket_consistency(f: &AlgebraElement, g: &AlgebraElement, window: &FourierWindow) -> Result<DualCheck> {
    let ff = partial_fourier(f, window)?;
    let fg = partial_fourier(g, window)?;
    let lhs = fourier_bracket(&ff, &fg)?;
    let bracket = poisson_bracket(f, g)?;
    let inner = FourierWindow { beta: lhs.beta, a: lhs.a, panel_order: window.panel_order };
    let rhs = partial_fourier(&bracket, &inner)?.map(|_, _, v| v * C64::new(0.0, -1.0));
    Ok(DualCheck { residual: lhs.max_abs_diff(&rhs)?, scale: rhs.max_abs() })
}

/// Nodes and weights of a composite rule with panels no wider than `width`.
fn oscillatory_rule(lo: f64, hi: f64, width: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = ((hi - lo) / width).ceil().max(1.0) as usize;
    composite_nodes(lo, hi, panels, order)
}

fn double_fourier(samples: &[C64], xs: &[f64], ws: &[f64], ys: &[f64], vs: &[f64], beta1: f64, beta2: f64) -> C64 {
    let phase = |k: f64, x: f64| C64::from_polar(1.0, -2.0 * PI * k * x);
    let e2: Vec<C64> = ys.iter().zip(vs).map(|(&y, &v)| phase(beta2, y) * v).collect();
    let mut acc = C64::new(0.0, 0.0);
    for (i, (&x, &w)) in xs.iter().zip(ws).enumerate() {
        let row = &samples[i * ys.len()..(i + 1) * ys.len()];
        let inner: C64 = row.iter().zip(&e2).map(|(s, e)| s * e).sum();
        acc += inner * phase(beta1, x) * w;
    }
    acc
}

/// Settings for [`dual_intertwining_residual`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntertwiningGrid {
    pub beta: Vec<f64>,
    pub a: Vec<f64>,
    /// Gauss–Legendre order on each oscillatory panel.
    pub order: usize,
    pub quad: QuadratureSpec,
}

impl Default for IntertwiningGrid {
    fn default() -> Self {
        IntertwiningGrid {
            beta: vec![-1.0, -0.5, 0.0, 0.5, 1.0],
            a: vec![0.95, 1.0, 1.05],
            order: 8,
            quad: QuadratureSpec::default().with_tolerance(1e-10),
        }
    }
}

/// `(ℱ×ℱ)(δ̂_0(f)F)` against `ℱf(β₁ + β₂/a₁, a₁a₂) · (ℱ×ℱ)F` on the grid,
/// both double transforms by product quadrature on the `b`-supports.
pub fn dual_intertwining_residual(f: &AlgebraElement, big: &SmoothFn, grid: &IntertwiningGrid) -> Result<DualCheck> {
    let big_m = support_class(f, big)?;
    let d = DeformationParam::new(0.0, big_m)?;
    let delta: DeltaS = delta_s_hat(f, big, &d, DEFAULT_K, &grid.quad)?;
    let beta_max = grid.beta.iter().fold(0.0f64, |m, b| m.max(b.abs())).max(0.25);
    let width = 0.25 / beta_max;
    let hull = delta.support().hull()?;
    let big_hull = big.support().hull()?;
    let mut residual = 0.0f64;
    let mut scale = 0.0f64;
    for &a1 in &grid.a {
        for &a2 in &grid.a {
            let transform = |field: &dyn Field, b1r: Interval, b2r: Interval| {
                let (xs, ws) = oscillatory_rule(b1r.lo, b1r.hi, width, grid.order);
                let (ys, vs) = oscillatory_rule(b2r.lo, b2r.hi, width, grid.order);
                let samples: Vec<C64> =
                    xs.iter().flat_map(|&x| ys.iter().map(move |&y| [x, a1, y, a2])).map(|p| field.eval(&p)).collect();
                move |beta1: f64, beta2: f64| double_fourier(&samples, &xs, &ws, &ys, &vs, beta1, beta2)
            };
            let lhs = transform(&delta, hull[0], hull[2]);
            let big_t = transform(big, big_hull[0], big_hull[2]);
            for &beta1 in &grid.beta {
                for &beta2 in &grid.beta {
                    let (beta, a) = dual_group(beta1, a1, beta2, a2)?;
                    let rhs = fourier_point(f, beta, a, &grid.quad)? * big_t(beta1, beta2);
                    let l = lhs(beta1, beta2);
                    residual = residual.max((l - rhs).norm());
                    scale = scale.max(rhs.norm());
                }
            }
        }
    }
    Ok(DualCheck { residual, scale })
}

/// Smallest `M` (with a little room) such that the inputs lie in `K_M`.
fn support_class(f: &AlgebraElement, big: &SmoothFn) -> Result<f64> {
    let mut m = 1.0f64;
    let mut grow = |bx: &[Interval], scales: &[usize]| {
        for (i, iv) in bx.iter().enumerate() {
            if scales.contains(&i) {
                m = m.max(iv.mag()).max(1.0 / iv.mig());
            } else {
                m = m.max(iv.mag());
            }
        }
    };
    for bx in f.support_ref().boxes()? {
        grow(bx, &[1]);
    }
    for bx in big.support().boxes()? {
        grow(bx, &[1, 3]);
    }
    Ok(m * (1.0 + 1e-9) + 1e-9)
}

/// Uniform window `[-beta_max, beta_max] × [a_lo, a_hi]`.
pub fn window(beta_max: f64, beta_step: f64, a_lo: f64, a_hi: f64, a_step: f64, panel_order: usize) -> FourierWindow {
    let nb = (2.0 * beta_max / beta_step).round() as usize + 1;
    let na = ((a_hi - a_lo) / a_step).round() as usize + 1;
    FourierWindow { beta: UniformAxis::new(-beta_max, beta_step, nb), a: UniformAxis::new(a_lo, a_step, na), panel_order }
}
