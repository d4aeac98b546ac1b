//! Test functions, quadrature and the partial Fourier transform.

pub mod expr;
pub mod fourier;
pub mod interval;
pub mod quad;
pub mod smooth;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub use expr::Expr;
pub use fourier::{fourier_point, partial_fourier, FourierWindow, GridFn, UniformAxis};
pub use interval::{BoxN, Interval};
pub use quad::{integrate, integrate_fixed, integrate_intervals, QuadResult, QuadratureSpec};
pub use smooth::{expect_chart, BumpFamily, Chart, CoordMap, SmoothFn, Support};

use crate::error::{Error, Result};

/// Anything that can be evaluated pointwise and has a support bound: smooth
/// test functions as well as lazily evaluated convolution products.
pub trait Field: Send + Sync {
    fn arity(&self) -> usize;
    fn chart(&self) -> Chart;
    fn eval(&self, x: &[f64]) -> C64;
    fn support(&self) -> Support;
}

impl Field for SmoothFn {
    fn arity(&self) -> usize {
        SmoothFn::arity(self)
    }
    fn chart(&self) -> Chart {
        SmoothFn::chart(self)
    }
    fn eval(&self, x: &[f64]) -> C64 {
        SmoothFn::eval(self, x)
    }
    fn support(&self) -> Support {
        SmoothFn::support(self).clone()
    }
}

/// Pointwise transform of another field, with the same support.
pub struct MappedField<'a, F: Fn(&[f64], C64) -> C64 + Send + Sync> {
    pub inner: &'a dyn Field,
    pub map: F,
}

impl<F: Fn(&[f64], C64) -> C64 + Send + Sync> Field for MappedField<'_, F> {
    fn arity(&self) -> usize {
        self.inner.arity()
    }
    fn chart(&self) -> Chart {
        self.inner.chart()
    }
    fn eval(&self, x: &[f64]) -> C64 {
        (self.map)(x, self.inner.eval(x))
    }
    fn support(&self) -> Support {
        self.inner.support()
    }
}

/// Cell-centred tensor grid with `n` points per axis over `bx`.
pub fn grid_points(bx: &[Interval], n: usize) -> Vec<Vec<f64>> {
    let total = n.pow(bx.len() as u32);
    (0..total)
        .map(|k| {
            let mut r = k;
            bx.iter()
                .map(|iv| {
                    let i = r % n;
                    r /= n;
                    iv.lo + iv.width() * (i as f64 + 0.5) / n as f64
                })
                .collect()
        })
        .collect()
}

/// `max |f - g|` over the given points.
pub fn sup_residual(f: &dyn Field, g: &dyn Field, points: &[Vec<f64>]) -> f64 {
    use rayon::prelude::*;
    points.par_iter().map(|p| (f.eval(p) - g.eval(p)).norm()).reduce(|| 0.0, f64::max)
}

/// One-coordinate bump `x -> exp(-1/(1 - u^2))`, `u = (x - center)/halfwidth`.
pub fn make_bump(chart: Chart, arity: usize, coord: usize, center: f64, halfwidth: f64) -> Result<SmoothFn> {
    if !(halfwidth > 0.0) || coord >= arity {
        return Err(Error::InvalidArgument("bump needs a positive halfwidth and a valid coordinate".into()));
    }
    let e = ((Expr::var(coord) - center) / halfwidth).bump();
    let bx = (0..arity)
        .map(|i| if i == coord { Interval::centered(center, halfwidth) } else { Interval::new(f64::NEG_INFINITY, f64::INFINITY) })
        .collect();
    Ok(SmoothFn::from_expr(e, arity, chart, Support::single(bx)))
}

/// Declared distance of supports from the singular sets of the weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupportMargins {
    /// Every second coordinate of a leg (`c` or `a`) stays at least this far from 0.
    pub scale_margin: f64,
    /// For functions supported in the twist domain, `|1 + z|` of the second
    /// leg stays at least this large.
    pub twist_margin: f64,
}

impl Default for SupportMargins {
    fn default() -> Self {
        SupportMargins { scale_margin: 0.1, twist_margin: 0.1 }
    }
}

impl SupportMargins {
    /// Check the scale margin on every leg and, if `twist_leg` is given, the
    /// twist margin on that leg's first coordinate.
    pub fn check(&self, support: &Support, twist_leg: Option<usize>) -> Result<()> {
        for bx in support.boxes()? {
            for leg in 0..bx.len() / 2 {
                if bx[2 * leg + 1].mig() < self.scale_margin {
                    return Err(Error::OutsideDomain(format!(
                        "leg {leg} scale coordinate support [{}, {}] within {} of 0",
                        bx[2 * leg + 1].lo,
                        bx[2 * leg + 1].hi,
                        self.scale_margin
                    )));
                }
            }
            if let Some(leg) = twist_leg {
                let z = bx[2 * leg];
                let shifted = Interval::new(z.lo + 1.0, z.hi + 1.0);
                if shifted.mig() < self.twist_margin {
                    return Err(Error::OutsideDomain(format!(
                        "leg {leg} support [{}, {}] within {} of z = -1",
                        z.lo, z.hi, self.twist_margin
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Reference measures on products of two-dimensional charts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    Lebesgue,
    /// `dc/|c|` in the scale coordinate of every leg, Lebesgue in the others.
    HaarScale,
    /// `dz dc / c^2` per leg.
    L2Density,
}

impl Measure {
    fn weight(&self, x: &[f64]) -> f64 {
        match self {
            Measure::Lebesgue => 1.0,
            Measure::HaarScale => x.iter().skip(1).step_by(2).map(|c| 1.0 / c.abs()).product(),
            Measure::L2Density => x.iter().skip(1).step_by(2).map(|c| 1.0 / (c * c)).product(),
        }
    }
}

/// Iterated adaptive integral of `f` against `measure` over `f`'s support.
pub fn integrate_measure(f: &dyn Field, measure: Measure, spec: &QuadratureSpec) -> Result<C64> {
    let boxes = f.support().boxes()?.to_vec();
    if measure != Measure::Lebesgue {
        for bx in &boxes {
            for c in bx.iter().skip(1).step_by(2) {
                if c.contains_zero() {
                    return Err(Error::OutsideDomain("support meets the singular set c = 0".into()));
                }
            }
        }
    }
    let hull = match f.support().hull() {
        Ok(h) => h,
        Err(_) => return Ok(C64::new(0.0, 0.0)),
    };
    for iv in &hull {
        if !iv.lo.is_finite() || !iv.hi.is_finite() {
            return Err(Error::UnboundedSupport("integration needs a bounded support".into()));
        }
    }
    let mut x = vec![0.0; f.arity()];
    Ok(iterate(f, measure, &f.support(), &mut x, 0, spec))
}

fn iterate(f: &dyn Field, m: Measure, support: &Support, x: &mut Vec<f64>, level: usize, spec: &QuadratureSpec) -> C64 {
    let n = x.len();
    let fixed: Vec<(usize, f64)> = (0..level).map(|i| (i, x[i])).collect();
    let intervals = support.slice_intervals(&fixed, level).unwrap_or_default();
    let mut inner = |t: f64| {
        x[level] = t;
        if level + 1 == n {
            f.eval(x) * m.weight(x)
        } else {
            iterate(f, m, support, x, level + 1, spec)
        }
    };
    integrate_intervals(&mut inner, &intervals, spec).value
}

/// Grid scan of `|f|` over the support hull followed by coordinate-wise
/// refinement around the best point. The result is attained by `f`, hence
/// a lower bound for the supremum.
pub fn sup_norm(f: &dyn Field, points_per_axis: usize) -> Result<f64> {
    if f.support().is_empty() {
        return Ok(0.0);
    }
    let hull = f.support().hull()?;
    let n = points_per_axis.max(3);
    let dims = hull.len();
    let mut best = 0.0f64;
    let mut best_p = hull.iter().map(|i| i.mid()).collect::<Vec<f64>>();
    let total = n.pow(dims as u32);
    let mut p = vec![0.0; dims];
    for k in 0..total {
        let mut r = k;
        for (d, iv) in hull.iter().enumerate() {
            let i = r % n;
            r /= n;
            p[d] = iv.lo + iv.width() * (i as f64 + 0.5) / n as f64;
        }
        let v = f.eval(&p).norm();
        if v > best {
            best = v;
            best_p.clone_from(&p);
        }
    }
    let mut step: Vec<f64> = hull.iter().map(|i| i.width() / n as f64).collect();
    for _ in 0..60 {
        let mut improved = false;
        for d in 0..dims {
            for sgn in [-1.0, 1.0] {
                let mut q = best_p.clone();
                q[d] += sgn * step[d];
                let v = f.eval(&q).norm();
                if v > best {
                    best = v;
                    best_p = q;
                    improved = true;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_values() {
        let f = make_bump(Chart::Ba, 1, 0, 0.0, 1.0).unwrap();
        assert!((f.eval(&[0.0]).re - (-1.0f64).exp()).abs() < 1e-16);
        assert_eq!(f.eval(&[1.0]).re, 0.0);
        assert_eq!(f.eval(&[-1.0]).re, 0.0);
        assert_eq!(f.partial(0).eval(&[0.0]).re, 0.0);
        assert!(
            (sup_norm(&f.clone().with_support(Support::single(vec![Interval::new(-1.0, 1.0)])), 16).unwrap() - (-1.0f64).exp())
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn haar_measure_on_product_bump() {
        let f = SmoothFn::bump_product(Chart::Zc, &[0.0, 1.5], &[1.0, 0.4], C64::new(1.0, 0.0));
        let spec = QuadratureSpec::default().with_tolerance(1e-12);
        let v = integrate_measure(&f, Measure::HaarScale, &spec).unwrap();
        let one = |g: &dyn Fn(f64) -> f64, lo, hi| integrate(|x| C64::new(g(x), 0.0), lo, hi, &spec).value.re;
        let bz = one(&|z| expr::bump_deriv(0, z), -1.0, 1.0);
        let bc = one(&|c| expr::bump_deriv(0, (c - 1.5) / 0.4) / c.abs(), 1.1, 1.9);
        assert!((v.re - bz * bc).abs() < 1e-11);
    }

    #[test]
    fn margins() {
        let f = SmoothFn::bump_product(Chart::Zc, &[-0.95, 1.0, 0.0, 1.0], &[0.1, 0.5, 0.2, 0.5], C64::new(1.0, 0.0));
        let m = SupportMargins::default();
        assert!(m.check(f.support(), None).is_ok());
        assert!(m.check(f.support(), Some(0)).is_err());
        assert!(m.check(f.support(), Some(1)).is_ok());
    }
}
