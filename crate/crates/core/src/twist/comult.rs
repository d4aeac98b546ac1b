//! The comultiplication `δ̂₀` of the groupoid algebra over the translations,
//! its three-leg versions `(δ₀ × id)^` and `(id × δ₀)^`, and the
//! intertwining check between them and the twist.
//!
//! All operators are lazy fields: one (or two nested) adaptive integrals per
//! evaluation. The closed route uses the instantiated chart formulas, the
//! generic route evaluates the integrands through the structure maps.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::actions::{twist_apply, TwistedField};
use super::maps::TwistPointMap;
use super::{DoubleGroup as D, TwistConfig};
use crate::error::{Error, Result};
use crate::funcspace::quad::merge_intervals;
use crate::funcspace::{
    expect_chart, grid_points, integrate_intervals, sup_residual, BoxN, Chart, Field, Interval, QuadratureSpec, SmoothFn, Support,
};
use crate::group::GroupElement;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    #[default]
    Closed,
    Generic,
}

/// Restrict `list` to the `c` with `num / c ∈ den`.
fn restrict(list: Vec<(f64, f64)>, num: f64, den: Interval) -> Vec<(f64, f64)> {
    if den.contains_zero() {
        return list;
    }
    if num == 0.0 {
        return Vec::new();
    }
    let (u, v) = (num / den.lo, num / den.hi);
    let (lo, hi) = (u.min(v), u.max(v));
    list.into_iter()
        .filter_map(|(a, b)| {
            let (a, b) = (a.max(lo), b.min(hi));
            (b > a).then_some((a, b))
        })
        .collect()
}

fn check_field(f: &dyn Field, arity: usize, what: &str) -> Result<()> {
    expect_chart(f.chart(), Chart::Zc)?;
    if f.arity() != arity {
        return Err(Error::InvalidArgument(format!("{what} must have {arity} coordinates, got {}", f.arity())));
    }
    Ok(())
}

/// Every scale coordinate integrated against `dc/|c|` must stay off zero.
fn check_scale_support(f: &dyn Field, coords: &[usize]) -> Result<()> {
    for bx in f.support().boxes().map_err(|_| Error::UnboundedSupport("comultiplication input".into()))? {
        for &i in coords {
            if bx[i].contains_zero() {
                return Err(Error::SingularSupport(format!("coordinate {i} support [{}, {}] meets c = 0", bx[i].lo, bx[i].hi)));
            }
        }
    }
    Ok(())
}

fn inv_sqrt_j(g: &GroupElement) -> f64 {
    1.0 / D::j_c(g).sqrt()
}

fn chart_of(g: &GroupElement) -> [f64; 2] {
    // b c = (z + c - 1, c)
    [g.b - g.a + 1.0, g.a]
}

/// `(δ̂₀(f) F)(z₁, c₁, z₂, c₂) = ∫ dc/|c| f(z₁ + z₂, c) F(z₁/c, c₁/c, z₂/c, c₂/c)`.
pub struct Delta0<'a> {
    f: &'a dyn Field,
    big: &'a dyn Field,
    route: Route,
    spec: QuadratureSpec,
    support: Support,
}

pub fn delta0_hat<'a>(f: &'a dyn Field, big: &'a dyn Field, route: Route, spec: &QuadratureSpec) -> Result<Delta0<'a>> {
    check_field(f, 2, "f")?;
    check_field(big, 4, "F")?;
    check_scale_support(f, &[1])?;
    let mut boxes = Vec::new();
    if !f.support().is_empty() && !big.support().is_empty() {
        for fb in f.support().boxes()? {
            for bb in big.support().boxes()? {
                boxes.push(bb.iter().map(|iv| fb[1].mul(*iv)).collect::<BoxN>());
            }
        }
    }
    Ok(Delta0 { f, big, route, spec: *spec, support: Support::Boxes(boxes) })
}

impl Delta0<'_> {
    fn c_ranges(&self, p: &[f64]) -> Vec<(f64, f64)> {
        let Ok(base) = self.f.support().slice_intervals(&[(0, p[0] + p[2])], 1) else { return Vec::new() };
        let Ok(boxes) = self.big.support().boxes().map(|b| b.to_vec()) else { return base };
        let mut out = Vec::new();
        for bx in boxes {
            let mut list = base.clone();
            for i in 0..4 {
                list = restrict(list, p[i], bx[i]);
            }
            out.extend(list);
        }
        merge_intervals(out)
    }

    fn integrand(&self, p: &[f64], c: f64) -> C64 {
        match self.route {
            Route::Closed => {
                let fv = self.f.eval(&[p[0] + p[2], c]);
                if fv == C64::new(0.0, 0.0) {
                    return fv;
                }
                fv * self.big.eval(&[p[0] / c, p[1] / c, p[2] / c, p[3] / c]) / c.abs()
            }
            Route::Generic => self.generic_integrand(p, c).unwrap_or(C64::new(f64::NAN, 0.0)),
        }
    }

    fn generic_integrand(&self, p: &[f64], c: f64) -> Result<C64> {
        let g1 = D::from_chart(p[0], p[1]);
        let g2 = D::from_chart(p[2], p[3]);
        let (b1, b2, c2) = (D::b_left(&g1)?, D::b_left(&g2)?, D::c_right(&g2)?);
        let gamma = D::unit_slope(c);
        let b2g = b2.mul(&gamma);
        let x = b1.mul(&b2g);
        let leg1 = D::c_left(&x)?.inverse().mul(&g1);
        let leg2 = D::b_right(&b2g)?.mul(&gamma.inverse()).mul(&c2);
        let fv = self.f.eval(&chart_of(&x));
        let [u1, v1] = chart_of(&leg1);
        let [u2, v2] = chart_of(&leg2);
        let w = inv_sqrt_j(&D::c_left(&b2g)?) / D::C.param(&gamma).abs();
        Ok(fv * self.big.eval(&[u1, v1, u2, v2]) * w)
    }
}

impl Field for Delta0<'_> {
    fn arity(&self) -> usize {
        4
    }
    fn chart(&self) -> Chart {
        Chart::Zc
    }
    fn eval(&self, p: &[f64]) -> C64 {
        let ranges = self.c_ranges(p);
        integrate_intervals(|c| self.integrand(p, c), &ranges, &self.spec).value
    }
    fn support(&self) -> Support {
        self.support.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThreeLegKind {
    /// `(δ₀ × id)^`, comultiply into legs 1 and 2.
    DeltaId,
    /// `(id × δ₀)^`, comultiply into legs 2 and 3.
    IdDelta,
}

/// `(δ₀ × id)^(F₁) F₂` or `(id × δ₀)^(F₁) F₂`: two-leg `F₁` acting on a
/// three-leg `F₂` by a double integral over `(c′, c″)`.
pub struct Delta0ThreeLeg<'a> {
    kind: ThreeLegKind,
    f1: &'a dyn Field,
    f2: &'a dyn Field,
    route: Route,
    spec: QuadratureSpec,
    support: Support,
}

pub fn delta0_three_leg<'a>(
    kind: ThreeLegKind,
    f1: &'a dyn Field,
    f2: &'a dyn Field,
    route: Route,
    spec: &QuadratureSpec,
) -> Result<Delta0ThreeLeg<'a>> {
    check_field(f1, 4, "F1")?;
    check_field(f2, 6, "F2")?;
    check_scale_support(f1, &[1, 3])?;
    let mut boxes = Vec::new();
    if !f1.support().is_empty() && !f2.support().is_empty() {
        for b1 in f1.support().boxes()? {
            for b2 in f2.support().boxes()? {
                let split = if kind == ThreeLegKind::DeltaId { 4 } else { 2 };
                let bx: BoxN = (0..6).map(|i| if i < split { b1[1].mul(b2[i]) } else { b1[3].mul(b2[i]) }).collect();
                boxes.push(bx);
            }
        }
    }
    Ok(Delta0ThreeLeg { kind, f1, f2, route, spec: *spec, support: Support::Boxes(boxes) })
}

impl Delta0ThreeLeg<'_> {
    /// Coordinates of `F₁` with `c′`, `c″` left free, and the `F₂` coordinates
    /// divided by `c′` (first) and `c″` (second).
    fn layout(&self, p: &[f64]) -> ([f64; 2], std::ops::Range<usize>, std::ops::Range<usize>) {
        match self.kind {
            ThreeLegKind::DeltaId => ([p[0] + p[2], p[4]], 0..4, 4..6),
            ThreeLegKind::IdDelta => ([p[0], p[2] + p[4]], 0..2, 2..6),
        }
    }

    fn outer_ranges(&self, p: &[f64]) -> Vec<(f64, f64)> {
        let ([u, v], first, _) = self.layout(p);
        let Ok(base) = self.f1.support().slice_intervals(&[(0, u), (2, v)], 1) else { return Vec::new() };
        self.windowed(base, p, first)
    }

    fn inner_ranges(&self, p: &[f64], c1: f64) -> Vec<(f64, f64)> {
        let ([u, v], _, second) = self.layout(p);
        let Ok(base) = self.f1.support().slice_intervals(&[(0, u), (1, c1), (2, v)], 3) else { return Vec::new() };
        self.windowed(base, p, second)
    }

    fn windowed(&self, base: Vec<(f64, f64)>, p: &[f64], coords: std::ops::Range<usize>) -> Vec<(f64, f64)> {
        let Ok(boxes) = self.f2.support().boxes().map(|b| b.to_vec()) else { return base };
        let mut out = Vec::new();
        for bx in boxes {
            let mut list = base.clone();
            for i in coords.clone() {
                list = restrict(list, p[i], bx[i]);
            }
            out.extend(list);
        }
        merge_intervals(out)
    }

    fn integrand(&self, p: &[f64], c1: f64, c2: f64) -> C64 {
        match self.route {
            Route::Closed => {
                let ([u, v], first, _) = self.layout(p);
                let a = self.f1.eval(&[u, c1, v, c2]);
                if a == C64::new(0.0, 0.0) {
                    return a;
                }
                let mut q = [0.0; 6];
                for i in 0..6 {
                    q[i] = if first.contains(&i) { p[i] / c1 } else { p[i] / c2 };
                }
                a * self.f2.eval(&q) / (c1 * c2).abs()
            }
            Route::Generic => self.generic_integrand(p, c1, c2).unwrap_or(C64::new(f64::NAN, 0.0)),
        }
    }

    fn generic_integrand(&self, p: &[f64], c1: f64, c2: f64) -> Result<C64> {
        let g: Vec<GroupElement> = (0..3).map(|i| D::from_chart(p[2 * i], p[2 * i + 1])).collect();
        let b: Vec<GroupElement> = g.iter().map(D::b_left).collect::<Result<_>>()?;
        let cr: Vec<GroupElement> = g.iter().map(D::c_right).collect::<Result<_>>()?;
        let (gp, gpp) = (D::unit_slope(c1), D::unit_slope(c2));
        let (x, y, legs, w) = match self.kind {
            ThreeLegKind::DeltaId => {
                let x = b[0].mul(&b[1]).mul(&gp);
                let y = b[2].mul(&gpp);
                let b2g = b[1].mul(&gp);
                let legs = [
                    D::c_left(&x)?.inverse().mul(&g[0]),
                    D::b_right(&b2g)?.mul(&gp.inverse()).mul(&cr[1]),
                    D::c_left(&y)?.inverse().mul(&g[2]),
                ];
                (x, y, legs, inv_sqrt_j(&D::c_left(&b2g)?))
            }
            ThreeLegKind::IdDelta => {
                let x = b[0].mul(&gp);
                let y = b[1].mul(&b[2]).mul(&gpp);
                let b3g = b[2].mul(&gpp);
                let legs = [
                    D::c_left(&x)?.inverse().mul(&g[0]),
                    D::c_left(&y)?.inverse().mul(&g[1]),
                    D::b_right(&b3g)?.mul(&gpp.inverse()).mul(&cr[2]),
                ];
                (x, y, legs, inv_sqrt_j(&D::c_left(&b3g)?))
            }
        };
        let [u1, v1] = chart_of(&x);
        let [u2, v2] = chart_of(&y);
        let a = self.f1.eval(&[u1, v1, u2, v2]);
        let q: Vec<f64> = legs.iter().flat_map(chart_of).collect();
        Ok(a * self.f2.eval(&q) * w / (c1 * c2).abs())
    }
}

impl Field for Delta0ThreeLeg<'_> {
    fn arity(&self) -> usize {
        6
    }
    fn chart(&self) -> Chart {
        Chart::Zc
    }
    fn eval(&self, p: &[f64]) -> C64 {
        let outer = self.outer_ranges(p);
        integrate_intervals(
            |c1| {
                let inner = self.inner_ranges(p, c1);
                integrate_intervals(|c2| self.integrand(p, c1, c2), &inner, &self.spec).value
            },
            &outer,
            &self.spec,
        )
        .value
    }
    fn support(&self) -> Support {
        self.support.clone()
    }
}

/// Probe points for three-leg checks: an `n`-point grid in each `z`
/// coordinate spanning half the hull width around `anchor`, with the scale
/// coordinates of `anchor`.
pub fn probe_grid(hull: &[Interval], anchor: &[f64], n: usize) -> Vec<Vec<f64>> {
    let zs: Vec<Interval> = (0..hull.len()).step_by(2).map(|i| Interval::centered(anchor[i], 0.25 * hull[i].width())).collect();
    grid_points(&zs, n)
        .into_iter()
        .map(|z| z.iter().enumerate().flat_map(|(leg, &z)| [z, anchor[2 * leg + 1]]).collect())
        .collect()
}

/// A point of large `|g|`: the best of `samples` seeded uniform draws in
/// `hull`, then refined by a coordinate pattern search.
pub fn find_anchor(g: impl Fn(&[f64]) -> f64, hull: &[Interval], samples: usize, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut best = (f64::NEG_INFINITY, hull.iter().map(|iv| iv.mid()).collect::<Vec<f64>>());
    for _ in 0..samples {
        let p: Vec<f64> = hull.iter().map(|iv| rng.gen_range(iv.lo..=iv.hi)).collect();
        let v = g(&p);
        if v > best.0 {
            best = (v, p);
        }
    }
    let mut step: Vec<f64> = hull.iter().map(|iv| 0.1 * iv.width()).collect();
    for _ in 0..60 {
        let mut improved = false;
        for d in 0..hull.len() {
            for dir in [-1.0, 1.0] {
                let mut q = best.1.clone();
                q[d] += dir * step[d];
                let v = g(&q);
                if v > best.0 {
                    best = (v, q);
                    improved = true;
                }
            }
        }
        if !improved {
            step.iter_mut().for_each(|s| *s *= 0.5);
        }
    }
    best.1
}

impl Delta0ThreeLeg<'_> {
    /// A point where the operator is sizable, located by maximising the
    /// integrand jointly over the point and the integration variables.
    pub fn anchor(&self, seed: u64) -> Result<Vec<f64>> {
        let mut hull = self.support.hull()?;
        let f1 = self.f1.support().hull()?;
        hull.push(f1[1]);
        hull.push(f1[3]);
        let best = find_anchor(|x| self.integrand(&x[..6], x[6], x[7]).norm(), &hull, 4000, seed);
        Ok(best[..6].to_vec())
    }
}

/// Sup-residual and sup of the left side of the intertwining identity between the twist on three legs
/// and the three-leg comultiplication:
/// `T̂₁[(δ₀ × id)^(F₁)F₂] = (δ₀ × id)^(T̂F₁)F₂` and
/// `T̂₂[(id × δ₀)^(F₁)F₂] = (id × δ₀)^(T̂F₁)F₂`.
pub fn twist_intertwining_residual(
    kind: ThreeLegKind,
    f1: &SmoothFn,
    f2: &dyn Field,
    per_axis: usize,
    cfg: &TwistConfig,
    spec: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let map = match kind {
        ThreeLegKind::DeltaId => TwistPointMap::T1,
        ThreeLegKind::IdDelta => TwistPointMap::T2,
    };
    let inner = delta0_three_leg(kind, f1, f2, Route::Closed, spec)?;
    let lhs = TwistedField::new(map, &inner, cfg)?;
    let twisted = twist_apply(TwistPointMap::T, f1, cfg)?;
    let rhs = delta0_three_leg(kind, &twisted, f2, Route::Closed, spec)?;
    let hull = rhs.support().hull()?;
    let points = probe_grid(&hull, &rhs.anchor(0x39)?, per_axis);
    let scale = points.iter().map(|p| lhs.eval(p).norm()).fold(0.0, f64::max);
    Ok((sup_residual(&lhs, &rhs, &points), scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::twist::actions::{apply_generator, GeneratorKind, GeneratorOp};

    fn bump(center: &[f64], hw: &[f64]) -> SmoothFn {
        SmoothFn::bump_product(Chart::Zc, center, hw, C64::new((center.len() as f64).exp(), 0.0))
    }

    fn spec() -> QuadratureSpec {
        QuadratureSpec::default().with_tolerance(1e-12)
    }

    #[test]
    fn zero_input_gives_zero() {
        let f = SmoothFn::zero(2, Chart::Zc);
        let big = bump(&[0.0, 1.0, 0.0, 1.0], &[1.0, 0.5, 1.0, 0.5]);
        let d = delta0_hat(&f, &big, Route::Closed, &spec()).unwrap();
        assert_eq!(d.eval(&[0.1, 1.0, 0.2, 1.0]), C64::new(0.0, 0.0));
    }

    #[test]
    fn singular_support_rejected() {
        let f = bump(&[0.0, 0.2], &[1.0, 0.5]);
        let big = bump(&[0.0, 1.0, 0.0, 1.0], &[1.0, 0.5, 1.0, 0.5]);
        assert!(matches!(delta0_hat(&f, &big, Route::Closed, &spec()), Err(Error::SingularSupport(_))));
    }

    #[test]
    fn routes_agree_and_match_direct_quadrature() {
        let f = bump(&[0.4, 1.2], &[0.8, 0.5]);
        let big = bump(&[0.2, 1.1, 0.3, -1.0], &[0.7, 0.5, 0.6, 0.5]);
        let closed = delta0_hat(&f, &big, Route::Closed, &spec()).unwrap();
        let generic = delta0_hat(&f, &big, Route::Generic, &spec()).unwrap();
        let p = [0.25, 1.3, 0.3, -1.2];
        let direct = crate::funcspace::integrate_fixed(
            |c| f.eval(&[p[0] + p[2], c]) * big.eval(&[p[0] / c, p[1] / c, p[2] / c, p[3] / c]) / c,
            0.7,
            1.7,
            400,
            16,
        );
        assert!((closed.eval(&p) - direct).norm() < 1e-12);
        let pts = grid_points(&closed.support().hull().unwrap(), 4);
        assert!(sup_residual(&closed, &generic, &pts) < 1e-12);
    }

    #[test]
    fn multiplier_and_scaling_compatibility() {
        let cfg = TwistConfig::default();
        let f = bump(&[0.4, 1.2], &[0.8, 0.5]);
        let big = bump(&[0.2, 1.1, 0.3, -1.0], &[0.7, 0.5, 0.6, 0.5]);
        let d = delta0_hat(&f, &big, Route::Closed, &spec()).unwrap();
        let yf = apply_generator(GeneratorOp::new(GeneratorKind::Y, 0), &f, &cfg).unwrap();
        let dy = delta0_hat(&yf, &big, Route::Closed, &spec()).unwrap();
        let pts = grid_points(&d.support().hull().unwrap(), 5);
        let r = pts.iter().map(|p| (d.eval(p) * (p[0] + p[2]) - dy.eval(p)).norm()).fold(0.0, f64::max);
        assert!(r < 1e-10, "{r}");

        let t = 0.3;
        let bt = |g: &SmoothFn, legs: usize| {
            (0..legs).try_fold(g.clone(), |acc, leg| apply_generator(GeneratorOp::new(GeneratorKind::Bt(t), leg), &acc, &cfg))
        };
        let fb = bt(&f, 1).unwrap();
        let rhs = delta0_hat(&fb, &big, Route::Closed, &spec()).unwrap();
        let s = (-t).exp();
        let r = pts
            .iter()
            .map(|p| {
                let q: Vec<f64> = p.iter().map(|x| x * s).collect();
                (d.eval(&q) - rhs.eval(p)).norm()
            })
            .fold(0.0, f64::max);
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn three_leg_routes_agree() {
        let f1 = bump(&[0.3, 1.1, 0.2, 1.2], &[0.8, 0.4, 0.5, 0.4]);
        let f2 = bump(&[0.1, 1.0, 0.3, 1.0, 0.4, -1.0], &[0.6, 0.5, 0.6, 0.5, 0.5, 0.5]);
        let spec = QuadratureSpec::default().with_tolerance(1e-11);
        for kind in [ThreeLegKind::DeltaId, ThreeLegKind::IdDelta] {
            let closed = delta0_three_leg(kind, &f1, &f2, Route::Closed, &spec).unwrap();
            let generic = delta0_three_leg(kind, &f1, &f2, Route::Generic, &spec).unwrap();
            let hull = closed.support().hull().unwrap();
            let pts = probe_grid(&hull, &closed.anchor(1).unwrap(), 2);
            let scale = pts.iter().map(|p| closed.eval(p).norm()).fold(0.0, f64::max);
            assert!(scale > 1e-2, "{kind:?} probes see nothing: {scale}");
            assert!(sup_residual(&closed, &generic, &pts) < 1e-10);
        }
    }

    #[test]
    fn intertwining_holds() {
        let f1 = bump(&[0.3, 1.1, 0.2, 1.2], &[0.8, 0.4, 0.5, 0.4]);
        let f2 = bump(&[0.1, 1.0, 0.3, 1.0, 0.4, -1.0], &[0.6, 0.5, 0.6, 0.5, 0.5, 0.5]);
        let spec = QuadratureSpec { order: 32, ..QuadratureSpec::default() };
        for kind in [ThreeLegKind::DeltaId, ThreeLegKind::IdDelta] {
            let (r, scale) = twist_intertwining_residual(kind, &f1, &f2, 3, &TwistConfig::default(), &spec).unwrap();
            assert!(scale > 1e-2, "{kind:?} probes see nothing: {scale} {r}");
            assert!(r < 1e-7, "{kind:?}: {r}");
        }
    }
}
