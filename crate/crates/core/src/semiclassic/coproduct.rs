//! The deformed comultiplication `δ̂_s` on `Γ_0 × Γ_0`, its support box and
//! its convergence to `δ̂_0` in the fibrewise `L¹` norm.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{k_m, support_within, DeformationParam};
use crate::algebra::{maximize_on, AlgebraElement};
use crate::error::{Error, Result};
use crate::funcspace::interval::{box_hull, subdivide};
use crate::funcspace::quad::merge_intervals;
use crate::funcspace::{
    expect_chart, integrate_fixed, integrate_intervals, BoxN, Chart, Field, Interval, QuadratureSpec, SmoothFn, Support,
};

/// The constant of the support estimate for `δ̂_s`.
pub const DEFAULT_K: f64 = 4.0;

fn point(x: f64) -> Interval {
    Interval::point(x)
}

/// `δ̂_s(f)F` as a lazily evaluated function of `(b₁, a₁, b₂, a₂)`.
pub struct DeltaS {
    s: f64,
    f: SmoothFn,
    big: SmoothFn,
    support: Support,
    spec: QuadratureSpec,
}

impl DeltaS {
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Integration range in `b` at the point `x`.
    fn ranges(&self, x: &[f64]) -> Vec<(f64, f64)> {
        let (Ok(fb), Ok(bb)) = (self.f.support().boxes(), self.big.support().boxes()) else {
            return Vec::new();
        };
        let s = self.s;
        let p = (x[1] - s * x[0]) * (x[3] - s * x[2]);
        let mut pieces = Vec::new();
        for bf in fb {
            for bg in bb {
                let Ok(from_big) = point(x[0]).sub(bg[0]).div(point(1.0).add(bg[0].scale(s))) else {
                    pieces.push((bf[0].lo, bf[0].hi));
                    continue;
                };
                let Some(mut r) = bf[0].intersect(&from_big) else { continue };
                if s == 0.0 {
                    if !bf[1].contains(p) {
                        continue;
                    }
                } else {
                    match r.intersect(&bf[1].sub(point(p)).scale(1.0 / s)) {
                        Some(q) => r = q,
                        None => continue,
                    }
                }
                pieces.push((r.lo, r.hi));
            }
        }
        merge_intervals(pieces)
    }

    fn integrand(&self, x: &[f64], b: f64) -> C64 {
        let s = self.s;
        let (b1, a1, b2, a2) = (x[0], x[1], x[2], x[3]);
        let q = a1 - s * b1;
        let fv = self.f.eval(&[b, s * b + q * (a2 - s * b2)]);
        if fv == C64::new(0.0, 0.0) {
            return fv;
        }
        let shift = 1.0 + s * b;
        let den = q + s * b;
        if den == 0.0 || shift == 0.0 {
            return C64::new(0.0, 0.0);
        }
        fv * self.big.eval(&[(b1 - b) / shift, a1 / shift, (b2 * q - b) / den, a2 * q / den]) / shift.abs()
    }
}

impl Field for DeltaS {
    fn arity(&self) -> usize {
        4
    }
    fn chart(&self) -> Chart {
        Chart::Ba
    }
    fn eval(&self, x: &[f64]) -> C64 {
        if !self.support.contains(x) {
            return C64::new(0.0, 0.0);
        }
        integrate_intervals(|b| self.integrand(x, b), &self.ranges(x), &self.spec).value
    }
    fn support(&self) -> Support {
        self.support.clone()
    }
}

/// `δ̂_s(f)F`. Requires `supp f ⊆ K_M`, `supp F ⊆ K_M × K_M` and
/// `|s| < 1/(k M²)`.
pub fn delta_s_hat(f: &AlgebraElement, big: &SmoothFn, d: &DeformationParam, k: f64, spec: &QuadratureSpec) -> Result<DeltaS> {
    let leaf = f.as_smooth().ok_or_else(|| Error::InvalidArgument("δ̂_s applies to explicitly given functions".into()))?;
    expect_chart(big.chart(), Chart::Ba)?;
    if big.arity() != 4 {
        return Err(Error::InvalidArgument(format!("δ̂_s acts on functions of 4 variables, got {}", big.arity())));
    }
    if !(k > 1.0) {
        return Err(Error::InvalidArgument(format!("support constant must exceed 1, got {k}")));
    }
    let limit = 1.0 / (k * d.big_m * d.big_m);
    if !(d.s.abs() < limit) {
        return Err(Error::DeformationOutOfRange { s: d.s, limit });
    }
    let km = k_m(d.big_m);
    if !support_within(leaf.support(), &km)? {
        return Err(Error::SupportTooLarge(format!("supp f is not inside K_{}", d.big_m)));
    }
    let km2 = Support::Boxes(
        km.boxes()?.iter().flat_map(|x| km.boxes().unwrap().iter().map(move |y| [x.clone(), y.clone()].concat())).collect(),
    );
    if !support_within(big.support(), &km2)? {
        return Err(Error::SupportTooLarge(format!("supp F is not inside K_{0} × K_{0}", d.big_m)));
    }
    for bx in leaf.support().boxes()? {
        if point(1.0).add(bx[0].scale(d.s)).contains_zero() {
            return Err(Error::SingularSupport(format!("1 + s b vanishes on supp f for s = {}", d.s)));
        }
    }
    let support = delta_s_support(leaf.support(), big.support(), d.s, 2)?;
    Ok(DeltaS { s: d.s, f: leaf.clone(), big: big.clone(), support, spec: *spec })
}

/// Rigorous enclosure of `supp δ̂_s(f)F`, one hull per pair of input boxes,
/// from the parametrisation of the support by `b ∈ supp f` and the point
/// `(y₁, x₁, y₂, x₂) ∈ supp F` at which `F` is evaluated. Each of the five
/// parameters is split into `pieces` parts.
pub fn delta_s_support(f: &Support, big: &Support, s: f64, pieces: usize) -> Result<Support> {
    Ok(Support::Boxes(delta_s_enclosure(f, big, s, pieces)?.into_iter().flatten().collect()))
}

/// The unmerged sub-box enclosures grouped per input box pair, each group
/// reduced to its hull.
fn delta_s_enclosure(f: &Support, big: &Support, s: f64, pieces: usize) -> Result<Vec<Option<BoxN>>> {
    let mut out = Vec::new();
    for bf in f.boxes()? {
        for bg in big.boxes()? {
            let mut hull: Option<BoxN> = None;
            for sub in subdivide(&[bf[0], bg[0], bg[1], bg[2], bg[3]], pieces) {
                let Some(img) = support_image(&sub, bf[1], s)? else { continue };
                hull = Some(match hull {
                    None => img,
                    Some(h) => box_hull(&h, &img),
                });
            }
            out.push(hull);
        }
    }
    Ok(out)
}

/// Image of one parameter box `(b, y₁, x₁, y₂, x₂)`; `None` when the
/// constraint on the `a`-argument of `f` cannot be met.
fn support_image(p: &[Interval], f_scale: Interval, s: f64) -> Result<Option<BoxN>> {
    let (b, y1, x1, y2, x2) = (p[0], p[1], p[2], p[3], p[4]);
    let shift = point(1.0).add(b.scale(s));
    let d = shift.mul(x1.sub(y1.scale(s)));
    if d.mul(x2.sub(y2.scale(s))).intersect(&f_scale).is_none() {
        return Ok(None);
    }
    let q = d.sub(b.scale(s));
    let b1 = b.add(shift.mul(y1));
    let a1 = shift.mul(x1);
    let a2 = x2.mul(d).div(q)?;
    let b2 = y2.mul(d).add(b).div(q)?;
    Ok(Some(vec![b1, a1, b2, a2]))
}

/// The box predicted to contain `supp δ̂_s(f)F`.
pub fn deformed_coproduct_box(big_m: f64, k: f64) -> Support {
    let m = big_m;
    let a1 = Interval::new(1.0 / m - 1.0 / (k * m * m), m + 1.0 / k);
    let b1 = Interval::new(-(2.0 * m + 1.0 / k), 2.0 * m + 1.0 / k);
    let b2max = 2.0 * m * m + m * (1.0 + 2.0 / k);
    let b2 = Interval::new(-b2max, b2max);
    let a2 = Interval::new(1.0 / m - 2.0 / (k * m), m * (1.0 + 2.0 / k));
    let mut boxes = Vec::new();
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            boxes.push(vec![b1, a1.scale(s1), b2, a2.scale(s2)]);
        }
    }
    Support::Boxes(boxes)
}

/// Whether the refined enclosure of `supp δ̂_s(f)F` lies in the predicted box.
pub fn coproduct_support_in_box(f: &Support, big: &Support, s: f64, big_m: f64, k: f64, pieces: usize) -> Result<bool> {
    let target = deformed_coproduct_box(big_m, k);
    let outer = target.boxes()?;
    for bf in f.boxes()? {
        for bg in big.boxes()? {
            for sub in subdivide(&[bf[0], bg[0], bg[1], bg[2], bg[3]], pieces) {
                if let Some(img) = support_image(&sub, bf[1], s)? {
                    if !outer.iter().any(|o| crate::funcspace::interval::box_subset(&img, o)) {
                        return Ok(false);
                    }
                }
            }
        }
    }
    Ok(true)
}

/// `δ̂_s(f)F - δ̂_0(f)F` with both integrals fused over the shared variable.
pub struct DeltaSDifference {
    deformed: DeltaS,
    flat: DeltaS,
    support: Support,
}

impl DeltaSDifference {
    pub fn new(f: &AlgebraElement, big: &SmoothFn, d: &DeformationParam, k: f64, spec: &QuadratureSpec) -> Result<Self> {
        let deformed = delta_s_hat(f, big, d, k, spec)?;
        let flat = delta_s_hat(f, big, &DeformationParam::new(0.0, d.big_m)?, k, spec)?;
        let support = deformed.support.union(&flat.support);
        Ok(DeltaSDifference { deformed, flat, support })
    }
}

impl Field for DeltaSDifference {
    fn arity(&self) -> usize {
        4
    }
    fn chart(&self) -> Chart {
        Chart::Ba
    }
    fn eval(&self, x: &[f64]) -> C64 {
        if !self.support.contains(x) {
            return C64::new(0.0, 0.0);
        }
        let mut pieces = self.deformed.ranges(x);
        pieces.extend(self.flat.ranges(x));
        let pieces = merge_intervals(pieces);
        let spec = self.deformed.spec;
        integrate_intervals(|b| self.deformed.integrand(x, b) - self.flat.integrand(x, b), &pieces, &spec).value
    }
    fn support(&self) -> Support {
        self.support.clone()
    }
}

/// Settings for the fibrewise `L¹` norm on `Γ_0 × Γ_0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProductNormSpec {
    /// Scan points per unit axis.
    pub scan_points: usize,
    /// Golden-section steps per coordinate sweep around the best scan point.
    pub refine_steps: usize,
    /// Alternating coordinate sweeps.
    pub sweeps: usize,
    /// Gauss–Legendre panels per `b` axis of the fibre integral.
    pub panels: usize,
    pub order: usize,
}

impl Default for ProductNormSpec {
    fn default() -> Self {
        ProductNormSpec { scan_points: 5, refine_steps: 8, sweeps: 2, panels: 4, order: 6 }
    }
}

/// `∫∫ |F(b₁, a₁, b₂, a₂)| db₁ db₂` over the fibre through `(a₁, a₂)`.
pub fn product_fibre_integral(field: &dyn Field, a1: f64, a2: f64, spec: &ProductNormSpec) -> Result<f64> {
    let support = field.support();
    let outer = support.slice_intervals(&[(1, a1), (3, a2)], 0)?;
    let mut total = 0.0;
    for (lo, hi) in outer {
        total += integrate_fixed(
            |b1| {
                let inner = support.slice_intervals(&[(0, b1), (1, a1), (3, a2)], 2).unwrap_or_default();
                let v: f64 = inner
                    .iter()
                    .map(|&(l, h)| {
                        integrate_fixed(|b2| C64::new(field.eval(&[b1, a1, b2, a2]).norm(), 0.0), l, h, spec.panels, spec.order)
                            .re
                    })
                    .sum();
                C64::new(v, 0.0)
            },
            lo,
            hi,
            spec.panels,
            spec.order,
        )
        .re;
    }
    Ok(total)
}

/// `‖F‖_0` on `Γ_0 × Γ_0`: the supremum over units of the fibre integral.
/// The involution there only flips the signs of `b₁, b₂`, so the left and
/// right norms coincide.
pub fn product_zero_norm(field: &dyn Field, spec: &ProductNormSpec) -> Result<f64> {
    let support = field.support();
    let mut best = (0.0, f64::NAN, f64::NAN, None::<(Interval, Interval)>);
    for bx in support.boxes()? {
        let (r1, r2) = (bx[1], bx[3]);
        let n = spec.scan_points.max(2);
        for i in 0..=n {
            for j in 0..=n {
                let a1 = r1.lo + r1.width() * i as f64 / n as f64;
                let a2 = r2.lo + r2.width() * j as f64 / n as f64;
                let v = product_fibre_integral(field, a1, a2, spec)?;
                if v > best.0 {
                    best = (v, a1, a2, Some((r1, r2)));
                }
            }
        }
    }
    let (mut top, mut a1, mut a2, ranges) = best;
    let Some((r1, r2)) = ranges else { return Ok(0.0) };
    let (h1, h2) = (r1.width() / spec.scan_points.max(2) as f64, r2.width() / spec.scan_points.max(2) as f64);
    for _ in 0..spec.sweeps {
        let mut arg = a1;
        let range1 = [((a1 - h1).max(r1.lo), (a1 + h1).min(r1.hi))];
        top = top.max(maximize_on(&range1, 2, spec.refine_steps, |t| {
            let v = product_fibre_integral(field, t, a2, spec)?;
            if v > top {
                arg = t;
            }
            Ok(v)
        })?);
        a1 = arg;
        let mut arg = a2;
        let range2 = [((a2 - h2).max(r2.lo), (a2 + h2).min(r2.hi))];
        top = top.max(maximize_on(&range2, 2, spec.refine_steps, |t| {
            let v = product_fibre_integral(field, a1, t, spec)?;
            if v > top {
                arg = t;
            }
            Ok(v)
        })?);
        a2 = arg;
    }
    Ok(top)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{grid_points, integrate};
    use crate::semiclassic::GAMMA0;

    fn inputs() -> (AlgebraElement, SmoothFn) {
        let f = SmoothFn::bump_product(Chart::Ba, &[0.1, 1.0], &[0.9, 0.15], C64::new(1.0, 0.4));
        let big = SmoothFn::bump_product(Chart::Ba, &[0.2, 1.0, -0.1, 1.0], &[0.8, 0.15, 0.9, 0.15], C64::new(0.8, -0.3));
        (AlgebraElement::new(f, GAMMA0).unwrap(), big)
    }

    #[test]
    fn zero_deformation_is_the_flat_formula() {
        let (f, big) = inputs();
        let spec = QuadratureSpec::default().with_tolerance(1e-12);
        let d = DeformationParam::new(0.0, 1.2).unwrap();
        let ds = delta_s_hat(&f, &big, &d, DEFAULT_K, &spec).unwrap();
        let fl = f.as_smooth().unwrap();
        let bx = [Interval::new(-1.5, 1.5), Interval::new(0.9, 1.1), Interval::new(-1.5, 1.5), Interval::new(0.9, 1.1)];
        let mut seen = 0.0f64;
        for p in grid_points(&bx, 5) {
            let direct =
                integrate(|b| fl.eval(&[b, p[1] * p[3]]) * big.eval(&[p[0] - b, p[1], -b / p[1] + p[2], p[3]]), -0.8, 1.0, &spec)
                    .value;
            seen = seen.max(direct.norm());
            assert!((ds.eval(&p) - direct).norm() < 1e-10);
        }
        assert!(seen > 1e-3);
    }

    #[test]
    fn guards() {
        let (f, big) = inputs();
        let spec = QuadratureSpec::default();
        let d = DeformationParam::new(0.2, 1.2).unwrap();
        assert!(matches!(delta_s_hat(&f, &big, &d, DEFAULT_K, &spec), Err(Error::DeformationOutOfRange { .. })));
        let wide = SmoothFn::bump_product(Chart::Ba, &[0.0, 1.0, 0.0, 1.0], &[2.0, 0.1, 0.5, 0.1], C64::new(1.0, 0.0));
        let d = DeformationParam::new(0.05, 1.2).unwrap();
        assert!(matches!(delta_s_hat(&f, &wide, &d, DEFAULT_K, &spec), Err(Error::SupportTooLarge(_))));
    }

    #[test]
    fn enclosure_contains_the_values() {
        let (f, big) = inputs();
        let spec = QuadratureSpec::default();
        for s in [0.1, -0.1, 0.03] {
            let d = DeformationParam::new(s, 1.2).unwrap();
            let ds = delta_s_hat(&f, &big, &d, DEFAULT_K, &spec).unwrap();
            let hull = ds.support().hull().unwrap();
            // Zero just outside the enclosure on every side.
            let wider: Vec<Interval> = hull.iter().map(|iv| Interval::new(iv.lo - 0.3, iv.hi + 0.3)).collect();
            let mut inside = 0.0f64;
            for p in grid_points(&wider, 9) {
                let v = ds.eval(&p);
                if !ds.support().contains(&p) {
                    assert_eq!(v, C64::new(0.0, 0.0));
                } else {
                    inside = inside.max(v.norm());
                }
            }
            assert!(inside > 1e-4);
            assert!(coproduct_support_in_box(f.support_ref(), big.support(), s, 1.2, DEFAULT_K, 4).unwrap());
        }
    }

    #[test]
    fn difference_is_first_order() {
        let (f, big) = inputs();
        let spec = QuadratureSpec::default().with_tolerance(1e-10);
        let norm = ProductNormSpec { scan_points: 4, refine_steps: 6, sweeps: 1, panels: 4, order: 8 };
        let r = |s: f64| {
            let d = DeformationParam::new(s, 1.2).unwrap();
            product_zero_norm(&DeltaSDifference::new(&f, &big, &d, DEFAULT_K, &spec).unwrap(), &norm).unwrap()
        };
        let (hi, lo) = (r(0.02), r(0.002));
        let slope = (hi / lo).log10();
        assert!(slope > 0.9 && slope < 1.2, "{hi} {lo}");
    }
}
