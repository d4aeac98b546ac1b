//! Convolution *-algebras of the groupoid over the translations (chart
//! `(z, c)`) and of the deformed groupoids `Γ_s` (chart `(b, a)`).
//!
//! Elements are lazy expression graphs: smooth leaves, linear combinations,
//! coordinate weights, convolutions and involutions. A convolution is
//! evaluated by one adaptive 1-D integral per point and caches its values.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::quad::merge_intervals;
use crate::funcspace::{
    expect_chart, integrate, integrate_intervals, integrate_measure, BoxN, Chart, Expr, Field, Interval, MappedField, Measure,
    QuadratureSpec, SmoothFn, Support, SupportMargins,
};

/// Which convolution structure an element lives in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Algebra {
    /// The groupoid over the translations, chart `(z, c)`.
    Translations,
    /// The deformed groupoid `Γ_s` in group coordinates `(b, a)`.
    Deformed(f64),
}

impl Algebra {
    pub fn chart(&self) -> Chart {
        match self {
            Algebra::Translations => Chart::Zc,
            Algebra::Deformed(_) => Chart::Ba,
        }
    }

    pub fn deformation(&self) -> Option<f64> {
        match self {
            Algebra::Translations => None,
            Algebra::Deformed(s) => Some(*s),
        }
    }
}

impl fmt::Display for Algebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algebra::Translations => f.write_str("translations"),
            Algebra::Deformed(s) => write!(f, "deformed(s={s})"),
        }
    }
}

/// Normalisations of the half-densities that turn density-valued formulas
/// into scalar integrals. Every weight is positive on admissible supports.
pub struct HalfDensityConvention;

impl HalfDensityConvention {
    /// The left Haar system on the `c`-fibres of the translations groupoid is
    /// `dc/|c|`; the unit normalisation is one on `c∂_c`.
    pub fn translations_fibre(c: f64) -> f64 {
        1.0 / c.abs()
    }

    /// Density `ψ₀(z, c)(∂_z, ∂_c) = 1/|c|` induced by `ν₀(z) = |dz|^{1/2}`.
    pub fn translations_psi(c: f64) -> f64 {
        1.0 / c.abs()
    }

    /// Weight of the `L²` inner product on the translations groupoid, `dz dc/c²`.
    pub fn translations_l2(c: f64) -> f64 {
        1.0 / (c * c)
    }

    /// The left Haar system of `Γ_s` on the fibre `{(c, u + s c)}` is `dc/|1 + s c|`,
    /// normalised to one on `∂_b + s∂_a` at the unit.
    pub fn deformed_fibre(s: f64, c: f64) -> f64 {
        1.0 / (1.0 + s * c).abs()
    }

    /// Measure on the unit space of the dilations, `ν(a)(∂_a) = 1/|a|`.
    pub fn dilation_density(a: f64) -> f64 {
        1.0 / a.abs()
    }

    /// Weight of the `L²` product on `Γ_s`: right fibres `db/|1+sb|` integrated
    /// against `dv/v²` over the right units `v = a/(1+sb)`.
    pub fn deformed_l2(s: f64, b: f64, a: f64) -> f64 {
        (1.0 + s * b).abs() / (a * a)
    }
}

const CACHE_LIMIT: usize = 1 << 20;

#[derive(Default)]
struct PointCache(Mutex<HashMap<[u64; 2], C64>>);

impl PointCache {
    fn get(&self, x: &[f64]) -> Option<C64> {
        let key = [x[0].to_bits(), x[1].to_bits()];
        self.0.lock().unwrap_or_else(|e| e.into_inner()).get(&key).copied()
    }

    fn put(&self, x: &[f64], v: C64) {
        let mut map = self.0.lock().unwrap_or_else(|e| e.into_inner());
        if map.len() < CACHE_LIMIT {
            map.insert([x[0].to_bits(), x[1].to_bits()], v);
        }
    }
}

enum Node {
    Leaf(SmoothFn),
    Combination(Vec<(C64, AlgebraElement)>),
    /// Pointwise product with a coordinate function (no support of its own).
    Weighted(SmoothFn, AlgebraElement),
    Convolution(AlgebraElement, AlgebraElement, PointCache),
    Involution(AlgebraElement),
    /// A pointwise-evaluated field supplied from outside, such as a fused
    /// residual integral.
    External(Arc<dyn Field>),
}

struct Inner {
    node: Node,
    algebra: Algebra,
    support: Support,
    spec: QuadratureSpec,
}

/// An element of one of the convolution algebras.
#[derive(Clone)]
pub struct AlgebraElement(Arc<Inner>);

impl fmt::Debug for AlgebraElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.0.node {
            Node::Leaf(_) => "leaf",
            Node::Combination(_) => "combination",
            Node::Weighted(..) => "weighted",
            Node::Convolution(..) => "convolution",
            Node::Involution(_) => "involution",
            Node::External(_) => "external",
        };
        f.debug_struct("AlgebraElement")
            .field("kind", &kind)
            .field("algebra", &self.0.algebra)
            .field("support", &self.0.support)
            .finish()
    }
}

fn iv(x: f64) -> Interval {
    Interval::point(x)
}

/// Check that every support box stays `margin` away from the singular sets
/// of the structure maps of `algebra`.
pub fn check_admissible(support: &Support, algebra: Algebra, margin: f64) -> Result<()> {
    for bx in support.boxes()? {
        if bx.len() != 2 {
            return Err(Error::InvalidArgument("algebra elements have two coordinates".into()));
        }
        match algebra {
            Algebra::Translations => {
                if bx[1].mig() < margin {
                    return Err(Error::SingularSupport(format!(
                        "c-support [{}, {}] within {margin} of c = 0",
                        bx[1].lo, bx[1].hi
                    )));
                }
            }
            Algebra::Deformed(s) => {
                let shift = iv(1.0).add(bx[0].scale(s));
                let left = bx[1].sub(bx[0].scale(s));
                if shift.mig() < margin || left.mig() < margin {
                    return Err(Error::SingularSupport(format!(
                        "support [{}, {}] x [{}, {}] leaves the deformed groupoid for s = {s}",
                        bx[0].lo, bx[0].hi, bx[1].lo, bx[1].hi
                    )));
                }
            }
        }
    }
    Ok(())
}

impl AlgebraElement {
    fn wrap(node: Node, algebra: Algebra, support: Support, spec: QuadratureSpec) -> Self {
        AlgebraElement(Arc::new(Inner { node, algebra, support, spec }))
    }

    /// Lift a compactly supported function, checking the default margins.
    pub fn new(f: SmoothFn, algebra: Algebra) -> Result<Self> {
        Self::with_margins(f, algebra, &SupportMargins::default())
    }

    pub fn with_margins(f: SmoothFn, algebra: Algebra, margins: &SupportMargins) -> Result<Self> {
        expect_chart(f.chart(), algebra.chart())?;
        if f.arity() != 2 {
            return Err(Error::InvalidArgument(format!("algebra elements have arity 2, got {}", f.arity())));
        }
        check_admissible(f.support(), algebra, margins.scale_margin)?;
        let support = f.support().clone();
        Ok(Self::wrap(Node::Leaf(f), algebra, support, QuadratureSpec::default()))
    }

    pub fn zero(algebra: Algebra) -> Self {
        Self::wrap(Node::Leaf(SmoothFn::zero(2, algebra.chart())), algebra, Support::empty(), QuadratureSpec::default())
    }

    /// Same element with a different quadrature configuration for the
    /// convolutions created from it.
    pub fn with_spec(&self, spec: QuadratureSpec) -> Self {
        let node = match &self.0.node {
            Node::Leaf(f) => Node::Leaf(f.clone()),
            Node::Combination(v) => Node::Combination(v.iter().map(|(k, e)| (*k, e.with_spec(spec))).collect()),
            Node::Weighted(w, e) => Node::Weighted(w.clone(), e.with_spec(spec)),
            Node::Convolution(x, y, _) => Node::Convolution(x.with_spec(spec), y.with_spec(spec), PointCache::default()),
            Node::Involution(x) => Node::Involution(x.with_spec(spec)),
            Node::External(f) => Node::External(f.clone()),
        };
        Self::wrap(node, self.0.algebra, self.0.support.clone(), spec)
    }

    /// Wrap an arbitrary two-variable field in the chart of `algebra`. The
    /// field's support is trusted and no admissibility margin is enforced.
    pub fn from_field(field: Arc<dyn Field>, algebra: Algebra) -> Result<Self> {
        expect_chart(field.chart(), algebra.chart())?;
        if field.arity() != 2 {
            return Err(Error::InvalidArgument(format!("algebra elements have arity 2, got {}", field.arity())));
        }
        let support = field.support();
        support.boxes()?;
        Ok(Self::wrap(Node::External(field), algebra, support, QuadratureSpec::default()))
    }

    pub fn algebra(&self) -> Algebra {
        self.0.algebra
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.0.spec
    }

    pub fn support_ref(&self) -> &Support {
        &self.0.support
    }

    /// The underlying smooth function, if this element is a leaf.
    pub fn as_smooth(&self) -> Option<&SmoothFn> {
        match &self.0.node {
            Node::Leaf(f) => Some(f),
            _ => None,
        }
    }

    /// Re-tag a leaf into another algebra; values are unchanged.
    pub fn retag(&self, algebra: Algebra) -> Result<Self> {
        match &self.0.node {
            Node::Leaf(f) => Ok(Self::new(f.clone(), algebra)?.with_spec(self.0.spec)),
            _ => Err(Error::InvalidArgument("only leaf elements can be re-tagged".into())),
        }
    }

    fn same_algebra(&self, other: &AlgebraElement) -> Result<()> {
        if self.0.algebra == other.0.algebra {
            Ok(())
        } else {
            Err(Error::ChartMismatch { expected: self.0.algebra.to_string(), found: other.0.algebra.to_string() })
        }
    }

    pub fn combination(terms: Vec<(C64, AlgebraElement)>) -> Result<Self> {
        let first = terms.first().ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let algebra = first.1.algebra();
        let spec = first.1 .0.spec;
        let mut support = Support::empty();
        for (_, e) in &terms {
            first.1.same_algebra(e)?;
            support = support.union(&e.0.support);
        }
        Ok(Self::wrap(Node::Combination(terms), algebra, support, spec))
    }

    pub fn add(&self, other: &AlgebraElement) -> Result<Self> {
        Self::combination(vec![(C64::new(1.0, 0.0), self.clone()), (C64::new(1.0, 0.0), other.clone())])
    }

    pub fn sub(&self, other: &AlgebraElement) -> Result<Self> {
        Self::combination(vec![(C64::new(1.0, 0.0), self.clone()), (C64::new(-1.0, 0.0), other.clone())])
    }

    pub fn scale(&self, k: C64) -> Self {
        Self::wrap(Node::Combination(vec![(k, self.clone())]), self.0.algebra, self.0.support.clone(), self.0.spec)
    }

    /// Pointwise product with an expression in the chart coordinates.
    pub fn weighted(&self, weight: Expr) -> Self {
        let w = SmoothFn::from_expr(weight, 2, self.0.algebra.chart(), Support::Unbounded);
        Self::wrap(Node::Weighted(w, self.clone()), self.0.algebra, self.0.support.clone(), self.0.spec)
    }

    /// The involution: `conj f(z/c, 1/c)` on the translations groupoid and
    /// `conj f(-b/(1+sb), a/(1+sb))` on `Γ_s`.
    pub fn star(&self) -> Result<Self> {
        let mut boxes = Vec::new();
        for bx in self.0.support.boxes()? {
            boxes.push(match self.0.algebra {
                Algebra::Translations => {
                    let inv = bx[1].recip()?;
                    vec![bx[0].mul(inv), inv]
                }
                Algebra::Deformed(s) => {
                    let shift = iv(1.0).add(bx[0].scale(s));
                    vec![bx[0].neg().div(shift)?, bx[1].div(shift)?]
                }
            });
        }
        Ok(Self::wrap(Node::Involution(self.clone()), self.0.algebra, Support::Boxes(boxes), self.0.spec))
    }

    /// The convolution product, lazily evaluated.
    pub fn conv(&self, other: &AlgebraElement) -> Result<Self> {
        self.same_algebra(other)?;
        let mut boxes = Vec::new();
        for bx in self.0.support.boxes()? {
            for by in other.0.support.boxes()? {
                if let Some(b) = product_support_box(self.0.algebra, bx, by)? {
                    boxes.push(b);
                }
            }
        }
        Ok(Self::wrap(
            Node::Convolution(self.clone(), other.clone(), PointCache::default()),
            self.0.algebra,
            Support::Boxes(boxes),
            self.0.spec,
        ))
    }

    /// Structural partial derivative. Available for every leaf and weight,
    /// and through convolutions and involutions on the undeformed `Γ_0`,
    /// where the product is a convolution in `b` fibred over `a`.
    pub fn partial(&self, coord: usize) -> Result<Self> {
        let algebra = self.0.algebra;
        let spec = self.0.spec;
        let support = self.0.support.clone();
        let node = match &self.0.node {
            Node::Leaf(f) => Node::Leaf(f.partial(coord)),
            Node::Combination(v) => Node::Combination(v.iter().map(|(k, e)| Ok((*k, e.partial(coord)?))).collect::<Result<_>>()?),
            Node::Weighted(w, e) => {
                let dw = Self::wrap(Node::Weighted(w.partial(coord), e.clone()), algebra, support.clone(), spec);
                let de = Self::wrap(Node::Weighted(w.clone(), e.partial(coord)?), algebra, support.clone(), spec);
                return Self::combination(vec![(C64::new(1.0, 0.0), dw), (C64::new(1.0, 0.0), de)]);
            }
            Node::Convolution(x, y, _) if algebra == Algebra::Deformed(0.0) => {
                return if coord == 0 {
                    x.conv(&y.partial(0)?)
                } else {
                    Self::combination(vec![
                        (C64::new(1.0, 0.0), x.partial(1)?.conv(y)?),
                        (C64::new(1.0, 0.0), x.conv(&y.partial(1)?)?),
                    ])
                };
            }
            Node::Involution(x) if algebra == Algebra::Deformed(0.0) => {
                let d = x.partial(coord)?.star()?;
                return Ok(if coord == 0 { d.scale(C64::new(-1.0, 0.0)) } else { d });
            }
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "no structural derivative through this node in the {algebra} algebra"
                )))
            }
        };
        Ok(Self::wrap(node, algebra, support, spec))
    }

    pub fn eval_at(&self, x: &[f64]) -> C64 {
        match &self.0.node {
            Node::Leaf(f) => f.eval(x),
            Node::Combination(v) => v.iter().map(|(k, e)| k * e.eval_at(x)).sum(),
            Node::Weighted(w, e) => {
                let inner = e.eval_at(x);
                if inner == C64::new(0.0, 0.0) {
                    inner
                } else {
                    w.eval(x) * inner
                }
            }
            Node::External(f) => f.eval(x),
            Node::Involution(e) => {
                let p = involution_point(self.0.algebra, x);
                e.eval_at(&p).conj()
            }
            Node::Convolution(l, r, cache) => {
                if !self.0.support.contains(x) {
                    return C64::new(0.0, 0.0);
                }
                if let Some(v) = cache.get(x) {
                    return v;
                }
                let v = convolution_value(l, r, self.0.algebra, x, &self.0.spec);
                cache.put(x, v);
                v
            }
        }
    }

    /// The convolution at one point through the second integral expression
    /// on `Γ_s`, which integrates over the `b`-coordinate of the right factor.
    pub fn conv_second_form(&self, other: &AlgebraElement, x: &[f64]) -> Result<C64> {
        self.same_algebra(other)?;
        let s = self
            .0
            .algebra
            .deformation()
            .ok_or_else(|| Error::InvalidArgument("second form exists on the deformed groupoids only".into()))?;
        let (b, a) = (x[0], x[1]);
        let mut pieces = Vec::new();
        for bx in self.0.support.boxes()? {
            for by in other.0.support.boxes()? {
                let from_left = iv(b).sub(bx[0]).div(iv(1.0).add(bx[0].scale(s)))?;
                if let Some(r) = by[0].intersect(&from_left) {
                    pieces.push((r.lo, r.hi));
                }
            }
        }
        let pieces = merge_intervals(pieces);
        let integrand = |c: f64| {
            let shift = 1.0 + s * c;
            let p = [(b - c) / shift, a - s * c * (1.0 + s * b) / shift];
            let q = [c, a * shift / (1.0 + s * b)];
            let fp = self.eval_at(&p);
            if fp == C64::new(0.0, 0.0) {
                return fp;
            }
            fp * other.eval_at(&q) / shift.abs()
        };
        Ok(integrate_intervals(integrand, &pieces, &self.0.spec).value)
    }
}

impl Field for AlgebraElement {
    fn arity(&self) -> usize {
        2
    }
    fn chart(&self) -> Chart {
        self.0.algebra.chart()
    }
    fn eval(&self, x: &[f64]) -> C64 {
        self.eval_at(x)
    }
    fn support(&self) -> Support {
        self.0.support.clone()
    }
}

/// The argument at which the involution evaluates its operand.
pub fn involution_point(algebra: Algebra, x: &[f64]) -> [f64; 2] {
    match algebra {
        Algebra::Translations => [x[0] / x[1], 1.0 / x[1]],
        Algebra::Deformed(s) => {
            let shift = 1.0 + s * x[0];
            [-x[0] / shift, x[1] / shift]
        }
    }
}

fn product_support_box(algebra: Algebra, bx: &BoxN, by: &BoxN) -> Result<Option<BoxN>> {
    Ok(match algebra {
        Algebra::Translations => {
            let z = match bx[0].intersect(&bx[1].mul(by[0])) {
                Some(z) => z,
                None => return Ok(None),
            };
            Some(vec![z, bx[1].mul(by[1])])
        }
        Algebra::Deformed(s) => {
            let c = bx[0];
            let shift = iv(1.0).add(c.scale(s));
            let b = c.add(shift.mul(by[0]));
            let a_right = shift.mul(by[1]);
            let a_left = bx[1].add(shift.mul(by[0]).scale(s));
            a_right.intersect(&a_left).map(|a| vec![b, a])
        }
    })
}

/// Integration range of the convolution variable at the point `x`.
pub fn convolution_range(l: &AlgebraElement, r: &AlgebraElement, algebra: Algebra, x: &[f64]) -> Vec<(f64, f64)> {
    let (Ok(lb), Ok(rb)) = (l.0.support.boxes(), r.0.support.boxes()) else {
        return Vec::new();
    };
    let mut pieces = Vec::new();
    for bx in lb {
        for by in rb {
            let range = match algebra {
                Algebra::Translations => translations_range(bx, by, x[0], x[1]),
                Algebra::Deformed(s) => deformed_range(bx, by, s, x[0], x[1]),
            };
            if let Some(r) = range {
                pieces.push((r.lo, r.hi));
            }
        }
    }
    merge_intervals(pieces)
}

fn translations_range(bx: &BoxN, by: &BoxN, z: f64, c: f64) -> Option<Interval> {
    if !bx[0].contains(z) {
        return None;
    }
    let mut range = bx[1];
    if let Ok(from_scale) = iv(c).div(by[1]) {
        range = range.intersect(&from_scale)?;
    }
    if z != 0.0 {
        if let Ok(from_base) = iv(z).div(by[0]) {
            range = range.intersect(&from_base)?;
        }
    } else if !by[0].contains(0.0) {
        return None;
    }
    Some(range)
}

fn deformed_range(bx: &BoxN, by: &BoxN, s: f64, b: f64, a: f64) -> Option<Interval> {
    let mut range = bx[0];
    let shift = iv(1.0).add(by[0].scale(s));
    if let Ok(from_right) = iv(b).sub(by[0]).div(shift) {
        range = range.intersect(&from_right)?;
    }
    if s == 0.0 {
        if !bx[1].contains(a) || !by[1].contains(a) {
            return None;
        }
    } else {
        let from_left_a = bx[1].sub(iv(a)).scale(1.0 / s).add(iv(b));
        range = range.intersect(&from_left_a)?;
        if let Ok(q) = iv(a).div(by[1]) {
            range = range.intersect(&q.sub(iv(1.0)).scale(1.0 / s))?;
        }
    }
    Some(range)
}

/// Integrand of the convolution at `x` as a function of the fibre variable.
pub fn convolution_integrand(l: &AlgebraElement, r: &AlgebraElement, algebra: Algebra, x: &[f64], c: f64) -> C64 {
    let zero = C64::new(0.0, 0.0);
    match algebra {
        Algebra::Translations => {
            let fl = l.eval_at(&[x[0], c]);
            if fl == zero {
                return zero;
            }
            fl * r.eval_at(&[x[0] / c, x[1] / c]) * HalfDensityConvention::translations_fibre(c)
        }
        Algebra::Deformed(s) => {
            let fl = l.eval_at(&[c, x[1] + s * (c - x[0])]);
            if fl == zero {
                return zero;
            }
            let shift = 1.0 + s * c;
            fl * r.eval_at(&[(x[0] - c) / shift, x[1] / shift]) / shift.abs()
        }
    }
}

fn convolution_value(l: &AlgebraElement, r: &AlgebraElement, algebra: Algebra, x: &[f64], spec: &QuadratureSpec) -> C64 {
    let pieces = convolution_range(l, r, algebra, x);
    integrate_intervals(|c| convolution_integrand(l, r, algebra, x, c), &pieces, spec).value
}

/// Norms available on algebra elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Supremum over left units of the fibre integral of `|f|`.
    Left,
    /// The left norm of the involution.
    Right,
    /// `max(left, right)`, an upper bound for the operator norm.
    Zero,
    L2,
    /// Largest `‖f ∗ ψ‖/‖ψ‖` over the probe set.
    OpLowerBound,
}

/// Numerical settings for norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormSpec {
    /// Quadrature of fibre and `L²` integrals.
    pub quad: QuadratureSpec,
    /// Points of the initial scan over the unit space.
    pub scan_points: usize,
    /// Golden-section steps around the best scan point.
    pub refine_steps: usize,
}

impl Default for NormSpec {
    fn default() -> Self {
        NormSpec { quad: QuadratureSpec::default(), scan_points: 24, refine_steps: 30 }
    }
}

/// Version tag of the probe set behind [`NormKind::OpLowerBound`].
pub const PROBE_SET_VERSION: u32 = 1;

/// Eight fixed tensor bumps used as probe vectors.
pub fn probe_set(algebra: Algebra) -> Vec<AlgebraElement> {
    let params: [([f64; 2], [f64; 2]); 8] = match algebra {
        Algebra::Translations => [
            ([0.0, 1.0], [1.0, 0.5]),
            ([0.5, 1.5], [0.5, 0.4]),
            ([-0.8, 0.8], [0.6, 0.3]),
            ([1.5, 2.0], [1.0, 0.8]),
            ([0.0, -1.0], [0.8, 0.5]),
            ([-1.2, -1.6], [0.4, 0.6]),
            ([0.3, 0.6], [0.2, 0.2]),
            ([2.0, 1.2], [1.5, 0.6]),
        ],
        Algebra::Deformed(_) => [
            ([0.0, 1.0], [1.0, 0.5]),
            ([0.5, 1.5], [0.5, 0.4]),
            ([-0.8, 0.8], [0.6, 0.3]),
            ([1.0, 2.0], [1.0, 0.8]),
            ([0.0, -1.0], [0.8, 0.5]),
            ([-1.0, -1.6], [0.4, 0.6]),
            ([0.3, 0.6], [0.2, 0.2]),
            ([0.5, 1.2], [1.5, 0.6]),
        ],
    };
    params
        .iter()
        .filter_map(|(c, h)| {
            let f = SmoothFn::bump_product(algebra.chart(), c, h, C64::new(1.0, 0.0));
            AlgebraElement::new(f, algebra).ok()
        })
        .collect()
}

impl AlgebraElement {
    pub fn norm(&self, which: NormKind, spec: &NormSpec) -> Result<f64> {
        if self.0.support.is_empty() {
            return Ok(0.0);
        }
        match which {
            NormKind::Left => left_norm(self, spec),
            NormKind::Right => left_norm(&self.star()?, spec),
            NormKind::Zero => Ok(self.norm(NormKind::Left, spec)?.max(self.norm(NormKind::Right, spec)?)),
            NormKind::L2 => l2_norm(self, &spec.quad),
            NormKind::OpLowerBound => {
                let mut best = 0.0f64;
                for probe in probe_set(self.0.algebra) {
                    let image = self.with_spec(spec.quad).conv(&probe)?;
                    let ratio = l2_norm(&image, &spec.quad)? / l2_norm(&probe, &spec.quad)?;
                    best = best.max(ratio);
                }
                Ok(best)
            }
        }
    }

    /// The `L²` norm with the half-density convention of the algebra.
    pub fn l2_norm(&self, spec: &QuadratureSpec) -> Result<f64> {
        l2_norm(self, spec)
    }

    /// Fibre integral of `|f|` over the left fibre through the unit `unit`.
    pub fn fibre_integral(&self, unit: f64, spec: &QuadratureSpec) -> Result<f64> {
        fibre_integral(self, unit, spec)
    }
}

fn l2_norm(f: &AlgebraElement, spec: &QuadratureSpec) -> Result<f64> {
    if f.0.support.is_empty() {
        return Ok(0.0);
    }
    let v = match f.0.algebra {
        Algebra::Translations => {
            let sq = MappedField { inner: f, map: |_: &[f64], v: C64| C64::new(v.norm_sqr(), 0.0) };
            integrate_measure(&sq, Measure::L2Density, spec)?
        }
        Algebra::Deformed(s) => {
            let sq = MappedField {
                inner: f,
                map: move |x: &[f64], v: C64| C64::new(v.norm_sqr() * HalfDensityConvention::deformed_l2(s, x[0], x[1]), 0.0),
            };
            integrate_measure(&sq, Measure::Lebesgue, spec)?
        }
    };
    Ok(v.re.max(0.0).sqrt())
}

fn fibre_integral(f: &AlgebraElement, unit: f64, spec: &QuadratureSpec) -> Result<f64> {
    let mut pieces = Vec::new();
    match f.0.algebra {
        Algebra::Translations => {
            for bx in f.0.support.boxes()? {
                if bx[0].contains(unit) {
                    pieces.push((bx[1].lo, bx[1].hi));
                }
            }
            let pieces = merge_intervals(pieces);
            let r = integrate_intervals(
                |c| C64::new(f.eval_at(&[unit, c]).norm() * HalfDensityConvention::translations_fibre(c), 0.0),
                &pieces,
                spec,
            );
            Ok(r.value.re)
        }
        Algebra::Deformed(s) => {
            for bx in f.0.support.boxes()? {
                let range = if s == 0.0 {
                    if bx[1].contains(unit) {
                        Some(bx[0])
                    } else {
                        None
                    }
                } else {
                    bx[0].intersect(&bx[1].sub(iv(unit)).scale(1.0 / s))
                };
                if let Some(r) = range {
                    pieces.push((r.lo, r.hi));
                }
            }
            let pieces = merge_intervals(pieces);
            let r = integrate_intervals(
                |b| C64::new(f.eval_at(&[b, unit + s * b]).norm() * HalfDensityConvention::deformed_fibre(s, b), 0.0),
                &pieces,
                spec,
            );
            Ok(r.value.re)
        }
    }
}

/// Range of left units met by the support.
fn unit_ranges(f: &AlgebraElement) -> Result<Vec<(f64, f64)>> {
    let mut v = Vec::new();
    for bx in f.0.support.boxes()? {
        let r = match f.0.algebra {
            Algebra::Translations => bx[0],
            Algebra::Deformed(s) => bx[1].sub(bx[0].scale(s)),
        };
        v.push((r.lo, r.hi));
    }
    Ok(merge_intervals(v))
}

/// Maximise a continuous function over a union of intervals by a uniform
/// scan followed by golden-section refinement around the best sample.
pub fn maximize_on(ranges: &[(f64, f64)], scan: usize, refine: usize, mut g: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0, 0.0);
    for &(lo, hi) in ranges {
        let n = scan.max(2);
        let h = (hi - lo) / n as f64;
        for i in 0..=n {
            let t = lo + h * i as f64;
            let v = g(t)?;
            if v > best.0 {
                best = (v, t, (t - h).max(lo), (t + h).min(hi));
            }
        }
    }
    if !best.0.is_finite() {
        return Ok(0.0);
    }
    let (mut top, _, mut lo, mut hi) = best;
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = g(x1)?;
    let mut f2 = g(x2)?;
    for _ in 0..refine {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = g(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = g(x2)?;
        }
        top = top.max(f1).max(f2);
    }
    Ok(top)
}

fn left_norm(f: &AlgebraElement, spec: &NormSpec) -> Result<f64> {
    let ranges = unit_ranges(f)?;
    maximize_on(&ranges, spec.scan_points, spec.refine_steps, |u| fibre_integral(f, u, &spec.quad))
}

/// Apply the identity representation: `(π(f)ψ)(z, c) = ∫ dc₁/|c₁| f(z, c₁) ψ(z/c₁, c/c₁)`.
pub fn pi_id_apply(f: &AlgebraElement, psi: &SmoothFn) -> Result<AlgebraElement> {
    if f.algebra() != Algebra::Translations {
        return Err(Error::ChartMismatch { expected: Algebra::Translations.to_string(), found: f.algebra().to_string() });
    }
    f.conv(&AlgebraElement::new(psi.clone(), Algebra::Translations)?)
}

/// `‖f‖₂² = ∫ dz dc/|zc| |f(z, c)|²`; infinite when the support meets `z = 0`.
pub fn hilbert_schmidt_bound(f: &AlgebraElement, spec: &QuadratureSpec) -> Result<f64> {
    for bx in f.0.support.boxes()? {
        if bx[0].contains_zero() && f.eval_at(&[0.0, bx[1].mid()]) != C64::new(0.0, 0.0) {
            return Ok(f64::INFINITY);
        }
    }
    let sq = MappedField { inner: f, map: |x: &[f64], v: C64| C64::new(v.norm_sqr() / (x[0] * x[1]).abs(), 0.0) };
    Ok(integrate_measure(&sq, Measure::Lebesgue, spec)?.re.max(0.0).sqrt())
}

/// A transformation groupoid `X ⋊ H` with `X = ℝ` and `H = ℝ_*`, given by a
/// right action and the modular function of `H`.
pub struct TransformationGroupoid {
    pub action: fn(f64, f64) -> f64,
    pub modular: fn(f64) -> f64,
}

impl TransformationGroupoid {
    /// `x·h = x/h`, with `H` abelian so the modular function is one.
    pub fn translations_by_dilation() -> Self {
        TransformationGroupoid { action: |x, h| x / h, modular: |_| 1.0 }
    }

    /// `(F ∗ G)(x, h) = ∫ dh'/|h'| F(x, h') G(x·h', h'⁻¹h)`.
    pub fn convolve(&self, f: &dyn Field, g: &dyn Field, x: f64, h: f64, spec: &QuadratureSpec) -> Result<C64> {
        let pieces = f.support().slice_intervals(&[(0, x)], 1)?;
        let mut total = C64::new(0.0, 0.0);
        for (lo, hi) in pieces {
            let r = integrate(|hp: f64| f.eval(&[x, hp]) * g.eval(&[(self.action)(x, hp), h / hp]) / hp.abs(), lo, hi, spec);
            total += r.value;
        }
        Ok(total)
    }

    /// `φ(f)(x, h) = δ(h)^{-1/2} f(x, h)`.
    pub fn transport(&self, f: &dyn Field, x: f64, h: f64) -> C64 {
        f.eval(&[x, h]) / (self.modular)(h).sqrt()
    }
}

/// Sup-residual of `φ(f ∗ g) − φ(f) ∗ φ(g)` over `points`, comparing the
/// groupoid convolution with the crossed-product convolution.
pub fn crossed_product_residual(
    f: &AlgebraElement,
    g: &AlgebraElement,
    points: &[[f64; 2]],
    spec: &QuadratureSpec,
) -> Result<f64> {
    let groupoid = TransformationGroupoid::translations_by_dilation();
    let fg = f.with_spec(*spec).conv(g)?;
    let mut worst = 0.0f64;
    for p in points {
        let lhs = groupoid.transport(&fg, p[0], p[1]);
        let phi_f = MappedField { inner: f, map: |x: &[f64], v: C64| v / (groupoid.modular)(x[1]).sqrt() };
        let phi_g = MappedField { inner: g, map: |x: &[f64], v: C64| v / (groupoid.modular)(x[1]).sqrt() };
        let rhs = groupoid.convolve(&phi_f, &phi_g, p[0], p[1], spec)?;
        worst = worst.max((lhs - rhs).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{grid_points, sup_residual};

    fn bump(center: [f64; 2], half: [f64; 2], algebra: Algebra) -> AlgebraElement {
        let f = SmoothFn::bump_product(algebra.chart(), &center, &half, C64::new(1.0, 0.0));
        AlgebraElement::new(f, algebra).unwrap()
    }

    fn probe_points(f: &AlgebraElement, n: usize) -> Vec<Vec<f64>> {
        grid_points(&f.support_ref().hull().unwrap(), n)
    }

    #[test]
    fn zero_products_and_norms() {
        let f = bump([0.0, 1.0], [1.0, 0.5], Algebra::Translations);
        let z = AlgebraElement::zero(Algebra::Translations);
        let p = f.conv(&z).unwrap();
        assert!(p.support_ref().is_empty());
        assert_eq!(p.eval_at(&[0.1, 1.0]), C64::new(0.0, 0.0));
        for k in [NormKind::Left, NormKind::Right, NormKind::Zero, NormKind::L2, NormKind::OpLowerBound] {
            assert_eq!(z.norm(k, &NormSpec::default()).unwrap(), 0.0);
        }
    }

    #[test]
    fn singular_supports_rejected() {
        let f = SmoothFn::bump_product(Chart::Zc, &[0.0, 0.0], &[1.0, 0.5], C64::new(1.0, 0.0));
        assert!(matches!(AlgebraElement::new(f, Algebra::Translations), Err(Error::SingularSupport(_))));
        let g = SmoothFn::bump_product(Chart::Ba, &[0.0, 1.0], &[1.0, 0.5], C64::new(1.0, 0.0));
        assert!(AlgebraElement::new(g.clone(), Algebra::Deformed(0.2)).is_ok());
        assert!(AlgebraElement::new(g, Algebra::Deformed(1.0)).is_err());
    }

    #[test]
    fn involution_support_and_idempotence() {
        let f = SmoothFn::bump_product(Chart::Zc, &[0.5, 1.5], &[0.5, 0.5], C64::new(1.0, 0.5));
        let f = AlgebraElement::new(f, Algebra::Translations).unwrap();
        let fs = f.star().unwrap();
        let c = fs.support_ref().hull().unwrap()[1];
        assert!((c.lo - 0.5).abs() < 1e-12 && (c.hi - 1.0).abs() < 1e-12);
        let back = fs.star().unwrap();
        for p in probe_points(&f, 7) {
            assert!((back.eval_at(&p) - f.eval_at(&p)).norm() < 1e-14);
        }
    }

    #[test]
    fn translations_associativity_and_star_antimultiplicative() {
        let a = Algebra::Translations;
        let f = bump([0.2, 1.2], [0.6, 0.4], a);
        let g = bump([-0.3, 0.9], [0.5, 0.3], a).scale(C64::new(0.3, 1.0));
        let h = bump([0.1, 1.1], [0.4, 0.3], a);
        let left = f.conv(&g).unwrap().conv(&h).unwrap();
        let right = f.conv(&g.conv(&h).unwrap()).unwrap();
        let pts = probe_points(&left, 6);
        assert!(sup_residual(&left, &right, &pts) < 1e-6);
        let lhs = f.conv(&g).unwrap().star().unwrap();
        let rhs = g.star().unwrap().conv(&f.star().unwrap()).unwrap();
        let pts = probe_points(&lhs, 8);
        assert!(sup_residual(&lhs, &rhs, &pts) < 1e-6);
    }

    #[test]
    fn computed_support_contains_sampled_support() {
        let a = Algebra::Translations;
        let f = bump([0.5, 1.2], [0.4, 0.3], a);
        let g = bump([1.0, 0.8], [0.5, 0.2], a);
        let p = f.conv(&g).unwrap();
        let hull = p.support_ref().hull().unwrap();
        let wide: BoxN = hull.iter().map(|i| Interval::centered(i.mid(), i.width())).collect();
        for q in grid_points(&wide, 24) {
            if !p.support_ref().contains(&q) {
                let direct = integrate(|c| convolution_integrand(&f, &g, a, &q, c), 0.9, 1.5, &QuadratureSpec::default());
                assert_eq!(direct.value, C64::new(0.0, 0.0), "{q:?}");
            }
        }
    }

    #[test]
    fn undeformed_product_is_commutative() {
        let a = Algebra::Deformed(0.0);
        let f = bump([0.3, 1.0], [0.8, 0.5], a);
        let g = bump([-0.2, 1.1], [0.5, 0.6], a).scale(C64::new(0.0, 2.0));
        let fg = f.conv(&g).unwrap();
        let gf = g.conv(&f).unwrap();
        assert!(sup_residual(&fg, &gf, &probe_points(&fg, 9)) < 1e-9);
    }

    #[test]
    fn both_integral_forms_agree() {
        let a = Algebra::Deformed(0.05);
        let f = bump([0.3, 1.0], [0.8, 0.5], a);
        let g = bump([-0.2, 1.2], [0.5, 0.6], a);
        let fg = f.conv(&g).unwrap();
        for p in probe_points(&fg, 7) {
            let v = fg.eval_at(&p);
            let w = f.conv_second_form(&g, &p).unwrap();
            assert!((v - w).norm() < 1e-8, "{p:?}: {v} vs {w}");
        }
    }

    #[test]
    fn separable_left_norm() {
        let u = Expr::var(0);
        let v = Expr::var(1);
        let expr = ((u - 0.2) / 0.7).bump() * ((v - 1.3) / 0.4).bump();
        let bx = vec![Interval::centered(0.2, 0.7), Interval::centered(1.3, 0.4)];
        let f = SmoothFn::from_expr(expr, 2, Chart::Zc, Support::single(bx));
        let f = AlgebraElement::new(f, Algebra::Translations).unwrap();
        let spec = NormSpec::default();
        let got = f.norm(NormKind::Left, &spec).unwrap();
        let sup_u = (-1.0f64).exp();
        let int_v = integrate(
            |c| C64::new(crate::funcspace::expr::bump_deriv(0, (c - 1.3) / 0.4) / c.abs(), 0.0),
            0.9,
            1.7,
            &QuadratureSpec::default().with_tolerance(1e-12),
        )
        .value
        .re;
        assert!((got - sup_u * int_v).abs() < 1e-9 * int_v, "{got} vs {}", sup_u * int_v);
    }

    #[test]
    fn structural_partials_match_differences() {
        let a = Algebra::Deformed(0.0);
        let f = bump([0.3, 1.0], [0.8, 0.5], a);
        let g = bump([-0.2, 1.1], [0.5, 0.6], a).weighted(Expr::var(0) * Expr::var(1));
        let fg = f.conv(&g).unwrap().star().unwrap();
        for coord in 0..2 {
            let d = fg.partial(coord).unwrap();
            for p in [[0.1, 1.05], [-0.4, 0.9], [0.6, 1.2]] {
                let h = 1e-3;
                let at = |t: f64| {
                    let mut q = p;
                    q[coord] += t;
                    fg.eval_at(&q)
                };
                let fd = (at(-2.0 * h) - at(2.0 * h) + (at(h) - at(-h)) * 8.0) / (12.0 * h);
                assert!((d.eval_at(&p) - fd).norm() < 1e-6, "coord {coord} at {p:?}");
            }
        }
    }

    #[test]
    fn crossed_product_matches_groupoid_product() {
        let a = Algebra::Translations;
        let f = bump([0.2, 1.2], [0.6, 0.4], a);
        let g = bump([-0.3, 0.9], [0.5, 0.3], a);
        let pts: Vec<[f64; 2]> =
            grid_points(&f.conv(&g).unwrap().support_ref().hull().unwrap(), 6).into_iter().map(|p| [p[0], p[1]]).collect();
        let r = crossed_product_residual(&f, &g, &pts, &QuadratureSpec::default()).unwrap();
        assert!(r < 1e-8, "{r}");
        let z = AlgebraElement::zero(a);
        assert_eq!(crossed_product_residual(&f, &z, &pts, &QuadratureSpec::default()).unwrap(), 0.0);
    }
}
