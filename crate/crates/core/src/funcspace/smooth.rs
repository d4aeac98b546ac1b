//! Compactly supported smooth functions on products of two-dimensional charts.

use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::expr::{Expr, Tape};
use super::interval::{box_contains, box_hull, box_intersect, subdivide, BoxN, Interval};
use crate::error::{Error, Result};

/// Coordinate system of every leg of a function.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    /// `(z, c)` on the groupoid over the translations.
    Zc,
    /// Group coordinates `(b, a)`.
    Ba,
    /// Fourier side `(beta, a)`.
    BetaA,
}

impl fmt::Display for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Chart::Zc => "zc",
            Chart::Ba => "ba",
            Chart::BetaA => "beta_a",
        };
        f.write_str(s)
    }
}

pub fn expect_chart(found: Chart, expected: Chart) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::ChartMismatch { expected: expected.to_string(), found: found.to_string() })
    }
}

/// Outer bound for the support: a finite union of boxes, or unbounded.
#[derive(Clone, Debug, PartialEq)]
pub enum Support {
    Boxes(Vec<BoxN>),
    Unbounded,
}

impl Support {
    pub fn single(b: BoxN) -> Self {
        Support::Boxes(vec![b])
    }

    pub fn empty() -> Self {
        Support::Boxes(vec![])
    }

    pub fn boxes(&self) -> Result<&[BoxN]> {
        match self {
            Support::Boxes(b) => Ok(b),
            Support::Unbounded => Err(Error::UnboundedSupport("function has no compact support bound".into())),
        }
    }

    pub fn union(&self, other: &Support) -> Support {
        match (self, other) {
            (Support::Boxes(a), Support::Boxes(b)) => Support::Boxes(a.iter().chain(b).cloned().collect()),
            _ => Support::Unbounded,
        }
    }

    pub fn intersect(&self, other: &Support) -> Support {
        match (self, other) {
            (Support::Unbounded, s) | (s, Support::Unbounded) => s.clone(),
            (Support::Boxes(a), Support::Boxes(b)) => {
                Support::Boxes(a.iter().flat_map(|x| b.iter().filter_map(|y| box_intersect(x, y))).collect())
            }
        }
    }

    /// Single box containing the whole support.
    pub fn hull(&self) -> Result<BoxN> {
        let boxes = self.boxes()?;
        let mut it = boxes.iter();
        let first = it.next().ok_or_else(|| Error::InvalidArgument("empty support".into()))?;
        Ok(it.fold(first.clone(), |acc, b| box_hull(&acc, b)))
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, Support::Boxes(b) if b.is_empty())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        match self {
            Support::Unbounded => true,
            Support::Boxes(b) => b.iter().any(|bx| box_contains(bx, p)),
        }
    }

    /// Projection on one coordinate as merged intervals.
    pub fn coordinate_intervals(&self, i: usize) -> Result<Vec<(f64, f64)>> {
        let v = self.boxes()?.iter().map(|b| (b[i].lo, b[i].hi)).collect();
        Ok(super::quad::merge_intervals(v))
    }

    /// Boxes whose coordinates `fixed` contain the given values, projected
    /// on the remaining coordinate `free`.
    pub fn slice_intervals(&self, fixed: &[(usize, f64)], free: usize) -> Result<Vec<(f64, f64)>> {
        let v = self
            .boxes()?
            .iter()
            .filter(|b| fixed.iter().all(|&(i, x)| b[i].contains(x)))
            .map(|b| (b[free].lo, b[free].hi))
            .collect();
        Ok(super::quad::merge_intervals(v))
    }
}

/// Diffeomorphism used for pullbacks: `forward` gives the new coordinates
/// of the argument, `inverse` maps support boxes back.
#[derive(Clone, Debug)]
pub struct CoordMap {
    pub forward: Vec<Expr>,
    pub inverse: Vec<Expr>,
}

impl CoordMap {
    pub fn new(forward: Vec<Expr>, inverse: Vec<Expr>) -> Self {
        CoordMap { forward, inverse }
    }

    /// Enclosure of `inverse(bx)`, refined by subdividing each coordinate.
    pub fn image_of_box(&self, bx: &[Interval], pieces: usize) -> Result<BoxN> {
        let mut hull: Option<BoxN> = None;
        for sub in subdivide(bx, pieces) {
            let img: BoxN = self.inverse.iter().map(|e| e.eval_interval(&sub)).collect::<Result<_>>()?;
            hull = Some(match hull {
                None => img,
                Some(h) => box_hull(&h, &img),
            });
        }
        hull.ok_or_else(|| Error::InvalidArgument("empty box".into()))
    }
}

#[derive(Clone)]
pub struct SmoothFn {
    expr: Expr,
    arity: usize,
    chart: Chart,
    support: Support,
    tape: Arc<OnceLock<Tape>>,
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFn")
            .field("arity", &self.arity)
            .field("chart", &self.chart)
            .field("support", &self.support)
            .finish()
    }
}

impl SmoothFn {
    /// Wrap an expression; `support` must bound the set where it is nonzero.
    pub fn from_expr(expr: Expr, arity: usize, chart: Chart, support: Support) -> Self {
        SmoothFn { expr, arity, chart, support, tape: Arc::new(OnceLock::new()) }
    }

    pub fn zero(arity: usize, chart: Chart) -> Self {
        Self::from_expr(Expr::constant(0.0), arity, chart, Support::empty())
    }

    /// Coordinate function `x_i` (not compactly supported).
    pub fn coordinate(i: usize, arity: usize, chart: Chart) -> Self {
        Self::from_expr(Expr::var(i), arity, chart, Support::Unbounded)
    }

    /// `amplitude * prod_i bump((x_i - center_i) / halfwidth_i)`.
    pub fn bump_product(chart: Chart, center: &[f64], halfwidth: &[f64], amplitude: C64) -> Self {
        assert_eq!(center.len(), halfwidth.len());
        let mut e = Expr::complex(amplitude);
        for (i, (&c, &h)) in center.iter().zip(halfwidth).enumerate() {
            e = e * ((Expr::var(i) - c) / h).bump();
        }
        let bx = center.iter().zip(halfwidth).map(|(&c, &h)| Interval::centered(c, h)).collect();
        Self::from_expr(e, center.len(), chart, Support::single(bx))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn tape(&self) -> &Tape {
        self.tape.get_or_init(|| self.expr.compile())
    }

    pub fn eval(&self, x: &[f64]) -> C64 {
        debug_assert_eq!(x.len(), self.arity);
        self.tape().eval(x)
    }

    pub fn eval_real(&self, x: &[f64]) -> f64 {
        self.tape().eval_real(x)
    }

    pub fn is_real(&self) -> bool {
        self.tape().is_real()
    }

    fn same_space(&self, other: &SmoothFn) -> Result<()> {
        expect_chart(other.chart, self.chart)?;
        if self.arity != other.arity {
            return Err(Error::InvalidArgument(format!("arity {} vs {}", self.arity, other.arity)));
        }
        Ok(())
    }

    pub fn add(&self, other: &SmoothFn) -> Result<SmoothFn> {
        self.same_space(other)?;
        Ok(Self::from_expr(&self.expr + &other.expr, self.arity, self.chart, self.support.union(&other.support)))
    }

    pub fn sub(&self, other: &SmoothFn) -> Result<SmoothFn> {
        self.same_space(other)?;
        Ok(Self::from_expr(&self.expr - &other.expr, self.arity, self.chart, self.support.union(&other.support)))
    }

    pub fn mul(&self, other: &SmoothFn) -> Result<SmoothFn> {
        self.same_space(other)?;
        Ok(Self::from_expr(&self.expr * &other.expr, self.arity, self.chart, self.support.intersect(&other.support)))
    }

    /// Pointwise product with an arbitrary expression in the same coordinates.
    pub fn mul_expr(&self, e: &Expr) -> SmoothFn {
        Self::from_expr(&self.expr * e, self.arity, self.chart, self.support.clone())
    }

    pub fn scale(&self, k: C64) -> SmoothFn {
        Self::from_expr(Expr::complex(k) * self.expr.clone(), self.arity, self.chart, self.support.clone())
    }

    pub fn conj(&self) -> SmoothFn {
        Self::from_expr(self.expr.conj(), self.arity, self.chart, self.support.clone())
    }

    /// Analytic partial derivative in coordinate `i`.
    pub fn partial(&self, i: usize) -> SmoothFn {
        Self::from_expr(self.expr.diff(i), self.arity, self.chart, self.support.clone())
    }

    /// `x -> f(map.forward(x))`, optionally times a weight expression.
    pub fn pullback(&self, map: &CoordMap, weight: Option<&Expr>) -> Result<SmoothFn> {
        if map.forward.len() != self.arity {
            return Err(Error::InvalidArgument("pullback map has the wrong dimension".into()));
        }
        let mut e = self.expr.substitute(&map.forward);
        if let Some(w) = weight {
            e = e * w.clone();
        }
        let support = match &self.support {
            Support::Unbounded => Support::Unbounded,
            Support::Boxes(boxes) => {
                let pieces = if self.arity <= 4 { 3 } else { 2 };
                Support::Boxes(boxes.iter().map(|b| map.image_of_box(b, pieces)).collect::<Result<_>>()?)
            }
        };
        Ok(Self::from_expr(e, map.inverse.len(), self.chart, support))
    }

    /// Tensor product `F(x, y) = f(x) g(y)` on the concatenated coordinates.
    pub fn tensor(&self, other: &SmoothFn) -> Result<SmoothFn> {
        expect_chart(other.chart, self.chart)?;
        let n = self.arity;
        let shifted: Vec<Expr> = (0..other.arity).map(|i| Expr::var(n + i)).collect();
        let e = &self.expr * &other.expr.substitute(&shifted);
        let support = match (&self.support, &other.support) {
            (Support::Boxes(a), Support::Boxes(b)) => {
                Support::Boxes(a.iter().flat_map(|x| b.iter().map(move |y| x.iter().chain(y).copied().collect())).collect())
            }
            _ => Support::Unbounded,
        };
        Ok(Self::from_expr(e, n + other.arity, self.chart, support))
    }

    /// Replace the support bound by a tighter one supplied by the caller.
    pub fn with_support(mut self, support: Support) -> SmoothFn {
        self.support = support;
        self
    }

    /// Sample points in the hull of the support and report any nonzero value
    /// found outside the declared boxes.
    pub fn find_support_violation<R: Rng>(&self, rng: &mut R, samples: usize) -> Result<Option<Vec<f64>>> {
        let hull = self.support.hull()?;
        let grown: BoxN = hull.iter().map(|i| Interval::centered(i.mid(), 0.75 * i.width() + 0.5)).collect();
        for _ in 0..samples {
            let p: Vec<f64> = grown.iter().map(|i| rng.gen_range(i.lo..=i.hi)).collect();
            if !self.support.contains(&p) && self.eval(&p).norm() > 0.0 {
                return Ok(Some(p));
            }
        }
        Ok(None)
    }
}

/// Random sums of tensor bumps, the test-function family used by the suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpFamily {
    /// Region that must contain every support box.
    pub region: Vec<Interval>,
    pub min_halfwidth: f64,
    pub max_halfwidth: f64,
    pub max_terms: usize,
    /// Draw complex amplitudes.
    pub complex: bool,
}

impl BumpFamily {
    pub fn new(region: Vec<Interval>, min_halfwidth: f64, max_halfwidth: f64) -> Self {
        BumpFamily { region, min_halfwidth, max_halfwidth, max_terms: 3, complex: false }
    }

    pub fn complex(mut self, yes: bool) -> Self {
        self.complex = yes;
        self
    }

    pub fn terms(mut self, n: usize) -> Self {
        self.max_terms = n.max(1);
        self
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, chart: Chart) -> SmoothFn {
        let n_terms = rng.gen_range(1..=self.max_terms);
        let mut acc: Option<SmoothFn> = None;
        for _ in 0..n_terms {
            let mut center = Vec::with_capacity(self.region.len());
            let mut half = Vec::with_capacity(self.region.len());
            for iv in &self.region {
                let hmax = self.max_halfwidth.min(0.5 * iv.width());
                let hmin = self.min_halfwidth.min(hmax);
                let h = if hmax > hmin { rng.gen_range(hmin..=hmax) } else { hmax };
                let c = if iv.width() > 2.0 * h { rng.gen_range(iv.lo + h..=iv.hi - h) } else { iv.mid() };
                center.push(c);
                half.push(h);
            }
            let amp = if self.complex {
                C64::new(rng.gen_range(0.5..1.5), rng.gen_range(-1.0..1.0))
            } else {
                C64::new(rng.gen_range(0.5..1.5) * if rng.gen_bool(0.2) { -1.0 } else { 1.0 }, 0.0)
            };
            let term = SmoothFn::bump_product(chart, &center, &half, amp);
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term).expect("same chart and arity"),
            });
        }
        acc.expect("at least one term")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bump_product_support_is_sound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let fam = BumpFamily::new(vec![Interval::new(-1.0, 1.0), Interval::new(0.5, 2.0)], 0.2, 0.6);
        for _ in 0..20 {
            let f = fam.sample(&mut rng, Chart::Ba);
            assert!(f.find_support_violation(&mut rng, 2000).unwrap().is_none());
            for b in f.support().boxes().unwrap() {
                assert!(super::super::interval::box_subset(b, &fam.region));
            }
        }
    }

    #[test]
    fn pullback_support_tracks_inverse_map() {
        let f = SmoothFn::bump_product(Chart::Zc, &[1.0, 2.0], &[0.5, 0.5], C64::new(1.0, 0.0));
        // g(z, c) = f(z / c, 1 / c)
        let (z, c) = (Expr::var(0), Expr::var(1));
        let map = CoordMap::new(vec![&z / &c, 1.0 / c.clone()], vec![&z / &c, 1.0 / c.clone()]);
        let g = f.pullback(&map, None).unwrap();
        let hull = g.support().hull().unwrap();
        assert!(hull[1].lo <= 1.0 / 2.5 && hull[1].hi >= 1.0 / 1.5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(g.find_support_violation(&mut rng, 5000).unwrap().is_none());
    }
}
