//! Convergence of the deformed structure to the undeformed one as `s → 0`,
//! measured in the `‖·‖_{0,s}` norm, and norm brackets for `Q_s(f)`.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{deformed_product_box, product_support, q_s, support_within, DeformationParam, GAMMA0};
use crate::algebra::{convolution_range, Algebra, AlgebraElement, NormKind, NormSpec};
use crate::error::{Error, Result};
use crate::funcspace::interval::subdivide;
use crate::funcspace::quad::merge_intervals;
use crate::funcspace::{integrate_intervals, Chart, CoordMap, Expr, Field, Interval, QuadratureSpec, SmoothFn, Support};

/// The three deformation residuals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualKind {
    /// `Q_s(f*)^{*_s} - Q_s(f)`.
    Involution,
    /// `Q_s(f) ∗_s Q_s(g) - Q_s(f ∗ g)`.
    Product,
    /// `(1/s)[Q_s(f), Q_s(g)] - Q_s({f, g})`.
    Commutator,
}

/// Numerical settings of a convergence table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TableSpec {
    /// Quadrature of the fused residual integrals.
    pub quad: QuadratureSpec,
    /// Sup search and fibre quadrature of the `‖·‖_{0,s}` norm.
    pub norm: NormSpec,
    /// Subdivisions per axis for the support enclosures.
    pub support_pieces: usize,
}

impl Default for TableSpec {
    fn default() -> Self {
        TableSpec {
            // The commutator integrand divides a difference by s, so at the
            // smallest grid values 1e-8 sits inside the amplified roundoff.
            quad: QuadratureSpec { order: 8, tolerance: 1e-6, ..QuadratureSpec::default() },
            // The residual profiles over the units carry peaks about 0.05
            // wide, so the scan has to be fine while each fibre can be cheap.
            norm: NormSpec {
                quad: QuadratureSpec { order: 6, initial_panels: 4, tolerance: 1e-3, ..QuadratureSpec::default() },
                scan_points: 48,
                refine_steps: 12,
            },
            support_pieces: 8,
        }
    }
}

impl TableSpec {
    pub fn validate(&self) -> Result<()> {
        self.quad.validate()?;
        self.norm.quad.validate()?;
        if self.norm.scan_points == 0 || self.support_pieces == 0 {
            return Err(Error::Config("scan points and support pieces must be positive".into()));
        }
        Ok(())
    }
}

/// The residual functions as pointwise fused integrals, so that the
/// cancellation between the deformed and undeformed terms happens inside
/// the integrand rather than between two separately converged quadratures.
struct FusedResidual {
    kind: ResidualKind,
    s: f64,
    f0: AlgebraElement,
    g0: AlgebraElement,
    fs: AlgebraElement,
    gs: AlgebraElement,
    df: SmoothFn,
    dg: SmoothFn,
    support: Support,
    spec: QuadratureSpec,
}

impl FusedResidual {
    fn new(kind: ResidualKind, f: &AlgebraElement, g: &AlgebraElement, d: &DeformationParam, spec: &TableSpec) -> Result<Self> {
        let (fs, gs) = (q_s(f, d)?, q_s(g, d)?);
        let smooth = |x: &AlgebraElement| x.as_smooth().cloned().ok_or_else(|| Error::InvalidArgument("leaf expected".into()));
        let (fl, gl) = (smooth(f)?, smooth(g)?);
        let s = d.s;
        let pieces = spec.support_pieces;
        let support = match kind {
            ResidualKind::Involution => f.support_ref().union(&involution_preimage(fl.support(), s, pieces)?),
            ResidualKind::Product => product_support(f.support_ref(), g.support_ref(), s, pieces)?.union(&product_support(
                f.support_ref(),
                g.support_ref(),
                0.0,
                pieces,
            )?),
            ResidualKind::Commutator => product_support(f.support_ref(), g.support_ref(), s, pieces)?
                .union(&product_support(g.support_ref(), f.support_ref(), s, pieces)?)
                .union(&product_support(f.support_ref(), g.support_ref(), 0.0, pieces)?),
        };
        Ok(FusedResidual {
            kind,
            s,
            f0: f.clone(),
            g0: g.clone(),
            fs,
            gs,
            df: fl.partial(1),
            dg: gl.partial(1),
            support,
            spec: spec.quad,
        })
    }

    fn deformed_first(&self, b: f64, a: f64, c: f64) -> C64 {
        let s = self.s;
        let fl = self.fs.eval_at(&[c, a + s * (c - b)]);
        if fl == C64::new(0.0, 0.0) {
            return fl;
        }
        let shift = 1.0 + s * c;
        fl * self.gs.eval_at(&[(b - c) / shift, a / shift]) / shift.abs()
    }

    /// Integrand of `g ∗_s f` with `c` the `b`-coordinate of `f`.
    fn deformed_second(&self, b: f64, a: f64, c: f64) -> C64 {
        let s = self.s;
        let shift = 1.0 + s * c;
        let fr = self.fs.eval_at(&[c, a * shift / (1.0 + s * b)]);
        if fr == C64::new(0.0, 0.0) {
            return fr;
        }
        fr * self.gs.eval_at(&[(b - c) / shift, a - s * c * (1.0 + s * b) / shift]) / shift.abs()
    }

    fn bracket_integrand(&self, b: f64, a: f64, c: f64) -> C64 {
        let (p, q) = ([c, a], [b - c, a]);
        (self.df.eval(&p) * (b - c) * self.gs.eval_at(&q) - self.fs.eval_at(&p) * c * self.dg.eval(&q)) * (a - 1.0)
    }

    fn ranges(&self, b: f64, a: f64) -> Vec<(f64, f64)> {
        let x = [b, a];
        let mut v = convolution_range(&self.fs, &self.gs, Algebra::Deformed(self.s), &x);
        v.extend(convolution_range(&self.f0, &self.g0, GAMMA0, &x));
        if self.kind == ResidualKind::Commutator {
            if let (Ok(fb), Ok(gb)) = (self.fs.support_ref().boxes(), self.gs.support_ref().boxes()) {
                for bf in fb {
                    for bg in gb {
                        let shift = Interval::point(1.0).add(bg[0].scale(self.s));
                        if let Ok(from_left) = Interval::point(b).sub(bg[0]).div(shift) {
                            if let Some(r) = bf[0].intersect(&from_left) {
                                v.push((r.lo, r.hi));
                            }
                        }
                    }
                }
            }
        }
        merge_intervals(v)
    }
}

impl Field for FusedResidual {
    fn arity(&self) -> usize {
        2
    }

    fn chart(&self) -> Chart {
        Chart::Ba
    }

    fn eval(&self, x: &[f64]) -> C64 {
        let (b, a, s) = (x[0], x[1], self.s);
        if !self.support.contains(x) {
            return C64::new(0.0, 0.0);
        }
        match self.kind {
            ResidualKind::Involution => {
                let shift = 1.0 + s * b;
                self.fs.eval_at(&[b / shift, a / shift]) - self.fs.eval_at(x)
            }
            ResidualKind::Product => {
                let integrand = |c: f64| self.deformed_first(b, a, c) - self.f0.eval_at(&[c, a]) * self.g0.eval_at(&[b - c, a]);
                integrate_intervals(integrand, &self.ranges(b, a), &self.spec).value
            }
            ResidualKind::Commutator => {
                let integrand =
                    |c: f64| (self.deformed_first(b, a, c) - self.deformed_second(b, a, c)) / s - self.bracket_integrand(b, a, c);
                integrate_intervals(integrand, &self.ranges(b, a), &self.spec).value
            }
        }
    }

    fn support(&self) -> Support {
        self.support.clone()
    }
}

/// Enclosure of `{(b, a) : (b, a)/(1 + s b) ∈ supp}`, i.e. the image of the
/// support under `(u, v) ↦ (u, v)/(1 - s u)`.
fn involution_preimage(support: &Support, s: f64, pieces: usize) -> Result<Support> {
    let mut out = Vec::new();
    for bx in support.boxes()? {
        for sub in subdivide(bx, pieces) {
            let shift = Interval::point(1.0).sub(sub[0].scale(s));
            out.push(vec![sub[0].div(shift)?, sub[1].div(shift)?]);
        }
    }
    Ok(Support::Boxes(out))
}

/// The residual of kind `kind` at one `s` as an element of `Γ_s`.
pub fn residual_element(
    kind: ResidualKind,
    f: &AlgebraElement,
    g: &AlgebraElement,
    d: &DeformationParam,
    spec: &TableSpec,
) -> Result<AlgebraElement> {
    if kind == ResidualKind::Commutator && d.s == 0.0 {
        return Err(Error::InvalidArgument("the commutator residual needs s ≠ 0".into()));
    }
    let field = FusedResidual::new(kind, f, g, d, spec)?;
    AlgebraElement::from_field(Arc::new(field), Algebra::Deformed(d.s))
}

/// Least-squares slope of `ln r` against `ln |s|` with a 95% interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Slope {
    pub slope: f64,
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Slope {
    /// `None` with fewer than three usable points.
    pub fn fit(xs: &[f64], ys: &[f64]) -> Option<Slope> {
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .zip(ys)
            .filter(|(x, y)| **x != 0.0 && **y > 0.0 && y.is_finite())
            .map(|(x, y)| (x.abs().ln(), y.ln()))
            .collect();
        let n = pts.len();
        if n < 3 {
            return None;
        }
        let nf = n as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
        let se = (rss / (nf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 2.0).map(|d| d.inverse_cdf(0.975)).unwrap_or(f64::INFINITY);
        Some(Slope { slope, lo: slope - t * se, hi: slope + t * se, points: n })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub s: f64,
    pub r2: f64,
    pub r3: f64,
    /// Undefined at `s = 0`.
    pub r4: Option<f64>,
    /// Whether the enclosures of `f ∗_s g` and `g ∗_s f` lie in the
    /// support box for this `s`.
    pub supports_in_box: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualTable {
    pub big_m: f64,
    /// Always `zero_s`: the residuals are `‖·‖_{0,s}` norms.
    pub norm: String,
    pub rows: Vec<ResidualRow>,
    pub slope_r2: Option<Slope>,
    pub slope_r3: Option<Slope>,
    pub slope_r4: Option<Slope>,
    pub seed: u64,
    pub spec: TableSpec,
}

impl ResidualTable {
    pub fn column(&self, kind: ResidualKind) -> Vec<Option<f64>> {
        self.rows
            .iter()
            .map(|r| match kind {
                ResidualKind::Involution => Some(r.r2),
                ResidualKind::Product => Some(r.r3),
                ResidualKind::Commutator => r.r4,
            })
            .collect()
    }

    pub fn slope(&self, kind: ResidualKind) -> Option<Slope> {
        match kind {
            ResidualKind::Involution => self.slope_r2,
            ResidualKind::Product => self.slope_r3,
            ResidualKind::Commutator => self.slope_r4,
        }
    }

    /// Whether the column decreases along the grid, allowing a relative
    /// increase of `noise` on the last step only.
    pub fn decreasing(&self, kind: ResidualKind, noise: f64) -> bool {
        let col: Vec<f64> = self.column(kind).into_iter().flatten().collect();
        let n = col.len();
        col.windows(2).enumerate().all(|(i, w)| {
            let allowance = if i + 2 == n { 1.0 + noise } else { 1.0 };
            w[1] <= w[0] * allowance
        })
    }
}

fn check_grid(s_grid: &[f64], big_m: f64) -> Result<Vec<DeformationParam>> {
    if s_grid.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("s values must be strictly decreasing".into()));
    }
    s_grid.iter().map(|&s| DeformationParam::new(s, big_m)).collect()
}

fn zero_norm(e: &AlgebraElement, spec: &NormSpec) -> Result<f64> {
    e.norm(NormKind::Zero, spec)
}

/// The residuals of the deformed involution, product and commutator for
/// each `s`, with log-log slopes over the nonzero `s`.
pub fn convergence_table(
    f: &AlgebraElement,
    g: &AlgebraElement,
    s_grid: &[f64],
    big_m: f64,
    spec: &TableSpec,
    seed: u64,
) -> Result<ResidualTable> {
    spec.validate()?;
    let params = check_grid(s_grid, big_m)?;
    let floor = 100.0 * spec.quad.tolerance;
    if let Some(s) = s_grid.iter().find(|s| **s != 0.0 && s.abs() < floor) {
        return Err(Error::InvalidArgument(format!("|s| = {} is below 100 × quadrature tolerance", s.abs())));
    }
    let rows = params
        .par_iter()
        .map(|d| -> Result<ResidualRow> {
            let r = |kind| zero_norm(&residual_element(kind, f, g, d, spec)?, &spec.norm);
            let boxed = deformed_product_box(big_m, d.s);
            let fg = product_support(f.support_ref(), g.support_ref(), d.s, spec.support_pieces)?;
            let gf = product_support(g.support_ref(), f.support_ref(), d.s, spec.support_pieces)?;
            Ok(ResidualRow {
                s: d.s,
                r2: r(ResidualKind::Involution)?,
                r3: r(ResidualKind::Product)?,
                r4: if d.s == 0.0 { None } else { Some(r(ResidualKind::Commutator)?) },
                supports_in_box: support_within(&fg, &boxed)? && support_within(&gf, &boxed)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.s).collect();
    let col = |k: fn(&ResidualRow) -> f64| rows.iter().map(k).collect::<Vec<f64>>();
    Ok(ResidualTable {
        big_m,
        norm: "zero_s".into(),
        slope_r2: Slope::fit(&xs, &col(|r| r.r2)),
        slope_r3: Slope::fit(&xs, &col(|r| r.r3)),
        slope_r4: Slope::fit(&xs, &col(|r| r.r4.unwrap_or(0.0))),
        rows,
        seed,
        spec: *spec,
    })
}

/// `Φ_{to,from}`: `f ∈ 𝒟(Γ_from) ↦ |to/from| f((to/from) b, a) ∈ 𝒟(Γ_to)`.
pub fn rescale(f: &SmoothFn, to: f64, from: f64) -> Result<SmoothFn> {
    if to == 0.0 || from == 0.0 {
        return Err(Error::InvalidArgument("rescaling needs nonzero deformation parameters".into()));
    }
    let k = to / from;
    let (b, a) = (Expr::var(0), Expr::var(1));
    let map = CoordMap::new(vec![b.clone() * k, a.clone()], vec![b / k, a]);
    f.pullback(&map, Some(&Expr::constant(k.abs())))
}

/// Lower and upper bounds for the operator norm of `π_s(Q_s f)`, and the
/// same bounds after transporting to the next grid value by rescaling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketRow {
    pub s: f64,
    pub lower: f64,
    pub upper: f64,
    /// `(r, lower, upper)` for `Φ_{r,s}(Q_s f)` in `Γ_r`, `r` the next grid value.
    pub transported: Option<(f64, f64, f64)>,
}

impl BracketRow {
    pub fn nested(&self) -> bool {
        self.lower <= self.upper * (1.0 + 1e-9)
    }

    /// Relative mismatch of the upper bounds, which the rescaling preserves exactly.
    pub fn transport_residual(&self) -> Option<f64> {
        self.transported.map(|(_, _, up)| (up - self.upper).abs() / self.upper.max(f64::MIN_POSITIVE))
    }

    /// Whether the two brackets for the same operator norm overlap.
    pub fn transport_consistent(&self) -> Option<bool> {
        self.transported.map(|(_, lo, up)| lo <= self.upper * (1.0 + 1e-9) && self.lower <= up * (1.0 + 1e-9))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BracketTable {
    pub big_m: f64,
    pub rows: Vec<BracketRow>,
    pub spec: NormSpec,
}

/// Norm brackets `[opLowerBound, ‖·‖_{0,s}]` of `Q_s(f)` along the grid.
pub fn opnorm_bracket_diagnostic(f: &AlgebraElement, s_grid: &[f64], big_m: f64, spec: &NormSpec) -> Result<BracketTable> {
    let params = check_grid(s_grid, big_m)?;
    let leaf = f.as_smooth().ok_or_else(|| Error::InvalidArgument("leaf expected".into()))?;
    let bracket =
        |e: &AlgebraElement| -> Result<(f64, f64)> { Ok((e.norm(NormKind::OpLowerBound, spec)?, e.norm(NormKind::Zero, spec)?)) };
    let rows = params
        .par_iter()
        .enumerate()
        .map(|(i, d)| -> Result<BracketRow> {
            let (lower, upper) = bracket(&q_s(f, d)?)?;
            let transported = match params.get(i + 1) {
                Some(next) if d.s != 0.0 && next.s != 0.0 => {
                    let moved = AlgebraElement::new(rescale(leaf, next.s, d.s)?, Algebra::Deformed(next.s))?;
                    let (lo, up) = bracket(&moved)?;
                    Some((next.s, lo, up))
                }
                _ => None,
            };
            Ok(BracketRow { s: d.s, lower, upper, transported })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BracketTable { big_m, rows, spec: *spec })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::grid_points;
    use crate::semiclassic::sample_k_m;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(seed: u64) -> (AlgebraElement, AlgebraElement) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (sample_k_m(&mut rng, 2.0, 0.05, (0.2, 0.7)).unwrap(), sample_k_m(&mut rng, 2.0, 0.05, (0.2, 0.7)).unwrap())
    }

    #[test]
    fn fused_residuals_match_unfused_products() {
        let (f, g) = pair(1);
        let spec = TableSpec::default();
        let d = DeformationParam::new(0.05, 2.0).unwrap();
        let (fs, gs) = (q_s(&f, &d).unwrap(), q_s(&g, &d).unwrap());
        let r3 = residual_element(ResidualKind::Product, &f, &g, &d, &spec).unwrap();
        let r4 = residual_element(ResidualKind::Commutator, &f, &g, &d, &spec).unwrap();
        let sfg = fs.conv(&gs).unwrap();
        let sgf = gs.conv(&fs).unwrap();
        let fg = f.conv(&g).unwrap();
        let br = super::super::poisson_bracket(&f, &g).unwrap();
        for p in grid_points(&[Interval::new(-3.0, 3.0), Interval::new(0.6, 1.9)], 6) {
            let want3 = sfg.eval_at(&p) - fg.eval_at(&p);
            assert!((r3.eval_at(&p) - want3).norm() < 1e-8);
            let want4 = (sfg.eval_at(&p) - sgf.eval_at(&p)) / d.s - br.eval_at(&p);
            assert!((r4.eval_at(&p) - want4).norm() < 1e-5, "{p:?}");
            let shift = 1.0 + d.s * p[0];
            let want2 = f.eval_at(&[p[0] / shift, p[1] / shift]) - f.eval_at(&p);
            let r2 = residual_element(ResidualKind::Involution, &f, &g, &d, &spec).unwrap();
            assert!((r2.eval_at(&p) - want2).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_deformation_is_exact() {
        let (f, g) = pair(2);
        let spec = TableSpec::default();
        let d = DeformationParam::new(0.0, 2.0).unwrap();
        for kind in [ResidualKind::Involution, ResidualKind::Product] {
            let r = residual_element(kind, &f, &g, &d, &spec).unwrap();
            for p in grid_points(&[Interval::new(-3.0, 3.0), Interval::new(0.6, 1.9)], 7) {
                assert_eq!(r.eval_at(&p), C64::new(0.0, 0.0));
            }
        }
        assert!(residual_element(ResidualKind::Commutator, &f, &g, &d, &spec).is_err());
    }

    #[test]
    fn slope_fit() {
        let xs = [0.1, 0.01, 0.001, 0.0];
        let ys = [2e-1, 2e-2, 2e-3, 0.0];
        let s = Slope::fit(&xs, &ys).unwrap();
        assert_eq!(s.points, 3);
        assert!((s.slope - 1.0).abs() < 1e-12 && s.hi - s.lo < 1e-9);
        assert!(Slope::fit(&xs[..2], &ys[..2]).is_none());
    }

    #[test]
    fn rescaling_round_trip() {
        let (f, _) = pair(3);
        let leaf = f.as_smooth().unwrap();
        let same = rescale(leaf, 0.2, 0.2).unwrap();
        let there = rescale(leaf, 0.05, 0.2).unwrap();
        let back = rescale(&there, 0.2, 0.05).unwrap();
        for p in grid_points(&[Interval::new(-2.0, 2.0), Interval::new(0.5, 2.0)], 9) {
            assert_eq!(same.eval(&p), leaf.eval(&p));
            assert!((back.eval(&p) - leaf.eval(&p)).norm() < 1e-14);
        }
    }

    #[test]
    fn grid_validation() {
        let (f, g) = pair(4);
        let spec = TableSpec::default();
        assert!(matches!(convergence_table(&f, &g, &[0.1, 0.3], 2.0, &spec, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(convergence_table(&f, &g, &[0.3, 0.1], 2.0, &spec, 0), Err(Error::DeformationOutOfRange { .. })));
    }
}
