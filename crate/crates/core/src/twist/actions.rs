//! Actions of the point maps and of the generators on functions of two or
//! three legs, and the twisted coproduct and `K̂` checks.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::maps::TwistPointMap;
use super::{Orientation, TwistConfig};
use crate::error::{Error, Result};
use crate::funcspace::{expect_chart, BoxN, Chart, CoordMap, Expr, Field, Interval, SmoothFn, Support};

fn vars(n: usize) -> Vec<Expr> {
    (0..n).map(Expr::var).collect()
}

/// Check that `map`'s singular factor stays `margin` away from zero on every
/// support box.
fn check_support(map: TwistPointMap, support: &Support, margin: f64) -> Result<()> {
    let factor = map.singular_factor(&vars(map.dim()));
    for bx in support.boxes().map_err(|_| Error::UnboundedSupport(format!("{map:?} needs a bounded support")))? {
        let d = factor.eval_interval(bx)?;
        if d.mig() < margin {
            return Err(Error::OutsideDomain(format!(
                "{map:?}: singular factor ranges over [{}, {}] on the support, margin {margin}",
                d.lo, d.hi
            )));
        }
    }
    Ok(())
}

/// Argument map and support map of the hat action under the orientation.
fn hat_maps(map: TwistPointMap, orientation: Orientation) -> (TwistPointMap, TwistPointMap) {
    match orientation {
        Orientation::Reproducing => (map.inverse(), map),
        Orientation::Direct => (map, map.inverse()),
    }
}

/// `T̂F` as a symbolic pullback times the modular weight.
pub fn twist_apply(map: TwistPointMap, f: &SmoothFn, cfg: &TwistConfig) -> Result<SmoothFn> {
    expect_chart(f.chart(), Chart::Zc)?;
    if f.arity() != map.dim() {
        return Err(Error::InvalidArgument(format!("{map:?} needs {} coordinates, got {}", map.dim(), f.arity())));
    }
    check_support(map, f.support(), cfg.margin)?;
    let x = vars(map.dim());
    let (argument, image) = hat_maps(map, cfg.orientation);
    let coords = CoordMap::new(argument.closed(&x), image.closed(&x));
    let weight = map.weight(&x)?;
    f.pullback(&coords, Some(&weight))
}

/// Lazy hat action on an arbitrary field.
pub struct TwistedField<'a> {
    map: TwistPointMap,
    argument: TwistPointMap,
    inner: &'a dyn Field,
    support: Support,
}

impl<'a> TwistedField<'a> {
    pub fn new(map: TwistPointMap, inner: &'a dyn Field, cfg: &TwistConfig) -> Result<Self> {
        expect_chart(inner.chart(), Chart::Zc)?;
        if inner.arity() != map.dim() {
            return Err(Error::InvalidArgument(format!("{map:?} needs {} coordinates", map.dim())));
        }
        let support = inner.support();
        check_support(map, &support, cfg.margin)?;
        let (argument, image) = hat_maps(map, cfg.orientation);
        let x = vars(map.dim());
        let coords = CoordMap::new(argument.closed(&x), image.closed(&x));
        let support = match support {
            Support::Unbounded => Support::Unbounded,
            Support::Boxes(bs) => Support::Boxes(bs.iter().map(|b| coords.image_of_box(b, 2)).collect::<Result<_>>()?),
        };
        Ok(TwistedField { map, argument, inner, support })
    }
}

impl Field for TwistedField<'_> {
    fn arity(&self) -> usize {
        self.map.dim()
    }
    fn chart(&self) -> Chart {
        Chart::Zc
    }
    fn eval(&self, x: &[f64]) -> C64 {
        let w = self.map.weight(x).unwrap_or(f64::NAN);
        self.inner.eval(&self.argument.closed(x)) * w
    }
    fn support(&self) -> Support {
        self.support.clone()
    }
}

/// Operators built from the generators of the quantum group, acting on one leg.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GeneratorKind {
    Y,
    X,
    J,
    Bt(f64),
    SgnIplusY,
    LogAbsIplusY,
    InvIplusY,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOp {
    pub kind: GeneratorKind,
    pub leg: usize,
}

impl GeneratorOp {
    pub fn new(kind: GeneratorKind, leg: usize) -> Self {
        GeneratorOp { kind, leg }
    }
}

/// Apply a generator to the given leg of `f`, exactly.
pub fn apply_generator(op: GeneratorOp, f: &SmoothFn, cfg: &TwistConfig) -> Result<SmoothFn> {
    expect_chart(f.chart(), Chart::Zc)?;
    let n = f.arity();
    if !n.is_multiple_of(2) || 2 * op.leg + 1 >= n {
        return Err(Error::InvalidArgument(format!("leg {} does not exist on {n} coordinates", op.leg)));
    }
    let (zi, ci) = (2 * op.leg, 2 * op.leg + 1);
    let z = Expr::var(zi);
    let c = Expr::var(ci);
    let rescale = |k: f64| {
        let mut fwd = vars(n);
        let mut inv = vars(n);
        fwd[zi] = z.clone() * k;
        fwd[ci] = c.clone() * k;
        inv[zi] = z.clone() / k;
        inv[ci] = c.clone() / k;
        f.pullback(&CoordMap::new(fwd, inv), None)
    };
    let shifted = Expr::constant(1.0) + z.clone();
    let require_u = || -> Result<()> {
        for bx in f.support().boxes()? {
            if Interval::new(bx[zi].lo + 1.0, bx[zi].hi + 1.0).mig() < cfg.margin {
                return Err(Error::OutsideDomain(format!("leg {} support meets z = -1", op.leg)));
            }
        }
        Ok(())
    };
    match op.kind {
        GeneratorKind::Y => Ok(f.mul_expr(&z)),
        GeneratorKind::X => {
            let dz = f.partial(zi).mul_expr(&z);
            let dc = f.partial(ci).mul_expr(&c);
            Ok(dz.add(&dc)?.scale(C64::i()))
        }
        GeneratorKind::J => rescale(-1.0),
        GeneratorKind::Bt(t) => rescale((-t).exp()),
        GeneratorKind::SgnIplusY => {
            require_u()?;
            Ok(f.mul_expr(&shifted.sgn()))
        }
        GeneratorKind::LogAbsIplusY => {
            require_u()?;
            Ok(f.mul_expr(&shifted.ln_abs()))
        }
        GeneratorKind::InvIplusY => {
            require_u()?;
            Ok(f.mul_expr(&(Expr::constant(1.0) / shifted)))
        }
    }
}

fn apply_all(ops: &[GeneratorOp], f: &SmoothFn, cfg: &TwistConfig) -> Result<SmoothFn> {
    ops.iter().try_fold(f.clone(), |acc, op| apply_generator(*op, &acc, cfg))
}

/// Generators whose twisted coproducts have closed forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoproductGenerator {
    Y,
    X,
    J,
}

/// `Δ₀(gen)` on two legs.
pub fn delta0_generator(gen: CoproductGenerator, f: &SmoothFn, cfg: &TwistConfig) -> Result<SmoothFn> {
    let on = |kind, leg| GeneratorOp::new(kind, leg);
    match gen {
        CoproductGenerator::Y => {
            apply_generator(on(GeneratorKind::Y, 0), f, cfg)?.add(&apply_generator(on(GeneratorKind::Y, 1), f, cfg)?)
        }
        CoproductGenerator::X => {
            apply_generator(on(GeneratorKind::X, 0), f, cfg)?.add(&apply_generator(on(GeneratorKind::X, 1), f, cfg)?)
        }
        CoproductGenerator::J => apply_all(&[on(GeneratorKind::J, 0), on(GeneratorKind::J, 1)], f, cfg),
    }
}

/// `T̂ Δ₀(gen) T̂⁻¹ F`.
pub fn twisted_coproduct(gen: CoproductGenerator, f: &SmoothFn, cfg: &TwistConfig) -> Result<SmoothFn> {
    let untwisted = twist_apply(TwistPointMap::TInv, f, cfg)?;
    let moved = delta0_generator(gen, &untwisted, cfg)?;
    twist_apply(TwistPointMap::T, &moved, cfg)
}

/// The closed form of `Δ(gen) F`.
pub fn coproduct_closed_form(gen: CoproductGenerator, f: &SmoothFn) -> Result<SmoothFn> {
    expect_chart(f.chart(), Chart::Zc)?;
    let x = vars(4);
    let one = Expr::constant(1.0);
    match gen {
        CoproductGenerator::Y => Ok(f.mul_expr(&(x[0].clone() + x[2].clone() + x[0].clone() * x[2].clone()))),
        CoproductGenerator::X => {
            let first = f.partial(0).mul_expr(&x[0]).add(&f.partial(1).mul_expr(&x[1]))?;
            let first = first.mul_expr(&(one.clone() / (one.clone() + x[2].clone())));
            let second = f.partial(2).mul_expr(&x[2]).add(&f.partial(3).mul_expr(&x[3]))?;
            Ok(first.add(&second)?.scale(C64::i()))
        }
        CoproductGenerator::J => {
            let k = (one.clone() + x[2].clone()) / (one - x[2].clone());
            let fwd = vec![-(x[0].clone() * k.clone()), -(x[1].clone() * k), -x[2].clone(), -x[3].clone()];
            f.pullback(&CoordMap::new(fwd.clone(), fwd), None)
        }
    }
}

/// Cell-centred grid over the hull of the union of two supports.
pub fn comparison_points(a: &Support, b: &Support, per_axis: usize) -> Result<Vec<Vec<f64>>> {
    let hull: BoxN = a.union(b).hull()?;
    Ok(crate::funcspace::grid_points(&hull, per_axis))
}

/// Sup-residual between the conjugation route and the closed form.
pub fn coproduct_residual(gen: CoproductGenerator, f: &SmoothFn, per_axis: usize, cfg: &TwistConfig) -> Result<f64> {
    let lhs = twisted_coproduct(gen, f, cfg)?;
    let rhs = coproduct_closed_form(gen, f)?;
    let points = comparison_points(lhs.support(), rhs.support(), per_axis)?;
    Ok(crate::funcspace::sup_residual(&lhs, &rhs, &points))
}

/// `K̂F - ½ (I ⊗ (I + sgn(I + Ŷ)) + Ĵ ⊗ (I - sgn(I + Ŷ))) F`, sup over a grid.
pub fn khat_residual(f: &SmoothFn, per_axis: usize, cfg: &TwistConfig) -> Result<f64> {
    let lhs = twist_apply(TwistPointMap::K, f, cfg)?;
    let sign = apply_generator(GeneratorOp::new(GeneratorKind::SgnIplusY, 1), f, cfg)?;
    let plus = f.add(&sign)?;
    let minus = apply_generator(GeneratorOp::new(GeneratorKind::J, 0), &f.sub(&sign)?, cfg)?;
    let rhs = plus.add(&minus)?.scale(C64::new(0.5, 0.0));
    let points = comparison_points(lhs.support(), rhs.support(), per_axis)?;
    Ok(crate::funcspace::sup_residual(&lhs, &rhs, &points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{grid_points, sup_residual};

    fn bump(center: &[f64], hw: &[f64]) -> SmoothFn {
        SmoothFn::bump_product(Chart::Zc, center, hw, C64::new(1.0, 0.3))
    }

    fn cfg() -> TwistConfig {
        TwistConfig::default()
    }

    #[test]
    fn twist_formula_and_inverse() {
        let f = bump(&[0.3, 1.2, 0.5, -1.0], &[0.6, 0.5, 0.4, 0.5]);
        let tf = twist_apply(TwistPointMap::T, &f, &cfg()).unwrap();
        let p = [0.2, 0.9, 0.4, -1.1];
        let expected = f.eval(&[0.2 * 1.4, 0.9 * 1.4, 0.4, -1.1]);
        assert!((tf.eval(&p) - expected).norm() < 1e-15);
        let back = twist_apply(TwistPointMap::TInv, &tf, &cfg()).unwrap();
        let pts = grid_points(&f.support().hull().unwrap(), 6);
        assert!(sup_residual(&back, &f, &pts) < 1e-14);
        assert!(tf.support().contains(&p));
    }

    #[test]
    fn twist_rejects_support_near_singular_locus() {
        let f = bump(&[0.0, 1.0, -1.0, 1.0], &[0.5, 0.5, 0.3, 0.5]);
        assert!(matches!(twist_apply(TwistPointMap::T, &f, &cfg()), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn y_coproduct_factor() {
        let f = bump(&[1.0, 1.0, 1.0, 1.0], &[0.3, 0.3, 0.3, 0.3]);
        let lhs = twisted_coproduct(CoproductGenerator::Y, &f, &cfg()).unwrap();
        let v = lhs.eval(&[1.0, 1.0, 1.0, 1.0]) / f.eval(&[1.0, 1.0, 1.0, 1.0]);
        assert!((v - C64::new(3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn coproducts_match_closed_forms() {
        let f = bump(&[0.3, 1.2, 0.5, -1.0], &[0.6, 0.5, 0.4, 0.5]);
        for gen in [CoproductGenerator::Y, CoproductGenerator::X, CoproductGenerator::J] {
            let r = coproduct_residual(gen, &f, 8, &cfg()).unwrap();
            assert!(r < 1e-10, "{gen:?}: {r}");
        }
    }

    #[test]
    fn direct_orientation_misses_the_y_closed_form() {
        let f = bump(&[0.3, 1.2, 0.5, -1.0], &[0.6, 0.5, 0.4, 0.5]);
        let direct = TwistConfig { orientation: Orientation::Direct, ..cfg() };
        assert!(coproduct_residual(CoproductGenerator::Y, &f, 8, &direct).unwrap() > 1e-3);
    }

    #[test]
    fn khat_on_mixed_support() {
        let left = bump(&[0.4, 1.0, -1.6, 1.0], &[0.5, 0.5, 0.3, 0.5]);
        let right = bump(&[0.4, 1.0, -0.4, 1.0], &[0.5, 0.5, 0.3, 0.5]);
        let f = left.add(&right).unwrap();
        assert!(khat_residual(&f, 8, &cfg()).unwrap() < 1e-12);
        let kf = twist_apply(TwistPointMap::K, &left, &cfg()).unwrap();
        let jf = apply_generator(GeneratorOp::new(GeneratorKind::J, 0), &left, &cfg()).unwrap();
        let pts = comparison_points(kf.support(), jf.support(), 6).unwrap();
        assert_eq!(sup_residual(&kf, &jf, &pts), 0.0);
    }

    #[test]
    fn functions_of_y_need_u_support() {
        let f = bump(&[0.0, 1.0, -1.0, 1.0], &[0.5, 0.5, 0.3, 0.5]);
        let op = GeneratorOp::new(GeneratorKind::LogAbsIplusY, 1);
        assert!(apply_generator(op, &f, &cfg()).is_err());
        assert!(apply_generator(GeneratorOp::new(GeneratorKind::Y, 2), &f, &cfg()).is_err());
    }
}
