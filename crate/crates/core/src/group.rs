//! The 'ax+b' group, its one-parameter subgroups, the groupoids obtained from
//! pairs of complementary subgroups, and the modular functions of the
//! double group (G; B, C).
//!
//! Group elements are pairs `(b, a)` with `a != 0` and product
//! `(b1, a1)(b2, a2) = (b1 + a1 b2, a1 a2)`. Most maps are generic over
//! [`Scalar`] so that the same code yields numeric points and symbolic
//! coordinate maps for pullbacks.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Absolute threshold below which a computed quantity is treated as zero
/// when testing carrier membership and decomposability.
pub const DEFAULT_ZERO_TOL: f64 = 1e-12;

/// Relative tolerance for matching units when composing groupoid elements.
pub const COMPOSE_TOL: f64 = 1e-9;

/// Field-like scalar used by the generic group maps.
pub trait Scalar:
    Clone + Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> + Neg<Output = Self>
{
    fn cst(x: f64) -> Self;
    fn abs(&self) -> Self;
    fn sqrt(&self) -> Self;
    /// True when the value is known to be within `eps` of zero.
    fn near_zero(&self, eps: f64) -> bool;
}

impl Scalar for f64 {
    fn cst(x: f64) -> Self {
        x
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn near_zero(&self, eps: f64) -> bool {
        !(f64::abs(*self) > eps)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement<S = f64> {
    pub b: S,
    pub a: S,
}

impl<S: Scalar> GroupElement<S> {
    pub fn new_unchecked(b: S, a: S) -> Self {
        GroupElement { b, a }
    }

    pub fn identity() -> Self {
        GroupElement { b: S::cst(0.0), a: S::cst(1.0) }
    }

    pub fn mul(&self, other: &Self) -> Self {
        GroupElement { b: self.b.clone() + self.a.clone() * other.b.clone(), a: self.a.clone() * other.a.clone() }
    }

    pub fn inverse(&self) -> Self {
        GroupElement { b: -(self.b.clone() / self.a.clone()), a: S::cst(1.0) / self.a.clone() }
    }
}

impl GroupElement<f64> {
    pub fn new(b: f64, a: f64) -> Result<Self> {
        if !b.is_finite() || !a.is_finite() || a.near_zero(0.0) {
            return Err(Error::NotInGroup(b, a));
        }
        Ok(GroupElement { b, a })
    }

    pub fn to_array(&self) -> [f64; 2] {
        [self.b, self.a]
    }

    /// Max-norm distance between coordinates.
    pub fn dist(&self, other: &Self) -> f64 {
        (self.b - other.b).abs().max((self.a - other.a).abs())
    }
}

/// One-parameter subgroups of G.
///
/// `Sloped(s)` is the line `{(b, 1 + s b)}` through the identity; slope 0
/// gives the translations and slope 1 the subgroup `{(c - 1, c)}`.
/// `Dilations` is `{(0, a)}`, the limit of infinite slope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Subgroup {
    Sloped(f64),
    Dilations,
}

impl Subgroup {
    pub const TRANSLATIONS: Subgroup = Subgroup::Sloped(0.0);
    pub const UNIT_SLOPE: Subgroup = Subgroup::Sloped(1.0);
    pub const DILATIONS: Subgroup = Subgroup::Dilations;

    /// Element with the given parameter. Translations are parametrised by
    /// `b`, every other subgroup by its `a` coordinate.
    pub fn element<S: Scalar>(&self, param: S) -> GroupElement<S> {
        match *self {
            Subgroup::Dilations => GroupElement::new_unchecked(S::cst(0.0), param),
            Subgroup::Sloped(0.0) => GroupElement::new_unchecked(param, S::cst(1.0)),
            Subgroup::Sloped(s) => GroupElement::new_unchecked((param.clone() - S::cst(1.0)) / S::cst(s), param),
        }
    }

    /// Inverse of [`Subgroup::element`]; assumes `g` lies in the subgroup.
    pub fn param<S: Scalar>(&self, g: &GroupElement<S>) -> S {
        match *self {
            Subgroup::Sloped(0.0) => g.b.clone(),
            _ => g.a.clone(),
        }
    }

    pub fn contains(&self, g: &GroupElement<f64>, eps: f64) -> bool {
        match *self {
            Subgroup::Dilations => g.b.abs() <= eps,
            Subgroup::Sloped(s) => (g.a - 1.0 - s * g.b).abs() <= eps,
        }
    }
}

/// Factor `g = p q` with `p` in `left` and `q` in `right`.
pub fn decompose<S: Scalar>(
    g: &GroupElement<S>,
    left: Subgroup,
    right: Subgroup,
    eps: f64,
) -> Result<(GroupElement<S>, GroupElement<S>)> {
    let one = || S::cst(1.0);
    let not_decomp = |what: &str| Error::NotDecomposable(format!("{left:?}·{right:?}: {what} vanishes"));
    match (left, right) {
        (Subgroup::Sloped(s), Subgroup::Sloped(t)) => {
            if s == t {
                return Err(Error::InvalidArgument("subgroups must differ".into()));
            }
            let x = (S::cst(t) * g.b.clone() - g.a.clone() + one()) / S::cst(t - s);
            let pa = one() + S::cst(s) * x.clone();
            if pa.near_zero(eps) {
                return Err(not_decomp("left factor"));
            }
            let y = (g.b.clone() - x.clone()) / pa.clone();
            let p = GroupElement::new_unchecked(x, pa);
            let q = GroupElement::new_unchecked(y.clone(), one() + S::cst(t) * y);
            Ok((p, q))
        }
        (Subgroup::Sloped(s), Subgroup::Dilations) => {
            let pa = one() + S::cst(s) * g.b.clone();
            if pa.near_zero(eps) {
                return Err(not_decomp("1 + s b"));
            }
            let q = GroupElement::new_unchecked(S::cst(0.0), g.a.clone() / pa.clone());
            Ok((GroupElement::new_unchecked(g.b.clone(), pa), q))
        }
        (Subgroup::Dilations, Subgroup::Sloped(t)) => {
            let alpha = g.a.clone() - S::cst(t) * g.b.clone();
            if alpha.near_zero(eps) {
                return Err(not_decomp("a - t b"));
            }
            let q = GroupElement::new_unchecked(g.b.clone() / alpha.clone(), g.a.clone() / alpha.clone());
            Ok((GroupElement::new_unchecked(S::cst(0.0), alpha), q))
        }
        (Subgroup::Dilations, Subgroup::Dilations) => Err(Error::InvalidArgument("subgroups must differ".into())),
    }
}

pub fn left_factor<S: Scalar>(g: &GroupElement<S>, left: Subgroup, right: Subgroup) -> Result<GroupElement<S>> {
    decompose(g, left, right, DEFAULT_ZERO_TOL).map(|(p, _)| p)
}

pub fn right_factor<S: Scalar>(g: &GroupElement<S>, left: Subgroup, right: Subgroup) -> Result<GroupElement<S>> {
    decompose(g, left, right, DEFAULT_ZERO_TOL).map(|(_, q)| q)
}

/// True when the point lies in the double-coset carrier where both
/// `C_s C_t` and `C_t C_s` factorizations exist. An infinite slope is
/// passed as `None`.
pub fn gamma_st_contains(s: Option<f64>, t: Option<f64>, g: &GroupElement<f64>) -> bool {
    gamma_st_contains_with(s, t, g, DEFAULT_ZERO_TOL)
}

pub fn gamma_st_contains_with(s: Option<f64>, t: Option<f64>, g: &GroupElement<f64>, eps: f64) -> bool {
    let (b, a) = (g.b, g.a);
    if a.near_zero(0.0) {
        return false;
    }
    let (first, second) = match (s, t) {
        (Some(s), Some(t)) => (s * t * b - s * a + t, s * t * b - t * a + s),
        (Some(s), None) | (None, Some(s)) => (1.0 + s * b, a - s * b),
        (None, None) => return false,
    };
    if let (Some(s), Some(t)) = (s, t) {
        if s == t {
            return false;
        }
    }
    !first.near_zero(eps) && !second.near_zero(eps)
}

/// Point of a groupoid in its chart coordinates.
pub type GroupoidPoint = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GroupoidKind {
    /// Groupoid over the translations in the `(z, c)` chart, where
    /// `(z, c)` stands for the group element `(z + c - 1, c)`.
    TranslationsZc,
    /// The same groupoid in plain group coordinates `(b, a)`.
    TranslationsGroup,
    /// Bundle of groups over the unit-slope subgroup, group coordinates.
    UnitSlope,
    /// Deformed groupoid with units in the dilations.
    DeformedOverDilations(f64),
    /// Deformed groupoid with units in the sloped subgroup of the same slope.
    DeformedOverSloped(f64),
}

impl GroupoidKind {
    pub fn contains(&self, p: GroupoidPoint) -> bool {
        let [x, y] = p;
        if !x.is_finite() || !y.is_finite() {
            return false;
        }
        match *self {
            GroupoidKind::TranslationsZc | GroupoidKind::TranslationsGroup | GroupoidKind::UnitSlope => !y.near_zero(0.0),
            GroupoidKind::DeformedOverDilations(s) | GroupoidKind::DeformedOverSloped(s) => {
                gamma_st_contains(Some(s), None, &GroupElement { b: x, a: y })
            }
        }
    }

    fn check(&self, p: GroupoidPoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::NotInGroup(p[0], p[1]))
        }
    }

    pub fn left_unit(&self, p: GroupoidPoint) -> Result<GroupoidPoint> {
        self.check(p)?;
        let [x, y] = p;
        Ok(match *self {
            GroupoidKind::TranslationsZc => [x, 1.0],
            GroupoidKind::TranslationsGroup => {
                let g = GroupElement { b: x, a: y };
                left_factor(&g, Subgroup::TRANSLATIONS, Subgroup::UNIT_SLOPE)?.to_array()
            }
            GroupoidKind::UnitSlope => [y - 1.0, y],
            GroupoidKind::DeformedOverDilations(s) => [0.0, y - s * x],
            GroupoidKind::DeformedOverSloped(s) => [x, 1.0 + s * x],
        })
    }

    pub fn right_unit(&self, p: GroupoidPoint) -> Result<GroupoidPoint> {
        self.check(p)?;
        let [x, y] = p;
        Ok(match *self {
            GroupoidKind::TranslationsZc => [x / y, 1.0],
            GroupoidKind::TranslationsGroup => {
                let g = GroupElement { b: x, a: y };
                right_factor(&g, Subgroup::UNIT_SLOPE, Subgroup::TRANSLATIONS)?.to_array()
            }
            GroupoidKind::UnitSlope => [y - 1.0, y],
            GroupoidKind::DeformedOverDilations(s) => [0.0, y / (1.0 + s * x)],
            GroupoidKind::DeformedOverSloped(s) => {
                let d = y - s * x;
                [x / d, y / d]
            }
        })
    }

    pub fn inverse(&self, p: GroupoidPoint) -> Result<GroupoidPoint> {
        self.check(p)?;
        let [x, y] = p;
        Ok(match *self {
            GroupoidKind::TranslationsZc => [x / y, 1.0 / y],
            GroupoidKind::TranslationsGroup => {
                let g = GroupElement { b: x, a: y };
                let cl = left_factor(&g, Subgroup::UNIT_SLOPE, Subgroup::TRANSLATIONS)?;
                let bl = left_factor(&g, Subgroup::TRANSLATIONS, Subgroup::UNIT_SLOPE)?;
                cl.inverse().mul(&bl).to_array()
            }
            // The fibre over (a - 1, a) is the line of fixed `a` with unit
            // b = a - 1 under b1 + b2 + 1 - a.
            GroupoidKind::UnitSlope => [2.0 * y - 2.0 - x, y],
            GroupoidKind::DeformedOverDilations(s) => {
                let d = 1.0 + s * x;
                [-x / d, (y - s * x) / d]
            }
            GroupoidKind::DeformedOverSloped(s) => {
                let d = y - s * x;
                [x / d, (1.0 + s * x) / d]
            }
        })
    }

    pub fn is_composable(&self, x: GroupoidPoint, y: GroupoidPoint) -> Result<bool> {
        let r = self.right_unit(x)?;
        let l = self.left_unit(y)?;
        let scale = 1.0 + r[0].abs().max(r[1].abs());
        Ok((r[0] - l[0]).abs().max((r[1] - l[1]).abs()) <= COMPOSE_TOL * scale)
    }

    pub fn compose(&self, x: GroupoidPoint, y: GroupoidPoint) -> Result<GroupoidPoint> {
        if !self.is_composable(x, y)? {
            return Err(Error::NotComposable(format!("{self:?}: {x:?} then {y:?}")));
        }
        let ([b1, a1], [b2, a2]) = (x, y);
        let out = match *self {
            GroupoidKind::TranslationsZc => [b1, a1 * a2],
            GroupoidKind::TranslationsGroup => {
                let gx = GroupElement { b: b1, a: a1 };
                let gy = GroupElement { b: b2, a: a2 };
                let unit = right_factor(&gx, Subgroup::UNIT_SLOPE, Subgroup::TRANSLATIONS)?;
                gx.mul(&unit.inverse()).mul(&gy).to_array()
            }
            GroupoidKind::UnitSlope => [b1 + b2 + 1.0 - a1, a1],
            GroupoidKind::DeformedOverDilations(s) => {
                let d = 1.0 + s * b1;
                [b1 + d * b2, d * a2]
            }
            GroupoidKind::DeformedOverSloped(s) => [b1, a1 * a2 / (1.0 + s * b2)],
        };
        self.check(out)?;
        Ok(out)
    }

    /// An element `y` with `left_unit(y) == right_unit(x)`; `free` picks the
    /// point inside the fibre.
    pub fn right_partner(&self, x: GroupoidPoint, free: f64) -> Result<GroupoidPoint> {
        let unit = self.right_unit(x)?;
        let y = match *self {
            GroupoidKind::TranslationsZc => [unit[0], free],
            GroupoidKind::TranslationsGroup => {
                let b = Subgroup::TRANSLATIONS.element(unit[0]);
                b.mul(&Subgroup::UNIT_SLOPE.element(free)).to_array()
            }
            GroupoidKind::UnitSlope => [free, x[1]],
            GroupoidKind::DeformedOverDilations(s) => [free, unit[1] + s * free],
            GroupoidKind::DeformedOverSloped(_) => [unit[0], free],
        };
        self.check(y)?;
        Ok(y)
    }

    pub fn is_unit(&self, p: GroupoidPoint) -> Result<bool> {
        let l = self.left_unit(p)?;
        Ok((l[0] - p[0]).abs().max((l[1] - p[1]).abs()) <= COMPOSE_TOL * (1.0 + p[0].abs().max(p[1].abs())))
    }
}

/// Identifications between groupoids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum IsoMap {
    /// `(b, a) -> (s b, a)`, from slope `s` to slope 1 (either unit space).
    ScaleToUnitSlope(f64),
    /// `(b, a) -> (-b + (a - 1)/s, a)`, from units in the sloped subgroup to
    /// units in the dilations, same slope `s != 0`.
    SlopedToDilations(f64),
    /// Group coordinates to the `(z, c)` chart, `(b, a) -> (b - a + 1, a)`.
    TransformationGroupoid,
}

impl IsoMap {
    pub fn source(&self) -> GroupoidKind {
        match *self {
            IsoMap::ScaleToUnitSlope(s) => GroupoidKind::DeformedOverDilations(s),
            IsoMap::SlopedToDilations(s) => GroupoidKind::DeformedOverSloped(s),
            IsoMap::TransformationGroupoid => GroupoidKind::TranslationsGroup,
        }
    }

    pub fn target(&self) -> GroupoidKind {
        match *self {
            IsoMap::ScaleToUnitSlope(_) => GroupoidKind::DeformedOverDilations(1.0),
            IsoMap::SlopedToDilations(s) => GroupoidKind::DeformedOverDilations(s),
            IsoMap::TransformationGroupoid => GroupoidKind::TranslationsZc,
        }
    }

    pub fn apply(&self, p: GroupoidPoint) -> Result<GroupoidPoint> {
        let [x, y] = p;
        match *self {
            IsoMap::ScaleToUnitSlope(0.0) => Err(Error::InvalidArgument("scaling needs a nonzero slope".into())),
            IsoMap::ScaleToUnitSlope(s) => Ok([s * x, y]),
            IsoMap::SlopedToDilations(0.0) => Err(Error::InvalidArgument("slope must be nonzero".into())),
            IsoMap::SlopedToDilations(s) => Ok([-x + (y - 1.0) / s, y]),
            IsoMap::TransformationGroupoid => Ok([x - y + 1.0, y]),
        }
    }

    pub fn apply_inverse(&self, p: GroupoidPoint) -> Result<GroupoidPoint> {
        let [x, y] = p;
        match *self {
            IsoMap::ScaleToUnitSlope(0.0) => Err(Error::InvalidArgument("scaling needs a nonzero slope".into())),
            IsoMap::ScaleToUnitSlope(s) => Ok([x / s, y]),
            // The map is an involution on the plane.
            IsoMap::SlopedToDilations(_) => self.apply(p),
            IsoMap::TransformationGroupoid => Ok([x + y - 1.0, y]),
        }
    }
}

/// Lie algebra directions of the two subgroups of the double group, in the
/// basis dual to `(b, a)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LieAlgebraData {
    pub translations: [f64; 2],
    pub unit_slope: [f64; 2],
}

impl Default for LieAlgebraData {
    fn default() -> Self {
        LieAlgebraData { translations: [1.0, 0.0], unit_slope: [1.0, 1.0] }
    }
}

impl LieAlgebraData {
    /// `Ad(b, a)(beta, alpha) = (a beta - b alpha, alpha)`.
    pub fn adjoint<S: Scalar>(g: &GroupElement<S>, v: [S; 2]) -> [S; 2] {
        let [beta, alpha] = v;
        [g.a.clone() * beta - g.b.clone() * alpha.clone(), alpha]
    }

    /// Coefficients of `v` in the direct-sum basis (translations, unit slope).
    fn split<S: Scalar>(&self, v: &[S; 2]) -> [S; 2] {
        let [p, q] = [self.translations, self.unit_slope];
        let det = p[0] * q[1] - p[1] * q[0];
        let x = (S::cst(q[1]) * v[0].clone() - S::cst(q[0]) * v[1].clone()) / S::cst(det);
        let y = (S::cst(p[0]) * v[1].clone() - S::cst(p[1]) * v[0].clone()) / S::cst(det);
        [x, y]
    }

    /// `|det(P_B Ad(g)|_b)|`, the translation modular function.
    pub fn j_translations<S: Scalar>(&self, g: &GroupElement<S>) -> S {
        let v = self.translations.map(S::cst);
        self.split(&Self::adjoint(g, v))[0].abs()
    }

    /// `|det(P_C Ad(g)|_c)|`, the unit-slope modular function.
    pub fn j_unit_slope<S: Scalar>(&self, g: &GroupElement<S>) -> S {
        let v = self.unit_slope.map(S::cst);
        self.split(&Self::adjoint(g, v))[1].abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ge(b: f64, a: f64) -> GroupElement {
        GroupElement::new(b, a).unwrap()
    }

    #[test]
    fn multiplication_and_inverse() {
        assert_eq!(ge(1.0, 2.0).mul(&ge(3.0, 4.0)), ge(7.0, 8.0));
        assert_eq!(ge(1.0, 2.0).inverse(), ge(-0.5, 0.5));
        assert!(GroupElement::new(1.0, 0.0).is_err());
    }

    #[test]
    fn carrier_membership() {
        assert!(!gamma_st_contains(Some(1.0), Some(2.0), &ge(1.0, 4.0)));
        assert!(gamma_st_contains(Some(1.0), Some(2.0), &ge(1.0, 3.0)));
        assert!(!gamma_st_contains(Some(1.0), None, &ge(-1.0, 3.0)));
        assert!(!gamma_st_contains(Some(1.0), Some(1.0), &ge(0.0, 1.0)));
    }

    #[test]
    fn unit_slope_dilation_split_in_zc_chart() {
        // (z, c) = (2, 3) is the group element (4, 3).
        let g = ge(4.0, 3.0);
        let (p, q) = decompose(&g, Subgroup::UNIT_SLOPE, Subgroup::DILATIONS, 1e-12).unwrap();
        assert_eq!(Subgroup::UNIT_SLOPE.param(&p), 5.0);
        assert!((q.a - 0.6).abs() < 1e-15);
        let bad = ge(-1.0, 3.0);
        assert!(matches!(decompose(&bad, Subgroup::UNIT_SLOPE, Subgroup::DILATIONS, 1e-12), Err(Error::NotDecomposable(_))));
    }

    #[test]
    fn modular_functions() {
        let lie = LieAlgebraData::default();
        for &(b, a) in &[(0.3, 2.0), (-1.0, -0.5), (5.0, 3.0)] {
            let g = ge(b, a);
            assert!((lie.j_translations(&g) - a.abs()).abs() < 1e-14);
            assert!((lie.j_unit_slope(&g) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn deformed_over_dilations_example() {
        let k = GroupoidKind::DeformedOverDilations(1.0);
        assert_eq!(k.compose([1.0, 4.0], [1.0, 3.0]).unwrap(), [3.0, 6.0]);
        assert_eq!(k.inverse([1.0, 3.0]).unwrap(), [-0.5, 1.0]);
        assert_eq!(k.inverse([-0.5, 1.0]).unwrap(), [1.0, 3.0]);
    }

    #[test]
    fn translations_zc_example() {
        let k = GroupoidKind::TranslationsZc;
        assert_eq!(k.compose([2.0, 3.0], [2.0 / 3.0, 5.0]).unwrap(), [2.0, 15.0]);
        assert!(k.compose([2.0, 3.0], [1.0, 5.0]).is_err());
    }
}
