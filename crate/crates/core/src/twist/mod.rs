//! The twist of the comultiplication on the groupoid over the translations:
//! point maps, their actions on functions, the undeformed comultiplication,
//! the generators and the measure estimate.
//!
//! Points of `G_B^n` are stored as chart coordinates `(z_1, c_1, …, z_n, c_n)`,
//! where the leg `(z, c)` is the group element `b c` with `b = (z, 1)` a
//! translation and `c = (c - 1, c)` in the unit-slope subgroup.

pub mod actions;
pub mod comult;
pub mod maps;
pub mod measure;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::Expr;
use crate::group::{decompose, GroupElement, LieAlgebraData, Scalar, Subgroup, DEFAULT_ZERO_TOL};

pub use actions::{
    apply_generator, coproduct_closed_form, coproduct_residual, khat_residual, twist_apply, twisted_coproduct,
    CoproductGenerator, GeneratorKind, GeneratorOp, TwistedField,
};
pub use comult::{
    delta0_hat, delta0_three_leg, find_anchor, probe_grid, twist_intertwining_residual, Delta0, Delta0ThreeLeg, Route,
    ThreeLegKind,
};
pub use maps::{phi_psi, phi_psi_generic, twist_point, PhiPsi, Region, RegionKind, TwistPointMap};
pub use measure::{
    dilation_decomposition_sides, mu_bound_pointwise, mu_bound_uniform, mu_measure, mu_measure_analytic, mu_solution_set,
};

/// Which way point maps act on functions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `(T̂F)(p) = F(T⁻¹p)`, the orientation that reproduces the twisted
    /// coproduct formulas.
    #[default]
    Reproducing,
    /// `(T̂F)(p) = F(T p)`, spelled `paper` in configuration and on the
    /// command line.
    #[serde(rename = "paper")]
    Direct,
}

impl std::str::FromStr for Orientation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reproducing" => Ok(Orientation::Reproducing),
            "paper" => Ok(Orientation::Direct),
            _ => Err(Error::Config(format!("unknown orientation {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwistConfig {
    pub orientation: Orientation,
    /// Minimal distance of `1 + z` (and the other twist denominators) from 0.
    pub margin: f64,
}

impl Default for TwistConfig {
    fn default() -> Self {
        TwistConfig { orientation: Orientation::Reproducing, margin: 0.05 }
    }
}

/// Scalars for the closed-form twist maps, which also need `|x|^p` and `sgn`.
pub trait TwistScalar: Scalar {
    fn pow_abs(&self, p: f64) -> Self;
    fn sgn(&self) -> Self;
}

impl TwistScalar for f64 {
    fn pow_abs(&self, p: f64) -> Self {
        self.abs().powf(p)
    }
    fn sgn(&self) -> Self {
        if *self > 0.0 {
            1.0
        } else if *self < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
}

impl TwistScalar for Expr {
    fn pow_abs(&self, p: f64) -> Self {
        Expr::pow_abs(self, p)
    }
    fn sgn(&self) -> Self {
        Expr::sgn(self)
    }
}

/// Structure maps of the double group `(G; B, C)` with `B` the translations,
/// `C = {(c - 1, c)}` and `A` the dilations.
pub struct DoubleGroup;

impl DoubleGroup {
    pub const B: Subgroup = Subgroup::TRANSLATIONS;
    pub const C: Subgroup = Subgroup::UNIT_SLOPE;
    pub const A: Subgroup = Subgroup::DILATIONS;

    pub fn translation<S: Scalar>(z: S) -> GroupElement<S> {
        Self::B.element(z)
    }

    pub fn unit_slope<S: Scalar>(c: S) -> GroupElement<S> {
        Self::C.element(c)
    }

    /// The group element `b c` with chart coordinates `(z, c)`.
    pub fn from_chart<S: Scalar>(z: S, c: S) -> GroupElement<S> {
        Self::translation(z).mul(&Self::unit_slope(c))
    }

    pub fn to_chart<S: Scalar>(g: &GroupElement<S>) -> Result<(S, S)> {
        let (b, c) = decompose(g, Self::B, Self::C, DEFAULT_ZERO_TOL)?;
        Ok((Self::B.param(&b), Self::C.param(&c)))
    }

    pub fn b_left<S: Scalar>(g: &GroupElement<S>) -> Result<GroupElement<S>> {
        Ok(decompose(g, Self::B, Self::C, DEFAULT_ZERO_TOL)?.0)
    }

    pub fn c_right<S: Scalar>(g: &GroupElement<S>) -> Result<GroupElement<S>> {
        Ok(decompose(g, Self::B, Self::C, DEFAULT_ZERO_TOL)?.1)
    }

    pub fn c_left<S: Scalar>(g: &GroupElement<S>) -> Result<GroupElement<S>> {
        Ok(decompose(g, Self::C, Self::B, DEFAULT_ZERO_TOL)?.0)
    }

    pub fn b_right<S: Scalar>(g: &GroupElement<S>) -> Result<GroupElement<S>> {
        Ok(decompose(g, Self::C, Self::B, DEFAULT_ZERO_TOL)?.1)
    }

    /// The `C` factor of `g = c a` with `a` a dilation; defined on `CA`.
    pub fn c_tilde_left<S: Scalar>(g: &GroupElement<S>) -> Result<GroupElement<S>> {
        Ok(decompose(g, Self::C, Self::A, DEFAULT_ZERO_TOL)?.0)
    }

    /// `s_B(b γ) = c_L(b γ)⁻¹ b`, the translation-side section.
    pub fn section_b<S: Scalar>(b: &GroupElement<S>, gamma: &GroupElement<S>) -> Result<GroupElement<S>> {
        Ok(Self::c_left(&b.mul(gamma))?.inverse().mul(b))
    }

    /// Membership in `CA` with a margin on the factorisation denominator.
    pub fn in_ca(g: &GroupElement<f64>, margin: f64) -> bool {
        decompose(g, Self::C, Self::A, margin).is_ok()
    }

    /// Modular function of `C`.
    pub fn j_c<S: Scalar>(g: &GroupElement<S>) -> S {
        LieAlgebraData::default().j_unit_slope(g)
    }

    /// Modular function of `B`.
    pub fn j_b<S: Scalar>(g: &GroupElement<S>) -> S {
        LieAlgebraData::default().j_translations(g)
    }
}

/// Split flat chart coordinates into group elements, one per leg.
pub fn legs<S: Scalar>(p: &[S]) -> Vec<GroupElement<S>> {
    p.chunks(2).map(|l| DoubleGroup::from_chart(l[0].clone(), l[1].clone())).collect()
}

/// Flatten group elements back into chart coordinates.
pub fn flatten<S: Scalar>(gs: &[GroupElement<S>]) -> Result<Vec<S>> {
    let mut out = Vec::with_capacity(2 * gs.len());
    for g in gs {
        let (z, c) = DoubleGroup::to_chart(g)?;
        out.push(z);
        out.push(c);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_structure_maps() {
        let (z, c) = (0.7, -1.3);
        let g = DoubleGroup::from_chart(z, c);
        let (z0, c0) = DoubleGroup::to_chart(&g).unwrap();
        assert!((z0 - z).abs() < 1e-15 && (c0 - c).abs() < 1e-15);
        assert!((DoubleGroup::b_right(&g).unwrap().b - z / c).abs() < 1e-15);
        assert!((DoubleGroup::c_left(&g).unwrap().a - c).abs() < 1e-15);
        assert!((DoubleGroup::c_tilde_left(&g).unwrap().a - (z + c)).abs() < 1e-15);
        assert!(DoubleGroup::c_tilde_left(&DoubleGroup::from_chart(1.3, -1.3)).is_err());
    }

    #[test]
    fn modular_weights_fold_to_one() {
        let g = DoubleGroup::from_chart(Expr::var(0), Expr::var(1));
        let w = DoubleGroup::j_c(&DoubleGroup::c_tilde_left(&g).unwrap()).sqrt();
        assert_eq!(w.as_const().map(|c| c.re), Some(1.0));
    }
}
