//! Point maps on `G_B^2` and `G_B^3`: the twist and its relatives, the
//! diffeomorphisms `Φ₁, Ψ₁, Φ₂, Ψ₂`, and the domain predicates.
//!
//! Every map has two routes: a closed form in chart coordinates and a
//! generic one built from the decompositions of the double group. The
//! closed forms are used for pullbacks, the generic ones are the oracle.

use serde::{Deserialize, Serialize};

use super::{flatten, legs, DoubleGroup as D, TwistScalar};
use crate::error::{Error, Result};
use crate::group::GroupElement;

/// The twist `T` on two legs and its relatives on two or three legs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum TwistPointMap {
    T,
    TInv,
    T1,
    T1Inv,
    T2,
    T2Inv,
    /// `(z₁, c₁) ↦ |1 + z₂|^{-t} (z₁, c₁)`.
    Tt(f64),
    /// `(z₁, c₁) ↦ sgn(1 + z₂) (z₁, c₁)`.
    K,
    T12,
    T12Inv,
    T23,
    T23Inv,
}

fn one<S: TwistScalar>() -> S {
    S::cst(1.0)
}

/// Multiply leg `leg` of `p` by `k`.
fn scale_leg<S: TwistScalar>(p: &mut [S], leg: usize, k: &S) {
    p[2 * leg] = p[2 * leg].clone() * k.clone();
    p[2 * leg + 1] = p[2 * leg + 1].clone() * k.clone();
}

/// The unit-slope element acting on a leg from the left.
fn act<S: TwistScalar>(gamma: &GroupElement<S>, g: &GroupElement<S>) -> GroupElement<S> {
    gamma.mul(g)
}

fn sqrt_j<S: TwistScalar>(g: &GroupElement<S>) -> S {
    D::j_c(g).sqrt()
}

impl TwistPointMap {
    /// Number of chart coordinates the map acts on.
    pub fn dim(&self) -> usize {
        use TwistPointMap::*;
        match self {
            T | TInv | Tt(_) | K => 4,
            _ => 6,
        }
    }

    pub fn inverse(&self) -> TwistPointMap {
        use TwistPointMap::*;
        match *self {
            T => TInv,
            TInv => T,
            T1 => T1Inv,
            T1Inv => T1,
            T2 => T2Inv,
            T2Inv => T2,
            Tt(t) => Tt(-t),
            K => K,
            T12 => T12Inv,
            T12Inv => T12,
            T23 => T23Inv,
            T23Inv => T23,
        }
    }

    /// The quantity that must stay away from zero for the map to be defined.
    pub fn singular_factor<S: TwistScalar>(&self, p: &[S]) -> S {
        use TwistPointMap::*;
        match self {
            T | TInv | Tt(_) | K | T12 | T12Inv => one::<S>() + p[2].clone(),
            T1 | T1Inv | T23 | T23Inv => one::<S>() + p[4].clone(),
            T2 | T2Inv => one::<S>() + p[2].clone() + p[4].clone(),
        }
    }

    pub fn check_domain(&self, p: &[f64], margin: f64) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::InvalidArgument(format!("{self:?} acts on {} coordinates, got {}", self.dim(), p.len())));
        }
        let d = self.singular_factor(p);
        if !(d.abs() >= margin) {
            return Err(Error::OutsideDomain(format!("{self:?}: singular factor {d} within {margin} of 0")));
        }
        if let Some(leg) = p.chunks(2).find(|l| l[1] == 0.0) {
            return Err(Error::NotInGroup(leg[0] + leg[1] - 1.0, leg[1]));
        }
        Ok(())
    }

    /// Closed-form image in chart coordinates.
    pub fn closed<S: TwistScalar>(&self, p: &[S]) -> Vec<S> {
        use TwistPointMap::*;
        let mut q = p.to_vec();
        let d = self.singular_factor(p);
        match *self {
            T | T12 => scale_leg(&mut q, 0, &(one::<S>() / d)),
            TInv | T12Inv => scale_leg(&mut q, 0, &d),
            T1 => {
                let k = one::<S>() / d;
                scale_leg(&mut q, 0, &k);
                scale_leg(&mut q, 1, &k);
            }
            T1Inv => {
                scale_leg(&mut q, 0, &d);
                scale_leg(&mut q, 1, &d);
            }
            T2 => scale_leg(&mut q, 0, &(one::<S>() / d)),
            T2Inv => scale_leg(&mut q, 0, &d),
            Tt(t) => scale_leg(&mut q, 0, &d.pow_abs(-t)),
            K => scale_leg(&mut q, 0, &d.sgn()),
            T23 => scale_leg(&mut q, 1, &(one::<S>() / d)),
            T23Inv => scale_leg(&mut q, 1, &d),
        }
        q
    }

    /// Image computed from the structure maps of the double group.
    pub fn generic<S: TwistScalar>(&self, p: &[S]) -> Result<Vec<S>> {
        use TwistPointMap::*;
        let mut g = legs(p);
        let b: Vec<GroupElement<S>> = g.iter().map(D::b_left).collect::<Result<_>>()?;
        match *self {
            T | TInv | T12 | T12Inv | T23 | T23Inv => {
                let first = if matches!(self, T23 | T23Inv) { 1 } else { 0 };
                let mut ct = D::c_tilde_left(&b[first + 1])?;
                if matches!(self, TInv | T12Inv | T23Inv) {
                    ct = ct.inverse();
                }
                let gamma = D::c_left(&b[first].mul(&ct))?.inverse();
                g[first] = act(&gamma, &g[first]);
            }
            T1 => {
                let ct = D::c_tilde_left(&b[2])?;
                let g1 = D::c_left(&b[0].mul(&b[1]).mul(&ct))?.inverse();
                let g2 = D::c_left(&b[1].mul(&ct))?.inverse();
                g[0] = act(&g1, &g[0]);
                g[1] = act(&g2, &g[1]);
            }
            T1Inv => {
                let ct = D::c_tilde_left(&b[2])?.inverse();
                let inner = D::c_left(&b[1].mul(&ct))?;
                let g1 = D::c_left(&b[0].mul(&inner))?.inverse();
                g[0] = act(&g1, &g[0]);
                g[1] = act(&inner.inverse(), &g[1]);
            }
            T2 | T2Inv => {
                let mut ct = D::c_tilde_left(&b[1].mul(&b[2]))?;
                if *self == T2Inv {
                    ct = ct.inverse();
                }
                let gamma = D::c_left(&b[0].mul(&ct))?.inverse();
                g[0] = act(&gamma, &g[0]);
            }
            Tt(t) => {
                let ct = D::c_tilde_left(&b[1])?;
                let scale = D::C.param(&D::c_left(&b[0].mul(&ct))?);
                g[0] = act(&D::unit_slope(scale.pow_abs(-t)), &g[0]);
            }
            K => {
                let ct = D::c_tilde_left(&b[1])?;
                let scale = D::C.param(&D::c_left(&b[0].mul(&ct))?);
                g[0] = act(&D::unit_slope(scale.sgn()), &g[0]);
            }
        }
        flatten(&g)
    }

    /// The `j_C^{±1/2}` factor multiplying the pullback, evaluated at the
    /// output point.
    pub fn weight<S: TwistScalar>(&self, p: &[S]) -> Result<S> {
        use TwistPointMap::*;
        let b: Vec<GroupElement<S>> = legs(p).iter().map(D::b_left).collect::<Result<_>>()?;
        let w = match *self {
            T | T12 => sqrt_j(&D::c_tilde_left(&b[1])?),
            TInv | T12Inv => one::<S>() / sqrt_j(&D::c_tilde_left(&b[1])?),
            T23 => sqrt_j(&D::c_tilde_left(&b[2])?),
            T23Inv => one::<S>() / sqrt_j(&D::c_tilde_left(&b[2])?),
            T1 => {
                let ct = D::c_tilde_left(&b[2])?;
                sqrt_j(&ct) / sqrt_j(&D::c_left(&b[1].mul(&ct.inverse()))?)
            }
            T1Inv => {
                let ct = D::c_tilde_left(&b[2])?;
                sqrt_j(&D::c_left(&b[1].mul(&ct))?) / sqrt_j(&ct)
            }
            T2 => sqrt_j(&D::c_tilde_left(&b[1].mul(&b[2]))?),
            T2Inv => one::<S>() / sqrt_j(&D::c_tilde_left(&b[1].mul(&b[2]))?),
            Tt(_) | K => one(),
        };
        Ok(w)
    }
}

/// Margin-checked closed-form image of a point.
pub fn twist_point(map: TwistPointMap, p: &[f64], margin: f64) -> Result<Vec<f64>> {
    map.check_domain(p, margin)?;
    Ok(map.closed(p))
}

/// Domain predicates, decided from closed-form inequalities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    /// `z ≠ -1` on a single leg.
    BPrime,
    /// `z₂ ≠ -1`: the second leg lies over `B′`.
    U,
    DPhi1,
    DPsi1,
    DPhi2,
    DPsi2,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub kind: RegionKind,
    pub margin: f64,
}

impl Region {
    pub fn new(kind: RegionKind, margin: f64) -> Self {
        Region { kind, margin }
    }

    /// The quantities that must all be at least `margin` in modulus.
    pub fn factors(&self, p: &[f64]) -> Vec<f64> {
        use RegionKind::*;
        match self.kind {
            BPrime => vec![1.0 + p[0]],
            U | DPsi1 => vec![1.0 + p[2]],
            DPhi1 => vec![p[1] - p[2]],
            DPhi2 => vec![p[2] + p[3], p[0] + p[2] + p[3]],
            DPsi2 => vec![p[0] + p[1], 1.0 + p[2]],
        }
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        let legs_ok = p.iter().skip(1).step_by(2).all(|c| *c != 0.0);
        legs_ok && self.factors(p).iter().all(|d| d.abs() >= self.margin)
    }

    pub fn require(&self, p: &[f64]) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutsideDomain(format!("{:?} (margin {}) does not contain {p:?}", self.kind, self.margin)))
        }
    }
}

/// The diffeomorphisms between domains in `G_B × G_B`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhiPsi {
    Phi1,
    Psi1,
    Phi2,
    Psi2,
}

impl PhiPsi {
    pub fn domain(&self) -> RegionKind {
        match self {
            PhiPsi::Phi1 => RegionKind::DPhi1,
            PhiPsi::Psi1 => RegionKind::DPsi1,
            PhiPsi::Phi2 => RegionKind::DPhi2,
            PhiPsi::Psi2 => RegionKind::DPsi2,
        }
    }

    pub fn inverse(&self) -> PhiPsi {
        match self {
            PhiPsi::Phi1 => PhiPsi::Psi1,
            PhiPsi::Psi1 => PhiPsi::Phi1,
            PhiPsi::Phi2 => PhiPsi::Psi2,
            PhiPsi::Psi2 => PhiPsi::Phi2,
        }
    }

    pub fn closed<S: TwistScalar>(&self, p: &[S]) -> Vec<S> {
        let [z1, c1, z2, c2] = [p[0].clone(), p[1].clone(), p[2].clone(), p[3].clone()];
        match self {
            PhiPsi::Phi1 => {
                let d = c1.clone() - z2.clone();
                vec![z1 + z2.clone(), d.clone(), z2 / d.clone(), c2 / d]
            }
            PhiPsi::Psi1 => vec![z1 - z2.clone() * c1.clone(), c1.clone() * (one::<S>() + z2.clone()), z2 * c1.clone(), c1 * c2],
            PhiPsi::Phi2 => {
                let d = z2.clone() + c2.clone();
                vec![z1.clone() + z2, c2, z1 / d.clone(), c1 / d]
            }
            PhiPsi::Psi2 => {
                let gamma = (z1.clone() + c1.clone()) / (one::<S>() + z2.clone());
                vec![gamma.clone() * z2.clone(), gamma.clone() * c2, z1 - gamma * z2, c1]
            }
        }
    }

    /// Image computed from the structure maps of the double group.
    pub fn generic<S: TwistScalar>(&self, p: &[S]) -> Result<Vec<S>> {
        let g = legs(p);
        let (b1, c1) = (D::b_left(&g[0])?, D::c_right(&g[0])?);
        let (b2, c2) = (D::b_left(&g[1])?, D::c_right(&g[1])?);
        let out = match self {
            PhiPsi::Phi1 => {
                let c0 = D::c_tilde_left(&b2.inverse().mul(&c1))?;
                let first = b1.mul(&b2).mul(&c0);
                let second = D::b_right(&b2.mul(&c0))?.mul(&c0.inverse()).mul(&c2);
                [first, second]
            }
            PhiPsi::Psi1 => {
                let br = D::b_right(&b2.mul(&c1.inverse()))?;
                let c0 = D::c_tilde_left(&br.mul(&c1))?;
                [b1.mul(&br.inverse()).mul(&c0), br.mul(&c1).mul(&c2)]
            }
            PhiPsi::Phi2 => {
                let c0 = D::c_tilde_left(&g[1])?;
                let second = D::b_right(&b1.mul(&c0))?.mul(&c0.inverse()).mul(&c1);
                [b1.mul(&b2).mul(&c2), second]
            }
            PhiPsi::Psi2 => {
                let c0 = D::c_tilde_left(&g[0])?;
                let ct0 = D::c_tilde_left(&b2)?;
                let moved = c0.mul(&ct0.inverse()).mul(&b2);
                [moved.mul(&c2), D::b_left(&moved)?.inverse().mul(&b1).mul(&c1)]
            }
        };
        flatten(&out)
    }
}

/// Margin-checked image under one of the diffeomorphisms.
pub fn phi_psi(which: PhiPsi, p: &[f64], margin: f64) -> Result<Vec<f64>> {
    if p.len() != 4 {
        return Err(Error::InvalidArgument("Φ/Ψ act on 4 coordinates".into()));
    }
    Region::new(which.domain(), margin).require(p)?;
    Ok(which.closed(p))
}

/// Same as [`phi_psi`] through the generic route.
pub fn phi_psi_generic(which: PhiPsi, p: &[f64], margin: f64) -> Result<Vec<f64>> {
    Region::new(which.domain(), margin).require(p)?;
    which.generic(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::Expr;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                if i % 2 == 1 {
                    let c: f64 = rng.gen_range(0.2..3.0);
                    if rng.gen_bool(0.5) {
                        c
                    } else {
                        -c
                    }
                } else {
                    rng.gen_range(-3.0..3.0)
                }
            })
            .collect()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs() / (1.0 + y.abs())).fold(0.0, f64::max)
    }

    const ALL: [TwistPointMap; 12] = [
        TwistPointMap::T,
        TwistPointMap::TInv,
        TwistPointMap::T1,
        TwistPointMap::T1Inv,
        TwistPointMap::T2,
        TwistPointMap::T2Inv,
        TwistPointMap::Tt(0.7),
        TwistPointMap::K,
        TwistPointMap::T12,
        TwistPointMap::T12Inv,
        TwistPointMap::T23,
        TwistPointMap::T23Inv,
    ];

    #[test]
    fn closed_forms_match_structure_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for map in ALL {
            let mut n = 0;
            while n < 500 {
                let p = random_point(&mut rng, map.dim());
                if map.check_domain(&p, 0.05).is_err() {
                    continue;
                }
                n += 1;
                let closed = map.closed(&p);
                let generic = map.generic(&p).unwrap();
                assert!(max_diff(&generic, &closed) < 1e-12, "{map:?} at {p:?}");
                let back = map.inverse().closed(&closed);
                assert!(max_diff(&back, &p) < 1e-12);
                assert!((map.weight(&p).unwrap() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cocycle_example_and_symbolic_weights() {
        let p = [1.0; 6];
        let left = TwistPointMap::T12.closed(&TwistPointMap::T1.closed(&p));
        let right = TwistPointMap::T23.closed(&TwistPointMap::T2.closed(&p));
        let expected = [1.0 / 3.0, 1.0 / 3.0, 0.5, 0.5, 1.0, 1.0];
        assert!(max_diff(&left, &expected) < 1e-15);
        assert!(max_diff(&right, &expected) < 1e-15);
        let vars: Vec<Expr> = (0..6).map(Expr::var).collect();
        for map in ALL {
            let w = map.weight(&vars[..map.dim()]).unwrap();
            assert_eq!(w.as_const().map(|c| c.re), Some(1.0), "{map:?}");
        }
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(twist_point(TwistPointMap::T, &[0.0, 1.0, -1.01, 1.0], 0.05), Err(Error::OutsideDomain(_))));
        assert!(twist_point(TwistPointMap::T, &[0.0, 1.0, -1.1, 1.0], 0.05).is_ok());
        assert!(matches!(twist_point(TwistPointMap::T2, &[0.0, 1.0, -0.5, 1.0, -0.5, 1.0], 0.05), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn diffeomorphisms_are_inverse_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for which in [PhiPsi::Phi1, PhiPsi::Psi1, PhiPsi::Phi2, PhiPsi::Psi2] {
            let mut n = 0;
            while n < 500 {
                let p = random_point(&mut rng, 4);
                let Ok(q) = phi_psi(which, &p, 0.05) else { continue };
                n += 1;
                let generic = phi_psi_generic(which, &p, 0.05).unwrap();
                assert!(max_diff(&generic, &q) < 1e-11, "{which:?} at {p:?}");
                assert!(Region::new(which.inverse().domain(), 0.0).contains(&q));
                assert!(max_diff(&which.inverse().closed(&q), &p) < 1e-10);
            }
        }
    }
}
