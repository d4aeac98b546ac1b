//! The deformation family `Γ_s` as a quantisation of `Γ_0`: the maps `Q_s`,
//! the Poisson bracket, convergence tables for the semiclassical limit, the
//! deformed comultiplication and the Fourier-side Poisson–Lie structure.

pub mod coproduct;
pub mod dual;
pub mod table;

use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{Algebra, AlgebraElement};
use crate::error::{Error, Result};
use crate::funcspace::interval::{box_subset, subdivide};
use crate::funcspace::{BoxN, BumpFamily, Chart, Expr, Interval, Support, SupportMargins};

pub use coproduct::{
    coproduct_support_in_box, deformed_coproduct_box, delta_s_hat, delta_s_support, product_fibre_integral, product_zero_norm,
    DeltaS, DeltaSDifference, ProductNormSpec, DEFAULT_K,
};
pub use dual::{
    bracket_consistency, dual_group, dual_intertwining_residual, dual_inverse, fourier_bracket, grid_jacobi_residual, window,
    DualCheck, IntertwiningGrid,
};
pub use table::{
    convergence_table, opnorm_bracket_diagnostic, rescale, residual_element, BracketRow, BracketTable, ResidualKind, ResidualRow,
    ResidualTable, Slope, TableSpec,
};

/// The undeformed algebra `Γ_0`.
pub const GAMMA0: Algebra = Algebra::Deformed(0.0);

/// A deformation parameter together with the support class `K_M` of the
/// functions it is applied to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeformationParam {
    pub s: f64,
    pub big_m: f64,
}

impl DeformationParam {
    /// Requires `M > 1` and `|s| < 1/M²`.
    pub fn new(s: f64, big_m: f64) -> Result<Self> {
        if !(big_m > 1.0) || !big_m.is_finite() {
            return Err(Error::InvalidArgument(format!("support class needs M > 1, got {big_m}")));
        }
        let limit = 1.0 / (big_m * big_m);
        if !(s.abs() < limit) {
            return Err(Error::DeformationOutOfRange { s, limit });
        }
        Ok(DeformationParam { s, big_m })
    }

    pub fn limit(&self) -> f64 {
        1.0 / (self.big_m * self.big_m)
    }
}

/// `K_M = {|b| ≤ M, 1/M ≤ |a| ≤ M}` as two boxes.
pub fn k_m(big_m: f64) -> Support {
    let b = Interval::new(-big_m, big_m);
    Support::Boxes(vec![vec![b, Interval::new(1.0 / big_m, big_m)], vec![b, Interval::new(-big_m, -1.0 / big_m)]])
}

/// Whether every box of `inner` lies inside one of the boxes of `outer`.
pub fn support_within(inner: &Support, outer: &Support) -> Result<bool> {
    let outer = outer.boxes()?;
    Ok(inner.boxes()?.iter().all(|bx| outer.iter().any(|o| box_subset(bx, o))))
}

fn require_in_k_m(support: &Support, big_m: f64) -> Result<()> {
    if support_within(support, &k_m(big_m))? {
        Ok(())
    } else {
        Err(Error::SupportTooLarge(format!("support {support:?} is not inside K_{big_m}")))
    }
}

/// `Q_s`: the same function viewed as an element of `Γ_s`.
pub fn q_s(f: &AlgebraElement, d: &DeformationParam) -> Result<AlgebraElement> {
    if f.algebra() != GAMMA0 {
        return Err(Error::ChartMismatch { expected: GAMMA0.to_string(), found: f.algebra().to_string() });
    }
    require_in_k_m(f.support_ref(), d.big_m)?;
    let leaf = f.as_smooth().ok_or_else(|| Error::InvalidArgument("Q_s applies to explicitly given functions".into()))?;
    // Admissibility of `s` already keeps K_M inside Γ_s, so no extra margin.
    let margins = SupportMargins { scale_margin: 0.0, ..SupportMargins::default() };
    Ok(AlgebraElement::with_margins(leaf.clone(), Algebra::Deformed(d.s), &margins)?.with_spec(*f.spec()))
}

/// `{f, g} = (a - 1)[(∂_a f) ∗ (b g) - (∂_a g) ∗ (b f)]` on `Γ_0`, lazily.
pub fn poisson_bracket(f: &AlgebraElement, g: &AlgebraElement) -> Result<AlgebraElement> {
    for x in [f, g] {
        if x.algebra() != GAMMA0 {
            return Err(Error::ChartMismatch { expected: GAMMA0.to_string(), found: x.algebra().to_string() });
        }
    }
    let b = Expr::var(0);
    let left = f.partial(1)?.conv(&g.weighted(b.clone()))?;
    let right = g.partial(1)?.conv(&f.weighted(b))?;
    let one = C64::new(1.0, 0.0);
    Ok(AlgebraElement::combination(vec![(one, left), (-one, right)])?.weighted(Expr::var(1) - 1.0))
}

/// The support box of `f ∗_s g` promised for inputs supported in `K_M`.
pub fn deformed_product_box(big_m: f64, s: f64) -> Support {
    let s = s.abs();
    let b = Interval::new(-big_m * (2.0 + s * big_m), big_m * (2.0 + s * big_m));
    let lo = 1.0 / (big_m * (1.0 + big_m * big_m * s));
    let hi = big_m * (1.0 + s * big_m);
    Support::Boxes(vec![vec![b, Interval::new(lo, hi)], vec![b, Interval::new(-hi, -lo)]])
}

/// Rigorous enclosure of the support of `f ∗_s g` from the supports of the
/// factors, refined by splitting the left `b`-range and the right
/// `b`-range into `pieces` parts each.
pub fn product_support(left: &Support, right: &Support, s: f64, pieces: usize) -> Result<Support> {
    let mut out = Vec::new();
    for bx in left.boxes()? {
        for by in right.boxes()? {
            for sub in subdivide(&[bx[0], by[0]], pieces) {
                let (c, bg) = (sub[0], sub[1]);
                let shift = Interval::point(1.0).add(c.scale(s));
                let a_right = shift.mul(by[1]);
                let a_left = bx[1].add(shift.mul(bg).scale(s));
                if let Some(a) = a_right.intersect(&a_left) {
                    out.push(vec![c.add(shift.mul(bg)), a]);
                }
            }
        }
    }
    Ok(Support::Boxes(out))
}

/// Random functions on `Γ_0` supported in `K_M` with positive `a`: one or
/// two bumps with complex amplitudes and half-widths in `halfwidths`,
/// kept `inset` away from the boundary of `K_M`.
pub fn sample_k_m<R: Rng>(rng: &mut R, big_m: f64, inset: f64, halfwidths: (f64, f64)) -> Result<AlgebraElement> {
    let region: BoxN = vec![Interval::new(-big_m + inset, big_m - inset), Interval::new(1.0 / big_m + inset, big_m - inset)];
    if region.iter().any(|iv| !(iv.width() > 0.0)) {
        return Err(Error::InvalidArgument(format!("inset {inset} leaves nothing of K_{big_m}")));
    }
    let family = BumpFamily::new(region, halfwidths.0, halfwidths.1).complex(true).terms(2);
    AlgebraElement::new(family.sample(rng, Chart::Ba), GAMMA0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::{grid_points, QuadratureSpec, SmoothFn};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bump(center: [f64; 2], hw: [f64; 2], amp: C64) -> AlgebraElement {
        AlgebraElement::new(SmoothFn::bump_product(Chart::Ba, &center, &hw, amp), GAMMA0).unwrap()
    }

    fn sup_diff(x: &AlgebraElement, y: &AlgebraElement, bx: &[Interval], n: usize) -> f64 {
        grid_points(bx, n).iter().map(|p| (x.eval_at(p) - y.eval_at(p)).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn admissibility_and_retagging() {
        assert!(matches!(DeformationParam::new(0.3, 2.0), Err(Error::DeformationOutOfRange { .. })));
        assert!(DeformationParam::new(0.2, 2.0).is_ok());
        assert!(DeformationParam::new(0.0, 1.0).is_err());
        let f = bump([0.2, 1.1], [0.9, 0.4], C64::new(1.0, 0.5));
        let d = DeformationParam::new(0.2, 2.0).unwrap();
        let q = q_s(&f, &d).unwrap();
        assert_eq!(q.algebra(), Algebra::Deformed(0.2));
        for p in [[0.3, 1.2], [-0.5, 0.9], [0.0, 1.0]] {
            assert_eq!(q.eval_at(&p), f.eval_at(&p));
        }
        let q0 = q_s(&f, &DeformationParam::new(0.0, 2.0).unwrap()).unwrap();
        assert_eq!(q0.algebra(), GAMMA0);
        let wide = bump([0.0, 1.0], [2.5, 0.4], C64::new(1.0, 0.0));
        assert!(matches!(q_s(&wide, &d), Err(Error::SupportTooLarge(_))));
    }

    #[test]
    fn bracket_identities() {
        let f = bump([0.3, 1.1], [0.8, 0.4], C64::new(1.0, 0.3));
        let g = bump([-0.4, 1.0], [0.6, 0.5], C64::new(0.7, -0.2));
        let bx = [Interval::new(-2.0, 2.0), Interval::new(0.6, 1.6)];
        let ff = poisson_bracket(&f, &f).unwrap();
        assert!(sup_diff(&ff, &AlgebraElement::zero(GAMMA0), &bx, 15) < 1e-10);
        let lhs = poisson_bracket(&f.star().unwrap(), &g.star().unwrap()).unwrap();
        let rhs = poisson_bracket(&g, &f).unwrap().star().unwrap();
        assert!(sup_diff(&lhs, &rhs, &bx, 15) < 1e-8);
        // The bracket vanishes on the unit-scale line.
        let fg = poisson_bracket(&f, &g).unwrap();
        assert_eq!(fg.eval_at(&[0.1, 1.0]), C64::new(0.0, 0.0));
        assert!(fg.eval_at(&[0.1, 1.2]).norm() > 1e-3);
    }

    #[test]
    fn bracket_matches_expanded_integral() {
        let f = bump([0.3, 1.1], [0.8, 0.4], C64::new(1.0, 0.3));
        let g = bump([-0.4, 1.0], [0.6, 0.5], C64::new(0.7, -0.2));
        let (fs, gs) = (f.as_smooth().unwrap().clone(), g.as_smooth().unwrap().clone());
        let (dfa, dga) = (fs.partial(1), gs.partial(1));
        let spec = QuadratureSpec::default().with_tolerance(1e-12);
        let fg = poisson_bracket(&f, &g).unwrap();
        for p in grid_points(&[Interval::new(-1.5, 1.5), Interval::new(0.7, 1.5)], 5) {
            let (b, a) = (p[0], p[1]);
            let direct = crate::funcspace::integrate(
                |c| dfa.eval(&[c, a]) * (b - c) * gs.eval(&[b - c, a]) - fs.eval(&[c, a]) * c * dga.eval(&[b - c, a]),
                -0.5,
                1.1,
                &spec,
            )
            .value
                * (a - 1.0);
            assert!((direct - fg.eval_at(&p)).norm() < 1e-9);
        }
    }

    #[test]
    fn derivation_and_jacobi() {
        let f = bump([0.3, 1.1], [0.7, 0.4], C64::new(10.0, 3.0));
        let g = bump([-0.4, 1.0], [0.6, 0.5], C64::new(7.0, -2.0));
        let h = bump([0.1, 0.9], [0.5, 0.3], C64::new(-4.0, 9.0));
        let spec = QuadratureSpec::default().with_tolerance(1e-10);
        let (f, g, h) = (f.with_spec(spec), g.with_spec(spec), h.with_spec(spec));
        let bx = [Interval::new(-2.5, 2.5), Interval::new(0.65, 1.35)];
        let lhs = poisson_bracket(&f, &g.conv(&h).unwrap()).unwrap();
        let rhs =
            poisson_bracket(&f, &g).unwrap().conv(&h).unwrap().add(&g.conv(&poisson_bracket(&f, &h).unwrap()).unwrap()).unwrap();
        assert!(sup_diff(&lhs, &rhs, &bx, 5) < 1e-6);
        let cyc = |x: &AlgebraElement, y: &AlgebraElement, z: &AlgebraElement| {
            poisson_bracket(x, &poisson_bracket(y, z).unwrap()).unwrap()
        };
        let jac = AlgebraElement::combination(vec![
            (C64::new(1.0, 0.0), cyc(&f, &g, &h)),
            (C64::new(1.0, 0.0), cyc(&g, &h, &f)),
            (C64::new(1.0, 0.0), cyc(&h, &f, &g)),
        ])
        .unwrap();
        let scale = (0..25).map(|i| cyc(&f, &g, &h).eval_at(&grid_points(&bx, 5)[i]).norm()).fold(0.0, f64::max);
        assert!(scale > 1e-3);
        assert!(sup_diff(&jac, &AlgebraElement::zero(GAMMA0), &bx, 5) < 1e-6);
    }

    #[test]
    fn product_supports_stay_in_predicted_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..5 {
            let f = sample_k_m(&mut rng, 2.0, 0.05, (0.2, 0.7)).unwrap();
            let g = sample_k_m(&mut rng, 2.0, 0.05, (0.2, 0.7)).unwrap();
            for s in [0.0, 0.1, -0.1, 0.2, 0.249] {
                let sup = product_support(f.support_ref(), g.support_ref(), s, 8).unwrap();
                assert!(support_within(&sup, &deformed_product_box(2.0, s)).unwrap(), "s = {s}");
            }
        }
    }
}
