//! Groupoid axioms, modular functions and the dilation decomposition identity.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{rel_diff, stream, SuiteConfig};
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupoidKind, GroupoidPoint, LieAlgebraData};
use crate::report::CheckRecord;
use crate::twist::dilation_decomposition_sides;

pub const AXIOM_TOL: f64 = 1e-10;
pub const MODULAR_TOL: f64 = 1e-12;
pub const DECOMPOSITION_TOL: f64 = 1e-10;

fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let x = rng.gen_range(lo..hi);
    if rng.gen_bool(0.5) {
        x
    } else {
        -x
    }
}

/// A composable triple `(x, y, z)`, redrawn until every point is defined.
fn triple(kind: GroupoidKind, rng: &mut ChaCha8Rng) -> Result<[GroupoidPoint; 3]> {
    for _ in 0..1000 {
        let x = [rng.gen_range(-2.0..2.0), signed(rng, 0.3, 3.0)];
        if !kind.contains(x) {
            continue;
        }
        let Ok(y) = kind.right_partner(x, signed(rng, 0.3, 3.0)) else { continue };
        let Ok(z) = kind.right_partner(y, signed(rng, 0.3, 3.0)) else { continue };
        return Ok([x, y, z]);
    }
    Err(Error::InvalidArgument(format!("{kind:?}: no composable triple found")))
}

/// Worst violation of associativity, the unit laws, the inverse laws and
/// the source/range rules over one triple.
fn axiom_residual(kind: GroupoidKind, [x, y, z]: [GroupoidPoint; 3]) -> Result<f64> {
    let k = kind;
    let xy = k.compose(x, y)?;
    let yz = k.compose(y, z)?;
    let mut worst = rel_diff(&k.compose(xy, z)?, &k.compose(x, yz)?);
    let (lx, rx, ix) = (k.left_unit(x)?, k.right_unit(x)?, k.inverse(x)?);
    worst = worst.max(rel_diff(&k.compose(lx, x)?, &x));
    worst = worst.max(rel_diff(&k.compose(x, rx)?, &x));
    worst = worst.max(rel_diff(&k.compose(x, ix)?, &lx));
    worst = worst.max(rel_diff(&k.compose(ix, x)?, &rx));
    worst = worst.max(rel_diff(&k.inverse(ix)?, &x));
    worst = worst.max(rel_diff(&k.left_unit(xy)?, &lx));
    worst = worst.max(rel_diff(&k.right_unit(xy)?, &k.right_unit(y)?));
    if !(k.is_unit(lx)? && k.is_unit(rx)?) {
        return Ok(f64::INFINITY);
    }
    Ok(worst)
}

fn groupoid_check(kind: GroupoidKind, n: usize, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for _ in 0..n {
        let t = triple(kind, rng)?;
        worst = worst.max(axiom_residual(kind, t).unwrap_or(f64::INFINITY));
    }
    Ok((worst, format!("{n} triples")))
}

fn modular_check(n: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let lie = LieAlgebraData::default();
    let mut worst = (0.0f64, 0.0f64);
    for _ in 0..n {
        let g = GroupElement::new_unchecked(rng.gen_range(-5.0..5.0), signed(rng, 0.1, 5.0));
        worst.0 = worst.0.max((lie.j_translations(&g) - g.a.abs()).abs());
        worst.1 = worst.1.max((lie.j_unit_slope(&g) - 1.0).abs());
    }
    worst
}

fn decomposition_check(n: usize, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let (mut worst, mut done, mut singular) = (0.0f64, 0usize, 0usize);
    while done < n {
        if singular > 10 * n {
            return Err(Error::NotDecomposable(format!("only {done} of {n} draws decomposed")));
        }
        let (a1, a2, gamma) = (signed(rng, 0.2, 3.0), signed(rng, 0.2, 3.0), signed(rng, 0.2, 3.0));
        match dilation_decomposition_sides(a1, a2, gamma) {
            Ok((l, r)) => {
                worst = worst.max(rel_diff(&l.to_array(), &r.to_array()));
                done += 1;
            }
            Err(Error::NotDecomposable(_)) => singular += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((worst, format!("{n} draws, {singular} skipped off the decomposable set")))
}

pub fn run(cfg: &SuiteConfig) -> Vec<CheckRecord> {
    let n = &cfg.samples;
    let mut out = Vec::new();
    let kinds = [
        ("translations_zc", GroupoidKind::TranslationsZc),
        ("translations", GroupoidKind::TranslationsGroup),
        ("unit_slope", GroupoidKind::UnitSlope),
        ("deformed_s0", GroupoidKind::DeformedOverDilations(0.0)),
        ("deformed_s0.5", GroupoidKind::DeformedOverDilations(0.5)),
        ("deformed_s1", GroupoidKind::DeformedOverDilations(1.0)),
    ];
    for (i, (name, kind)) in kinds.into_iter().enumerate() {
        let mut rng = stream(cfg.seed, 100 + i as u64);
        out.push(super::record(
            &format!("group.axioms.{name}"),
            "groupoid-axioms",
            AXIOM_TOL,
            groupoid_check(kind, n.groupoid_triples, &mut rng),
        ));
    }
    let (jb, jc) = modular_check(n.modular_points, &mut stream(cfg.seed, 110));
    out.push(CheckRecord::new("group.modular.translations", "modular-functions", jb, MODULAR_TOL));
    out.push(CheckRecord::new("group.modular.unit_slope", "modular-functions", jc, MODULAR_TOL));
    out.push(super::record(
        "group.decomposition",
        "dilation-decomposition",
        DECOMPOSITION_TOL,
        decomposition_check(n.decomposition_draws, &mut stream(cfg.seed, 111)),
    ));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axioms_hold_on_small_samples() {
        let mut rng = stream(5, 0);
        for kind in [GroupoidKind::UnitSlope, GroupoidKind::DeformedOverDilations(0.5), GroupoidKind::DeformedOverSloped(0.5)] {
            let (r, _) = groupoid_check(kind, 50, &mut rng).unwrap();
            assert!(r < AXIOM_TOL, "{kind:?}: {r}");
        }
    }

    #[test]
    fn broken_law_is_detected() {
        // The unit-slope inverse with the opposite sign of b is not an inverse.
        let x = [0.3, 1.7];
        let wrong = [-(2.0 * x[1] - 2.0 - x[0]), x[1]];
        let k = GroupoidKind::UnitSlope;
        let composed = k.compose(x, wrong).map(|p| rel_diff(&p, &k.left_unit(x).unwrap()));
        assert!(composed.map_or(true, |d| d > 1e-3));
    }
}
