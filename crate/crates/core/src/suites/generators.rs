//! Commutation relations of the generators, the twist scaling family, the
//! `K̂` formula and the twisted coproducts of `Ŷ`, `X̂` and `Ĵ`.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{stream, sup_and_scale, SuiteConfig};
use crate::error::{Error, Result};
use crate::funcspace::{grid_points, BumpFamily, Chart, Interval, SmoothFn};
use crate::report::CheckRecord;
use crate::twist::actions::comparison_points;
use crate::twist::{
    apply_generator, coproduct_residual, khat_residual, twist_apply, twisted_coproduct, CoproductGenerator, GeneratorKind,
    GeneratorOp, TwistConfig, TwistPointMap,
};

pub const RELATION_TOL: f64 = 1e-12;
pub const RICHARDSON_TOL: f64 = 1e-6;
pub const SCALING_TOL: f64 = 1e-12;
pub const KHAT_TOL: f64 = 1e-12;
pub const COPRODUCT_TOL: f64 = 1e-8;
pub const COPRODUCT_J_TOL: f64 = 1e-10;

/// `e⁴`: brings the peak of a four-coordinate bump product to order one.
const PEAK: C64 = C64::new(54.598150033144236, 0.0);

const TIMES: [f64; 3] = [-0.7, 0.4, 1.3];
/// Step of the central differences behind the Richardson extrapolation.
const FD_STEP: f64 = 1e-4;

fn signed_c(rng: &mut ChaCha8Rng) -> Interval {
    if rng.gen_bool(0.5) {
        Interval::new(0.4, 2.0)
    } else {
        Interval::new(-2.0, -0.4)
    }
}

/// Two-leg function whose second leg keeps `1 + z` on one side of zero.
fn u_supported(rng: &mut ChaCha8Rng) -> SmoothFn {
    let z2 = if rng.gen_bool(0.5) { Interval::new(-0.7, 1.5) } else { Interval::new(-3.0, -1.3) };
    let region = vec![Interval::new(-1.5, 1.5), signed_c(rng), z2, signed_c(rng)];
    BumpFamily::new(region, 0.2, 0.6).complex(true).terms(2).sample(rng, Chart::Zc).scale(PEAK)
}

/// Two-leg function with bumps on both sides of `z₂ = -1`.
fn mixed_support(rng: &mut ChaCha8Rng) -> Result<SmoothFn> {
    let c1 = signed_c(rng);
    let c2 = signed_c(rng);
    let side = |rng: &mut ChaCha8Rng, z2: Interval| {
        BumpFamily::new(vec![Interval::new(-1.5, 1.5), c1, z2, c2], 0.2, 0.5)
            .complex(true)
            .terms(1)
            .sample(rng, Chart::Zc)
            .scale(PEAK)
    };
    let plus = side(rng, Interval::new(-0.8, 0.6));
    plus.add(&side(rng, Interval::new(-2.6, -1.2)))
}

fn op(kind: GeneratorKind, leg: usize) -> GeneratorOp {
    GeneratorOp::new(kind, leg)
}

fn apply(ops: &[GeneratorOp], f: &SmoothFn, cfg: &TwistConfig) -> Result<SmoothFn> {
    ops.iter().try_fold(f.clone(), |acc, o| apply_generator(*o, &acc, cfg))
}

fn compare(lhs: &SmoothFn, rhs: &SmoothFn, per_axis: usize) -> Result<f64> {
    let points = comparison_points(lhs.support(), rhs.support(), per_axis)?;
    Ok(sup_and_scale(lhs, rhs, &points).0)
}

/// `ĴB̂_t = B̂_tĴ`, `ĴŶ + ŶĴ = 0` and `e^t B̂_tŶ = ŶB̂_t` on both legs.
fn relations(fs: &[SmoothFn], cfg: &TwistConfig, per_axis: usize) -> Result<[f64; 3]> {
    let mut worst = [0.0f64; 3];
    for f in fs {
        for leg in 0..2 {
            let (j, y) = (op(GeneratorKind::J, leg), op(GeneratorKind::Y, leg));
            let jy = apply(&[y, j], f, cfg)?;
            let yj = apply(&[j, y], f, cfg)?;
            worst[1] = worst[1].max(compare(&jy, &yj.scale(C64::new(-1.0, 0.0)), per_axis)?);
            for t in TIMES {
                let b = op(GeneratorKind::Bt(t), leg);
                worst[0] = worst[0].max(compare(&apply(&[b, j], f, cfg)?, &apply(&[j, b], f, cfg)?, per_axis)?);
                let by = apply(&[y, b], f, cfg)?.scale(C64::new(t.exp(), 0.0));
                worst[2] = worst[2].max(compare(&by, &apply(&[b, y], f, cfg)?, per_axis)?);
            }
        }
    }
    Ok(worst)
}

/// Richardson-extrapolated derivative of `t ↦ B̂_t F` at 0 against `iX̂F`.
fn richardson(fs: &[SmoothFn], cfg: &TwistConfig, per_axis: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for f in fs {
        for leg in 0..2 {
            let bt = |t: f64| apply_generator(op(GeneratorKind::Bt(t), leg), f, cfg);
            let (p1, m1, p2, m2) = (bt(FD_STEP)?, bt(-FD_STEP)?, bt(FD_STEP / 2.0)?, bt(-FD_STEP / 2.0)?);
            let ix = apply_generator(op(GeneratorKind::X, leg), f, cfg)?.scale(C64::i());
            let hull: Vec<Interval> = f.support().hull()?.iter().map(|iv| Interval::new(iv.lo - 0.1, iv.hi + 0.1)).collect();
            for p in grid_points(&hull, per_axis) {
                let d1 = (p1.eval(&p) - m1.eval(&p)) / (2.0 * FD_STEP);
                let d2 = (p2.eval(&p) - m2.eval(&p)) / FD_STEP;
                let extrapolated = (d2 * 4.0 - d1) / 3.0;
                worst = worst.max((extrapolated - ix.eval(&p)).norm());
            }
        }
    }
    Ok(worst)
}

/// `T̂_tT̂_r = T̂_{t+r}` and `T̂₁K̂ = K̂T̂₁ = T̂`.
fn scaling_family(fs: &[SmoothFn], cfg: &TwistConfig, per_axis: usize) -> Result<[f64; 2]> {
    let tw = |m: TwistPointMap, f: &SmoothFn| twist_apply(m, f, cfg);
    let mut worst = [0.0f64; 2];
    for f in fs {
        for (t, r) in [(0.5, 0.7), (-0.4, 1.1), (1.3, -2.0)] {
            let lhs = tw(TwistPointMap::Tt(t), &tw(TwistPointMap::Tt(r), f)?)?;
            worst[0] = worst[0].max(compare(&lhs, &tw(TwistPointMap::Tt(t + r), f)?, per_axis)?);
        }
        let whole = tw(TwistPointMap::T, f)?;
        let tk = tw(TwistPointMap::Tt(1.0), &tw(TwistPointMap::K, f)?)?;
        let kt = tw(TwistPointMap::K, &tw(TwistPointMap::Tt(1.0), f)?)?;
        worst[1] = worst[1].max(compare(&tk, &whole, per_axis)?).max(compare(&kt, &whole, per_axis)?);
    }
    Ok(worst)
}

fn coproducts(fs: &[SmoothFn], cfg: &TwistConfig, per_axis: usize) -> Result<[f64; 3]> {
    let mut worst = [0.0f64; 3];
    for f in fs {
        for (i, gen) in [CoproductGenerator::Y, CoproductGenerator::X, CoproductGenerator::J].into_iter().enumerate() {
            worst[i] = worst[i].max(coproduct_residual(gen, f, per_axis, cfg)?);
        }
    }
    Ok(worst)
}

/// `n` draws of [`u_supported`] on which the twist and its inverse are
/// defined with the configured margin, and the number of rejected draws.
fn admissible(n: usize, cfg: &TwistConfig, rng: &mut ChaCha8Rng) -> Result<(Vec<SmoothFn>, usize)> {
    let (mut out, mut rejected) = (Vec::with_capacity(n), 0usize);
    while out.len() < n {
        if rejected > 50 * n {
            return Err(Error::OutsideDomain("no admissible two-leg functions found".into()));
        }
        let f = u_supported(rng);
        let ok = [CoproductGenerator::Y, CoproductGenerator::X, CoproductGenerator::J]
            .into_iter()
            .all(|gen| twisted_coproduct(gen, &f, cfg).is_ok());
        if ok {
            out.push(f);
        } else {
            rejected += 1;
        }
    }
    Ok((out, rejected))
}

fn push_all<const N: usize>(out: &mut Vec<CheckRecord>, names: [(&str, &str, f64); N], r: Result<[f64; N]>, note: &str) {
    for (i, (id, anchor, tol)) in names.into_iter().enumerate() {
        out.push(match &r {
            Ok(v) => CheckRecord::new(id, anchor, v[i], tol).with_note(note),
            Err(e) => CheckRecord::errored(id, anchor, tol, e),
        });
    }
}

pub fn run(cfg: &SuiteConfig) -> Vec<CheckRecord> {
    let n = &cfg.samples;
    let tw = &cfg.twist;
    let per_axis = n.comparison_points;
    let mut rng = stream(cfg.seed, 300);
    let fs: Vec<SmoothFn> = (0..n.generator_functions).map(|_| u_supported(&mut rng)).collect();
    let note = format!("{} functions", fs.len());
    let mut out = Vec::new();
    push_all(
        &mut out,
        [
            ("generators.j_bt_commute", "generator-relations", RELATION_TOL),
            ("generators.j_y_anticommute", "generator-relations", RELATION_TOL),
            ("generators.bt_y_scaling", "generator-relations", RELATION_TOL),
        ],
        relations(&fs, tw, per_axis),
        &note,
    );
    out.push(super::record(
        "generators.x_richardson",
        "dilation-generator",
        RICHARDSON_TOL,
        richardson(&fs, tw, per_axis).map(|r| (r, format!("{note}, step {FD_STEP}"))),
    ));
    push_all(
        &mut out,
        [
            ("generators.twist_scaling_group", "twist-scaling-family", SCALING_TOL),
            ("generators.twist_scaling_sign", "twist-scaling-family", SCALING_TOL),
        ],
        scaling_family(&fs, tw, per_axis),
        &note,
    );
    let mut rng = stream(cfg.seed, 301);
    let khat = (0..n.generator_functions)
        .map(|_| mixed_support(&mut rng).and_then(|f| khat_residual(&f, per_axis, tw)))
        .try_fold(0.0f64, |m, r| r.map(|r| m.max(r)));
    out.push(super::record("generators.khat", "sign-twist-formula", KHAT_TOL, khat.map(|r| (r, note.clone()))));
    let names = [
        ("generators.coproduct.y", "twisted-coproduct", COPRODUCT_TOL),
        ("generators.coproduct.x", "twisted-coproduct", COPRODUCT_TOL),
        ("generators.coproduct.j", "twisted-coproduct", COPRODUCT_J_TOL),
    ];
    match admissible(n.coproduct_functions, tw, &mut stream(cfg.seed, 302)) {
        Ok((fs, rejected)) => {
            let note = format!("{} functions, {rejected} inadmissible draws", fs.len());
            push_all(&mut out, names, coproducts(&fs, tw, per_axis), &note);
        }
        Err(e) => push_all(&mut out, names, Err(e), ""),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relations_and_richardson_on_one_function() {
        let cfg = TwistConfig::default();
        let fs = vec![u_supported(&mut stream(2, 0))];
        let r = relations(&fs, &cfg, 5).unwrap();
        assert!(r.iter().all(|r| *r < RELATION_TOL), "{r:?}");
        let r = richardson(&fs, &cfg, 5).unwrap();
        assert!(r < RICHARDSON_TOL, "{r}");
        let r = scaling_family(&fs, &cfg, 5).unwrap();
        assert!(r.iter().all(|r| *r < SCALING_TOL), "{r:?}");
    }

    #[test]
    fn wrong_sign_in_the_scaling_relation_is_visible() {
        let cfg = TwistConfig::default();
        let f = u_supported(&mut stream(2, 1));
        let (b, y) = (op(GeneratorKind::Bt(0.4), 0), op(GeneratorKind::Y, 0));
        let wrong = apply(&[y, b], &f, &cfg).unwrap().scale(C64::new((-0.4f64).exp(), 0.0));
        assert!(compare(&wrong, &apply(&[b, y], &f, &cfg).unwrap(), 6).unwrap() > 1e-3);
    }
}
