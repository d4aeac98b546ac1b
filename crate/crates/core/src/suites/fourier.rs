//! Fourier side of `Γ_0`: bracket consistency, the dual group law and the
//! comultiplication it induces.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::deform::coproduct_inputs;
use super::{stream, SuiteConfig};
use crate::algebra::AlgebraElement;
use crate::error::Result;
use crate::funcspace::{Chart, SmoothFn};
use crate::report::CheckRecord;
use crate::semiclassic::{bracket_consistency, dual_group, dual_intertwining_residual, dual_inverse, window, GAMMA0};

pub const CONSISTENCY_TOL: f64 = 1e-5;
pub const INTERTWINING_TOL: f64 = 1e-4;

fn bump(center: [f64; 2], hw: [f64; 2], amp: C64) -> Result<AlgebraElement> {
    AlgebraElement::new(SmoothFn::bump_product(Chart::Ba, &center, &hw, amp), GAMMA0)
}

fn consistency(cfg: &SuiteConfig) -> Result<(f64, String)> {
    let w = &cfg.fourier.window;
    let f = bump([0.1, 1.0], [0.5, 0.35], C64::new(1.0, 0.2))?;
    let g = bump([-0.2, 1.05], [0.5, 0.3], C64::new(0.5, -0.5))?;
    let check = bracket_consistency(&f, &g, &window(w.beta_max, w.beta_step, w.a_lo, w.a_hi, w.a_step, w.panel_order))?;
    Ok((check.residual, format!("max |value| {:.4e}", check.scale)))
}

fn intertwining(cfg: &SuiteConfig) -> Result<(f64, String)> {
    let (f, big) = coproduct_inputs()?;
    let check = dual_intertwining_residual(&f, &big, &cfg.fourier.intertwining)?;
    Ok((check.residual, format!("max |value| {:.4e}", check.scale)))
}

/// Dyadic elements, for which the group law is exact in floating point.
fn dyadic(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let beta = rng.gen_range(-16i32..=16) as f64 / 8.0;
    let a = 2f64.powi(rng.gen_range(-3..=3)) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    (beta, a)
}

/// Largest deviation from associativity, the unit laws and the inverse laws.
fn group_axioms(n: usize, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let dist = |x: (f64, f64), y: (f64, f64)| (x.0 - y.0).abs().max((x.1 - y.1).abs());
    let mul = |x: (f64, f64), y: (f64, f64)| dual_group(x.0, x.1, y.0, y.1);
    let unit = (0.0, 1.0);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let (x, y, z) = (dyadic(rng), dyadic(rng), dyadic(rng));
        worst = worst.max(dist(mul(mul(x, y)?, z)?, mul(x, mul(y, z)?)?));
        worst = worst.max(dist(mul(unit, x)?, x)).max(dist(mul(x, unit)?, x));
        let inv = dual_inverse(x.0, x.1)?;
        worst = worst.max(dist(mul(x, inv)?, unit)).max(dist(mul(inv, x)?, unit));
    }
    Ok((worst, format!("{n} dyadic triples")))
}

pub fn run(cfg: &SuiteConfig) -> Vec<CheckRecord> {
    vec![
        super::record("fourier.bracket_consistency", "dual-bracket", CONSISTENCY_TOL, consistency(cfg)),
        super::record("fourier.dual_intertwining", "dual-comultiplication", INTERTWINING_TOL, intertwining(cfg)),
        super::record(
            "fourier.dual_group_axioms",
            "dual-group",
            0.0,
            group_axioms(cfg.fourier.group_draws, &mut stream(cfg.seed, 500)),
        ),
    ]
}
