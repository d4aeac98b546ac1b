//! Semiclassical limit of `Γ_s`: convergence tables, support boxes, the
//! bracket identities and the first-order behaviour of the deformed
//! comultiplication.

use num_complex::Complex64 as C64;
use rand_chacha::ChaCha8Rng;

use super::{stream, SuiteConfig};
use crate::algebra::AlgebraElement;
use crate::error::Result;
use crate::funcspace::{grid_points, Chart, Interval, SmoothFn};
use crate::report::{CheckRecord, ResidualReport};
use crate::semiclassic::{
    convergence_table, coproduct_support_in_box, deformed_product_box, poisson_bracket, product_support, product_zero_norm,
    sample_k_m, support_within, DeformationParam, DeltaSDifference, ResidualTable, Slope, DEFAULT_K, GAMMA0,
};

pub const MIN_SLOPE: f64 = 0.9;
pub const BRACKET_TOL: f64 = 1e-8;
pub const JACOBI_TOL: f64 = 1e-6;

fn pairs(cfg: &SuiteConfig, rng: &mut ChaCha8Rng) -> Result<Vec<(AlgebraElement, AlgebraElement)>> {
    let d = &cfg.deform;
    let hw = (d.halfwidths[0], d.halfwidths[1]);
    (0..d.pairs).map(|_| Ok((sample_k_m(rng, d.big_m, d.inset, hw)?, sample_k_m(rng, d.big_m, d.inset, hw)?))).collect()
}

fn slope_record(id: String, slope: Option<Slope>) -> CheckRecord {
    match slope {
        Some(s) => CheckRecord::at_least(id, "semiclassical-limit", s.slope, MIN_SLOPE)
            .with_note(format!("slope {:.4}, 95% interval [{:.4}, {:.4}], {} points", s.slope, s.lo, s.hi, s.points)),
        None => CheckRecord::new(id, "semiclassical-limit", f64::INFINITY, 0.0).with_note("too few positive residuals to fit"),
    }
}

fn table_records(k: usize, t: &ResidualTable) -> Vec<CheckRecord> {
    let mut out = vec![
        slope_record(format!("deform.pair{k}.r2_slope"), t.slope_r2),
        slope_record(format!("deform.pair{k}.r3_slope"), t.slope_r3),
        slope_record(format!("deform.pair{k}.r4_slope"), t.slope_r4),
    ];
    let outside = t.rows.iter().filter(|r| !r.supports_in_box).count();
    out.push(
        CheckRecord::new(format!("deform.pair{k}.product_support"), "product-support-box", outside as f64, 0.0)
            .with_note(format!("{} values of s", t.rows.len())),
    );
    out
}

/// Both factor orders and both signs of `s`, by interval enclosure.
fn product_boxes(ps: &[(AlgebraElement, AlgebraElement)], cfg: &SuiteConfig) -> Result<(f64, String)> {
    let d = &cfg.deform;
    let mut outside = 0usize;
    let mut total = 0usize;
    for (f, g) in ps {
        for &s in &d.s_grid {
            for s in [s, -s] {
                for (l, r) in [(f, g), (g, f)] {
                    let sup = product_support(l.support_ref(), r.support_ref(), s, d.table.support_pieces)?;
                    outside += usize::from(!support_within(&sup, &deformed_product_box(d.big_m, s))?);
                    total += 1;
                }
            }
        }
    }
    Ok((outside as f64, format!("{total} enclosures")))
}

/// Fixed inputs of the deformed comultiplication checks, supported well
/// inside `K_M × (K_M × K_M)` for `M` slightly above 1.
pub fn coproduct_inputs() -> Result<(AlgebraElement, SmoothFn)> {
    let f = SmoothFn::bump_product(Chart::Ba, &[0.1, 1.0], &[0.9, 0.15], C64::new(1.0, 0.4));
    let big = SmoothFn::bump_product(Chart::Ba, &[0.2, 1.0, -0.1, 1.0], &[0.8, 0.15, 0.9, 0.15], C64::new(0.8, -0.3));
    Ok((AlgebraElement::new(f, GAMMA0)?, big))
}

fn coproduct_boxes(cfg: &SuiteConfig) -> Result<(f64, String)> {
    let (f, big) = coproduct_inputs()?;
    let d = &cfg.deform;
    let mut outside = 0usize;
    for &s in &d.s_grid {
        for s in [s, -s] {
            outside +=
                usize::from(!coproduct_support_in_box(f.support_ref(), big.support(), s, d.coproduct_big_m, DEFAULT_K, 4)?);
        }
    }
    Ok((outside as f64, format!("{} enclosures", 2 * d.s_grid.len())))
}

fn coproduct_slope(cfg: &SuiteConfig) -> Result<(Vec<f64>, Option<Slope>)> {
    let (f, big) = coproduct_inputs()?;
    let d = &cfg.deform;
    let residuals = d
        .s_grid
        .iter()
        .map(|&s| {
            let param = DeformationParam::new(s, d.coproduct_big_m)?;
            let diff = DeltaSDifference::new(&f, &big, &param, DEFAULT_K, &d.coproduct_quad)?;
            product_zero_norm(&diff, &d.coproduct_norm)
        })
        .collect::<Result<Vec<f64>>>()?;
    let slope = Slope::fit(&d.s_grid, &residuals);
    Ok((residuals, slope))
}

fn sup_diff(x: &AlgebraElement, y: &AlgebraElement, points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|p| (x.eval_at(p) - y.eval_at(p)).norm())
        .fold(0.0, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) })
}

/// Antisymmetry, compatibility with the involution and the Jacobi identity.
fn bracket_identities(f: &AlgebraElement, g: &AlgebraElement, h: &AlgebraElement, cfg: &SuiteConfig) -> Result<[f64; 3]> {
    let spec = cfg.deform.bracket_quad;
    let (f, g, h) = (f.with_spec(spec), g.with_spec(spec), h.with_spec(spec));
    let m = cfg.deform.big_m;
    let bx = [Interval::new(-2.0 * m, 2.0 * m), Interval::new(1.0 / m, m)];
    let fine = grid_points(&bx, 9);
    let one = C64::new(1.0, 0.0);
    let fg = poisson_bracket(&f, &g)?;
    let gf = poisson_bracket(&g, &f)?;
    let anti =
        sup_diff(&fg, &gf.scale(-one), &fine).max(sup_diff(&poisson_bracket(&f, &f)?, &AlgebraElement::zero(GAMMA0), &fine));
    let lhs = poisson_bracket(&f.star()?, &g.star()?)?;
    let invol = sup_diff(&lhs, &gf.star()?, &fine);
    let cyc = |x: &AlgebraElement, y: &AlgebraElement, z: &AlgebraElement| poisson_bracket(x, &poisson_bracket(y, z)?);
    let jac = AlgebraElement::combination(vec![(one, cyc(&f, &g, &h)?), (one, cyc(&g, &h, &f)?), (one, cyc(&h, &f, &g)?)])?;
    let coarse = grid_points(&bx, 5);
    let jacobi = sup_diff(&jac, &AlgebraElement::zero(GAMMA0), &coarse);
    Ok([anti, invol, jacobi])
}

/// Records of the deform suite; the convergence tables go into `report`.
pub fn run(cfg: &SuiteConfig, report: &mut ResidualReport) -> Result<Vec<CheckRecord>> {
    let d = &cfg.deform;
    let mut out = Vec::new();
    let mut rng = stream(cfg.seed, 400);
    let ps = match pairs(cfg, &mut rng) {
        Ok(ps) => ps,
        Err(e) => return Ok(vec![CheckRecord::errored("deform.inputs", "semiclassical-limit", 0.0, &e)]),
    };
    for (k, (f, g)) in ps.iter().enumerate() {
        match convergence_table(f, g, &d.s_grid, d.big_m, &d.table, cfg.seed) {
            Ok(t) => {
                out.extend(table_records(k, &t));
                report.add_table(format!("pair{k}"), &t)?;
            }
            Err(e) => out.push(CheckRecord::errored(format!("deform.pair{k}.table"), "semiclassical-limit", 0.0, &e)),
        }
    }
    out.push(super::record("deform.product_support_both_signs", "product-support-box", 0.0, product_boxes(&ps, cfg)));
    out.push(super::record("deform.coproduct_support", "coproduct-support-box", 0.0, coproduct_boxes(cfg)));

    let h = sample_k_m(&mut rng, d.big_m, d.inset, (d.halfwidths[0], d.halfwidths[1]));
    let names = [
        ("deform.bracket.antisymmetry", BRACKET_TOL),
        ("deform.bracket.involution", BRACKET_TOL),
        ("deform.bracket.jacobi", JACOBI_TOL),
    ];
    let ids = h.and_then(|h| bracket_identities(&ps[0].0, &ps[0].1, &h, cfg));
    for (i, (id, tol)) in names.into_iter().enumerate() {
        out.push(match &ids {
            Ok(v) => CheckRecord::new(id, "poisson-bracket", v[i], tol),
            Err(e) => CheckRecord::errored(id, "poisson-bracket", tol, e),
        });
    }

    out.push(match coproduct_slope(cfg) {
        Ok((residuals, slope)) => {
            let listed: Vec<String> = residuals.iter().map(|r| format!("{r:.4e}")).collect();
            let mut rec = slope_record("deform.coproduct_slope".into(), slope);
            rec.anchor = "coproduct-limit".into();
            let note = format!("{}; residuals {}", rec.note, listed.join(" "));
            rec.with_note(note)
        }
        Err(e) => CheckRecord::errored("deform.coproduct_slope", "coproduct-limit", 0.0, &e),
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn support_checks_pass_on_defaults() {
        let cfg = SuiteConfig::default();
        let ps = pairs(&cfg, &mut stream(cfg.seed, 400)).unwrap();
        assert_eq!(product_boxes(&ps, &cfg).unwrap().0, 0.0);
        assert_eq!(coproduct_boxes(&cfg).unwrap().0, 0.0);
    }

    #[test]
    fn missing_slope_fails() {
        let r = slope_record("x".into(), None);
        assert!(!r.pass);
        let r = slope_record("x".into(), Some(Slope { slope: 1.02, lo: 0.9, hi: 1.1, points: 5 }));
        assert!(r.pass);
    }
}
