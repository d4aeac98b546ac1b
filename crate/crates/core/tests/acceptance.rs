//! Acceptance suite: runs every verification suite once with the default
//! configuration and judges the sixteen acceptance criteria against it,
//! printing one line per criterion. Exits nonzero if any criterion fails.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use axblab_core::report::{CheckRecord, ResidualReport};
use axblab_core::suites::{run_suite, SuiteConfig};

/// A criterion: which records belong to it, the loosest tolerance each may
/// carry, and optional extra checks on the whole report.
struct Criterion {
    number: u32,
    title: &'static str,
    groups: &'static [(Matcher, f64)],
    extra: Option<ReportCheck>,
}

type ReportCheck = fn(&ResidualReport) -> Result<(), String>;

#[derive(Clone, Copy)]
enum Matcher {
    Prefix(&'static str),
    Exact(&'static str),
    /// `deform.pair<k>.<suffix>`.
    PerPair(&'static str),
}

impl Matcher {
    fn matches(&self, id: &str) -> bool {
        match *self {
            Matcher::Prefix(p) => id.starts_with(p),
            Matcher::Exact(e) => id == e,
            Matcher::PerPair(suffix) => id
                .strip_prefix("deform.pair")
                .and_then(|rest| rest.split_once('.'))
                .is_some_and(|(k, tail)| k.parse::<usize>().is_ok() && tail == suffix),
        }
    }
}

use Matcher::{Exact, PerPair, Prefix};

const MIN_SLOPE: f64 = 0.9;
const PAIRS: usize = 5;
const S_GRID_EXPONENTS: [f64; 5] = [-1.0, -1.5, -2.0, -2.5, -3.0];
/// Reference value of the measure `μ(1, 0, 0.5; 0.1)`.
const MEASURE_REFERENCE: f64 = 0.200671;

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).map(|(x, y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Refit every column of every table and compare with the required order.
fn tables_have_linear_order(report: &ResidualReport) -> Result<(), String> {
    if report.tables.len() != PAIRS {
        return Err(format!("expected {PAIRS} tables, found {}", report.tables.len()));
    }
    let mut problems = Vec::new();
    for (name, table) in &report.tables {
        let s: Vec<f64> = table.rows.iter().map(|r| r.s).collect();
        let grid_ok =
            s.len() == S_GRID_EXPONENTS.len() && s.iter().zip(S_GRID_EXPONENTS).all(|(s, e)| (s.log10() - e).abs() < 1e-9);
        if !grid_ok || table.big_m != 2.0 {
            problems.push(format!("{name}: grid {s:?}, M = {}", table.big_m));
            continue;
        }
        let columns: [(&str, Vec<f64>); 3] = [
            ("r2", table.rows.iter().map(|r| r.r2).collect()),
            ("r3", table.rows.iter().map(|r| r.r3).collect()),
            ("r4", table.rows.iter().map(|r| r.r4.unwrap_or(f64::NAN)).collect()),
        ];
        for (col, ys) in columns {
            let slope = least_squares_slope(&s, &ys);
            if !(slope >= MIN_SLOPE) {
                problems.push(format!("{name}.{col} slope {slope:.4}"));
            }
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(problems.join("; "))
    }
}

fn measure_reference_is_the_closed_form(_: &ResidualReport) -> Result<(), String> {
    // The solution set is c ∈ (-1/0.9, -1/1.1), of measure ln(1.1/0.9).
    let closed = (1.1f64 / 0.9).ln();
    if (closed - MEASURE_REFERENCE).abs() < 1e-3 {
        Ok(())
    } else {
        Err(format!("closed form {closed} disagrees with the reference"))
    }
}

/// Sample sizes of the run must be at least the required ones.
fn sample_sizes(report: &ResidualReport) -> Result<(), String> {
    let cfg = SuiteConfig::from_value(&report.config).map_err(|e| e.to_string())?;
    let s = &cfg.samples;
    let required = [
        ("groupoid_triples", s.groupoid_triples, 1000),
        ("modular_points", s.modular_points, 1000),
        ("cocycle_points", s.cocycle_points, 10_000),
        ("cocycle_functions", s.cocycle_functions, 10),
        ("diffeo_points", s.diffeo_points, 10_000),
        ("intertwining_pairs", s.intertwining_pairs, 10),
        ("intertwining_probes", s.intertwining_probes, 5),
        ("measure_draws", s.measure_draws, 1000),
        ("hilbert_schmidt_pairs", s.hilbert_schmidt_pairs, 100),
        ("coproduct_functions", s.coproduct_functions, 20),
        ("decomposition_draws", s.decomposition_draws, 1000),
        ("deform pairs", cfg.deform.pairs, PAIRS),
    ];
    let short: Vec<String> =
        required.iter().filter(|(_, have, need)| have < need).map(|(n, have, need)| format!("{n} {have} < {need}")).collect();
    if short.is_empty() {
        Ok(())
    } else {
        Err(short.join("; "))
    }
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        number: 1,
        title: "groupoid axioms of G_B, G_C and Γ_s for s in {0, 0.5, 1}",
        groups: &[(Prefix("group.axioms."), 1e-10)],
        extra: Some(sample_sizes),
    },
    Criterion {
        number: 2,
        title: "modular functions j_B = |a|, j_C = 1",
        groups: &[(Prefix("group.modular."), 1e-12)],
        extra: None,
    },
    Criterion {
        number: 3,
        title: "twist cocycle at points and on functions",
        groups: &[(Exact("twist.cocycle.points"), 1e-12), (Exact("twist.cocycle.functions"), 1e-8)],
        extra: None,
    },
    Criterion {
        number: 4,
        title: "Φ/Ψ diffeomorphisms are mutual inverses",
        groups: &[(Prefix("twist.diffeo."), 1e-10)],
        extra: None,
    },
    Criterion {
        number: 5,
        title: "three-leg intertwining of the twist with the comultiplication",
        groups: &[(Prefix("twist.intertwining."), 1e-6)],
        extra: None,
    },
    Criterion {
        number: 6,
        title: "measure estimate: reference value and uniform bound",
        groups: &[(Exact("twist.measure.reference"), 1e-3), (Exact("twist.measure.uniform_bound"), 0.0)],
        extra: Some(measure_reference_is_the_closed_form),
    },
    Criterion {
        number: 7,
        title: "Hilbert–Schmidt bound for the identity representation",
        groups: &[(Exact("twist.hilbert_schmidt"), 0.0)],
        extra: None,
    },
    Criterion {
        number: 8,
        title: "generator relations, dilation generator, twist scaling family",
        groups: &[
            (Exact("generators.j_bt_commute"), 1e-12),
            (Exact("generators.j_y_anticommute"), 1e-12),
            (Exact("generators.bt_y_scaling"), 1e-12),
            (Exact("generators.x_richardson"), 1e-6),
            (Prefix("generators.twist_scaling_"), 1e-12),
        ],
        extra: None,
    },
    Criterion { number: 9, title: "sign-twist formula for K̂", groups: &[(Exact("generators.khat"), 1e-12)], extra: None },
    Criterion {
        number: 10,
        title: "twisted coproducts of Y, X and J",
        groups: &[
            (Exact("generators.coproduct.y"), 1e-8),
            (Exact("generators.coproduct.x"), 1e-8),
            (Exact("generators.coproduct.j"), 1e-10),
        ],
        extra: None,
    },
    Criterion {
        number: 11,
        title: "semiclassical limit: r2, r3, r4 slopes on five pairs",
        groups: &[(PerPair("r2_slope"), 0.0), (PerPair("r3_slope"), 0.0), (PerPair("r4_slope"), 0.0)],
        extra: Some(tables_have_linear_order),
    },
    Criterion {
        number: 12,
        title: "support boxes of deformed products and comultiplication",
        groups: &[
            (PerPair("product_support"), 0.0),
            (Exact("deform.product_support_both_signs"), 0.0),
            (Exact("deform.coproduct_support"), 0.0),
        ],
        extra: None,
    },
    Criterion {
        number: 13,
        title: "Poisson bracket antisymmetry, involution, Jacobi",
        groups: &[
            (Exact("deform.bracket.antisymmetry"), 1e-8),
            (Exact("deform.bracket.involution"), 1e-8),
            (Exact("deform.bracket.jacobi"), 1e-6),
        ],
        extra: None,
    },
    Criterion {
        number: 14,
        title: "deformed comultiplication converges at first order",
        groups: &[(Exact("deform.coproduct_slope"), 0.0)],
        extra: None,
    },
    Criterion {
        number: 15,
        title: "Fourier bracket, dual intertwining, dual group axioms",
        groups: &[
            (Exact("fourier.bracket_consistency"), 1e-5),
            (Exact("fourier.dual_intertwining"), 1e-4),
            (Exact("fourier.dual_group_axioms"), 0.0),
        ],
        extra: None,
    },
    Criterion {
        number: 16,
        title: "dilation decomposition identity",
        groups: &[(Exact("group.decomposition"), 1e-10)],
        extra: None,
    },
];

fn judge(c: &Criterion, report: &ResidualReport) -> (bool, String) {
    let mut problems = Vec::new();
    let mut count = 0;
    let mut worst: Option<&CheckRecord> = None;
    for (matcher, limit) in c.groups {
        let records: Vec<&CheckRecord> = report.checks.iter().filter(|r| matcher.matches(&r.id)).collect();
        if records.is_empty() {
            problems.push("missing checks".to_string());
        }
        for r in records {
            count += 1;
            if !(r.tolerance <= *limit) {
                problems.push(format!("{} uses tolerance {:e} above {:e}", r.id, r.tolerance, limit));
            }
            if !r.pass {
                problems.push(format!("{} residual {:.4e} > {:.1e} {}", r.id, r.residual, r.tolerance, r.note));
            }
            if worst.is_none_or(|w| r.residual - r.tolerance > w.residual - w.tolerance) {
                worst = Some(r);
            }
        }
    }
    if let Some(extra) = c.extra {
        if let Err(e) = extra(report) {
            problems.push(e);
        }
    }
    let detail = match (problems.is_empty(), worst) {
        (true, Some(w)) => {
            format!(
                "{count} check{}; worst {} residual {:.3e} (tolerance {:.1e})",
                if count == 1 { "" } else { "s" },
                w.id,
                w.residual,
                w.tolerance
            )
        }
        _ => problems.join("; "),
    };
    (problems.is_empty(), detail)
}

fn main() {
    let started = std::time::Instant::now();
    let report = run_suite("all", &SuiteConfig::default()).expect("the default configuration runs");
    let mut failed = Vec::new();
    for c in CRITERIA {
        let (pass, detail) = judge(c, &report);
        println!("criterion {:>2} {}  {}: {}", c.number, if pass { "PASS" } else { "FAIL" }, c.title, detail);
        if !pass {
            failed.push(c.number);
        }
    }
    let unclaimed: Vec<&str> = report
        .checks
        .iter()
        .filter(|r| !CRITERIA.iter().any(|c| c.groups.iter().any(|(m, _)| m.matches(&r.id))))
        .map(|r| r.id.as_str())
        .collect();
    assert!(unclaimed.is_empty(), "checks outside every criterion: {unclaimed:?}");
    println!("acceptance: {} of {} criteria passed in {:.0?}", CRITERIA.len() - failed.len(), CRITERIA.len(), started.elapsed());
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
