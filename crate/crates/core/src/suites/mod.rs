//! Verification suites. Each suite turns a [`SuiteConfig`] into check
//! records with fixed tolerances; `all` runs every suite in order.

pub mod config;
mod deform;
mod fourier;
mod generators;
mod group;
mod twist;

use std::str::FromStr;

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::funcspace::Field;
use crate::report::{CheckRecord, Environment, ResidualReport};

pub use config::{DeformConfig, FourierConfig, OutputConfig, SampleCounts, SuiteConfig, WindowConfig};

/// The runnable suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Group,
    Twist,
    Generators,
    Deform,
    Fourier,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] = ["group", "twist", "generators", "deform", "fourier", "all"];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Group => "group",
            Suite::Twist => "twist",
            Suite::Generators => "generators",
            Suite::Deform => "deform",
            Suite::Fourier => "fourier",
            Suite::All => "all",
        }
    }

    fn parts(&self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Group, Suite::Twist, Suite::Generators, Suite::Deform, Suite::Fourier],
            other => vec![*other],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "group" => Ok(Suite::Group),
            "twist" => Ok(Suite::Twist),
            "generators" => Ok(Suite::Generators),
            "deform" => Ok(Suite::Deform),
            "fourier" => Ok(Suite::Fourier),
            "all" => Ok(Suite::All),
            other => Err(Error::Config(format!("unknown suite {other:?}; expected one of {}", Suite::NAMES.join(", ")))),
        }
    }
}

/// Run the named suite. Unknown names and invalid configurations are
/// [`Error::Config`]; failures of individual checks end up in the report.
pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<ResidualReport> {
    let suite: Suite = name.parse()?;
    cfg.validate()?;
    let env = Environment::capture(rayon::current_num_threads());
    let mut report = ResidualReport::new(suite.name(), cfg.seed, env, cfg.to_value()?);
    for part in suite.parts() {
        let out = match part {
            Suite::Group => group::run(cfg),
            Suite::Twist => twist::run(cfg),
            Suite::Generators => generators::run(cfg),
            Suite::Deform => deform::run(cfg, &mut report)?,
            Suite::Fourier => fourier::run(cfg),
            Suite::All => unreachable!("expanded by parts"),
        };
        out.into_iter().for_each(|c| report.push(c));
    }
    Ok(report)
}

/// Independent random stream for one check.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Record a fallible residual computation; errors become failing records.
fn record(id: &str, anchor: &str, tolerance: f64, r: Result<(f64, String)>) -> CheckRecord {
    match r {
        Ok((residual, note)) => CheckRecord::new(id, anchor, residual, tolerance).with_note(note),
        Err(e) => CheckRecord::errored(id, anchor, tolerance, &e),
    }
}

/// Componentwise `|x - y| / (1 + |y|)`, maximised.
fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() {
        return f64::INFINITY;
    }
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
        .fold(0.0, |m, d| if d.is_nan() { f64::INFINITY } else { m.max(d) })
}

/// `max |f - g|` over `points` together with `max |g|`.
fn sup_and_scale(f: &dyn Field, g: &dyn Field, points: &[Vec<f64>]) -> (f64, f64) {
    points.iter().fold((0.0f64, 0.0f64), |(r, s), p| {
        let (a, b): (C64, C64) = (f.eval(p), g.eval(p));
        let d = (a - b).norm();
        (if d.is_nan() { f64::INFINITY } else { r.max(d) }, s.max(b.norm()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().name(), name);
        }
        assert!(matches!("deformation".parse::<Suite>(), Err(Error::Config(_))));
        assert!(matches!(run_suite("nope", &SuiteConfig::default()), Err(Error::Config(_))));
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        use rand::Rng;
        let a: u64 = stream(3, 1).gen();
        let b: u64 = stream(3, 2).gen();
        assert_ne!(a, b);
        assert_eq!(a, stream(3, 1).gen::<u64>());
    }

    #[test]
    fn relative_difference() {
        assert_eq!(rel_diff(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert_eq!(rel_diff(&[1.0], &[1.0, 2.0]), f64::INFINITY);
        assert_eq!(rel_diff(&[f64::NAN], &[1.0]), f64::INFINITY);
        assert!((rel_diff(&[3.0], &[1.0]) - 1.0).abs() < 1e-15);
    }
}
