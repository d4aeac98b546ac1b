//! Residual reports: per-check records with tolerances, plus the tables a
//! suite produced, emitted as JSON, CSV or a markdown summary.
//!
//! Output is byte-stable: every float is rounded to 12 significant digits
//! when it enters a report, JSON objects have sorted keys, and CSV floats use
//! a fixed exponent format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::semiclassic::ResidualTable;

/// Version tag of the JSON layout.
pub const REPORT_SCHEMA: &str = "axblab-report/1";

/// Significant digits kept for every reported float.
pub const SIGNIFICANT_DIGITS: usize = 12;

/// Round to [`SIGNIFICANT_DIGITS`] significant digits; non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Floats serialise as numbers when finite and as `"inf"`, `"-inf"` or
/// `"nan"` otherwise, so failed checks survive a JSON round trip.
mod float_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            x.serialize(s)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not a float: {other:?}"))),
            },
        }
    }
}

/// One named check.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRecord {
    /// Unique within a report, e.g. `deform.pair2.r4_slope`.
    pub id: String,
    /// Label of the identity or estimate being checked.
    pub anchor: String,
    #[serde(with = "float_repr")]
    pub residual: f64,
    #[serde(with = "float_repr")]
    pub tolerance: f64,
    pub pass: bool,
    /// Free-form context such as the fitted value behind a shortfall.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl PartialEq for CheckRecord {
    fn eq(&self, other: &Self) -> bool {
        let same = |x: f64, y: f64| x == y || (x.is_nan() && y.is_nan());
        self.id == other.id
            && self.anchor == other.anchor
            && same(self.residual, other.residual)
            && same(self.tolerance, other.tolerance)
            && self.pass == other.pass
            && self.note == other.note
    }
}

impl CheckRecord {
    /// Passes iff `residual ≤ tolerance`; a NaN residual fails.
    pub fn new(id: impl Into<String>, anchor: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        let residual = round_sig(residual);
        let tolerance = round_sig(tolerance);
        CheckRecord {
            id: id.into(),
            anchor: anchor.into(),
            residual,
            tolerance,
            pass: residual <= tolerance,
            note: String::new(),
        }
    }

    /// A lower-bound requirement `value ≥ minimum`, recorded as the
    /// shortfall `minimum - value` against tolerance 0.
    pub fn at_least(id: impl Into<String>, anchor: impl Into<String>, value: f64, minimum: f64) -> Self {
        CheckRecord::new(id, anchor, minimum - value, 0.0).with_note(format!("value {}", fmt_float(value)))
    }

    /// A check that could not be evaluated.
    pub fn errored(id: impl Into<String>, anchor: impl Into<String>, tolerance: f64, err: &Error) -> Self {
        CheckRecord::new(id, anchor, f64::INFINITY, tolerance).with_note(format!("error: {err}"))
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

/// Facts about the producing build and host that affect the numbers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub crate_version: String,
    pub os: String,
    pub arch: String,
    pub threads: usize,
}

impl Environment {
    pub fn capture(threads: usize) -> Self {
        Environment {
            crate_version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            threads,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualReport {
    pub schema: String,
    pub suite: String,
    pub seed: u64,
    pub environment: Environment,
    /// The configuration the suite ran with, enough to re-run it.
    pub config: serde_json::Value,
    pub checks: Vec<CheckRecord>,
    /// Convergence tables keyed by name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tables: BTreeMap<String, ResidualTable>,
}

/// Output formats of [`ResidualReport::emit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl Format {
    pub fn extension(&self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Markdown => "md",
        }
    }
}

/// Round every number in a JSON tree.
fn round_value(v: &mut serde_json::Value) {
    match v {
        serde_json::Value::Number(n) => {
            if let Some(x) = n.as_f64().filter(|_| n.is_f64()) {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = r;
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_value),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// `value` with all floats rounded, via a JSON round trip.
pub fn canonicalize<T: Serialize + DeserializeOwned>(value: &T) -> Result<T> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    round_value(&mut v);
    serde_json::from_value(v).map_err(|e| Error::InvalidArgument(e.to_string()))
}

fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x)
    } else {
        x.to_string().to_lowercase()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl ResidualReport {
    pub fn new(suite: impl Into<String>, seed: u64, environment: Environment, config: serde_json::Value) -> Self {
        let mut config = config;
        round_value(&mut config);
        ResidualReport {
            schema: REPORT_SCHEMA.into(),
            suite: suite.into(),
            seed,
            environment,
            config,
            checks: Vec::new(),
            tables: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, check: CheckRecord) {
        self.checks.push(check);
    }

    pub fn add_table(&mut self, name: impl Into<String>, table: &ResidualTable) -> Result<()> {
        self.tables.insert(name.into(), canonicalize(table)?);
        Ok(())
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Append the checks and tables of another report of the same run.
    pub fn absorb(&mut self, other: ResidualReport) {
        self.checks.extend(other.checks);
        self.tables.extend(other.tables);
    }

    pub fn to_json(&self) -> Result<String> {
        // Going through `Value` sorts object keys.
        let v = serde_json::to_value(self).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let report: ResidualReport = serde_json::from_str(s).map_err(|e| Error::Config(format!("report: {e}")))?;
        if report.schema != REPORT_SCHEMA {
            return Err(Error::Config(format!("unsupported report schema {:?}", report.schema)));
        }
        Ok(report)
    }

    /// One row per check after the header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,anchor,residual,tolerance,pass,note\n");
        for c in &self.checks {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&c.id),
                csv_field(&c.anchor),
                fmt_float(c.residual),
                fmt_float(c.tolerance),
                c.pass,
                csv_field(&c.note)
            );
        }
        out
    }

    /// Rows of every convergence table with the fitted slopes repeated on
    /// each row of their table.
    pub fn tables_csv(&self) -> Option<String> {
        if self.tables.is_empty() {
            return None;
        }
        let mut out = String::from("table,s,r2,r3,r4,supports_in_box,slope_r2,slope_r3,slope_r4\n");
        let slope = |s: &Option<crate::semiclassic::Slope>| s.map(|s| fmt_float(s.slope)).unwrap_or_default();
        for (name, t) in &self.tables {
            for r in &t.rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    csv_field(name),
                    fmt_float(r.s),
                    fmt_float(r.r2),
                    fmt_float(r.r3),
                    r.r4.map(fmt_float).unwrap_or_default(),
                    r.supports_in_box,
                    slope(&t.slope_r2),
                    slope(&t.slope_r3),
                    slope(&t.slope_r4)
                );
            }
        }
        Some(out)
    }

    /// Summary with the failing checks listed first.
    pub fn to_markdown(&self) -> String {
        let failed = self.failures().count();
        let mut out = format!(
            "# axblab report: {}\n\nseed {} · schema {} · {} checks, {} failed\n\n",
            self.suite,
            self.seed,
            self.schema,
            self.checks.len(),
            failed
        );
        out.push_str("| status | id | anchor | residual | tolerance | note |\n|---|---|---|---|---|---|\n");
        let ordered = self.checks.iter().filter(|c| !c.pass).chain(self.checks.iter().filter(|c| c.pass));
        for c in ordered {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                if c.pass { "pass" } else { "FAIL" },
                c.id,
                c.anchor,
                fmt_float(c.residual),
                fmt_float(c.tolerance),
                c.note.replace('|', "\\|")
            );
        }
        out
    }

    pub fn render(&self, format: Format) -> Result<String> {
        Ok(match format {
            Format::Json => self.to_json()?,
            Format::Csv => self.to_csv(),
            Format::Markdown => self.to_markdown(),
        })
    }

    /// Write `<dir>/<suite>.<ext>` for each format, plus
    /// `<dir>/<suite>_tables.csv` when the report carries tables. Returns
    /// the written paths.
    pub fn emit(&self, dir: &Path, formats: &[Format]) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for &format in formats {
            let path = dir.join(format!("{}.{}", self.suite, format.extension()));
            std::fs::write(&path, self.render(format)?)?;
            written.push(path);
        }
        if formats.contains(&Format::Csv) {
            if let Some(tables) = self.tables_csv() {
                let path = dir.join(format!("{}_tables.csv", self.suite));
                std::fs::write(&path, tables)?;
                written.push(path);
            }
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ResidualReport {
        let mut r = ResidualReport::new("group", 7, Environment::capture(1), serde_json::json!({"seed": 7, "b": 0.1 + 0.2}));
        r.push(CheckRecord::new("group.assoc", "groupoid-axioms", 3.0e-16, 1e-10));
        r.push(CheckRecord::new("group.bad", "modular-functions", 2.0 / 3.0, 1e-12));
        r.push(CheckRecord::at_least("deform.slope", "semiclassical-limit", 0.95, 0.9));
        r.push(CheckRecord::errored("fourier.x", "dual-bracket", 1e-5, &Error::InvalidArgument("boom, \"x\"".into())));
        r
    }

    #[test]
    fn pass_iff_residual_within_tolerance() {
        let r = sample();
        let pass: Vec<bool> = r.checks.iter().map(|c| c.pass).collect();
        assert_eq!(pass, [true, false, true, false]);
        assert!(!r.passed());
        assert!(!CheckRecord::new("x", "y", f64::NAN, 1.0).pass);
        assert!(CheckRecord::new("x", "y", 1.0, 1.0).pass);
    }

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(2.0 / 3.0), 0.666666666667);
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(-1.23456789012345e-20), -1.23456789012e-20);
        assert!(round_sig(f64::INFINITY).is_infinite());
    }

    #[test]
    fn json_round_trips_and_is_stable() {
        let r = sample();
        let s = r.to_json().unwrap();
        let back = ResidualReport::from_json(&s).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), s);
        assert!(s.contains("\"inf\""));
        // Keys come out sorted.
        let i_checks = s.find("\"checks\"").unwrap();
        let i_config = s.find("\"config\"").unwrap();
        let i_schema = s.find("\"schema\"").unwrap();
        assert!(i_checks < i_config && i_config < i_schema);
        let wrong = s.replace(REPORT_SCHEMA, "axblab-report/0");
        assert!(matches!(ResidualReport::from_json(&wrong), Err(Error::Config(_))));
    }

    #[test]
    fn csv_has_one_row_per_check() {
        let r = sample();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), r.checks.len() + 1);
        assert!(csv.contains("6.66666666667e-1"));
        assert!(csv.contains("\"error: invalid argument: boom, \"\"x\"\"\""));
        assert!(r.tables_csv().is_none());
    }

    #[test]
    fn markdown_lists_failures_first() {
        let md = sample().to_markdown();
        let rows: Vec<&str> = md.lines().filter(|l| l.starts_with("| pass") || l.starts_with("| FAIL")).collect();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].starts_with("| FAIL") && rows[1].starts_with("| FAIL"));
        assert!(rows[2].starts_with("| pass") && rows[3].starts_with("| pass"));
        assert!(md.contains("4 checks, 2 failed"));
    }

    #[test]
    fn emit_writes_requested_formats() {
        let dir = std::env::temp_dir().join(format!("axblab-report-test-{}", std::process::id()));
        let paths = sample().emit(&dir, &[Format::Json, Format::Csv, Format::Markdown]).unwrap();
        assert_eq!(paths.len(), 3);
        for p in &paths {
            assert!(p.exists());
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
