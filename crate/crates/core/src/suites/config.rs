//! Suite configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcspace::QuadratureSpec;
use crate::report::Format;
use crate::semiclassic::{IntertwiningGrid, ProductNormSpec, TableSpec};
use crate::twist::TwistConfig;

/// Everything a suite run depends on besides the code itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    /// Suite run when none is named on the command line.
    pub suite: String,
    pub seed: u64,
    /// Base quadrature for the checks without a dedicated setting.
    pub quadrature: QuadratureSpec,
    pub samples: SampleCounts,
    pub twist: TwistConfig,
    pub deform: DeformConfig,
    pub fourier: FourierConfig,
    pub output: OutputConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            suite: "all".into(),
            seed: 1,
            quadrature: QuadratureSpec::default(),
            samples: SampleCounts::default(),
            twist: TwistConfig::default(),
            deform: DeformConfig::default(),
            fourier: FourierConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SampleCounts {
    /// Composable triples per groupoid.
    pub groupoid_triples: usize,
    pub modular_points: usize,
    pub decomposition_draws: usize,
    pub cocycle_points: usize,
    pub cocycle_functions: usize,
    /// Points per diffeomorphism.
    pub diffeo_points: usize,
    pub intertwining_pairs: usize,
    /// Probe points per `z` axis of the three-leg checks.
    pub intertwining_probes: usize,
    /// Draws per parameter combination of the uniform measure bound.
    pub measure_draws: usize,
    pub hilbert_schmidt_pairs: usize,
    pub generator_functions: usize,
    pub coproduct_functions: usize,
    /// Grid points per axis of the function-level comparisons.
    pub comparison_points: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        SampleCounts {
            groupoid_triples: 1000,
            modular_points: 1000,
            decomposition_draws: 1000,
            cocycle_points: 10_000,
            cocycle_functions: 10,
            diffeo_points: 10_000,
            intertwining_pairs: 10,
            intertwining_probes: 5,
            measure_draws: 1000,
            hilbert_schmidt_pairs: 100,
            generator_functions: 10,
            coproduct_functions: 20,
            comparison_points: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeformConfig {
    /// Strictly decreasing positive deformation parameters.
    pub s_grid: Vec<f64>,
    /// Support class of the random pairs.
    pub big_m: f64,
    pub pairs: usize,
    /// Distance of the random supports from the boundary of `K_M`.
    pub inset: f64,
    /// Bump half-width range of the random pairs.
    pub halfwidths: [f64; 2],
    pub table: TableSpec,
    /// Support class of the deformed comultiplication inputs.
    pub coproduct_big_m: f64,
    pub coproduct_norm: ProductNormSpec,
    pub coproduct_quad: QuadratureSpec,
    /// Inner quadrature of the bracket identities.
    pub bracket_quad: QuadratureSpec,
}

impl Default for DeformConfig {
    fn default() -> Self {
        DeformConfig {
            s_grid: [-1.0, -1.5, -2.0, -2.5, -3.0].iter().map(|e: &f64| 10f64.powf(*e)).collect(),
            big_m: 2.0,
            pairs: 5,
            inset: 0.05,
            halfwidths: [0.45, 0.7],
            table: TableSpec::default(),
            coproduct_big_m: 1.2,
            coproduct_norm: ProductNormSpec::default(),
            coproduct_quad: QuadratureSpec::default(),
            bracket_quad: QuadratureSpec::default().with_tolerance(1e-10),
        }
    }
}

/// The uniform window of the Fourier-side bracket check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub beta_max: f64,
    pub beta_step: f64,
    pub a_lo: f64,
    pub a_hi: f64,
    pub a_step: f64,
    pub panel_order: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { beta_max: 2.0, beta_step: 0.01, a_lo: 0.6, a_hi: 1.45, a_step: 0.005, panel_order: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FourierConfig {
    pub window: WindowConfig,
    pub intertwining: IntertwiningGrid,
    pub group_draws: usize,
}

impl Default for FourierConfig {
    fn default() -> Self {
        FourierConfig { window: WindowConfig::default(), intertwining: IntertwiningGrid::default(), group_draws: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("axblab-out"), formats: vec![Format::Json, Format::Csv, Format::Markdown] }
    }
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {x}")))
    }
}

fn nonzero(name: &str, n: usize) -> Result<()> {
    if n > 0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive")))
    }
}

impl SuiteConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SuiteConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        SuiteConfig::from_toml_str(&text)
    }

    /// The configuration recorded in a report.
    pub fn from_value(v: &serde_json::Value) -> Result<Self> {
        let cfg: SuiteConfig = serde_json::from_value(v.clone()).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_value(&self) -> Result<serde_json::Value> {
        serde_json::to_value(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let quad = |name: &str, q: &QuadratureSpec| q.validate().map_err(|e| Error::Config(format!("{name}: {e}")));
        quad("quadrature", &self.quadrature)?;
        let s = &self.samples;
        for (name, n) in [
            ("samples.groupoid_triples", s.groupoid_triples),
            ("samples.modular_points", s.modular_points),
            ("samples.decomposition_draws", s.decomposition_draws),
            ("samples.cocycle_points", s.cocycle_points),
            ("samples.cocycle_functions", s.cocycle_functions),
            ("samples.diffeo_points", s.diffeo_points),
            ("samples.intertwining_pairs", s.intertwining_pairs),
            ("samples.intertwining_probes", s.intertwining_probes),
            ("samples.measure_draws", s.measure_draws),
            ("samples.hilbert_schmidt_pairs", s.hilbert_schmidt_pairs),
            ("samples.generator_functions", s.generator_functions),
            ("samples.coproduct_functions", s.coproduct_functions),
            ("samples.comparison_points", s.comparison_points),
            ("deform.pairs", self.deform.pairs),
            ("fourier.group_draws", self.fourier.group_draws),
        ] {
            nonzero(name, n)?;
        }
        positive("twist.margin", self.twist.margin)?;

        let d = &self.deform;
        if !(d.big_m > 1.0 && d.coproduct_big_m > 1.0) {
            return Err(Error::Config("support classes need M > 1".into()));
        }
        if d.s_grid.len() < 3 {
            return Err(Error::Config("deform.s_grid needs at least three values for a slope".into()));
        }
        for &x in &d.s_grid {
            positive("deform.s_grid entries", x)?;
            if x >= 1.0 / (d.big_m * d.big_m) {
                return Err(Error::Config(format!("s = {x} is not below 1/M² for M = {}", d.big_m)));
            }
        }
        if d.s_grid.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("deform.s_grid must be strictly decreasing".into()));
        }
        if !(d.inset >= 0.0) {
            return Err(Error::Config("deform.inset must be nonnegative".into()));
        }
        positive("deform.halfwidths", d.halfwidths[0])?;
        if d.halfwidths[1] < d.halfwidths[0] {
            return Err(Error::Config("deform.halfwidths must be ordered".into()));
        }
        d.table.validate().map_err(|e| Error::Config(format!("deform.table: {e}")))?;
        quad("deform.coproduct_quad", &d.coproduct_quad)?;
        quad("deform.bracket_quad", &d.bracket_quad)?;
        let n = &d.coproduct_norm;
        for (name, v) in [("scan_points", n.scan_points), ("panels", n.panels), ("sweeps", n.sweeps)] {
            nonzero(&format!("deform.coproduct_norm.{name}"), v)?;
        }
        if n.order < 2 {
            return Err(Error::Config("deform.coproduct_norm.order must be at least 2".into()));
        }

        let w = &self.fourier.window;
        for (name, v) in [("beta_max", w.beta_max), ("beta_step", w.beta_step), ("a_lo", w.a_lo), ("a_step", w.a_step)] {
            positive(&format!("fourier.window.{name}"), v)?;
        }
        if w.a_hi <= w.a_lo {
            return Err(Error::Config("fourier.window needs a_lo < a_hi".into()));
        }
        nonzero("fourier.window.panel_order", w.panel_order)?;
        let g = &self.fourier.intertwining;
        if g.beta.is_empty() || g.a.is_empty() || g.a.contains(&0.0) {
            return Err(Error::Config("fourier.intertwining needs nonempty grids with a ≠ 0".into()));
        }
        nonzero("fourier.intertwining.order", g.order)?;
        quad("fourier.intertwining.quad", &g.quad)?;
        if self.output.formats.is_empty() {
            return Err(Error::Config("output.formats is empty".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = SuiteConfig::default();
        cfg.validate().unwrap();
        let text = toml::to_string(&cfg).unwrap();
        assert_eq!(SuiteConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(SuiteConfig::from_value(&cfg.to_value().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg =
            SuiteConfig::from_toml_str("seed = 9\n[samples]\ncocycle_points = 50\n[twist]\norientation = \"paper\"\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.samples.cocycle_points, 50);
        assert_eq!(cfg.samples.modular_points, 1000);
        assert_eq!(cfg.twist.orientation, crate::twist::Orientation::Direct);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_numbers() {
        for bad in [
            "sed = 3",
            "[samples]\ncocycle_pts = 3",
            "[samples]\ncocycle_points = 0",
            "[quadrature]\ntolerance = -1.0",
            "[twist]\nmargin = 0.0",
            "[deform]\ns_grid = [0.01, 0.1, 0.001]",
            "[deform]\ns_grid = [0.3, 0.1, 0.01]",
            "[deform]\nbig_m = 1.0",
            "[fourier.window]\nbeta_step = 0.0",
            "[output]\nformats = []",
            "[output]\nformats = [\"yaml\"]",
        ] {
            assert!(matches!(SuiteConfig::from_toml_str(bad), Err(Error::Config(_))), "{bad}");
        }
    }
}
