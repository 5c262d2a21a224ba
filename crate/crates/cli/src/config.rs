//! Run configuration file (TOML). Every key is optional; command-line flags
//! override the file and built-in defaults fill whatever is left.
//!
//! ```toml
//! model = "lvs-additive"
//! seed = 1
//! threads = 8
//!
//! [params]            # true values for simulation, fixed values for fits
//! k = 1.0
//! c = 0.5
//! nu = 1.0
//!
//! [reference]         # optional, for percent errors in fit output
//! k = 1.0
//!
//! [simulate]
//! n_samples = 10000000
//! dt = 0.01
//! skip = 10000000     # defaults to n_samples
//! scheme = "rk-gill"  # or "euler-maruyama"
//! x0 = [0.0, 0.0]
//! output = "series.fts"
//! csv = "series.csv"  # optional plain-text copy
//!
//! [pdf]
//! input = "series.fts"
//! output = "pdf.csv"  # ".fgf" selects the binary format
//! lower = -4.0        # scalar or one value per axis
//! upper = 4.0
//! bins = 50
//!
//! [fitness]
//! output = "fitness.json"
//! fields = true       # also write residual and current fields
//!
//! [map]
//! a = { param = "k", lower = 0.5, upper = 1.5, points = 41 }
//! b = { param = "c", lower = 0.25, upper = 0.75, points = 41 }
//! output = "map.csv"
//!
//! [fit]
//! free = ["k", "c"]
//! init = { k = 2.0, c = 1.0 }
//! output = "fit.json"
//!
//! [sweep]
//! sweep = "nu"
//! solve = "c"
//! range = { lower = 0.04, upper = 1.0, points = 25 }   # or values = [...]
//! init = 0.3
//! mode = "warm"       # or "cold"
//! output = "sweep.csv"
//!
//! [optimizer]
//! tol_x = 1e-8
//! tol_f = 1e-12
//! max_evals = 2000
//! initial_scale = 0.1
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fpfit::estimator::SweepMode;
use fpfit::optim::NelderMeadOptions;
use fpfit::simulator::Scheme;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: Option<String>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub params: BTreeMap<String, f64>,
    pub reference: Option<BTreeMap<String, f64>>,
    pub simulate: SimulateSection,
    pub pdf: PdfSection,
    pub fitness: FitnessSection,
    pub map: MapSection,
    pub fit: FitSection,
    pub sweep: SweepSection,
    pub optimizer: Option<NelderMeadOptions>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub n_samples: Option<usize>,
    pub dt: Option<f64>,
    pub skip: Option<usize>,
    pub scheme: Option<Scheme>,
    pub x0: Option<Vec<f64>>,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

/// A bound given once for every axis or per axis.
#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Bound {
    Scalar(f64),
    PerAxis(Vec<f64>),
}

impl Bound {
    pub fn expand(&self, dim: usize) -> CliResult<Vec<f64>> {
        match self {
            Bound::Scalar(v) => Ok(vec![*v; dim]),
            Bound::PerAxis(v) if v.len() == 1 => Ok(vec![v[0]; dim]),
            Bound::PerAxis(v) if v.len() == dim => Ok(v.clone()),
            Bound::PerAxis(v) => Err(CliError::Config(format!(
                "bound has {} values but the data has {dim} axes",
                v.len()
            ))),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdfSection {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub lower: Option<Bound>,
    pub upper: Option<Bound>,
    pub bins: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitnessSection {
    pub output: Option<PathBuf>,
    pub fields: Option<bool>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub param: String,
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl std::str::FromStr for AxisSpec {
    type Err = String;

    /// `name:lower:upper:points`
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [param, lower, upper, points] = parts[..] else {
            return Err(format!("expected name:lower:upper:points, got `{s}`"));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number `{v}` in `{s}`"))
        };
        Ok(AxisSpec {
            param: param.trim().to_string(),
            lower: num(lower)?,
            upper: num(upper)?,
            points: points
                .trim()
                .parse()
                .map_err(|_| format!("bad point count `{points}` in `{s}`"))?,
        })
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSection {
    pub a: Option<AxisSpec>,
    pub b: Option<AxisSpec>,
    /// Overrides the point count of both axes.
    pub resolution: Option<usize>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitSection {
    pub free: Option<Vec<String>>,
    pub init: BTreeMap<String, f64>,
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub lower: f64,
    pub upper: f64,
    pub points: usize,
}

impl RangeSpec {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => vec![],
            1 => vec![self.lower],
            n => (0..n)
                .map(|i| {
                    if i == n - 1 {
                        self.upper
                    } else {
                        self.lower + (self.upper - self.lower) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }
}

impl std::str::FromStr for RangeSpec {
    type Err = String;

    /// `lower:upper:points`
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lower, upper, points] = parts[..] else {
            return Err(format!("expected lower:upper:points, got `{s}`"));
        };
        let num = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number `{v}` in `{s}`"))
        };
        Ok(RangeSpec {
            lower: num(lower)?,
            upper: num(upper)?,
            points: points
                .trim()
                .parse()
                .map_err(|_| format!("bad point count `{points}` in `{s}`"))?,
        })
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub sweep: Option<String>,
    pub solve: Option<String>,
    pub values: Option<Vec<f64>>,
    pub range: Option<RangeSpec>,
    pub init: Option<f64>,
    pub mode: Option<SweepMode>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// Parses `name=value,name=value`.
pub fn parse_assignments(s: &str) -> CliResult<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected name=value, got `{item}`")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("bad number in `{item}`")))?;
        if out.insert(name.trim().to_string(), value).is_some() {
            return Err(CliError::Config(format!("`{}` given twice", name.trim())));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let doc = include_str!("config.rs");
        let toml: String = doc
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = RunConfig::parse(&toml).unwrap();
        assert_eq!(cfg.params["c"], 0.5);
        assert_eq!(cfg.pdf.lower, Some(Bound::Scalar(-4.0)));
        assert_eq!(cfg.map.a.as_ref().unwrap().points, 41);
        assert_eq!(cfg.sweep.range.unwrap().values().len(), 25);
        assert_eq!(cfg.sweep.mode, Some(SweepMode::Warm));
        assert_eq!(cfg.simulate.scheme, Some(Scheme::RkGill));
        assert_eq!(cfg.optimizer.unwrap().max_evals, 2000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("modle = \"x\"").is_err());
        assert!(RunConfig::parse("[pdf]\nbin = 3").is_err());
    }

    #[test]
    fn assignments_and_specs() {
        let a = parse_assignments("k=1, c=-0.5").unwrap();
        assert_eq!(a["c"], -0.5);
        assert!(parse_assignments("k=1,k=2").is_err());
        assert!(parse_assignments("k").is_err());
        let ax: AxisSpec = "nu:-1:2.5:7".parse().unwrap();
        assert_eq!((ax.lower, ax.upper, ax.points), (-1.0, 2.5, 7));
        assert!("nu:1:2".parse::<AxisSpec>().is_err());
        let r: RangeSpec = "0:1:5".parse().unwrap();
        assert_eq!(r.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn bounds_expand() {
        assert_eq!(Bound::Scalar(2.0).expand(3).unwrap(), vec![2.0; 3]);
        assert_eq!(
            Bound::PerAxis(vec![1.0, 2.0]).expand(2).unwrap(),
            vec![1.0, 2.0]
        );
        assert!(Bound::PerAxis(vec![1.0, 2.0]).expand(3).is_err());
    }
}
