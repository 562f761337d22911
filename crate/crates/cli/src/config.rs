use std::path::Path;

use blender_core::dynamics::{Bump, ConeSampling, MapFamily};
use blender_core::geometry::Box3;
use blender_core::growth::ExperimentConfig;
use blender_core::params::{ParamRanges, SearchOptions};
use blender_core::schedule::IntervalSchedule;
use blender_core::symbolic::{Code, CodeLiteral};
use blender_core::{ParamSet, Point3};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub delta: f64,
    #[serde(default)]
    pub bumps: Vec<Bump>,
}

/// Everything a command may read. Fields a command does not use are ignored
/// by it, unknown fields are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub params: Option<ParamSet>,
    pub perturbation: Option<Perturbation>,
    pub seed: Option<u64>,
    pub resolution: Option<usize>,
    pub point: Option<Point3>,
    /// Second orbit start for `wasserstein` sweeps.
    pub other_point: Option<Point3>,
    pub n: Option<u64>,
    pub code: Option<CodeLiteral>,
    pub schedule: Option<IntervalSchedule>,
    #[serde(rename = "box")]
    pub region: Option<Box3>,
    pub horizon: Option<u64>,
    pub refine: Option<u32>,
    pub ranges: Option<ParamRanges>,
    pub search: Option<SearchOptions>,
    pub checkpoints: Option<Vec<u64>>,
    pub floor: Option<f64>,
    pub cell: Option<f64>,
    pub mu: Option<Vec<Point3>>,
    pub nu: Option<Vec<Point3>>,
    pub sizes: Option<Vec<u64>>,
    /// Record wall-clock time in the W1 sweep; off by default so outputs
    /// stay byte-identical.
    #[serde(default)]
    pub timing: bool,
    pub tolerance: Option<f64>,
    pub cone: Option<ConeSampling>,
    pub growth: Option<ExperimentConfig>,
}

fn missing(field: &str) -> CliError {
    CliError::Config(format!("missing field '{field}'"))
}

impl Config {
    pub fn load(path: Option<&Path>) -> CliResult<Config> {
        let Some(path) = path else { return Ok(Config::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn params(&self) -> ParamSet {
        self.params.unwrap_or_else(ParamSet::reference)
    }

    pub fn family(&self) -> CliResult<MapFamily> {
        let p = self.params();
        match &self.perturbation {
            None => Ok(MapFamily::unperturbed(&p)),
            Some(pt) => Ok(MapFamily::perturbed(&p, pt.bumps.clone(), pt.delta)?),
        }
    }

    pub fn point(&self) -> CliResult<Point3> {
        self.point.ok_or_else(|| missing("point"))
    }

    pub fn n(&self) -> CliResult<u64> {
        self.n.ok_or_else(|| missing("n"))
    }

    pub fn code(&self) -> CliResult<Code> {
        let lit = self.code.as_ref().ok_or_else(|| missing("code"))?;
        Ok(Code::from_literal(lit)?)
    }

    pub fn schedule(&self) -> CliResult<IntervalSchedule> {
        let s = self.schedule.clone().ok_or_else(|| missing("schedule"))?;
        s.validate()?;
        Ok(s)
    }

    pub fn region(&self) -> CliResult<Box3> {
        self.region.ok_or_else(|| missing("box"))
    }

    pub fn horizon(&self) -> CliResult<u64> {
        self.horizon.ok_or_else(|| missing("horizon"))
    }

    pub fn seed(&self) -> CliResult<u64> {
        self.seed.ok_or_else(|| CliError::Config("a seed is required (config 'seed' or --seed)".into()))
    }

    pub fn checkpoints(&self) -> CliResult<&[u64]> {
        self.checkpoints.as_deref().ok_or_else(|| missing("checkpoints"))
    }
}
