//! Run configuration: TOML file merged with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hesitator_core::catalog::{load_catalog, synthesize_with, AttributeSchema, Catalog, SynthSpec};
use hesitator_core::domain::Level;
use hesitator_core::hesitation::CalibrationTable;
use hesitator_core::llm::LlmSettings;
use hesitator_experiments::runner::Condition;
use hesitator_experiments::{standard_conditions, Curve, EngineConfig, OverloadCondition, ProviderNames, RunSettings, SweepSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub assortment: usize,
    pub attributes: usize,
    pub time_pressure: Level,
    pub format: Level,
    pub uncertainty: Level,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { assortment: 3, attributes: 8, time_pressure: Level::MID, format: Level::LOW, uncertainty: Level::MID }
    }
}

impl SimulateConfig {
    pub fn condition(&self) -> Condition {
        Condition {
            assortment: self.assortment,
            attributes: self.attributes,
            time_pressure: self.time_pressure,
            format: self.format,
            uncertainty: self.uncertainty,
        }
    }
}

/// Overrides applied on top of the standard grid of each curve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub assortment_grid: Option<Vec<usize>>,
    pub attribute_grid: Option<Vec<usize>>,
    pub fixed_assortment: Option<usize>,
    pub fixed_attributes: Option<usize>,
    pub time_pressure: Option<Level>,
    pub format: Option<Level>,
    pub uncertainties: Option<Vec<Level>>,
}

impl SweepGrid {
    pub fn spec(&self, curve: Curve) -> SweepSpec {
        let mut s = SweepSpec::standard(curve);
        if let Some(g) = &self.assortment_grid {
            s.assortment_grid = g.clone();
        }
        if let Some(g) = &self.attribute_grid {
            s.attribute_grid = g.clone();
        }
        if let Some(n) = self.fixed_assortment {
            s.fixed_assortment = n;
        }
        if let Some(k) = self.fixed_attributes {
            s.fixed_attributes = k;
        }
        if let Some(l) = self.time_pressure {
            s.time_pressure = l;
        }
        if let Some(l) = self.format {
            s.format = l;
        }
        if let Some(u) = &self.uncertainties {
            s.uncertainties = u.clone();
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub base_seed: u64,
    pub sessions: usize,
    pub workers: usize,
    pub out: PathBuf,
    /// `rule` or `external`; picks the perception and response providers.
    pub provider: String,
    pub strategy: String,
    pub calibration: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub synth: SynthSpec,
    pub engine: EngineConfig,
    pub llm: LlmSettings,
    pub simulate: SimulateConfig,
    pub sweep: SweepGrid,
    pub conditions: Vec<OverloadCondition>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let run = RunSettings::default();
        RunConfig {
            base_seed: run.base_seed,
            sessions: run.sessions,
            workers: run.workers,
            out: PathBuf::from("results"),
            provider: "rule".into(),
            strategy: "structured".into(),
            calibration: None,
            catalog: None,
            schema: None,
            synth: SynthSpec::default(),
            engine: EngineConfig::default(),
            llm: LlmSettings::default(),
            simulate: SimulateConfig::default(),
            sweep: SweepGrid::default(),
            conditions: standard_conditions(),
        }
    }
}

/// Values given on the command line; each one that is set replaces the
/// file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub sessions: Option<usize>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub provider: Option<String>,
    pub calibration: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(RunConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("cannot read config {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("invalid config {}", p.display()))
            }
        }
    }

    /// Applies overrides, loads the calibration file and checks the result.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self> {
        if let Some(s) = o.seed {
            self.base_seed = s;
        }
        if let Some(n) = o.sessions {
            self.sessions = n;
        }
        if let Some(p) = &o.out {
            self.out = p.clone();
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if let Some(p) = &o.provider {
            self.provider = p.clone();
        }
        if let Some(p) = &o.calibration {
            self.calibration = Some(p.clone());
        }
        if let Some(p) = &self.calibration {
            self.engine.user.calibration = load_calibration(p)?;
        }
        if self.sessions == 0 {
            bail!("sessions must be at least 1");
        }
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if !matches!(self.provider.as_str(), "rule" | "external") {
            bail!("unknown provider `{}` (expected rule or external)", self.provider);
        }
        if self.catalog.is_some() != self.schema.is_some() {
            bail!("`catalog` and `schema` must be given together");
        }
        self.engine.user.calibration.validate()?;
        Ok(self)
    }

    pub fn settings(&self) -> RunSettings {
        RunSettings { sessions: self.sessions, base_seed: self.base_seed, workers: self.workers }
    }

    pub fn provider_names(&self) -> ProviderNames {
        let (perception, response) = match self.provider.as_str() {
            "external" => ("external", "external"),
            _ => ("rule", "template"),
        };
        ProviderNames { strategy: self.strategy.clone(), perception: perception.into(), response: response.into() }
    }

    pub fn catalog(&self) -> Result<Catalog> {
        match (&self.catalog, &self.schema) {
            (Some(c), Some(s)) => {
                let text = fs::read_to_string(s).with_context(|| format!("cannot read schema {}", s.display()))?;
                let schema = AttributeSchema::from_toml(&text).with_context(|| format!("invalid schema {}", s.display()))?;
                let file = fs::File::open(c).with_context(|| format!("cannot open catalog {}", c.display()))?;
                load_catalog(std::io::BufReader::new(file), &schema).with_context(|| format!("invalid catalog {}", c.display()))
            }
            _ => synthesize_with(&self.synth).context("cannot synthesize catalog"),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn load_calibration(path: &Path) -> Result<CalibrationTable> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read calibration {}", path.display()))?;
    CalibrationTable::from_toml(&text).with_context(|| format!("invalid calibration {}", path.display()))
}
