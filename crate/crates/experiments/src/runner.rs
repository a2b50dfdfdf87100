//! Parallel, schedule-independent execution of session batches.

use hesitator_core::dialogue::response::{self, ResponseProvider};
use hesitator_core::dialogue::{
    run_session, Presentation, Providers, SalesAgentConfig, SalesMode, SessionError, SessionResult, SessionSeed, SessionSetup, UserModel,
};
use hesitator_core::domain::{Level, Persona};
use hesitator_core::llm::LlmSettings;
use hesitator_core::perception::{self, PerceptionProvider};
use hesitator_core::profile::{generate_profile_with, ProfileConfig, ProfileError};
use hesitator_core::registry::RegistryError;
use hesitator_core::rng::{stream, Stream};
use hesitator_core::selection::{self, ResolvedConstraints, SelectionError, SelectionStrategy};
use hesitator_core::Catalog;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{context}, session {session}: {message}")]
    Session { context: String, session: u64, message: String },
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error("statistics: {0}")]
    Stats(#[from] crate::stats::StatsError),
    #[error("export: {0}")]
    Export(String),
}

/// Settings shared by every condition of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    #[serde(default)]
    pub user: UserModel,
    #[serde(default = "default_turns")]
    pub turn_limit: usize,
    #[serde(default = "default_mode")]
    pub sales_mode: SalesMode,
    #[serde(default)]
    pub relevance: bool,
    #[serde(default = "mid")]
    pub openness: Level,
    #[serde(default = "mid")]
    pub pickiness: Level,
    #[serde(default = "default_concentration")]
    pub concentration: f64,
    #[serde(default = "default_floor")]
    pub attribute_floor: f64,
    #[serde(default)]
    pub category: Option<String>,
}

fn default_turns() -> usize {
    20
}
fn default_mode() -> SalesMode {
    SalesMode::Basic
}
fn mid() -> Level {
    Level::MID
}
fn default_concentration() -> f64 {
    0.3
}
fn default_floor() -> f64 {
    0.25
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            user: UserModel::default(),
            turn_limit: default_turns(),
            sales_mode: default_mode(),
            relevance: false,
            openness: mid(),
            pickiness: mid(),
            concentration: default_concentration(),
            attribute_floor: default_floor(),
            category: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSettings {
    pub sessions: usize,
    pub base_seed: u64,
    pub workers: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { sessions: 200, base_seed: 20240501, workers: 1 }
    }
}

/// Environment of one batch of sessions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub assortment: usize,
    pub attributes: usize,
    pub time_pressure: Level,
    pub format: Level,
    pub uncertainty: Level,
}

/// Named component choices resolved through the registries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderNames {
    pub strategy: String,
    pub perception: String,
    pub response: String,
}

impl Default for ProviderNames {
    fn default() -> Self {
        ProviderNames { strategy: "structured".into(), perception: "rule".into(), response: "template".into() }
    }
}

pub struct BuiltProviders {
    pub strategy: Box<dyn SelectionStrategy>,
    pub perception: Box<dyn PerceptionProvider>,
    pub response: Box<dyn ResponseProvider>,
}

impl BuiltProviders {
    pub fn build(names: &ProviderNames, llm: &LlmSettings) -> Result<Self, ExperimentError> {
        Ok(BuiltProviders {
            strategy: selection::strategies().build(&names.strategy, &())?,
            perception: perception::providers().build(&names.perception, llm)?,
            response: response::providers().build(&names.response, llm)?,
        })
    }

    pub fn view(&self) -> Providers<'_> {
        Providers { strategy: self.strategy.as_ref(), perception: self.perception.as_ref(), response: self.response.as_ref() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub index: u64,
    pub purchased: bool,
    pub turns: usize,
}

pub fn profile_config(engine: &EngineConfig, condition: &Condition, seed: u64) -> ProfileConfig {
    let persona = Persona { openness: engine.openness, pickiness: engine.pickiness, uncertainty: condition.uncertainty };
    let mut pc = ProfileConfig::new(seed, persona, condition.time_pressure);
    pc.category = engine.category.clone();
    pc.concentration = engine.concentration;
    pc.attribute_floor = engine.attribute_floor;
    pc
}

pub fn sales_config(engine: &EngineConfig, condition: &Condition) -> SalesAgentConfig {
    SalesAgentConfig {
        assortment_size: condition.assortment,
        attributes_shown: condition.attributes,
        presentation: Presentation::for_level(condition.format),
        mode: engine.sales_mode,
        relevance: engine.relevance,
    }
}

fn session_error(context: &str, session: u64, message: String) -> ExperimentError {
    ExperimentError::Session { context: context.to_string(), session, message }
}

/// Runs one full session for index `i`. The profile comes from the
/// session's profile stream, so it depends only on (base_seed, i) and the
/// condition's persona and scenario levels.
pub fn run_one(
    engine: &EngineConfig,
    catalog: &Catalog,
    providers: Providers<'_>,
    condition: &Condition,
    base_seed: u64,
    i: u64,
    context: &str,
) -> Result<SessionResult, ExperimentError> {
    let pc = profile_config(engine, condition, base_seed);
    let mut rng = stream(base_seed, i, Stream::Profile);
    let profile = generate_profile_with(&pc, catalog, &mut rng).map_err(|e: ProfileError| session_error(context, i, e.to_string()))?;
    let constraints = ResolvedConstraints::resolve(&profile.constraints, catalog.schema())
        .map_err(|e: SelectionError| session_error(context, i, e.to_string()))?;
    let sales = sales_config(engine, condition);
    let setup = SessionSetup {
        state: &profile.state,
        weights: &profile.weights,
        constraints: &constraints,
        sales: &sales,
        model: &engine.user,
        providers,
        catalog,
    };
    run_session(&setup, SessionSeed { base_seed, index: i }, engine.turn_limit)
        .map_err(|e: SessionError| session_error(context, i, e.to_string()))
}

pub fn validate(engine: &EngineConfig, catalog: &Catalog, condition: &Condition, settings: &RunSettings) -> Result<(), ExperimentError> {
    if settings.sessions == 0 {
        return Err(ExperimentError::Config("sessions must be at least 1".into()));
    }
    if settings.workers == 0 {
        return Err(ExperimentError::Config("workers must be at least 1".into()));
    }
    if engine.turn_limit == 0 {
        return Err(ExperimentError::Config("turn_limit must be at least 1".into()));
    }
    sales_config(engine, condition).validate(catalog).map_err(|e| ExperimentError::Config(e.to_string()))?;
    engine.user.selection.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
    engine.user.calibration.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
    engine.user.hesitation.validate().map_err(|e| ExperimentError::Config(e.to_string()))?;
    Ok(())
}

/// Maps `f` over session indices `0..settings.sessions` on a pool of
/// `settings.workers` threads, returning results in index order.
pub fn run_indexed<T, F>(settings: &RunSettings, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(u64) -> Result<T, ExperimentError> + Sync + Send,
{
    if settings.workers == 0 {
        return Err(ExperimentError::Config("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.workers)
        .build()
        .map_err(|e| ExperimentError::Config(e.to_string()))?;
    pool.install(|| (0..settings.sessions as u64).into_par_iter().map(&f).collect())
}

/// Runs every session of one condition and keeps the full results.
pub fn run_condition_full(
    engine: &EngineConfig,
    catalog: &Catalog,
    providers: Providers<'_>,
    condition: &Condition,
    settings: &RunSettings,
    context: &str,
) -> Result<Vec<SessionResult>, ExperimentError> {
    validate(engine, catalog, condition, settings)?;
    run_indexed(settings, |i| run_one(engine, catalog, providers, condition, settings.base_seed, i, context))
}

/// Runs `settings.sessions` sessions of one condition on a pool of
/// `settings.workers` threads. Results come back in session order.
pub fn run_condition(
    engine: &EngineConfig,
    catalog: &Catalog,
    providers: Providers<'_>,
    condition: &Condition,
    settings: &RunSettings,
    context: &str,
) -> Result<Vec<SessionSummary>, ExperimentError> {
    validate(engine, catalog, condition, settings)?;
    run_indexed(settings, |i| {
        let r = run_one(engine, catalog, providers, condition, settings.base_seed, i, context)?;
        Ok(SessionSummary { index: i, purchased: r.purchased, turns: r.terminal_turn })
    })
}
