//! Overload contrast, information sweeps and the selection ablation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use hesitator_core::dialogue::Providers;
use hesitator_core::domain::Level;
use hesitator_core::Catalog;
use serde::{Deserialize, Serialize};

use crate::runner::{run_condition, Condition, EngineConfig, ExperimentError, RunSettings, SessionSummary};
use crate::stats::{wilcoxon_signed_rank, StatsError, Wilcoxon};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverloadCondition {
    pub name: String,
    pub time_pressure: Level,
    pub format: Level,
    pub uncertainty: Level,
    #[serde(default = "default_assortment")]
    pub assortment: usize,
    #[serde(default = "default_attributes")]
    pub attributes: usize,
}

fn default_assortment() -> usize {
    3
}

fn default_attributes() -> usize {
    8
}

impl OverloadCondition {
    pub fn new(name: &str, time_pressure: u8, format: u8, uncertainty: u8) -> Self {
        let l = |v: u8| Level::new(i64::from(v)).expect("level literal");
        OverloadCondition {
            name: name.to_string(),
            time_pressure: l(time_pressure),
            format: l(format),
            uncertainty: l(uncertainty),
            assortment: default_assortment(),
            attributes: default_attributes(),
        }
    }

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

/// Low, Medium and Severe overload as (v_tp, v_tf, v_u).
pub fn standard_conditions() -> Vec<OverloadCondition> {
    vec![
        OverloadCondition::new("Low", 1, 1, 1),
        OverloadCondition::new("Medium", 2, 1, 2),
        OverloadCondition::new("Severe", 3, 3, 3),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: OverloadCondition,
    pub sessions: Vec<SessionSummary>,
    pub purchases: usize,
    pub sr: f64,
    pub mean_turns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverloadResult {
    pub conditions: Vec<ConditionResult>,
    /// Names of the two conditions compared by the paired test.
    pub compared: (String, String),
    pub test: Option<Wilcoxon>,
    pub diagnostic: Option<String>,
}

impl OverloadResult {
    pub fn sr(&self, name: &str) -> Option<f64> {
        self.conditions.iter().find(|c| c.condition.name == name).map(|c| c.sr)
    }

    /// SR of the first compared condition minus SR of the second.
    pub fn sr_difference(&self) -> f64 {
        self.sr(&self.compared.0).unwrap_or(0.0) - self.sr(&self.compared.1).unwrap_or(0.0)
    }
}

fn summarize(condition: OverloadCondition, sessions: Vec<SessionSummary>) -> ConditionResult {
    let purchases = sessions.iter().filter(|s| s.purchased).count();
    let n = sessions.len().max(1) as f64;
    let mean_turns = sessions.iter().map(|s| s.turns as f64).sum::<f64>() / n;
    ConditionResult { condition, purchases, sr: purchases as f64 / n, mean_turns, sessions }
}

/// Runs every condition over the same session indices and tests the first
/// condition named `Low` (or the first listed) against `Severe` (or the last).
pub fn run_overload_experiment(
    conditions: &[OverloadCondition],
    engine: &EngineConfig,
    catalog: &Catalog,
    providers: Providers<'_>,
    settings: &RunSettings,
) -> Result<OverloadResult, ExperimentError> {
    if conditions.is_empty() {
        return Err(ExperimentError::Config("no conditions".into()));
    }
    let mut results = Vec::with_capacity(conditions.len());
    for c in conditions {
        let sessions = run_condition(engine, catalog, providers, &c.condition(), settings, &format!("condition {}", c.name))?;
        results.push(summarize(c.clone(), sessions));
    }
    let a = results.iter().position(|r| r.condition.name == "Low").unwrap_or(0);
    let b = results.iter().position(|r| r.condition.name == "Severe").unwrap_or(results.len() - 1);
    let pairs: Vec<(f64, f64)> = results[a]
        .sessions
        .iter()
        .zip(&results[b].sessions)
        .map(|(x, y)| (f64::from(u8::from(x.purchased)), f64::from(u8::from(y.purchased))))
        .collect();
    let (test, diagnostic) = match wilcoxon_signed_rank(&pairs) {
        Ok(w) => (Some(w), None),
        Err(StatsError::Degenerate) => {
            (None, Some("all paired differences are zero; treated as not significant".to_string()))
        }
        Err(e) => return Err(e.into()),
    };
    Ok(OverloadResult {
        compared: (results[a].condition.name.clone(), results[b].condition.name.clone()),
        conditions: results,
        test,
        diagnostic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curve {
    TotalInfo,
    Attributes,
    Assortment,
}

impl Curve {
    pub fn as_str(self) -> &'static str {
        match self {
            Curve::TotalInfo => "total_info",
            Curve::Attributes => "attributes",
            Curve::Assortment => "assortment",
        }
    }

    pub fn axis_label(self) -> &'static str {
        match self {
            Curve::TotalInfo => "items x attributes",
            Curve::Attributes => "attributes shown",
            Curve::Assortment => "assortment size",
        }
    }
}

impl fmt::Display for Curve {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Curve {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "total_info" => Ok(Curve::TotalInfo),
            "attributes" => Ok(Curve::Attributes),
            "assortment" => Ok(Curve::Assortment),
            _ => Err(format!("unknown curve `{s}` (expected total_info, attributes or assortment)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub curve: Curve,
    pub assortment_grid: Vec<usize>,
    pub attribute_grid: Vec<usize>,
    /// Assortment size held fixed on the attributes curve.
    pub fixed_assortment: usize,
    /// Attribute count held fixed on the assortment curve.
    pub fixed_attributes: usize,
    pub time_pressure: Level,
    pub format: Level,
    pub uncertainties: Vec<Level>,
}

impl SweepSpec {
    pub fn standard(curve: Curve) -> Self {
        SweepSpec {
            curve,
            assortment_grid: vec![1, 3, 6, 9, 12],
            attribute_grid: vec![2, 4, 6, 8, 10],
            fixed_assortment: 3,
            fixed_attributes: 5,
            time_pressure: Level::MID,
            format: Level::LOW,
            uncertainties: Level::ALL.to_vec(),
        }
    }

    /// (assortment, attributes) combinations and the axis value each feeds.
    pub fn grid(&self) -> Vec<(usize, usize, usize)> {
        match self.curve {
            Curve::Assortment => self.assortment_grid.iter().map(|&n| (n, self.fixed_attributes, n)).collect(),
            Curve::Attributes => self.attribute_grid.iter().map(|&k| (self.fixed_assortment, k, k)).collect(),
            Curve::TotalInfo => self
                .assortment_grid
                .iter()
                .flat_map(|&n| self.attribute_grid.iter().map(move |&k| (n, k, n * k)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub uncertainty: Level,
    pub axis: usize,
    pub sessions: usize,
    pub purchases: usize,
    pub sr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub curve: Curve,
    pub variant: String,
    pub points: Vec<CurvePoint>,
}

impl SweepResult {
    /// (axis, SR) pairs for one uncertainty level in axis order.
    pub fn series(&self, uncertainty: Level) -> Vec<(usize, f64)> {
        self.points.iter().filter(|p| p.uncertainty == uncertainty).map(|p| (p.axis, p.sr)).collect()
    }

    pub fn sr_values(&self, uncertainty: Level) -> Vec<f64> {
        self.series(uncertainty).into_iter().map(|x| x.1).collect()
    }
}

/// Runs the sweep; combinations sharing an axis value are pooled.
pub fn run_sweep(
    spec: &SweepSpec,
    engine: &EngineConfig,
    catalog: &Catalog,
    providers: Providers<'_>,
    settings: &RunSettings,
) -> Result<SweepResult, ExperimentError> {
    let grid = spec.grid();
    if grid.is_empty() || spec.uncertainties.is_empty() {
        return Err(ExperimentError::Config("sweep grid is empty".into()));
    }
    let mut points = Vec::new();
    for &u in &spec.uncertainties {
        let mut pooled: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
        for &(n, k, axis) in &grid {
            let condition = Condition { assortment: n, attributes: k, time_pressure: spec.time_pressure, format: spec.format, uncertainty: u };
            let context = format!("{} curve, v_u={u}, |I|={n}, N_attr={k}", spec.curve);
            let sessions = run_condition(engine, catalog, providers, &condition, settings, &context)?;
            let e = pooled.entry(axis).or_default();
            e.0 += sessions.len();
            e.1 += sessions.iter().filter(|s| s.purchased).count();
        }
        for (axis, (sessions, purchases)) in pooled {
            points.push(CurvePoint { uncertainty: u, axis, sessions, purchases, sr: purchases as f64 / sessions as f64 });
        }
    }
    Ok(SweepResult { curve: spec.curve, variant: providers.strategy.name().to_string(), points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub structured: SweepResult,
    pub flat: SweepResult,
}

/// Runs the same sweep (same seeds) under two selection strategies.
pub fn run_ablation(
    spec: &SweepSpec,
    engine: &EngineConfig,
    catalog: &Catalog,
    structured: Providers<'_>,
    flat: Providers<'_>,
    settings: &RunSettings,
) -> Result<AblationResult, ExperimentError> {
    Ok(AblationResult {
        structured: run_sweep(spec, engine, catalog, structured, settings)?,
        flat: run_sweep(spec, engine, catalog, flat, settings)?,
    })
}

/// Sign changes between consecutive nonzero first differences.
pub fn sign_changes(values: &[f64]) -> usize {
    let signs: Vec<bool> = values.windows(2).map(|w| w[1] - w[0]).filter(|d| *d != 0.0).map(|d| d > 0.0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Sign changes summed over the uncertainty overlays of a sweep.
pub fn total_sign_changes(result: &SweepResult) -> usize {
    let mut levels: Vec<Level> = result.points.iter().map(|p| p.uncertainty).collect();
    levels.dedup();
    levels.iter().map(|&u| sign_changes(&result.sr_values(u))).sum()
}
