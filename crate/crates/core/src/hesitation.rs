//! Overload composition, effect-size calibration and the arcsine mapping
//! from aggregate effect to acceptance probability.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{GlobalState, Level};

#[derive(Debug, Error, PartialEq)]
pub enum HesitationError {
    #[error("level {0} outside [1, 3]")]
    LevelRange(f64),
    #[error("calibration: {0}")]
    Calibration(String),
    #[error("P_base must lie strictly between 0 and 1, got {0}")]
    BaseProbability(f64),
}

/// Leaf intensities judged from the sales turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PerceivedLeaves {
    pub assortment: Level,
    pub dominance: Level,
    pub alignability: Level,
    pub attribute_count: Level,
    pub format: Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafScores {
    pub assortment: Level,
    pub dominance: Level,
    pub alignability: Level,
    pub attribute_count: Level,
    pub format: Level,
    pub time_pressure: Level,
    pub uncertainty: Level,
}

impl LeafScores {
    /// Adds the leaves fixed by the scenario and persona.
    pub fn from_perceived(p: PerceivedLeaves, state: &GlobalState) -> Self {
        LeafScores {
            assortment: p.assortment,
            dominance: p.dominance,
            alignability: p.alignability,
            attribute_count: p.attribute_count,
            format: p.format,
            time_pressure: state.scenario.time_pressure,
            uncertainty: state.persona.uncertainty,
        }
    }
}

/// v = [v_a, v_s, v_t, v_u].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverloadVector {
    pub assortment: f64,
    pub complexity: f64,
    pub difficulty: f64,
    pub uncertainty: f64,
}

impl OverloadVector {
    pub fn new(assortment: f64, complexity: f64, difficulty: f64, uncertainty: f64) -> Self {
        OverloadVector { assortment, complexity, difficulty, uncertainty }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.assortment, self.complexity, self.difficulty, self.uncertainty]
    }
}

pub fn compose_factors(l: &LeafScores) -> OverloadVector {
    OverloadVector {
        assortment: l.assortment.as_f64(),
        complexity: (l.dominance.as_f64() + l.alignability.as_f64()) / 2.0,
        difficulty: (l.time_pressure.as_f64() + l.attribute_count.as_f64() + l.format.as_f64()) / 3.0,
        uncertainty: l.uncertainty.as_f64(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorCalibration {
    pub beta: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

impl FactorCalibration {
    pub const fn new(beta: f64, delta_min: f64, delta_max: f64) -> Self {
        FactorCalibration { beta, delta_min, delta_max }
    }
}

/// Decision-goal moderators, zero for goal-directed private purchases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecisionGoal {
    #[serde(default)]
    pub decision_intent: f64,
    #[serde(default)]
    pub decision_accountability: f64,
}

impl Default for DecisionGoal {
    fn default() -> Self {
        DecisionGoal { decision_intent: 0.0, decision_accountability: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    #[serde(default = "one")]
    pub format_version: u32,
    #[serde(default = "CalibrationTable::default_assortment")]
    pub assortment: FactorCalibration,
    #[serde(default = "CalibrationTable::default_complexity")]
    pub complexity: FactorCalibration,
    #[serde(default = "CalibrationTable::default_difficulty")]
    pub difficulty: FactorCalibration,
    #[serde(default = "CalibrationTable::default_uncertainty")]
    pub uncertainty: FactorCalibration,
    #[serde(default)]
    pub decision_goal: DecisionGoal,
}

fn one() -> u32 {
    1
}

pub const FACTOR_NAMES: [&str; 4] = ["assortment", "complexity", "difficulty", "uncertainty"];

impl Default for CalibrationTable {
    fn default() -> Self {
        CalibrationTable {
            format_version: 1,
            assortment: Self::default_assortment(),
            complexity: Self::default_complexity(),
            difficulty: Self::default_difficulty(),
            uncertainty: Self::default_uncertainty(),
            decision_goal: DecisionGoal::default(),
        }
    }
}

impl CalibrationTable {
    fn default_assortment() -> FactorCalibration {
        FactorCalibration::new(0.41, -0.18, 1.22)
    }
    fn default_complexity() -> FactorCalibration {
        FactorCalibration::new(0.55, -1.65, 0.48)
    }
    fn default_difficulty() -> FactorCalibration {
        FactorCalibration::new(0.37, -0.59, 0.81)
    }
    fn default_uncertainty() -> FactorCalibration {
        FactorCalibration::new(0.32, -1.34, 1.21)
    }

    pub fn factors(&self) -> [FactorCalibration; 4] {
        [self.assortment, self.complexity, self.difficulty, self.uncertainty]
    }

    /// Parses a TOML override; sections left out keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self, HesitationError> {
        if text.trim().is_empty() {
            return Err(HesitationError::Calibration("calibration file is empty".into()));
        }
        let table: CalibrationTable = toml::from_str(text).map_err(|e| HesitationError::Calibration(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("calibration serializes")
    }

    pub fn validate(&self) -> Result<(), HesitationError> {
        if self.format_version != 1 {
            return Err(HesitationError::Calibration(format!("unsupported format_version {}", self.format_version)));
        }
        for (name, f) in FACTOR_NAMES.iter().zip(self.factors()) {
            if !(f.beta.is_finite() && f.delta_min.is_finite() && f.delta_max.is_finite()) {
                return Err(HesitationError::Calibration(format!("factor `{name}` has a non-finite value")));
            }
            if f.delta_min > f.delta_max {
                return Err(HesitationError::Calibration(format!(
                    "factor `{name}`: delta_min {} exceeds delta_max {}",
                    f.delta_min, f.delta_max
                )));
            }
        }
        Ok(())
    }

    /// Smallest and largest untruncated aggregate effect over levels in [1, 3].
    pub fn attainable_range(&self) -> (f64, f64) {
        let goal = self.decision_goal.decision_intent + self.decision_goal.decision_accountability;
        self.factors().iter().fold((goal, goal), |(lo, hi), f| {
            let a = f.beta * f.delta_min;
            let b = f.beta * f.delta_max;
            (lo + a.min(b), hi + a.max(b))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HesitationParams {
    pub p_base: f64,
}

impl Default for HesitationParams {
    fn default() -> Self {
        HesitationParams { p_base: 0.5 }
    }
}

impl HesitationParams {
    pub fn validate(&self) -> Result<(), HesitationError> {
        if self.p_base > 0.0 && self.p_base < 1.0 {
            Ok(())
        } else {
            Err(HesitationError::BaseProbability(self.p_base))
        }
    }
}

pub fn interp_effect(level: f64, delta_min: f64, delta_max: f64) -> Result<f64, HesitationError> {
    if !(1.0..=3.0).contains(&level) {
        return Err(HesitationError::LevelRange(level));
    }
    Ok(delta_min + (level - 1.0) / 2.0 * (delta_max - delta_min))
}

/// Per-factor weighted effects beta_k * f(v_k).
pub fn factor_effects(v: &OverloadVector, table: &CalibrationTable) -> Result<[f64; 4], HesitationError> {
    let mut out = [0.0; 4];
    for ((slot, level), f) in out.iter_mut().zip(v.as_array()).zip(table.factors()) {
        *slot = f.beta * interp_effect(level, f.delta_min, f.delta_max)?;
    }
    Ok(out)
}

pub fn total_effect(v: &OverloadVector, table: &CalibrationTable) -> Result<f64, HesitationError> {
    let goal = table.decision_goal.decision_intent + table.decision_goal.decision_accountability;
    Ok(factor_effects(v, table)?.iter().sum::<f64>() + goal)
}

/// arcsin(sqrt(p)) as an angle of the (sqrt(1-p), sqrt(p)) triangle.
fn half_angle(p: f64) -> f64 {
    p.sqrt().atan2((1.0 - p).sqrt())
}

/// [2(arcsin sqrt(p) - pi/2), 2 arcsin sqrt(p)].
pub fn clamp_bounds(p_base: f64) -> (f64, f64) {
    (-2.0 * half_angle(1.0 - p_base), 2.0 * half_angle(p_base))
}

pub fn clamp_effect(d: f64, p_base: f64) -> f64 {
    let (lo, hi) = clamp_bounds(p_base);
    d.clamp(lo, hi)
}

/// sin^2(arcsin sqrt(p) - d/2), expanded so that d = 0 returns p exactly.
pub fn accept_probability(d: f64, p_base: f64) -> f64 {
    let (s, c) = (d / 2.0).sin_cos();
    let p = p_base * c * c + (1.0 - p_base) * s * s - (p_base * (1.0 - p_base)).sqrt() * d.sin();
    p.clamp(0.0, 1.0)
}

pub fn inverse_effect(p_accept: f64, p_base: f64) -> f64 {
    2.0 * (half_angle(p_base) - half_angle(p_accept))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Commit {
    Purchase,
    Defer,
}

/// Draws epsilon uniformly from [0, 1); purchase iff epsilon <= P_accept.
pub fn decide_commit<R: Rng + ?Sized>(p_accept: f64, rng: &mut R) -> (f64, Commit) {
    let eps: f64 = rng.gen();
    let c = if eps <= p_accept { Commit::Purchase } else { Commit::Defer };
    (eps, c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HesitationOutcome {
    pub leaves: LeafScores,
    pub v: OverloadVector,
    pub effects: [f64; 4],
    pub d_total_raw: f64,
    pub d_total: f64,
    pub p_accept: f64,
    pub epsilon: f64,
    pub decision: Commit,
}

/// Runs compose, calibration, truncation, mapping and the commit draw.
pub fn hesitate<R: Rng + ?Sized>(
    leaves: LeafScores,
    table: &CalibrationTable,
    params: &HesitationParams,
    rng: &mut R,
) -> Result<HesitationOutcome, HesitationError> {
    params.validate()?;
    let v = compose_factors(&leaves);
    let effects = factor_effects(&v, table)?;
    let d_total_raw = total_effect(&v, table)?;
    let d_total = clamp_effect(d_total_raw, params.p_base);
    let p_accept = accept_probability(d_total, params.p_base);
    let (epsilon, decision) = decide_commit(p_accept, rng);
    Ok(HesitationOutcome { leaves, v, effects, d_total_raw, d_total, p_accept, epsilon, decision })
}
