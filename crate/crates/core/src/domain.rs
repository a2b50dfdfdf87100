//! Persona, scenario, global state and dialogue history.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AttributeSchema, PRICE};
use crate::dialogue::{Intent, SalesTurn};

pub const DEFAULT_TURN_LIMIT: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("level must be 1, 2 or 3, got {0}")]
    InvalidLevel(i64),
    #[error("budget must be positive and finite, got {0}")]
    InvalidBudget(f64),
    #[error("constraint names unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("turn limit must be at least 1")]
    ZeroTurnLimit,
    #[error("cannot append a turn to a terminal history ({0})")]
    TerminalHistory(TerminalReason),
}

/// Ordinal intensity in {1, 2, 3}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct Level(u8);

impl Level {
    pub const LOW: Level = Level(1);
    pub const MID: Level = Level(2);
    pub const HIGH: Level = Level(3);
    pub const ALL: [Level; 3] = [Level(1), Level(2), Level(3)];

    pub fn new(v: i64) -> Result<Self, DomainError> {
        match v {
            1..=3 => Ok(Level(v as u8)),
            _ => Err(DomainError::InvalidLevel(v)),
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0)
    }
}

impl TryFrom<i64> for Level {
    type Error = DomainError;
    fn try_from(v: i64) -> Result<Self, Self::Error> {
        Level::new(v)
    }
}

impl From<Level> for i64 {
    fn from(l: Level) -> i64 {
        i64::from(l.0)
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Persona {
    pub openness: Level,
    pub pickiness: Level,
    pub uncertainty: Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
        })
    }
}

/// A hard constraint. The attribute `price` refers to the item price;
/// any other name must be a schema attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub attribute: String,
    pub comparator: Comparator,
    pub bound: f64,
}

impl Constraint {
    pub fn new(attribute: impl Into<String>, comparator: Comparator, bound: f64) -> Self {
        Constraint { attribute: attribute.into(), comparator, bound }
    }

    pub fn label(&self) -> String {
        format!("{} {} {}", self.attribute, self.comparator, self.bound)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    pub constraints: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(constraints: Vec<Constraint>) -> Self {
        ConstraintSet { constraints }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Constraint> {
        self.constraints.iter()
    }

    pub fn push(&mut self, c: Constraint) {
        self.constraints.push(c);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Needs {
    pub text: String,
    pub constraints: ConstraintSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub needs: Needs,
    pub budget: f64,
    pub time_pressure: Level,
}

impl Scenario {
    pub fn new(needs: Needs, budget: f64, time_pressure: Level) -> Result<Self, DomainError> {
        if !(budget.is_finite() && budget > 0.0) {
            return Err(DomainError::InvalidBudget(budget));
        }
        Ok(Scenario { needs, budget, time_pressure })
    }

    /// Checks that every constraint names `price` or a schema attribute.
    pub fn validate_against(&self, schema: &AttributeSchema) -> Result<(), DomainError> {
        for c in self.needs.constraints.iter() {
            if c.attribute != PRICE && schema.index_of(&c.attribute).is_none() {
                return Err(DomainError::UnknownAttribute(c.attribute.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalState {
    pub persona: Persona,
    pub scenario: Scenario,
}

impl GlobalState {
    /// Stable 64-bit fingerprint of the state, used to check it stays
    /// constant over a session.
    pub fn fingerprint(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("state serializes");
        // FNV-1a
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Accept,
    Reject,
    Defer,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Accept => "accept",
            Outcome::Reject => "reject",
            Outcome::Defer => "defer",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalReason {
    Purchase,
    TurnLimit,
}

impl fmt::Display for TerminalReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TerminalReason::Purchase => "purchase",
            TerminalReason::TurnLimit => "turn_limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserTurn {
    pub action: Intent,
    pub text: String,
    pub outcome: Outcome,
    /// Item the user evaluated as best this turn, if selection proceeded.
    pub considered_item: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub index: usize,
    pub sales: SalesTurn,
    pub user: UserTurn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueHistory {
    pub initial_user_message: String,
    pub turns: Vec<Turn>,
    pub terminal: Option<TerminalReason>,
    pub turn_limit: usize,
}

impl DialogueHistory {
    pub fn is_terminal(&self) -> bool {
        self.terminal.is_some()
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn last(&self) -> Option<&Turn> {
        self.turns.last()
    }
}

pub fn render_initial_message(state: &GlobalState) -> String {
    format!("Hi, I'm looking for {}.", state.scenario.needs.text.trim_end_matches('.'))
}

pub fn init_history(state: &GlobalState, turn_limit: usize) -> Result<DialogueHistory, DomainError> {
    if turn_limit == 0 {
        return Err(DomainError::ZeroTurnLimit);
    }
    Ok(DialogueHistory {
        initial_user_message: render_initial_message(state),
        turns: Vec::new(),
        terminal: None,
        turn_limit,
    })
}

pub fn append_turn(
    mut history: DialogueHistory,
    sales: SalesTurn,
    user: UserTurn,
) -> Result<DialogueHistory, DomainError> {
    if let Some(reason) = history.terminal {
        return Err(DomainError::TerminalHistory(reason));
    }
    let index = history.turns.last().map_or(1, |t| t.index + 1);
    let accepted = user.outcome == Outcome::Accept;
    history.turns.push(Turn { index, sales, user });
    if accepted {
        history.terminal = Some(TerminalReason::Purchase);
    } else if history.turns.len() >= history.turn_limit {
        history.terminal = Some(TerminalReason::TurnLimit);
    }
    Ok(history)
}
