//! Two-stage selection: elimination by aspects, then weighted additive
//! utility gated by a pickiness threshold.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AttributeKind, AttributeSchema, PRICE};
use crate::domain::{Comparator, Constraint, ConstraintSet, Level};
use crate::profile::WeightVector;
use crate::registry::Registry;

pub const EQ_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("dimension mismatch: {left} attribute values against {right} weights")]
    Dimension { left: usize, right: usize },
    #[error("constraint names unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("invalid selection parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionParams {
    pub theta: usize,
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams { theta: 3, gamma: 0.6, alpha: 0.1 }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.theta < 1 {
            return Err(SelectionError::Params("theta must be at least 1".into()));
        }
        if !(self.gamma.is_finite() && self.alpha.is_finite()) || self.gamma + 3.0 * self.alpha > 1.0 + 1e-12 {
            return Err(SelectionError::Params(format!("gamma + 3 alpha = {} exceeds 1", self.gamma + 3.0 * self.alpha)));
        }
        Ok(())
    }
}

pub fn acceptance_threshold(pickiness: Level, params: &SelectionParams) -> f64 {
    params.gamma + params.alpha * pickiness.as_f64()
}

/// An item as the user perceives it in one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub price: f64,
    /// Raw attribute values the user can see, aligned with the schema.
    pub raw: Vec<Option<f64>>,
    /// Normalized values of the visible attributes.
    pub shown: Vec<Option<f64>>,
    /// Full perceived attribute vector in [0, 1] used for utility.
    pub perceived: Vec<f64>,
}

impl Candidate {
    /// Candidate whose every attribute is visible.
    pub fn fully_shown(id: impl Into<String>, price: f64, raw: Vec<f64>, normalized: Vec<f64>) -> Self {
        Candidate {
            id: id.into(),
            price,
            raw: raw.into_iter().map(Some).collect(),
            shown: normalized.iter().copied().map(Some).collect(),
            perceived: normalized,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Price,
    Attr(usize, AttributeKind),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConstraint {
    pub constraint: Constraint,
    target: Target,
}

impl ResolvedConstraint {
    fn value(&self, c: &Candidate) -> Option<f64> {
        match self.target {
            Target::Price => Some(c.price),
            Target::Attr(j, _) => c.raw.get(j).copied().flatten(),
        }
    }

    /// `None` when the candidate lacks the attribute.
    pub fn holds(&self, c: &Candidate) -> Option<bool> {
        let x = self.value(c)?;
        let b = self.constraint.bound;
        Some(match self.constraint.comparator {
            Comparator::Le => x <= b,
            Comparator::Ge => x >= b,
            Comparator::Eq => match self.target {
                Target::Attr(_, AttributeKind::Binary) => x == b,
                _ => (x - b).abs() <= EQ_TOLERANCE,
            },
        })
    }
}

/// A constraint set bound to schema positions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResolvedConstraints {
    pub items: Vec<ResolvedConstraint>,
}

impl ResolvedConstraints {
    pub fn resolve(set: &ConstraintSet, schema: &AttributeSchema) -> Result<Self, SelectionError> {
        let items = set
            .iter()
            .map(|c| {
                let target = if c.attribute == PRICE {
                    Target::Price
                } else {
                    let j = schema.index_of(&c.attribute).ok_or_else(|| SelectionError::UnknownAttribute(c.attribute.clone()))?;
                    Target::Attr(j, schema.attributes[j].kind)
                };
                Ok(ResolvedConstraint { constraint: c.clone(), target })
            })
            .collect::<Result<_, _>>()?;
        Ok(ResolvedConstraints { items })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EliminationReason {
    Violated { constraint: String },
    MissingAttribute { constraint: String },
    BelowMedian { attribute: String, median: f64 },
    Truncated { attribute: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Elimination {
    pub id: String,
    pub reason: EliminationReason,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CandidateTrace {
    pub retained: Vec<String>,
    pub eliminated: Vec<Elimination>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EbaResult {
    /// Positions into the input slice.
    pub retained: Vec<usize>,
    pub eliminated: Vec<Elimination>,
}

pub fn eba_filter(items: &[Candidate], constraints: &ResolvedConstraints) -> EbaResult {
    let mut retained = Vec::new();
    let mut eliminated = Vec::new();
    'items: for (i, c) in items.iter().enumerate() {
        for rc in &constraints.items {
            match rc.holds(c) {
                Some(true) => {}
                Some(false) => {
                    eliminated.push(Elimination {
                        id: c.id.clone(),
                        reason: EliminationReason::Violated { constraint: rc.constraint.label() },
                    });
                    continue 'items;
                }
                None => {
                    eliminated.push(Elimination {
                        id: c.id.clone(),
                        reason: EliminationReason::MissingAttribute { constraint: rc.constraint.label() },
                    });
                    continue 'items;
                }
            }
        }
        retained.push(i);
    }
    EbaResult { retained, eliminated }
}

pub fn wadd_utility(a: &[f64], w: &WeightVector) -> Result<f64, SelectionError> {
    if a.len() != w.weights.len() {
        return Err(SelectionError::Dimension { left: a.len(), right: w.weights.len() });
    }
    Ok(a.iter().zip(&w.weights).map(|(x, wj)| x * wj).sum())
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Shrinks `pool` to at most `theta` members with median soft constraints
/// taken in descending weight order; falls back to the highest values on
/// the heaviest attribute once attributes run out.
pub fn reduce(
    items: &[Candidate],
    mut pool: Vec<usize>,
    w: &WeightVector,
    schema_names: &[String],
    theta: usize,
    eliminated: &mut Vec<Elimination>,
) -> Vec<usize> {
    let order = w.priority_order();
    for &j in &order {
        if pool.len() <= theta {
            return pool;
        }
        let mut vals: Vec<f64> = pool.iter().filter_map(|&i| items[i].shown[j]).collect();
        if vals.is_empty() {
            continue;
        }
        let med = median(&mut vals);
        let name = &schema_names[j];
        pool.retain(|&i| {
            let keep = items[i].shown[j].is_some_and(|v| v >= med);
            if !keep {
                eliminated.push(Elimination {
                    id: items[i].id.clone(),
                    reason: EliminationReason::BelowMedian { attribute: name.clone(), median: med },
                });
            }
            keep
        });
    }
    if pool.len() > theta {
        let j = order[0];
        pool.sort_by(|&a, &b| {
            items[b].perceived[j].total_cmp(&items[a].perceived[j]).then_with(|| items[a].id.cmp(&items[b].id))
        });
        for &i in &pool[theta..] {
            eliminated.push(Elimination {
                id: items[i].id.clone(),
                reason: EliminationReason::Truncated { attribute: schema_names[j].clone() },
            });
        }
        pool.truncate(theta);
    }
    pool
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStatus {
    Proceed,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    NoCandidates,
    BelowThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    pub status: SelectionStatus,
    pub best_item: Option<String>,
    pub best_utility: Option<f64>,
    pub threshold: f64,
    pub reject_reason: Option<RejectReason>,
    pub candidate_trace: CandidateTrace,
}

/// Argmax with ties going to the lexicographically smallest id.
fn best_of(items: &[Candidate], pool: &[usize], scores: &[f64]) -> Option<(usize, f64)> {
    pool.iter().zip(scores).fold(None, |best: Option<(usize, f64)>, (&i, &s)| match best {
        None => Some((i, s)),
        Some((b, bs)) => match s.total_cmp(&bs) {
            Ordering::Greater => Some((i, s)),
            Ordering::Equal if items[i].id < items[b].id => Some((i, s)),
            _ => Some((b, bs)),
        },
    })
}

fn finish(
    items: &[Candidate],
    pool: Vec<usize>,
    scores: Vec<f64>,
    tau: f64,
    eliminated: Vec<Elimination>,
) -> SelectionOutcome {
    let mut retained: Vec<String> = pool.iter().map(|&i| items[i].id.clone()).collect();
    retained.sort();
    let candidate_trace = CandidateTrace { retained, eliminated };
    match best_of(items, &pool, &scores) {
        None => SelectionOutcome {
            status: SelectionStatus::Reject,
            best_item: None,
            best_utility: None,
            threshold: tau,
            reject_reason: Some(RejectReason::NoCandidates),
            candidate_trace,
        },
        Some((i, u)) => {
            let pass = u >= tau;
            SelectionOutcome {
                status: if pass { SelectionStatus::Proceed } else { SelectionStatus::Reject },
                best_item: Some(items[i].id.clone()),
                best_utility: Some(u),
                threshold: tau,
                reject_reason: if pass { None } else { Some(RejectReason::BelowThreshold) },
                candidate_trace,
            }
        }
    }
}

pub fn select(
    items: &[Candidate],
    constraints: &ResolvedConstraints,
    w: &WeightVector,
    pickiness: Level,
    params: &SelectionParams,
) -> Result<SelectionOutcome, SelectionError> {
    params.validate()?;
    let mut eliminated = Vec::new();
    let mut pool: Vec<usize> = (0..items.len()).collect();
    if items.len() > params.theta {
        let eba = eba_filter(items, constraints);
        pool = eba.retained;
        eliminated = eba.eliminated;
        if pool.len() > params.theta {
            pool = reduce(items, pool, w, &w.names, params.theta, &mut eliminated);
        }
    }
    let scores = pool
        .iter()
        .map(|&i| wadd_utility(&items[i].perceived, w))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(finish(items, pool, scores, acceptance_threshold(pickiness, params), eliminated))
}

/// Unweighted mean of the visible normalized attributes.
pub fn flat_rating(c: &Candidate) -> f64 {
    let (sum, n) = c.shown.iter().flatten().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// A pluggable item-selection rule.
pub trait SelectionStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn select(
        &self,
        items: &[Candidate],
        constraints: &ResolvedConstraints,
        w: &WeightVector,
        pickiness: Level,
        params: &SelectionParams,
    ) -> Result<SelectionOutcome, SelectionError>;
}

/// EBA filtering followed by WADD and the pickiness threshold.
#[derive(Debug, Default, Clone, Copy)]
pub struct Structured;

impl SelectionStrategy for Structured {
    fn name(&self) -> &'static str {
        "structured"
    }

    fn select(
        &self,
        items: &[Candidate],
        constraints: &ResolvedConstraints,
        w: &WeightVector,
        pickiness: Level,
        params: &SelectionParams,
    ) -> Result<SelectionOutcome, SelectionError> {
        select(items, constraints, w, pickiness, params)
    }
}

/// Rates every item by the plain mean of what it shows; no filtering,
/// no weights, same threshold.
#[derive(Debug, Default, Clone, Copy)]
pub struct FlatRating;

impl SelectionStrategy for FlatRating {
    fn name(&self) -> &'static str {
        "flat_rating"
    }

    fn select(
        &self,
        items: &[Candidate],
        _constraints: &ResolvedConstraints,
        _w: &WeightVector,
        pickiness: Level,
        params: &SelectionParams,
    ) -> Result<SelectionOutcome, SelectionError> {
        params.validate()?;
        let pool: Vec<usize> = (0..items.len()).collect();
        let scores = items.iter().map(flat_rating).collect();
        Ok(finish(items, pool, scores, acceptance_threshold(pickiness, params), Vec::new()))
    }
}

pub fn strategies() -> Registry<dyn SelectionStrategy> {
    let mut r: Registry<dyn SelectionStrategy> = Registry::new("selection strategy");
    r.register("structured", |_| Ok(Box::new(Structured)));
    r.register("flat_rating", |_| Ok(Box::new(FlatRating)));
    r
}
