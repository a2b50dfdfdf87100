//! Providers that judge leaf overload intensities from a sales turn.

use std::collections::BTreeSet;

use serde_json::Value;

use crate::dialogue::{Presentation, SalesTurn};
use crate::domain::{GlobalState, Level};
use crate::hesitation::{LeafScores, PerceivedLeaves};
use crate::llm::{HttpTextClient, LlmSettings, ProviderError, TextGenerator};
use crate::registry::Registry;

pub trait PerceptionProvider: Send + Sync {
    fn name(&self) -> &'static str;
    fn perceive(&self, sales: &SalesTurn, state: &GlobalState) -> Result<PerceivedLeaves, ProviderError>;
}

pub fn perceive_overload(
    sales: &SalesTurn,
    state: &GlobalState,
    provider: &dyn PerceptionProvider,
) -> Result<LeafScores, ProviderError> {
    Ok(LeafScores::from_perceived(provider.perceive(sales, state)?, state))
}

pub fn score_assortment(n_items: usize) -> Level {
    match n_items {
        0..=3 => Level::LOW,
        4..=8 => Level::MID,
        _ => Level::HIGH,
    }
}

pub fn score_attribute_count(n_attrs: usize) -> Level {
    match n_attrs {
        0..=4 => Level::LOW,
        5..=9 => Level::MID,
        _ => Level::HIGH,
    }
}

pub fn score_format(p: Presentation) -> Level {
    match p {
        Presentation::Tabular => Level::LOW,
        Presentation::Mixed => Level::MID,
        Presentation::FreeText => Level::HIGH,
    }
}

/// Shown (attribute index, normalized value) pairs, sorted by index.
type Shown = Vec<(usize, f64)>;

fn profiles(sales: &SalesTurn) -> Vec<Shown> {
    sales
        .items
        .iter()
        .map(|it| {
            let mut p: Vec<(usize, f64)> = it.attributes.iter().map(|a| (a.index, a.value)).collect();
            p.sort_by_key(|x| x.0);
            p
        })
        .collect()
}

fn dominates(a: &[(usize, f64)], b: &[(usize, f64)]) -> bool {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.0 != y.0) {
        return false;
    }
    a.iter().zip(b).all(|(x, y)| x.1 >= y.1) && a.iter().zip(b).any(|(x, y)| x.1 > y.1)
}

fn lookup(p: &[(usize, f64)], j: usize) -> Option<f64> {
    p.binary_search_by_key(&j, |x| x.0).ok().map(|k| p[k].1)
}

/// Share of attribute pairs on which two items trade off against each
/// other, pooled over item pairs. Pairs not visible on both items count as
/// unresolved conflicts.
pub fn trade_off_rate(items: &[Vec<(usize, f64)>]) -> f64 {
    let mut conflicts = 0usize;
    let mut total = 0usize;
    for a in 0..items.len() {
        for b in a + 1..items.len() {
            let union: Vec<usize> = items[a].iter().chain(&items[b]).map(|x| x.0).collect::<BTreeSet<_>>().into_iter().collect();
            for x in 0..union.len() {
                for y in x + 1..union.len() {
                    total += 1;
                    let vals = (
                        lookup(&items[a], union[x]),
                        lookup(&items[b], union[x]),
                        lookup(&items[a], union[y]),
                        lookup(&items[b], union[y]),
                    );
                    match vals {
                        (Some(ax), Some(bx), Some(ay), Some(by)) => {
                            if (ax - bx) * (ay - by) < 0.0 {
                                conflicts += 1;
                            }
                        }
                        _ => conflicts += 1,
                    }
                }
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        conflicts as f64 / total as f64
    }
}

pub fn score_dominance(items: &[Vec<(usize, f64)>]) -> Level {
    if items.len() <= 1 {
        return Level::LOW;
    }
    let dominant = (0..items.len()).any(|r| (0..items.len()).filter(|&o| o != r).all(|o| dominates(&items[r], &items[o])));
    if dominant {
        Level::LOW
    } else if trade_off_rate(items) < 0.5 {
        Level::MID
    } else {
        Level::HIGH
    }
}

/// Attributes shown on every item as a fraction of those shown on any.
pub fn alignability(items: &[Vec<(usize, f64)>]) -> f64 {
    let Some(first) = items.first() else { return 1.0 };
    let mut union: BTreeSet<usize> = BTreeSet::new();
    let mut inter: BTreeSet<usize> = first.iter().map(|x| x.0).collect();
    for p in items {
        let s: BTreeSet<usize> = p.iter().map(|x| x.0).collect();
        inter = inter.intersection(&s).copied().collect();
        union.extend(s);
    }
    if union.is_empty() {
        1.0
    } else {
        inter.len() as f64 / union.len() as f64
    }
}

pub fn score_alignability(items: &[Vec<(usize, f64)>]) -> Level {
    let r = alignability(items);
    if r >= 0.8 {
        Level::LOW
    } else if r >= 0.4 {
        Level::MID
    } else {
        Level::HIGH
    }
}

/// Deterministic thresholds on the structure of the sales turn.
#[derive(Debug, Default, Clone, Copy)]
pub struct RuleBased;

impl PerceptionProvider for RuleBased {
    fn name(&self) -> &'static str {
        "rule"
    }

    fn perceive(&self, sales: &SalesTurn, _state: &GlobalState) -> Result<PerceivedLeaves, ProviderError> {
        let p = profiles(sales);
        Ok(PerceivedLeaves {
            assortment: score_assortment(sales.items.len()),
            dominance: score_dominance(&p),
            alignability: score_alignability(&p),
            attribute_count: score_attribute_count(sales.shown_attribute_count),
            format: score_format(sales.presentation),
        })
    }
}

/// Asks a text generator to rate the five leaves and parses a JSON object
/// out of the reply.
pub struct External {
    generator: Box<dyn TextGenerator>,
}

impl External {
    pub fn new(generator: Box<dyn TextGenerator>) -> Self {
        External { generator }
    }

    pub fn prompt(sales: &SalesTurn, state: &GlobalState) -> String {
        format!(
            "You are a shopper who needs {}. A salesperson showed you:\n{}\n\n\
             Rate how overwhelming this is on each dimension from 1 (low) to 3 (high). \
             Reply with a JSON object with integer fields \
             assortment, dominance, alignability, attribute_count, format.",
            state.scenario.needs.text, sales.rendered_text
        )
    }
}

pub fn parse_leaves(reply: &str) -> Result<PerceivedLeaves, ProviderError> {
    let start = reply.find('{').ok_or_else(|| ProviderError::Protocol("no JSON object in reply".into()))?;
    let end = reply.rfind('}').ok_or_else(|| ProviderError::Protocol("no JSON object in reply".into()))?;
    if end < start {
        return Err(ProviderError::Protocol("no JSON object in reply".into()));
    }
    let v: Value = serde_json::from_str(&reply[start..=end]).map_err(|e| ProviderError::Protocol(e.to_string()))?;
    let level = |k: &str| -> Result<Level, ProviderError> {
        let x = v.get(k).and_then(Value::as_i64).ok_or_else(|| ProviderError::Protocol(format!("missing integer `{k}`")))?;
        Level::new(x).map_err(|e| ProviderError::Protocol(format!("`{k}`: {e}")))
    };
    Ok(PerceivedLeaves {
        assortment: level("assortment")?,
        dominance: level("dominance")?,
        alignability: level("alignability")?,
        attribute_count: level("attribute_count")?,
        format: level("format")?,
    })
}

impl PerceptionProvider for External {
    fn name(&self) -> &'static str {
        "external"
    }

    fn perceive(&self, sales: &SalesTurn, state: &GlobalState) -> Result<PerceivedLeaves, ProviderError> {
        parse_leaves(&self.generator.complete(&External::prompt(sales, state))?)
    }
}

pub fn providers() -> Registry<dyn PerceptionProvider, LlmSettings> {
    let mut r: Registry<dyn PerceptionProvider, LlmSettings> = Registry::new("perception provider");
    r.register("rule", |_| Ok(Box::new(RuleBased)));
    r.register("external", |s| {
        let client = HttpTextClient::from_env(s.clone()).map_err(|e| e.to_string())?;
        Ok(Box::new(External::new(Box::new(client))))
    });
    r
}
