//! Scripted catalog-backed sales agent.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::Catalog;
use crate::domain::{DialogueHistory, Level, Outcome};

#[derive(Debug, Error, PartialEq)]
pub enum SalesError {
    #[error("sales agent configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Presentation {
    #[serde(rename = "tabular")]
    Tabular,
    #[serde(rename = "mixed")]
    Mixed,
    #[serde(rename = "free-text")]
    FreeText,
}

impl Presentation {
    /// Presentation whose rule-based format score equals `level`.
    pub fn for_level(level: Level) -> Self {
        match level.get() {
            1 => Presentation::Tabular,
            2 => Presentation::Mixed,
            _ => Presentation::FreeText,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SalesMode {
    #[serde(rename = "basic")]
    Basic,
    #[serde(rename = "persuasive-lite")]
    PersuasiveLite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalesAgentConfig {
    pub assortment_size: usize,
    pub attributes_shown: usize,
    pub presentation: Presentation,
    pub mode: SalesMode,
    #[serde(default)]
    pub relevance: bool,
}

impl SalesAgentConfig {
    pub fn validate(&self, catalog: &Catalog) -> Result<(), SalesError> {
        if self.assortment_size < 1 {
            return Err(SalesError::Config("assortment size must be at least 1".into()));
        }
        if self.attributes_shown < 1 {
            return Err(SalesError::Config("attributes shown must be at least 1".into()));
        }
        if self.attributes_shown > catalog.schema().len() {
            return Err(SalesError::Config(format!(
                "{} attributes requested but the schema has {}",
                self.attributes_shown,
                catalog.schema().len()
            )));
        }
        if catalog.len() < self.assortment_size {
            return Err(SalesError::Config(format!(
                "catalog has {} items, fewer than the assortment size {}",
                catalog.len(),
                self.assortment_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShownAttribute {
    pub index: usize,
    pub name: String,
    pub raw: f64,
    /// Normalized value in [0, 1].
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShownItem {
    pub id: String,
    pub title: String,
    pub price: f64,
    pub catalog_index: usize,
    pub attributes: Vec<ShownAttribute>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalesTurn {
    pub items: Vec<ShownItem>,
    pub shown_attribute_count: usize,
    pub presentation: Presentation,
    pub rendered_text: String,
}

impl SalesTurn {
    pub fn item_ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.id.clone()).collect()
    }
}

/// What the sales agent may know about the user: openness, pickiness and
/// the stated need. Weights and uncertainty stay hidden.
#[derive(Debug, Clone, Copy)]
pub struct AgentView<'a> {
    pub openness: Level,
    pub pickiness: Level,
    pub needs_text: &'a str,
}

fn tokens(s: &str) -> BTreeSet<String> {
    s.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()).map(str::to_lowercase).collect()
}

fn overlap(needs: &BTreeSet<String>, catalog: &Catalog, i: usize) -> usize {
    let it = catalog.item(i);
    let item_tokens: BTreeSet<String> = tokens(&it.title).union(&tokens(&it.category)).cloned().collect();
    needs.intersection(&item_tokens).count()
}

fn sq_distance(a: &[Option<f64>], b: &[Option<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x.unwrap_or(0.5) - y.unwrap_or(0.5)).powi(2)).sum()
}

/// The `k` items closest to `anchor` among `pool`, nearest first, ties by id.
fn nearest(catalog: &Catalog, anchor: usize, pool: &[usize], k: usize) -> Vec<usize> {
    let a = catalog.normalized(anchor);
    let mut scored: Vec<(f64, usize)> = pool.iter().map(|&i| (sq_distance(a, catalog.normalized(i)), i)).collect();
    let cmp = |x: &(f64, usize), y: &(f64, usize)| -> Ordering {
        x.0.total_cmp(&y.0).then_with(|| catalog.item(x.1).id.cmp(&catalog.item(y.1).id))
    };
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, cmp);
        scored.truncate(k);
    }
    scored.sort_by(cmp);
    scored.into_iter().map(|x| x.1).collect()
}

/// Items offered in turns the user rejected.
fn rejected_items(history: &DialogueHistory, n: usize) -> Vec<bool> {
    let mut excluded = vec![false; n];
    for t in history.turns.iter().filter(|t| t.user.outcome == Outcome::Reject) {
        for it in &t.sales.items {
            if it.catalog_index < n {
                excluded[it.catalog_index] = true;
            }
        }
    }
    excluded
}

fn choose_items<R: Rng + ?Sized>(
    config: &SalesAgentConfig,
    view: &AgentView<'_>,
    history: &DialogueHistory,
    catalog: &Catalog,
    rng: &mut R,
) -> Vec<usize> {
    let k = config.assortment_size;
    if config.mode == SalesMode::PersuasiveLite {
        let deferred = history
            .last()
            .filter(|t| t.user.outcome == Outcome::Defer)
            .and_then(|t| t.user.considered_item.as_deref())
            .and_then(|id| catalog.position(id));
        if let Some(anchor) = deferred {
            let all: Vec<usize> = (0..catalog.len()).collect();
            return nearest(catalog, anchor, &all, k);
        }
    }
    let excluded = rejected_items(history, catalog.len());
    let mut available: Vec<usize> = (0..catalog.len()).filter(|&i| !excluded[i]).collect();
    if available.len() < k {
        available = (0..catalog.len()).collect();
    }
    if config.relevance {
        let needs = tokens(view.needs_text);
        let mut ranked: Vec<(usize, usize)> = available.iter().map(|&i| (overlap(&needs, catalog, i), i)).collect();
        ranked.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| catalog.item(x.1).id.cmp(&catalog.item(y.1).id)));
        return ranked.into_iter().take(k).map(|x| x.1).collect();
    }
    let anchor = available[rng.gen_range(0..available.len())];
    nearest(catalog, anchor, &available, k)
}

fn show_item<R: Rng + ?Sized>(catalog: &Catalog, i: usize, k: usize, rng: &mut R) -> Result<ShownItem, SalesError> {
    let item = catalog.item(i);
    let raw = catalog.raw(i);
    let norm = catalog.normalized(i);
    let present: Vec<usize> = (0..raw.len()).filter(|&j| raw[j].is_some()).collect();
    if present.len() < k {
        return Err(SalesError::Config(format!(
            "item `{}` has {} attributes, fewer than the {} to show",
            item.id,
            present.len(),
            k
        )));
    }
    let mut picked: Vec<usize> = index::sample(rng, present.len(), k).into_iter().map(|p| present[p]).collect();
    picked.sort_unstable();
    let schema = catalog.schema();
    let attributes = picked
        .into_iter()
        .map(|j| ShownAttribute {
            index: j,
            name: schema.attributes[j].name.clone(),
            raw: raw[j].unwrap_or_default(),
            value: norm[j].unwrap_or_default(),
        })
        .collect();
    Ok(ShownItem { id: item.id.clone(), title: item.title.clone(), price: item.price, catalog_index: i, attributes })
}

fn render(items: &[ShownItem], presentation: Presentation, view: &AgentView<'_>) -> String {
    let mut out = String::new();
    let row = |out: &mut String, it: &ShownItem| {
        let _ = write!(out, "| {} | {} | {:.2} |", it.id, it.title, it.price);
        for a in &it.attributes {
            let _ = write!(out, " {}: {:.1} |", a.name, a.raw);
        }
        out.push('\n');
    };
    match presentation {
        Presentation::Tabular => {
            let _ = writeln!(out, "Here are {} options:", items.len());
            for it in items {
                row(&mut out, it);
            }
        }
        Presentation::Mixed => {
            if let Some((first, rest)) = items.split_first() {
                let _ = write!(out, "My top pick is {} ({}) at {:.2}", first.title, first.id, first.price);
                for a in &first.attributes {
                    let _ = write!(out, ", {} {:.1}", a.name, a.raw);
                }
                out.push_str(".\n");
                if !rest.is_empty() {
                    out.push_str("Also worth a look:\n");
                    for it in rest {
                        row(&mut out, it);
                    }
                }
            }
        }
        Presentation::FreeText => {
            if view.openness == Level::HIGH {
                out.push_str("Let me walk you through a few ideas. ");
            }
            for it in items {
                let _ = write!(out, "{} ({}) goes for about {:.0}", it.title, it.id, it.price);
                for (n, a) in it.attributes.iter().enumerate() {
                    let _ = match n % 3 {
                        0 => write!(out, "; {} around {:.0} percent", a.name, a.raw),
                        1 => write!(out, "; {} of {:.2} on a unit scale", a.name, a.raw / 100.0),
                        _ => write!(out, "; roughly {:.0}/10 for {}", a.raw / 10.0, a.name),
                    };
                }
                out.push_str(". ");
            }
            out.truncate(out.trim_end().len());
        }
    }
    out
}

/// Produces the next sales turn. Pure in (config, view, history, rng state).
pub fn scripted_sales_agent<R: Rng + ?Sized>(
    config: &SalesAgentConfig,
    view: &AgentView<'_>,
    history: &DialogueHistory,
    catalog: &Catalog,
    rng: &mut R,
) -> Result<SalesTurn, SalesError> {
    config.validate(catalog)?;
    let chosen = choose_items(config, view, history, catalog, rng);
    let items = chosen
        .into_iter()
        .map(|i| show_item(catalog, i, config.attributes_shown, rng))
        .collect::<Result<Vec<_>, _>>()?;
    let rendered_text = render(&items, config.presentation, view);
    Ok(SalesTurn { items, shown_attribute_count: config.attributes_shown, presentation: config.presentation, rendered_text })
}
