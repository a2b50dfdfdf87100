//! User profile construction: budget, weight vector, needs and constraints.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{AttributeKind, AttributeSchema, Catalog, PRICE};
use crate::domain::{Comparator, Constraint, ConstraintSet, DomainError, GlobalState, Level, Needs, Persona, Scenario};

#[derive(Debug, Error, PartialEq)]
pub enum ProfileError {
    #[error("category {category:?} has {found} priced items, at least 4 are needed")]
    InsufficientData { category: Option<String>, found: usize },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub names: Vec<String>,
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn uniform(schema: &AttributeSchema) -> Self {
        let n = schema.len() as f64;
        WeightVector { names: schema.names().map(str::to_owned).collect(), weights: vec![1.0 / n; schema.len()] }
    }

    /// Builds a normalized vector from raw nonnegative weights.
    pub fn from_raw(names: Vec<String>, raw: Vec<f64>) -> Result<Self, ProfileError> {
        if names.len() != raw.len() || names.is_empty() {
            return Err(ProfileError::Argument("weight names and values must be nonempty and aligned".into()));
        }
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ProfileError::Argument("weights must be finite and nonnegative".into()));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(ProfileError::Argument("weights sum to zero".into()));
        }
        Ok(WeightVector { names, weights: raw.iter().map(|w| w / total).collect() })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.weights[i])
    }

    /// Attribute indices by descending weight, ties by schema order.
    pub fn priority_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.weights.len()).collect();
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        order
    }

    pub fn heaviest(&self) -> usize {
        self.priority_order()[0]
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        self.names.iter().cloned().zip(self.weights.iter().copied()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileConfig {
    pub seed: u64,
    pub uncertainty: Level,
    pub pickiness: Level,
    pub openness: Level,
    pub time_pressure: Level,
    #[serde(default)]
    pub category: Option<String>,
    #[serde(default)]
    pub emphasis: Option<BTreeMap<String, f64>>,
    /// Concentration of the symmetric Dirichlet used for focused weights.
    #[serde(default = "default_concentration")]
    pub concentration: f64,
    /// Fraction of the observed range the heaviest attribute must reach
    /// for a focused (low-uncertainty) user.
    #[serde(default = "default_floor")]
    pub attribute_floor: f64,
}

fn default_concentration() -> f64 {
    0.3
}

fn default_floor() -> f64 {
    0.25
}

impl ProfileConfig {
    pub fn new(seed: u64, persona: Persona, time_pressure: Level) -> Self {
        ProfileConfig {
            seed,
            uncertainty: persona.uncertainty,
            pickiness: persona.pickiness,
            openness: persona.openness,
            time_pressure,
            category: None,
            emphasis: None,
            concentration: default_concentration(),
            attribute_floor: default_floor(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub state: GlobalState,
    pub weights: WeightVector,
    pub constraints: ConstraintSet,
}

/// Quantile with linear interpolation between order statistics
/// (`sorted` must be ascending and nonempty).
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sample_budget<R: Rng + ?Sized>(catalog: &Catalog, category: Option<&str>, rng: &mut R) -> Result<f64, ProfileError> {
    let mut prices: Vec<f64> = catalog.in_category(category).into_iter().map(|i| catalog.item(i).price).collect();
    if prices.len() < 4 {
        return Err(ProfileError::InsufficientData { category: category.map(str::to_owned), found: prices.len() });
    }
    prices.sort_by(f64::total_cmp);
    let q1 = quantile_type7(&prices, 0.25);
    let q3 = quantile_type7(&prices, 0.75);
    let u: f64 = rng.gen();
    Ok((q1 + u * (q3 - q1)).clamp(q1, q3))
}

pub fn build_weight_vector<R: Rng + ?Sized>(
    uncertainty: Level,
    schema: &AttributeSchema,
    emphasis: Option<&BTreeMap<String, f64>>,
    concentration: f64,
    rng: &mut R,
) -> Result<WeightVector, ProfileError> {
    if schema.is_empty() {
        return Err(ProfileError::Argument("schema has no attributes".into()));
    }
    if let Some(map) = emphasis {
        if let Some((k, v)) = map.iter().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(ProfileError::Argument(format!("emphasis for `{k}` is negative or not finite ({v})")));
        }
        if let Some(k) = map.keys().find(|k| schema.index_of(k).is_none()) {
            return Err(ProfileError::Argument(format!("emphasis names unknown attribute `{k}`")));
        }
    }
    if uncertainty != Level::LOW {
        return Ok(WeightVector::uniform(schema));
    }
    let names: Vec<String> = schema.names().map(str::to_owned).collect();
    if let Some(map) = emphasis {
        let raw = names.iter().map(|n| map.get(n).copied().unwrap_or(0.0)).collect();
        return WeightVector::from_raw(names, raw);
    }
    let n = schema.len();
    if !(concentration.is_finite() && concentration > 0.0) {
        return Err(ProfileError::Argument(format!("concentration must be positive, got {concentration}")));
    }
    let gamma = Gamma::new(concentration, 1.0).map_err(|e| ProfileError::Argument(e.to_string()))?;
    let mut point: Vec<f64> = (0..n).map(|_| gamma.sample(rng)).collect();
    let total: f64 = point.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        point = vec![1.0; n];
    }
    point.sort_by(|a, b| b.total_cmp(a));
    let mut priority: Vec<usize> = (0..n).collect();
    priority.shuffle(rng);
    let mut raw = vec![0.0; n];
    for (rank, &j) in priority.iter().enumerate() {
        raw[j] = point[rank];
    }
    WeightVector::from_raw(names, raw)
}

fn category_phrase(category: &str) -> String {
    category.rsplit('/').next().unwrap_or(category).replace(['_', '-'], " ")
}

pub fn generate_profile(config: &ProfileConfig, catalog: &Catalog) -> Result<Profile, ProfileError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    generate_profile_with(config, catalog, &mut rng)
}

pub fn generate_profile_with<R: Rng + ?Sized>(
    config: &ProfileConfig,
    catalog: &Catalog,
    rng: &mut R,
) -> Result<Profile, ProfileError> {
    let schema = catalog.schema();
    let budget = sample_budget(catalog, config.category.as_deref(), rng)?;
    let weights = build_weight_vector(config.uncertainty, schema, config.emphasis.as_ref(), config.concentration, rng)?;
    let category = config
        .category
        .clone()
        .or_else(|| catalog.items().first().map(|it| it.category.clone()))
        .unwrap_or_default();
    let thing = category_phrase(&category);
    let mut constraints = ConstraintSet::new(vec![Constraint::new(PRICE, Comparator::Le, budget)]);
    let text = if config.uncertainty == Level::LOW {
        let j = weights.heaviest();
        let attr = &schema.attributes[j];
        let c = match attr.kind {
            AttributeKind::Numeric => Constraint::new(attr.name.clone(), Comparator::Ge, attr.quantile_bound(config.attribute_floor)),
            AttributeKind::Binary => Constraint::new(attr.name.clone(), Comparator::Eq, 1.0),
        };
        constraints.push(c);
        format!("{} with good {}, for at most {:.2}", thing, attr.name, budget)
    } else {
        format!("some {} that fit my budget", thing)
    };
    let persona = Persona { openness: config.openness, pickiness: config.pickiness, uncertainty: config.uncertainty };
    let scenario = Scenario::new(Needs { text, constraints: constraints.clone() }, budget, config.time_pressure)?;
    scenario.validate_against(schema)?;
    Ok(Profile { state: GlobalState { persona, scenario }, weights, constraints })
}
