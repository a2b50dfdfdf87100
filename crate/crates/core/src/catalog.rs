//! Attribute schema, item catalog loading, normalization and synthesis.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

/// Reserved constraint target naming the item price.
pub const PRICE: &str = "price";

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("schema: {0}")]
    Schema(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("catalog failed validation:\n{0}")]
    Validation(ValidationReport),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationIssue {
    pub lines: Vec<usize>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for issue in &self.issues {
            let lines: Vec<String> = issue.lines.iter().map(|l| l.to_string()).collect();
            writeln!(f, "  line {}: {}", lines.join(", "), issue.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttributeKind {
    #[serde(rename = "numeric")]
    Numeric,
    #[serde(rename = "categorical-binary")]
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeDescriptor {
    pub name: String,
    pub kind: AttributeKind,
    #[serde(default)]
    pub observed_min: f64,
    #[serde(default = "one")]
    pub observed_max: f64,
}

fn one() -> f64 {
    1.0
}

impl AttributeDescriptor {
    pub fn numeric(name: impl Into<String>, min: f64, max: f64) -> Self {
        AttributeDescriptor { name: name.into(), kind: AttributeKind::Numeric, observed_min: min, observed_max: max }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        AttributeDescriptor { name: name.into(), kind: AttributeKind::Binary, observed_min: 0.0, observed_max: 1.0 }
    }

    /// Maps a raw value into [0, 1].
    pub fn normalize(&self, raw: f64) -> f64 {
        match self.kind {
            AttributeKind::Binary => {
                if raw != 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            AttributeKind::Numeric => {
                let span = self.observed_max - self.observed_min;
                if span <= 0.0 {
                    0.5
                } else {
                    ((raw - self.observed_min) / span).clamp(0.0, 1.0)
                }
            }
        }
    }

    /// Raw value sitting at fraction `q` of the observed range.
    pub fn quantile_bound(&self, q: f64) -> f64 {
        self.observed_min + q * (self.observed_max - self.observed_min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub format_version: u32,
    #[serde(rename = "attribute", default)]
    pub attributes: Vec<AttributeDescriptor>,
}

impl AttributeSchema {
    pub fn new(attributes: Vec<AttributeDescriptor>) -> Result<Self, CatalogError> {
        let schema = AttributeSchema { format_version: FORMAT_VERSION, attributes };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_toml(text: &str) -> Result<Self, CatalogError> {
        let schema: AttributeSchema = toml::from_str(text).map_err(|e| CatalogError::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        if self.format_version != FORMAT_VERSION {
            return Err(CatalogError::Schema(format!("unsupported format_version {}", self.format_version)));
        }
        let mut seen = HashMap::new();
        for (i, a) in self.attributes.iter().enumerate() {
            if a.name.is_empty() {
                return Err(CatalogError::Schema(format!("attribute {} has an empty name", i + 1)));
            }
            if a.name == PRICE {
                return Err(CatalogError::Schema("`price` is reserved for the item price".into()));
            }
            if seen.insert(a.name.as_str(), i).is_some() {
                return Err(CatalogError::Schema(format!("duplicate attribute name `{}`", a.name)));
            }
            if a.kind == AttributeKind::Numeric
                && !(a.observed_min.is_finite() && a.observed_max.is_finite() && a.observed_min <= a.observed_max)
            {
                return Err(CatalogError::Schema(format!(
                    "attribute `{}`: observed_min must not exceed observed_max",
                    a.name
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> + Clone {
        self.attributes.iter().map(|a| a.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub id: String,
    pub title: String,
    pub category: String,
    pub price: f64,
    pub attributes: BTreeMap<String, f64>,
}

/// Normalized attribute vector of an item, aligned with the schema.
/// Attributes the item lacks are `None`.
pub fn normalize(item: &Item, schema: &AttributeSchema) -> Vec<Option<f64>> {
    schema
        .attributes
        .iter()
        .map(|a| item.attributes.get(&a.name).map(|&v| a.normalize(v)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    schema: AttributeSchema,
    items: Vec<Item>,
    raw: Vec<Vec<Option<f64>>>,
    normalized: Vec<Vec<Option<f64>>>,
}

impl Catalog {
    pub fn new(schema: AttributeSchema, items: Vec<Item>) -> Result<Self, CatalogError> {
        schema.validate()?;
        let report = validate_items(&schema, items.iter().enumerate().map(|(i, it)| (i + 1, it)));
        if !report.issues.is_empty() {
            return Err(CatalogError::Validation(report));
        }
        let raw = items
            .iter()
            .map(|it| schema.attributes.iter().map(|a| it.attributes.get(&a.name).copied()).collect())
            .collect();
        let normalized = items.iter().map(|it| normalize(it, &schema)).collect();
        Ok(Catalog { schema, items, raw, normalized })
    }

    pub fn schema(&self) -> &AttributeSchema {
        &self.schema
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn item(&self, index: usize) -> &Item {
        &self.items[index]
    }

    pub fn raw(&self, index: usize) -> &[Option<f64>] {
        &self.raw[index]
    }

    pub fn normalized(&self, index: usize) -> &[Option<f64>] {
        &self.normalized[index]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.items.iter().position(|it| it.id == id)
    }

    /// Indices of items whose category path starts with `category`
    /// (all items when `None`).
    pub fn in_category(&self, category: Option<&str>) -> Vec<usize> {
        (0..self.items.len())
            .filter(|&i| category.is_none_or(|c| self.items[i].category.starts_with(c)))
            .collect()
    }

    /// Serializes to the line-delimited catalog format.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&serde_json::json!({ "format_version": FORMAT_VERSION }))
            .expect("header serializes");
        out.push('\n');
        for it in &self.items {
            out.push_str(&serde_json::to_string(it).expect("item serializes"));
            out.push('\n');
        }
        out
    }
}

fn validate_items<'a>(
    schema: &AttributeSchema,
    items: impl Iterator<Item = (usize, &'a Item)>,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut first_seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut dup_lines: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (line, it) in items {
        if it.id.is_empty() {
            report.issues.push(ValidationIssue { lines: vec![line], message: "empty id".into() });
        }
        if !(it.price.is_finite() && it.price >= 0.0) {
            report.issues.push(ValidationIssue {
                lines: vec![line],
                message: format!("item `{}`: price must be a finite non-negative number", it.id),
            });
        }
        for (name, &value) in &it.attributes {
            match schema.index_of(name) {
                None => report.issues.push(ValidationIssue {
                    lines: vec![line],
                    message: format!("item `{}`: unknown attribute `{}`", it.id, name),
                }),
                Some(j) => {
                    let bad = match schema.attributes[j].kind {
                        AttributeKind::Numeric => !value.is_finite(),
                        AttributeKind::Binary => value != 0.0 && value != 1.0,
                    };
                    if bad {
                        report.issues.push(ValidationIssue {
                            lines: vec![line],
                            message: format!("item `{}`: invalid value {} for attribute `{}`", it.id, value, name),
                        });
                    }
                }
            }
        }
        match first_seen.get(it.id.as_str()) {
            Some(&first) => dup_lines.entry(it.id.as_str()).or_insert_with(|| vec![first]).push(line),
            None => {
                first_seen.insert(it.id.as_str(), line);
            }
        }
    }
    for (id, lines) in dup_lines {
        report.issues.push(ValidationIssue { lines, message: format!("duplicate id `{id}`") });
    }
    report
}

fn parse_item(value: Value, line: usize) -> Result<Item, CatalogError> {
    let err = |message: String| CatalogError::Parse { line, message };
    let obj = value.as_object().ok_or_else(|| err("expected a JSON object".into()))?;
    let text = |key: &str| -> Result<String, CatalogError> {
        obj.get(key)
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| err(format!("missing string field `{key}`")))
    };
    let id = text("id")?;
    let title = text("title")?;
    let category = text("category")?;
    let price = obj
        .get("price")
        .and_then(Value::as_f64)
        .ok_or_else(|| err("missing numeric field `price`".into()))?;
    let mut attributes = BTreeMap::new();
    if let Some(attrs) = obj.get("attributes") {
        let attrs = attrs.as_object().ok_or_else(|| err("`attributes` must be an object".into()))?;
        for (k, v) in attrs {
            let x = match v {
                Value::Bool(b) => f64::from(u8::from(*b)),
                Value::Number(n) => n.as_f64().ok_or_else(|| err(format!("attribute `{k}` is not a finite number")))?,
                _ => return Err(err(format!("attribute `{k}` must be a number or boolean"))),
            };
            attributes.insert(k.clone(), x);
        }
    }
    Ok(Item { id, title, category, price, attributes })
}

/// Reads a line-delimited catalog. The first non-blank line must be the
/// header `{"format_version": 1}`. Validation problems are reported
/// together; parse problems stop at the offending line.
pub fn load_catalog<R: BufRead>(source: R, schema: &AttributeSchema) -> Result<Catalog, CatalogError> {
    let mut items = Vec::new();
    let mut lines_of = Vec::new();
    let mut header_seen = false;
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line)
            .map_err(|e| CatalogError::Parse { line: line_no, message: e.to_string() })?;
        if !header_seen {
            let version = value.get("format_version").and_then(Value::as_u64).ok_or(CatalogError::Parse {
                line: line_no,
                message: "expected a header line with `format_version`".into(),
            })?;
            if version != u64::from(FORMAT_VERSION) {
                return Err(CatalogError::Parse {
                    line: line_no,
                    message: format!("unsupported format_version {version}"),
                });
            }
            header_seen = true;
            continue;
        }
        items.push(parse_item(value, line_no)?);
        lines_of.push(line_no);
    }
    if !header_seen {
        return Err(CatalogError::Parse { line: 1, message: "empty catalog: missing header".into() });
    }
    schema.validate()?;
    let report = validate_items(schema, lines_of.iter().copied().zip(items.iter()));
    if !report.issues.is_empty() {
        return Err(CatalogError::Validation(report));
    }
    Catalog::new(schema.clone(), items)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_items: usize,
    pub n_attrs: usize,
    pub price_min: f64,
    pub price_max: f64,
    /// Loading of every attribute on a shared latent item quality, in [0, 1).
    /// Marginals stay uniform over the schema range for any loading.
    pub quality_loading: f64,
    pub category: String,
}

fn default_category() -> String {
    "electronics/headphones".to_string()
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 7,
            n_items: 2000,
            n_attrs: 12,
            price_min: 20.0,
            price_max: 500.0,
            quality_loading: 0.6,
            category: default_category(),
        }
    }
}

const ATTR_RANGE: (f64, f64) = (0.0, 100.0);

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn synthesize_catalog(seed: u64, n_items: usize, n_attrs: usize, price_range: (f64, f64)) -> Result<Catalog, CatalogError> {
    synthesize_with(&SynthSpec {
        seed,
        n_items,
        n_attrs,
        price_min: price_range.0,
        price_max: price_range.1,
        quality_loading: 0.0,
        category: default_category(),
    })
}

pub fn synthesize_with(spec: &SynthSpec) -> Result<Catalog, CatalogError> {
    if spec.n_items == 0 || spec.n_attrs == 0 {
        return Err(CatalogError::Argument("n_items and n_attrs must be at least 1".into()));
    }
    if !(spec.price_min.is_finite() && spec.price_max.is_finite() && 0.0 <= spec.price_min && spec.price_min <= spec.price_max)
    {
        return Err(CatalogError::Argument(format!(
            "invalid price range [{}, {}]",
            spec.price_min, spec.price_max
        )));
    }
    if !(0.0..1.0).contains(&spec.quality_loading) {
        return Err(CatalogError::Argument(format!("quality_loading {} outside [0, 1)", spec.quality_loading)));
    }
    let width = spec.n_attrs.to_string().len().max(2);
    let schema = AttributeSchema::new(
        (1..=spec.n_attrs)
            .map(|j| AttributeDescriptor::numeric(format!("attr_{j:0width$}"), ATTR_RANGE.0, ATTR_RANGE.1))
            .collect(),
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let rho = spec.quality_loading;
    let resid = (1.0 - rho * rho).sqrt();
    let id_width = spec.n_items.to_string().len().max(4);
    let leaf = spec.category.rsplit('/').next().unwrap_or("item").to_string();
    let mut items = Vec::with_capacity(spec.n_items);
    for i in 0..spec.n_items {
        let z: f64 = if rho > 0.0 { rng.sample(StandardNormal) } else { 0.0 };
        let mut attributes = BTreeMap::new();
        for a in &schema.attributes {
            let u = if rho > 0.0 {
                let e: f64 = rng.sample(StandardNormal);
                std_normal_cdf(rho * z + resid * e)
            } else {
                rng.gen::<f64>()
            };
            attributes.insert(a.name.clone(), a.observed_min + u * (a.observed_max - a.observed_min));
        }
        let price = spec.price_min + rng.gen::<f64>() * (spec.price_max - spec.price_min);
        items.push(Item {
            id: format!("I{:0id_width$}", i + 1),
            title: format!("{} model {}", leaf, i + 1),
            category: spec.category.clone(),
            price,
            attributes,
        });
    }
    Catalog::new(schema, items)
}
