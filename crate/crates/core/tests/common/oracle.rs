//! Exhaustive reference implementation of item selection.
#![allow(dead_code)]

use hesitator_core::domain::{Comparator, Constraint};
use hesitator_core::selection::Candidate;

pub struct OracleItem {
    pub id: String,
    pub price: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    NoCandidates,
    Best { id: String, utility: f64, proceed: bool },
}

pub fn from_candidates(items: &[Candidate]) -> Vec<OracleItem> {
    items.iter().map(|c| OracleItem { id: c.id.clone(), price: c.price, values: c.perceived.clone() }).collect()
}

fn satisfies(item: &OracleItem, raw: &[f64], k: &Constraint, names: &[String]) -> bool {
    let x = if k.attribute == "price" {
        item.price
    } else {
        match names.iter().position(|n| *n == k.attribute) {
            Some(j) => raw[j],
            None => return false,
        }
    };
    match k.comparator {
        Comparator::Le => x <= k.bound,
        Comparator::Ge => x >= k.bound,
        Comparator::Eq => (x - k.bound).abs() <= 1e-9,
    }
}

fn middle(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 0 {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    } else {
        v[n / 2]
    }
}

/// `raw[i]` holds the values constraints are checked against, `items[i].values`
/// the normalized ones used for utility and reduction.
pub fn oracle_select(
    items: &[OracleItem],
    raw: &[Vec<f64>],
    constraints: &[Constraint],
    names: &[String],
    weights: &[f64],
    theta: usize,
    tau: f64,
) -> OracleOutcome {
    let mut pool: Vec<usize> = (0..items.len()).collect();
    if items.len() > theta {
        pool.retain(|&i| constraints.iter().all(|k| satisfies(&items[i], &raw[i], k, names)));
        let mut order: Vec<usize> = (0..weights.len()).collect();
        // Stable sort keeps schema order among equal weights.
        order.sort_by(|&a, &b| weights[b].partial_cmp(&weights[a]).unwrap());
        for &j in &order {
            if pool.len() <= theta {
                break;
            }
            let m = middle(pool.iter().map(|&i| items[i].values[j]).collect());
            pool.retain(|&i| items[i].values[j] >= m);
        }
        if pool.len() > theta {
            let j = order[0];
            let mut ranked = pool.clone();
            ranked.sort_by(|&a, &b| {
                items[b].values[j].partial_cmp(&items[a].values[j]).unwrap().then(items[a].id.cmp(&items[b].id))
            });
            ranked.truncate(theta);
            pool = ranked;
        }
    }
    let mut best: Option<(String, f64)> = None;
    let mut ids: Vec<usize> = pool;
    ids.sort_by(|&a, &b| items[a].id.cmp(&items[b].id));
    for i in ids {
        let mut u = 0.0;
        for j in 0..weights.len() {
            u += weights[j] * items[i].values[j];
        }
        match &best {
            Some((_, bu)) if u <= *bu => {}
            _ => best = Some((items[i].id.clone(), u)),
        }
    }
    match best {
        None => OracleOutcome::NoCandidates,
        Some((id, utility)) => OracleOutcome::Best { id, utility, proceed: utility >= tau },
    }
}
