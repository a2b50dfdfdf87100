#![allow(dead_code)]

pub mod oracle;

use hesitator_core::catalog::{AttributeDescriptor, AttributeSchema};
use hesitator_core::dialogue::{Intent, Presentation, SalesTurn};
use hesitator_core::domain::{ConstraintSet, GlobalState, Level, Needs, Outcome, Persona, Scenario, UserTurn};

pub fn level(v: u8) -> Level {
    Level::new(i64::from(v)).unwrap()
}

pub fn persona(o: u8, k: u8, u: u8) -> Persona {
    Persona { openness: level(o), pickiness: level(k), uncertainty: level(u) }
}

pub fn state_with(p: Persona, text: &str, constraints: ConstraintSet, budget: f64, tp: u8) -> GlobalState {
    GlobalState {
        persona: p,
        scenario: Scenario::new(Needs { text: text.into(), constraints }, budget, level(tp)).unwrap(),
    }
}

pub fn state(o: u8, k: u8, u: u8, tp: u8) -> GlobalState {
    state_with(persona(o, k, u), "wireless headphones under budget", ConstraintSet::default(), 150.0, tp)
}

pub fn numeric_schema(names: &[&str]) -> AttributeSchema {
    AttributeSchema::new(names.iter().map(|n| AttributeDescriptor::numeric(*n, 0.0, 1.0)).collect()).unwrap()
}

pub fn attr_names(n: usize) -> Vec<String> {
    (0..n).map(|j| format!("a{j}")).collect()
}

pub fn empty_sales() -> SalesTurn {
    SalesTurn { items: vec![], shown_attribute_count: 1, presentation: Presentation::Tabular, rendered_text: String::new() }
}

pub fn user_turn(outcome: Outcome) -> UserTurn {
    let action = match outcome {
        Outcome::Accept => Intent::AcceptOffer,
        Outcome::Reject => Intent::RejectWithReason,
        Outcome::Defer => Intent::DeferWithRationale,
    };
    UserTurn { action, text: String::new(), outcome, considered_item: None }
}
