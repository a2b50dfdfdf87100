//! Decision-aware simulation of shoppers in conversational recommendation.
//!
//! A simulated user filters what a scripted sales agent shows with
//! elimination by aspects, scores the survivors with a weighted additive
//! utility, and then either buys or defers according to an overload model
//! calibrated on meta-analytic effect sizes.

pub mod catalog;
pub mod dialogue;
pub mod domain;
pub mod hesitation;
pub mod llm;
pub mod perception;
pub mod profile;
pub mod registry;
pub mod rng;
pub mod selection;

pub use catalog::{AttributeDescriptor, AttributeKind, AttributeSchema, Catalog, Item, SynthSpec};
pub use domain::{
    append_turn, init_history, Comparator, Constraint, ConstraintSet, DialogueHistory, GlobalState, Level, Outcome, Persona,
    Scenario, TerminalReason,
};
pub use hesitation::{CalibrationTable, HesitationParams};
pub use profile::{generate_profile, Profile, ProfileConfig, WeightVector};
pub use selection::{SelectionParams, SelectionStrategy};
