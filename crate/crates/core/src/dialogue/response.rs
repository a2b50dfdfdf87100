//! Response module: intent selection and text synthesis.

use serde::{Deserialize, Serialize};

use crate::catalog::PRICE;
use crate::domain::{DialogueHistory, GlobalState, Level, Outcome};
use crate::hesitation::{HesitationOutcome, LeafScores};
use crate::llm::{HttpTextClient, LlmSettings, ProviderError, TextGenerator};
use crate::registry::Registry;
use crate::selection::{EliminationReason, RejectReason, SelectionOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    AcceptOffer,
    RejectWithReason,
    DeferWithRationale,
    AskClarification,
}

impl Intent {
    pub const ALL: [Intent; 4] =
        [Intent::AcceptOffer, Intent::RejectWithReason, Intent::DeferWithRationale, Intent::AskClarification];

    pub fn as_str(self) -> &'static str {
        match self {
            Intent::AcceptOffer => "accept_offer",
            Intent::RejectWithReason => "reject_with_reason",
            Intent::DeferWithRationale => "defer_with_rationale",
            Intent::AskClarification => "ask_clarification",
        }
    }

    pub fn parse(s: &str) -> Option<Intent> {
        Intent::ALL.into_iter().find(|i| i.as_str() == s)
    }

    /// Whether this intent may express outcome `d`.
    pub fn consistent_with(self, d: Outcome) -> bool {
        matches!(
            (d, self),
            (Outcome::Accept, Intent::AcceptOffer)
                | (Outcome::Reject, Intent::RejectWithReason)
                | (Outcome::Reject, Intent::AskClarification)
                | (Outcome::Defer, Intent::DeferWithRationale)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub outcome: Outcome,
    pub selection: SelectionOutcome,
    pub hesitation: Option<HesitationOutcome>,
}

pub trait ResponseProvider: Send + Sync {
    fn name(&self) -> &'static str;

    fn select_action(&self, state: &GlobalState, history: &DialogueHistory, decision: &Decision) -> Result<Intent, ProviderError>;

    fn synthesize(
        &self,
        state: &GlobalState,
        history: &DialogueHistory,
        decision: &Decision,
        action: Intent,
    ) -> Result<String, ProviderError>;
}

pub fn select_action(
    state: &GlobalState,
    history: &DialogueHistory,
    decision: &Decision,
    provider: &dyn ResponseProvider,
) -> Result<Intent, ProviderError> {
    let a = provider.select_action(state, history, decision)?;
    if !a.consistent_with(decision.outcome) {
        return Err(ProviderError::Protocol(format!("intent {} does not fit outcome {}", a.as_str(), decision.outcome)));
    }
    Ok(a)
}

pub fn synthesize_response(
    state: &GlobalState,
    history: &DialogueHistory,
    decision: &Decision,
    action: Intent,
    provider: &dyn ResponseProvider,
) -> Result<String, ProviderError> {
    provider.synthesize(state, history, decision, action)
}

/// The template rule: a pure function of the outcome and openness.
pub fn template_intent(decision: &Decision, openness: Level) -> Intent {
    match decision.outcome {
        Outcome::Accept => Intent::AcceptOffer,
        Outcome::Defer => Intent::DeferWithRationale,
        Outcome::Reject => {
            if openness == Level::HIGH && decision.selection.reject_reason == Some(RejectReason::BelowThreshold) {
                Intent::AskClarification
            } else {
                Intent::RejectWithReason
            }
        }
    }
}

pub fn deferral_rationale(leaves: &LeafScores) -> &'static str {
    let high = Level::HIGH;
    if leaves.assortment == high {
        "there are too many similar options"
    } else if leaves.dominance == high {
        "each option is better at something different"
    } else if leaves.alignability == high {
        "the options are hard to compare side by side"
    } else if leaves.attribute_count == high {
        "there is too much detail to weigh"
    } else if leaves.format == high {
        "the descriptions are hard to follow"
    } else if leaves.time_pressure == high {
        "I don't have the time to decide properly right now"
    } else if leaves.uncertainty == high {
        "I'm not sure what matters most to me"
    } else {
        "I'm not ready to commit yet"
    }
}

fn rejection_reason(state: &GlobalState, s: &SelectionOutcome) -> String {
    let mut attr_violation = None;
    for e in &s.candidate_trace.eliminated {
        match &e.reason {
            EliminationReason::Violated { constraint } | EliminationReason::MissingAttribute { constraint } => {
                if constraint.strip_prefix(PRICE).is_some_and(|r| r.starts_with(" ")) {
                    return format!("none of these fit my budget of {:.2}", state.scenario.budget);
                }
                attr_violation.get_or_insert_with(|| constraint.clone());
            }
            _ => {}
        }
    }
    match attr_violation {
        Some(c) => format!("none of these meet what I need ({c})"),
        None => "there is nothing here I can use".to_string(),
    }
}

/// Fixed templates per intent.
#[derive(Debug, Default, Clone, Copy)]
pub struct Template;

impl ResponseProvider for Template {
    fn name(&self) -> &'static str {
        "template"
    }

    fn select_action(&self, state: &GlobalState, _history: &DialogueHistory, decision: &Decision) -> Result<Intent, ProviderError> {
        Ok(template_intent(decision, state.persona.openness))
    }

    fn synthesize(
        &self,
        state: &GlobalState,
        _history: &DialogueHistory,
        decision: &Decision,
        action: Intent,
    ) -> Result<String, ProviderError> {
        let best = decision.selection.best_item.as_deref().unwrap_or("that one");
        Ok(match action {
            Intent::AcceptOffer => format!("That works for me. I'll take {best}."),
            Intent::RejectWithReason => match decision.selection.reject_reason {
                Some(RejectReason::BelowThreshold) => format!("{best} comes closest, but it isn't good enough for me."),
                _ => {
                    let mut r = rejection_reason(state, &decision.selection);
                    r[..1].make_ascii_uppercase();
                    format!("{r}.")
                }
            },
            Intent::AskClarification => {
                format!("None of these quite work for me. Could you tell me more about what makes {best} stand out?")
            }
            Intent::DeferWithRationale => {
                let why = decision.hesitation.as_ref().map_or("I'm not ready to commit yet", |h| deferral_rationale(&h.leaves));
                format!("{best} looks good, but I need to think it over: {why}.")
            }
        })
    }
}

/// Delegates both steps to a text generator.
pub struct External {
    generator: Box<dyn TextGenerator>,
}

impl External {
    pub fn new(generator: Box<dyn TextGenerator>) -> Self {
        External { generator }
    }

    fn context(state: &GlobalState, history: &DialogueHistory, decision: &Decision) -> String {
        format!(
            "You are a shopper looking for {}. Budget {:.2}. Turns so far: {}. Your decision on the latest offer: {}{}.",
            state.scenario.needs.text,
            state.scenario.budget,
            history.len(),
            decision.outcome,
            decision.selection.best_item.as_deref().map(|i| format!(" (best item {i})")).unwrap_or_default()
        )
    }
}

impl ResponseProvider for External {
    fn name(&self) -> &'static str {
        "external"
    }

    fn select_action(&self, state: &GlobalState, history: &DialogueHistory, decision: &Decision) -> Result<Intent, ProviderError> {
        let prompt = format!(
            "{}\nChoose one intent: accept_offer, reject_with_reason, defer_with_rationale, ask_clarification. Reply with the intent only.",
            External::context(state, history, decision)
        );
        let reply = self.generator.complete(&prompt)?;
        let word = reply.trim().trim_matches(|c: char| !c.is_alphanumeric() && c != '_').to_lowercase();
        Intent::parse(&word).ok_or_else(|| ProviderError::Protocol(format!("unknown intent `{}`", reply.trim())))
    }

    fn synthesize(
        &self,
        state: &GlobalState,
        history: &DialogueHistory,
        decision: &Decision,
        action: Intent,
    ) -> Result<String, ProviderError> {
        let prompt = format!(
            "{}\nWrite one short reply to the salesperson with intent {}. Mention only items you were shown.",
            External::context(state, history, decision),
            action.as_str()
        );
        Ok(self.generator.complete(&prompt)?.trim().to_string())
    }
}

pub fn providers() -> Registry<dyn ResponseProvider, LlmSettings> {
    let mut r: Registry<dyn ResponseProvider, LlmSettings> = Registry::new("response provider");
    r.register("template", |_| Ok(Box::new(Template)));
    r.register("external", |s| {
        let client = HttpTextClient::from_env(s.clone()).map_err(|e| e.to_string())?;
        Ok(Box::new(External::new(Box::new(client))))
    });
    r
}
