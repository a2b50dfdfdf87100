//! The turn loop.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::response::{select_action, synthesize_response, Decision, Intent, ResponseProvider};
use super::sales::{scripted_sales_agent, AgentView, SalesError, SalesTurn, SalesAgentConfig};
use crate::catalog::Catalog;
use crate::domain::{append_turn, init_history, DialogueHistory, DomainError, GlobalState, Outcome, TerminalReason, UserTurn};
use crate::hesitation::{hesitate, CalibrationTable, Commit, HesitationError, HesitationParams};
use crate::llm::ProviderError;
use crate::perception::{perceive_overload, PerceptionProvider};
use crate::profile::WeightVector;
use crate::rng::{stream, SessionRng, Stream};
use crate::selection::{Candidate, ResolvedConstraints, SelectionError, SelectionParams, SelectionStatus, SelectionStrategy};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("turn {turn}: {source}")]
    Provider { turn: usize, source: ProviderError },
    #[error("turn {turn}: {source}")]
    Sales { turn: usize, source: SalesError },
    #[error("turn {turn}: {source}")]
    Selection { turn: usize, source: SelectionError },
    #[error("turn {turn}: {source}")]
    Hesitation { turn: usize, source: HesitationError },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// User-side parameters shared by every session of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserModel {
    #[serde(default)]
    pub selection: SelectionParams,
    #[serde(default)]
    pub calibration: CalibrationTable,
    #[serde(default)]
    pub hesitation: HesitationParams,
    /// Shrinkage strength for hidden attributes; larger values pull the
    /// imputed value harder toward the neutral midpoint.
    #[serde(default = "default_kappa")]
    pub imputation_kappa: f64,
}

fn default_kappa() -> f64 {
    2.0
}

impl Default for UserModel {
    fn default() -> Self {
        UserModel {
            selection: SelectionParams::default(),
            calibration: CalibrationTable::default(),
            hesitation: HesitationParams::default(),
            imputation_kappa: default_kappa(),
        }
    }
}

#[derive(Clone, Copy)]
pub struct Providers<'a> {
    pub strategy: &'a dyn SelectionStrategy,
    pub perception: &'a dyn PerceptionProvider,
    pub response: &'a dyn ResponseProvider,
}

/// Turns what the sales agent showed into candidates. Visible attributes
/// are taken at face value; a hidden attribute is guessed as
/// `0.5 + k/(k+kappa) * (mean visible - 0.5)` for an item showing `k`.
pub fn perceive_candidates(sales: &SalesTurn, n_attrs: usize, kappa: f64) -> Vec<Candidate> {
    sales
        .items
        .iter()
        .map(|it| {
            let mut raw = vec![None; n_attrs];
            let mut shown = vec![None; n_attrs];
            let k = it.attributes.len();
            let mean = if k == 0 { 0.5 } else { it.attributes.iter().map(|a| a.value).sum::<f64>() / k as f64 };
            let lambda = if k == 0 { 0.0 } else { k as f64 / (k as f64 + kappa) };
            let guess = 0.5 + lambda * (mean - 0.5);
            let mut perceived = vec![guess; n_attrs];
            for a in &it.attributes {
                raw[a.index] = Some(a.raw);
                shown[a.index] = Some(a.value);
                perceived[a.index] = a.value;
            }
            Candidate { id: it.id.clone(), price: it.price, raw, shown, perceived }
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub fn user_decide(
    sales: &SalesTurn,
    state: &GlobalState,
    w: &WeightVector,
    constraints: &ResolvedConstraints,
    model: &UserModel,
    providers: Providers<'_>,
    turn: usize,
    rng: &mut SessionRng,
) -> Result<Decision, SessionError> {
    let candidates = perceive_candidates(sales, w.len(), model.imputation_kappa);
    let selection = providers
        .strategy
        .select(&candidates, constraints, w, state.persona.pickiness, &model.selection)
        .map_err(|source| SessionError::Selection { turn, source })?;
    if selection.status == SelectionStatus::Reject {
        return Ok(Decision { outcome: Outcome::Reject, selection, hesitation: None });
    }
    let leaves = perceive_overload(sales, state, providers.perception).map_err(|source| SessionError::Provider { turn, source })?;
    let h = hesitate(leaves, &model.calibration, &model.hesitation, rng).map_err(|source| SessionError::Hesitation { turn, source })?;
    let outcome = match h.decision {
        Commit::Purchase => Outcome::Accept,
        Commit::Defer => Outcome::Defer,
    };
    Ok(Decision { outcome, selection, hesitation: Some(h) })
}

/// Everything fixed for one session.
pub struct SessionSetup<'a> {
    pub state: &'a GlobalState,
    pub weights: &'a WeightVector,
    pub constraints: &'a ResolvedConstraints,
    pub sales: &'a SalesAgentConfig,
    pub model: &'a UserModel,
    pub providers: Providers<'a>,
    pub catalog: &'a Catalog,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionSeed {
    pub base_seed: u64,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub purchased: bool,
    pub terminal_turn: usize,
    pub terminal_reason: TerminalReason,
    pub history: DialogueHistory,
    pub decisions: Vec<Decision>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub turn: usize,
    pub sales_items: Vec<String>,
    pub sales_text: String,
    pub user_action: Intent,
    pub user_text: String,
    pub outcome: Outcome,
    pub p_accept: Option<f64>,
    pub d_total: Option<f64>,
    pub selection: crate::selection::SelectionOutcome,
    pub hesitation: Option<crate::hesitation::HesitationOutcome>,
}

impl SessionResult {
    pub fn records(&self) -> Vec<TranscriptRecord> {
        self.history
            .turns
            .iter()
            .zip(&self.decisions)
            .map(|(t, d)| TranscriptRecord {
                turn: t.index,
                sales_items: t.sales.item_ids(),
                sales_text: t.sales.rendered_text.clone(),
                user_action: t.user.action,
                user_text: t.user.text.clone(),
                outcome: t.user.outcome,
                p_accept: d.hesitation.as_ref().map(|h| h.p_accept),
                d_total: d.hesitation.as_ref().map(|h| h.d_total),
                selection: d.selection.clone(),
                hesitation: d.hesitation.clone(),
            })
            .collect()
    }

    /// One JSON record per turn.
    pub fn transcript_jsonl(&self) -> String {
        let mut out = String::new();
        for r in self.records() {
            out.push_str(&serde_json::to_string(&r).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn run_session(setup: &SessionSetup<'_>, seed: SessionSeed, turn_limit: usize) -> Result<SessionResult, SessionError> {
    let mut sales_rng = stream(seed.base_seed, seed.index, Stream::Sales);
    let mut user_rng = stream(seed.base_seed, seed.index, Stream::User);
    let state = setup.state;
    let fingerprint = state.fingerprint();
    let view = AgentView {
        openness: state.persona.openness,
        pickiness: state.persona.pickiness,
        needs_text: &state.scenario.needs.text,
    };
    let mut history = init_history(state, turn_limit)?;
    let mut decisions = Vec::new();
    while !history.is_terminal() {
        let turn = history.len() + 1;
        let sales = scripted_sales_agent(setup.sales, &view, &history, setup.catalog, &mut sales_rng)
            .map_err(|source| SessionError::Sales { turn, source })?;
        let decision = user_decide(
            &sales,
            state,
            setup.weights,
            setup.constraints,
            setup.model,
            setup.providers,
            turn,
            &mut user_rng,
        )?;
        let action = select_action(state, &history, &decision, setup.providers.response)
            .map_err(|source| SessionError::Provider { turn, source })?;
        let text = synthesize_response(state, &history, &decision, action, setup.providers.response)
            .map_err(|source| SessionError::Provider { turn, source })?;
        let user = UserTurn {
            action,
            text,
            outcome: decision.outcome,
            considered_item: decision.selection.best_item.clone().filter(|_| decision.outcome != Outcome::Reject),
        };
        history = append_turn(history, sales, user)?;
        decisions.push(decision);
    }
    debug_assert_eq!(fingerprint, state.fingerprint());
    let terminal_reason = history.terminal.expect("loop ends on a terminal history");
    Ok(SessionResult {
        purchased: terminal_reason == TerminalReason::Purchase,
        terminal_turn: history.len(),
        terminal_reason,
        history,
        decisions,
    })
}
