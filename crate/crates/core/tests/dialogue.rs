mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::*;
use hesitator_core::catalog::{synthesize_catalog, AttributeDescriptor, AttributeSchema, Catalog, Item};
use hesitator_core::dialogue::{
    deferral_rationale, response, run_session, scripted_sales_agent, select_action, synthesize_response, template_intent,
    user_decide, AgentView, Decision, Intent, Presentation, Providers, ResponseProvider, SalesAgentConfig, SalesError, SalesMode,
    SalesTurn, SessionResult, SessionSeed, SessionSetup, Template, TranscriptRecord, UserModel,
};
use hesitator_core::domain::{
    append_turn, init_history, Comparator, Constraint, ConstraintSet, DialogueHistory, GlobalState, Level, Outcome, TerminalReason,
    UserTurn,
};
use hesitator_core::hesitation::{CalibrationTable, FactorCalibration, LeafScores};
use hesitator_core::llm::{ProviderError, TextGenerator};
use hesitator_core::perception::RuleBased;
use hesitator_core::profile::WeightVector;
use hesitator_core::rng::{stream, Stream};
use hesitator_core::selection::{
    CandidateTrace, Elimination, EliminationReason, FlatRating, RejectReason, ResolvedConstraints, SelectionOutcome,
    SelectionParams, SelectionStatus, Structured,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn catalog() -> Catalog {
    synthesize_catalog(21, 60, 8, (20.0, 500.0)).unwrap()
}

fn config(n: usize, k: usize, mode: SalesMode) -> SalesAgentConfig {
    SalesAgentConfig { assortment_size: n, attributes_shown: k, presentation: Presentation::Tabular, mode, relevance: false }
}

fn view(st: &GlobalState) -> AgentView<'_> {
    AgentView { openness: st.persona.openness, pickiness: st.persona.pickiness, needs_text: &st.scenario.needs.text }
}

fn user(outcome: Outcome, considered: Option<&str>) -> UserTurn {
    UserTurn { considered_item: considered.map(str::to_owned), ..user_turn(outcome) }
}

#[test]
fn sales_turn_has_requested_shape() {
    let c = catalog();
    let st = state(2, 2, 2, 2);
    let h = init_history(&st, 20).unwrap();
    for (n, k) in [(1, 1), (3, 5), (12, 8)] {
        let t = scripted_sales_agent(&config(n, k, SalesMode::Basic), &view(&st), &h, &c, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(t.items.len(), n);
        assert_eq!(t.shown_attribute_count, k);
        assert!(t.items.iter().all(|i| i.attributes.len() == k));
        assert_eq!(t.item_ids().iter().collect::<BTreeSet<_>>().len(), n);
        for it in &t.items {
            assert!(t.rendered_text.contains(&it.id));
        }
    }
}

#[test]
fn sales_agent_is_deterministic() {
    let c = catalog();
    let st = state(2, 2, 2, 2);
    let h = init_history(&st, 20).unwrap();
    let cfg = config(4, 3, SalesMode::Basic);
    let a = scripted_sales_agent(&cfg, &view(&st), &h, &c, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = scripted_sales_agent(&cfg, &view(&st), &h, &c, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sales_agent_rejects_bad_configs() {
    let small = synthesize_catalog(1, 2, 3, (1.0, 2.0)).unwrap();
    let st = state(2, 2, 2, 2);
    let h = init_history(&st, 20).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(scripted_sales_agent(&config(3, 1, SalesMode::Basic), &view(&st), &h, &small, &mut rng), Err(SalesError::Config(_))));
    assert!(matches!(scripted_sales_agent(&config(1, 4, SalesMode::Basic), &view(&st), &h, &small, &mut rng), Err(SalesError::Config(_))));
    assert!(matches!(scripted_sales_agent(&config(0, 1, SalesMode::Basic), &view(&st), &h, &small, &mut rng), Err(SalesError::Config(_))));
}

#[test]
fn basic_mode_skips_rejected_items() {
    let c = catalog();
    let st = state(2, 2, 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = config(5, 2, SalesMode::Basic);
    let mut h = init_history(&st, 20).unwrap();
    let mut rejected = BTreeSet::new();
    for _ in 0..8 {
        let t = scripted_sales_agent(&cfg, &view(&st), &h, &c, &mut rng).unwrap();
        for id in t.item_ids() {
            assert!(!rejected.contains(&id), "{id} re-offered after rejection");
            rejected.insert(id);
        }
        h = append_turn(h, t, user(Outcome::Reject, None)).unwrap();
    }
}

#[test]
fn persuasive_mode_reoffers_the_deferred_item() {
    let c = catalog();
    let st = state(2, 2, 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = config(3, 2, SalesMode::PersuasiveLite);
    let h = init_history(&st, 20).unwrap();
    let first = scripted_sales_agent(&cfg, &view(&st), &h, &c, &mut rng).unwrap();
    let deferred = first.items[2].id.clone();
    let h = append_turn(h, first, user(Outcome::Defer, Some(&deferred))).unwrap();
    let next = scripted_sales_agent(&cfg, &view(&st), &h, &c, &mut rng).unwrap();
    assert_eq!(next.items[0].id, deferred);
}

#[test]
fn relevance_ranks_by_token_overlap() {
    let schema = AttributeSchema::new(vec![AttributeDescriptor::numeric("q", 0.0, 1.0)]).unwrap();
    let titles = ["wired earbuds", "wireless headphones", "desk lamp", "wireless speaker", "headphones stand"];
    let items = titles
        .iter()
        .enumerate()
        .map(|(i, t)| Item {
            id: format!("R{i}"),
            title: t.to_string(),
            category: "misc".into(),
            price: 10.0,
            attributes: BTreeMap::from([("q".to_string(), 0.5)]),
        })
        .collect();
    let c = Catalog::new(schema, items).unwrap();
    let st = state(2, 2, 2, 2);
    let h = init_history(&st, 20).unwrap();
    let cfg = SalesAgentConfig { relevance: true, ..config(3, 1, SalesMode::Basic) };
    let t = scripted_sales_agent(&cfg, &view(&st), &h, &c, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(t.item_ids(), vec!["R1", "R3", "R4"]);
}

#[test]
fn presentations_render_differently() {
    let c = catalog();
    let st = state(3, 2, 2, 2);
    let h = init_history(&st, 20).unwrap();
    let texts: Vec<String> = [Presentation::Tabular, Presentation::Mixed, Presentation::FreeText]
        .into_iter()
        .map(|p| {
            let cfg = SalesAgentConfig { presentation: p, ..config(3, 3, SalesMode::Basic) };
            scripted_sales_agent(&cfg, &view(&st), &h, &c, &mut ChaCha8Rng::seed_from_u64(2)).unwrap().rendered_text
        })
        .collect();
    assert!(texts[0].starts_with("Here are 3 options"));
    assert!(texts[1].starts_with("My top pick"));
    assert!(texts[2].contains("percent") && texts[2].contains("unit scale"));
}

fn selection(status: SelectionStatus, reason: Option<RejectReason>, best: Option<&str>) -> SelectionOutcome {
    SelectionOutcome {
        status,
        best_item: best.map(str::to_owned),
        best_utility: best.map(|_| 0.8),
        threshold: 0.7,
        reject_reason: reason,
        candidate_trace: CandidateTrace::default(),
    }
}

fn decision(outcome: Outcome, reason: Option<RejectReason>) -> Decision {
    let status = if outcome == Outcome::Reject { SelectionStatus::Reject } else { SelectionStatus::Proceed };
    let best = if reason == Some(RejectReason::NoCandidates) { None } else { Some("I0007") };
    Decision { outcome, selection: selection(status, reason, best), hesitation: None }
}

#[test]
fn intent_table_over_every_cell() {
    let cells = [
        (Outcome::Accept, None),
        (Outcome::Defer, None),
        (Outcome::Reject, Some(RejectReason::NoCandidates)),
        (Outcome::Reject, Some(RejectReason::BelowThreshold)),
    ];
    for (o, r) in cells {
        for phi in Level::ALL {
            let got = template_intent(&decision(o, r), phi);
            let expected = match (o, r, phi.get()) {
                (Outcome::Accept, _, _) => Intent::AcceptOffer,
                (Outcome::Defer, _, _) => Intent::DeferWithRationale,
                (Outcome::Reject, Some(RejectReason::BelowThreshold), 3) => Intent::AskClarification,
                _ => Intent::RejectWithReason,
            };
            assert_eq!(got, expected, "{o:?} {r:?} {phi}");
            assert!(got.consistent_with(o));
        }
    }
}

#[test]
fn rationale_prefers_assortment() {
    let mut l = LeafScores {
        assortment: Level::HIGH,
        dominance: Level::HIGH,
        alignability: Level::LOW,
        attribute_count: Level::LOW,
        format: Level::LOW,
        time_pressure: Level::LOW,
        uncertainty: Level::LOW,
    };
    assert_eq!(deferral_rationale(&l), "there are too many similar options");
    l.assortment = Level::LOW;
    assert_eq!(deferral_rationale(&l), "each option is better at something different");
    l.dominance = Level::MID;
    assert_eq!(deferral_rationale(&l), "I'm not ready to commit yet");
}

#[test]
fn template_texts() {
    let st = state(2, 2, 2, 2);
    let h = init_history(&st, 20).unwrap();
    let mut d = decision(Outcome::Reject, Some(RejectReason::NoCandidates));
    d.selection.candidate_trace.eliminated = vec![Elimination {
        id: "I0001".into(),
        reason: EliminationReason::Violated { constraint: "price <= 150".into() },
    }];
    let t = synthesize_response(&st, &h, &d, Intent::RejectWithReason, &Template).unwrap();
    assert_eq!(t, "None of these fit my budget of 150.00.");
    assert_eq!(t, synthesize_response(&st, &h, &d, Intent::RejectWithReason, &Template).unwrap());
    let low = decision(Outcome::Reject, Some(RejectReason::BelowThreshold));
    assert_eq!(
        synthesize_response(&st, &h, &low, Intent::RejectWithReason, &Template).unwrap(),
        "I0007 comes closest, but it isn't good enough for me."
    );
    let acc = decision(Outcome::Accept, None);
    assert!(synthesize_response(&st, &h, &acc, Intent::AcceptOffer, &Template).unwrap().contains("I'll take I0007"));
}

#[test]
fn defer_text_carries_overload_rationale() {
    let c = catalog();
    let st = state(2, 2, 2, 2);
    let h = init_history(&st, 20).unwrap();
    let sales = scripted_sales_agent(&config(9, 3, SalesMode::Basic), &view(&st), &h, &c, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let weights = WeightVector::uniform(c.schema());
    let rc = ResolvedConstraints::default();
    let model = UserModel { selection: SelectionParams { gamma: 0.0, alpha: 0.0, theta: 3 }, calibration: never_accept(), ..UserModel::default() };
    let d = user_decide(&sales, &st, &weights, &rc, &model, rule_providers(), 1, &mut stream(1, 0, Stream::User)).unwrap();
    assert_eq!(d.outcome, Outcome::Defer);
    assert_eq!(d.hesitation.as_ref().unwrap().leaves.assortment, Level::HIGH);
    let a = select_action(&st, &h, &d, &Template).unwrap();
    let text = synthesize_response(&st, &h, &d, a, &Template).unwrap();
    assert!(text.contains("too many similar options"), "{text}");
}

fn rule_providers() -> Providers<'static> {
    Providers { strategy: &Structured, perception: &RuleBased, response: &Template }
}

fn fixed(beta: f64, d: f64) -> FactorCalibration {
    FactorCalibration::new(beta, d, d)
}

fn always_accept() -> CalibrationTable {
    CalibrationTable {
        assortment: fixed(1.0, -1.0),
        complexity: fixed(1.0, -1.0),
        difficulty: fixed(1.0, -1.0),
        uncertainty: fixed(1.0, -1.0),
        ..CalibrationTable::default()
    }
}

fn never_accept() -> CalibrationTable {
    CalibrationTable {
        assortment: fixed(1.0, 1.0),
        complexity: fixed(1.0, 1.0),
        difficulty: fixed(1.0, 1.0),
        uncertainty: fixed(1.0, 1.0),
        ..CalibrationTable::default()
    }
}

/// Every range collapsed to its upper end.
fn all_max() -> CalibrationTable {
    let d = CalibrationTable::default();
    let up = |f: FactorCalibration| FactorCalibration::new(f.beta, f.delta_max, f.delta_max);
    CalibrationTable {
        assortment: up(d.assortment),
        complexity: up(d.complexity),
        difficulty: up(d.difficulty),
        uncertainty: up(d.uncertainty),
        ..d
    }
}

struct Fixture {
    catalog: Catalog,
    state: GlobalState,
    weights: WeightVector,
    constraints: ResolvedConstraints,
    sales: SalesAgentConfig,
    model: UserModel,
}

impl Fixture {
    fn new(budget: f64, model: UserModel, sales: SalesAgentConfig) -> Self {
        let catalog = catalog();
        let set = ConstraintSet::new(vec![Constraint::new("price", Comparator::Le, budget)]);
        let state = state_with(persona(2, 2, 2), "wireless headphones", set.clone(), budget, 2);
        let constraints = ResolvedConstraints::resolve(&set, catalog.schema()).unwrap();
        let weights = WeightVector::uniform(catalog.schema());
        Fixture { catalog, state, weights, constraints, sales, model }
    }

    fn run(&self, providers: Providers<'_>, index: u64, turns: usize) -> SessionResult {
        let setup = SessionSetup {
            state: &self.state,
            weights: &self.weights,
            constraints: &self.constraints,
            sales: &self.sales,
            model: &self.model,
            providers,
            catalog: &self.catalog,
        };
        run_session(&setup, SessionSeed { base_seed: 77, index }, turns).unwrap()
    }
}

fn open_model(calibration: CalibrationTable) -> UserModel {
    UserModel { selection: SelectionParams { gamma: 0.0, alpha: 0.0, theta: 3 }, calibration, ..UserModel::default() }
}

#[test]
fn over_budget_offers_are_rejected_without_hesitation() {
    let f = Fixture::new(1.0, UserModel::default(), config(5, 3, SalesMode::Basic));
    let r = f.run(rule_providers(), 0, 3);
    assert!(!r.purchased);
    for (t, d) in r.history.turns.iter().zip(&r.decisions) {
        assert_eq!(d.outcome, Outcome::Reject);
        assert_eq!(d.selection.reject_reason, Some(RejectReason::NoCandidates));
        assert!(d.hesitation.is_none());
        assert!(t.user.text.contains("budget"), "{}", t.user.text);
    }
}

#[test]
fn forced_acceptance_ends_at_turn_one() {
    let f = Fixture::new(1000.0, open_model(always_accept()), config(3, 4, SalesMode::Basic));
    for i in 0..20 {
        let r = f.run(rule_providers(), i, 20);
        assert!(r.purchased);
        assert_eq!(r.terminal_turn, 1);
        assert_eq!(r.history.len(), 1);
        let h = r.decisions[0].hesitation.as_ref().unwrap();
        assert_eq!(h.d_total, -std::f64::consts::FRAC_PI_2);
        assert_eq!(h.p_accept, 1.0);
    }
}

#[test]
fn forced_refusal_runs_to_the_turn_limit() {
    let f = Fixture::new(1000.0, open_model(never_accept()), config(3, 4, SalesMode::Basic));
    let r = f.run(rule_providers(), 0, 20);
    assert!(!r.purchased);
    assert_eq!(r.terminal_turn, 20);
    assert_eq!(r.terminal_reason, TerminalReason::TurnLimit);
    assert!(r.decisions.iter().all(|d| d.outcome == Outcome::Defer));
}

#[test]
fn upper_calibration_almost_never_buys() {
    let f = Fixture::new(1000.0, open_model(all_max()), config(3, 4, SalesMode::Basic));
    let seed = (0..50).find(|&i| !f.run(rule_providers(), i, 20).purchased).expect("a seed without purchase");
    let r = f.run(rule_providers(), seed, 20);
    assert_eq!((r.terminal_turn, r.purchased), (20, false));
    for d in &r.decisions {
        let h = d.hesitation.as_ref().unwrap();
        assert!((h.d_total - 1.4511).abs() < 5e-5);
        assert!((h.p_accept - 0.0036).abs() < 5e-4);
    }
}

#[test]
fn same_seed_gives_identical_transcripts() {
    let f = Fixture::new(250.0, UserModel::default(), config(4, 5, SalesMode::PersuasiveLite));
    for i in 0..10 {
        assert_eq!(f.run(rule_providers(), i, 20).transcript_jsonl(), f.run(rule_providers(), i, 20).transcript_jsonl());
    }
    assert_ne!(f.run(rule_providers(), 0, 20).transcript_jsonl(), f.run(rule_providers(), 1, 20).transcript_jsonl());
}

fn check_session(r: &SessionResult, h: &DialogueHistory, catalog_ids: &BTreeSet<String>) {
    assert_eq!(r.decisions.len(), h.len());
    for (t, d) in h.turns.iter().zip(&r.decisions) {
        assert_eq!(t.user.outcome, d.outcome);
        assert_eq!(d.hesitation.is_some(), d.selection.status == SelectionStatus::Proceed);
        assert!(t.user.action.consistent_with(d.outcome));
    }
    let last = h.last().unwrap();
    assert_eq!(r.purchased, last.user.outcome == Outcome::Accept);
    assert_eq!(r.purchased, r.terminal_reason == TerminalReason::Purchase);
    let shown: BTreeSet<String> = h.turns.iter().flat_map(|t| t.sales.item_ids()).collect();
    for t in &h.turns {
        for word in t.user.text.split(|c: char| !c.is_alphanumeric()) {
            if catalog_ids.contains(word) {
                assert!(shown.contains(word), "user names unseen item {word}");
            }
        }
    }
}

#[test]
fn session_invariants_hold_across_configurations() {
    let ids: BTreeSet<String> = catalog().items().iter().map(|i| i.id.clone()).collect();
    for (n, k, mode) in [(1, 2, SalesMode::Basic), (5, 6, SalesMode::PersuasiveLite), (12, 8, SalesMode::Basic)] {
        let f = Fixture::new(200.0, UserModel::default(), config(n, k, mode));
        for providers in [rule_providers(), Providers { strategy: &FlatRating, perception: &RuleBased, response: &Template }] {
            for i in 0..15 {
                let r = f.run(providers, i, 20);
                check_session(&r, &r.history, &ids);
            }
        }
    }
}

#[test]
fn transcript_records_round_trip() {
    let f = Fixture::new(250.0, UserModel::default(), config(4, 5, SalesMode::Basic));
    let r = f.run(rule_providers(), 3, 20);
    let jsonl = r.transcript_jsonl();
    let lines: Vec<&str> = jsonl.lines().collect();
    assert_eq!(lines.len(), r.terminal_turn);
    let parsed: Vec<TranscriptRecord> = lines.iter().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(parsed, r.records());
    assert_eq!(parsed[0].turn, 1);
}

struct Scripted(&'static str);

impl TextGenerator for Scripted {
    fn complete(&self, _prompt: &str) -> Result<String, ProviderError> {
        Ok(self.0.to_string())
    }
}

#[test]
fn external_intents_are_checked() {
    let st = state(2, 2, 2, 2);
    let h = init_history(&st, 20).unwrap();
    let d = decision(Outcome::Defer, None);
    let ok = response::External::new(Box::new(Scripted(" defer_with_rationale.\n")));
    assert_eq!(select_action(&st, &h, &d, &ok).unwrap(), Intent::DeferWithRationale);
    let unknown = response::External::new(Box::new(Scripted("haggle")));
    assert!(matches!(select_action(&st, &h, &d, &unknown), Err(ProviderError::Protocol(_))));
    let mismatched = response::External::new(Box::new(Scripted("accept_offer")));
    assert!(matches!(select_action(&st, &h, &d, &mismatched), Err(ProviderError::Protocol(_))));
    assert_eq!(mismatched.synthesize(&st, &h, &d, Intent::DeferWithRationale).unwrap(), "accept_offer");
}

#[test]
fn response_registry() {
    assert_eq!(response::providers().build("template", &Default::default()).unwrap().name(), "template");
    assert!(response::providers().build("poet", &Default::default()).is_err());
}

#[test]
fn sales_turn_serializes_presentation_names() {
    let t = SalesTurn { items: vec![], shown_attribute_count: 1, presentation: Presentation::FreeText, rendered_text: String::new() };
    assert_eq!(serde_json::to_value(&t).unwrap()["presentation"], "free-text");
}
