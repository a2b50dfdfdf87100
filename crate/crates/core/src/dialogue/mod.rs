//! Scripted sales agent, user decision pipeline, responses and the session loop.

pub mod response;
pub mod sales;
pub mod session;

pub use response::{
    deferral_rationale, select_action, synthesize_response, template_intent, Decision, Intent, ResponseProvider, Template,
};
pub use sales::{
    scripted_sales_agent, AgentView, Presentation, SalesAgentConfig, SalesError, SalesMode, SalesTurn, ShownAttribute, ShownItem,
};
pub use session::{
    perceive_candidates, run_session, user_decide, Providers, SessionError, SessionResult, SessionSeed, SessionSetup,
    TranscriptRecord, UserModel,
};
