//! The scripted decision policy and the backend abstraction it plugs into.

use super::{AgentContext, AgentStatus};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    ExploreStep,
    BuildMap,
    PlanGlobal,
    PlanLocal,
    ExecuteStep,
    ReplanLocal,
    ReplanGlobal,
    ReportError,
    Stop,
}

impl Action {
    pub const ALL: [Action; 9] = [
        Action::ExploreStep,
        Action::BuildMap,
        Action::PlanGlobal,
        Action::PlanLocal,
        Action::ExecuteStep,
        Action::ReplanLocal,
        Action::ReplanGlobal,
        Action::ReportError,
        Action::Stop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Action::ExploreStep => "ExploreStep",
            Action::BuildMap => "BuildMap",
            Action::PlanGlobal => "PlanGlobal",
            Action::PlanLocal => "PlanLocal",
            Action::ExecuteStep => "ExecuteStep",
            Action::ReplanLocal => "ReplanLocal",
            Action::ReplanGlobal => "ReplanGlobal",
            Action::ReportError => "ReportError",
            Action::Stop => "Stop",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Action {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Action::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or(())
    }
}

/// The deterministic workflow policy, a pure function of episode status.
/// Escalations take precedence over routine planning so a stuck robot
/// never keeps re-planning the segment that failed.
pub fn scripted_action(s: &AgentStatus) -> Action {
    if s.replans_global > s.max_global_replans {
        return Action::ReportError;
    }
    if !s.has_memory {
        return Action::ExploreStep;
    }
    if !s.has_graph {
        return Action::BuildMap;
    }
    if !s.plan_valid {
        return Action::PlanGlobal;
    }
    if s.plan_complete && s.within_success_radius {
        return Action::Stop;
    }
    if s.conflict_cells > 0 {
        return Action::ReplanLocal;
    }
    if s.local_blocked || s.segment_elapsed_s > s.segment_timeout_s || s.visit_trigger {
        return Action::ReplanGlobal;
    }
    if s.need_local_plan {
        return Action::PlanLocal;
    }
    Action::ExecuteStep
}

/// A backend either picks an action or abdicates with a reason, in which
/// case the caller falls back to the scripted policy and logs it.
pub enum BackendDecision {
    Action(Action),
    Fallback(String),
}

pub trait DecisionBackend {
    fn decide(&mut self, ctx: &AgentContext) -> BackendDecision;
}

/// In-process backend running the scripted policy directly.
#[derive(Debug, Default, Clone, Copy)]
pub struct ScriptedBackend;

impl DecisionBackend for ScriptedBackend {
    fn decide(&mut self, ctx: &AgentContext) -> BackendDecision {
        BackendDecision::Action(scripted_action(&ctx.status))
    }
}
