//! Query planning: natural-language request plus schema to a command chain,
//! or a clarification question when the request is too vague.

mod adapter;
mod exemplar;
mod measure;
mod rules;

use serde::Serialize;

use crate::command::{BinOp, CommandChain, SortOrder};
use crate::runtime::{correct, validate};
use crate::table::Schema;
use crate::value::Value;

pub use adapter::{AdapterPlanner, ChainGenerator, MockGenerator, MockPlanner};
pub use exemplar::{build_prompt, embed_text, Exemplar, ExemplarStore, EMBED_DIM};
pub use measure::{default_registry, resolve_measure, MeasureDef, MeasureRegistry, MeasureResolution, RegistryError};
pub use rules::{vagueness_score, RulePlanner};

/// Vagueness at or above which a request is turned into a clarification.
pub const DEFAULT_VAGUENESS_THRESHOLD: f64 = 0.8;
/// Most column names offered back in a clarification.
pub const MAX_CANDIDATES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Show,
    Sort,
    Filter,
    Aggregate,
    Describe,
    Plot,
    Predict,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Constraint {
    pub column: String,
    pub op: BinOp,
    pub value: Value,
}

/// What the request asks for, before it becomes commands.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Intent {
    pub action: Action,
    pub measures: Vec<String>,
    pub constraints: Vec<Constraint>,
    pub limit: Option<usize>,
    pub direction: Option<SortOrder>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanOutcome {
    Plan { chain: CommandChain, rationale: Vec<String> },
    Rejection { question: String, candidates: Vec<String> },
}

impl PlanOutcome {
    pub fn is_plan(&self) -> bool {
        matches!(self, PlanOutcome::Plan { .. })
    }
}

/// Everything a planner may look at besides the query text.
#[derive(Debug, Clone, Copy)]
pub struct PlanContext<'a> {
    pub schema: &'a Schema,
    pub registry: &'a MeasureRegistry,
    pub exemplars: &'a ExemplarStore,
    /// Global table embedding, when one has been computed.
    pub embedding: Option<&'a [f64]>,
    pub vagueness_threshold: f64,
}

impl<'a> PlanContext<'a> {
    pub fn new(schema: &'a Schema, registry: &'a MeasureRegistry, exemplars: &'a ExemplarStore) -> Self {
        PlanContext {
            schema,
            registry,
            exemplars,
            embedding: None,
            vagueness_threshold: DEFAULT_VAGUENESS_THRESHOLD,
        }
    }
}

pub trait Planner: Send + Sync {
    fn plan(&self, query: &str, ctx: &PlanContext<'_>) -> PlanOutcome;
}

/// Plan with the rule-based reference planner and default threshold.
pub fn plan(query: &str, schema: &Schema, registry: &MeasureRegistry, exemplars: &ExemplarStore) -> PlanOutcome {
    RulePlanner.plan(query, &PlanContext::new(schema, registry, exemplars))
}

/// Up to [`MAX_CANDIDATES`] column names, numeric columns first.
pub fn candidate_columns(schema: &Schema) -> Vec<String> {
    let numeric = schema.columns.iter().filter(|c| c.ctype.is_numeric());
    let other = schema.columns.iter().filter(|c| !c.ctype.is_numeric());
    numeric
        .chain(other)
        .take(MAX_CANDIDATES)
        .map(|c| c.name.clone())
        .collect()
}

/// Correct and validate a proposed chain. Anything that still fails
/// validation becomes a clarification rather than a broken plan.
pub(crate) fn finalize(chain: CommandChain, mut rationale: Vec<String>, schema: &Schema) -> PlanOutcome {
    let corrected = match correct(&chain, schema) {
        Ok(c) => c,
        Err(crate::runtime::CorrectError::AmbiguousColumn { name, candidates, .. }) => {
            return PlanOutcome::Rejection {
                question: format!("Which column did you mean by \"{name}\": {}?", candidates.join(" or ")),
                candidates,
            }
        }
    };
    for c in &corrected.corrections {
        rationale.push(format!("read `{}` as `{}`", c.original, c.replacement));
    }
    let report = validate(&corrected.chain, schema);
    if let Some(issue) = report.issues.first() {
        return PlanOutcome::Rejection {
            question: format!(
                "I could not turn that into a valid command chain ({}). Could you rephrase or name the columns to use?",
                issue.detail
            ),
            candidates: candidate_columns(schema),
        };
    }
    PlanOutcome::Plan {
        chain: corrected.chain,
        rationale,
    }
}
