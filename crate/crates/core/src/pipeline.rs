//! The query loop shared by the service and the command line: plan or
//! parse, correct, validate, execute.

use serde::Serialize;
use thiserror::Error;

use crate::command::{parse_chain, serialize_chain, CommandChain, ParseError};
use crate::planner::{PlanContext, PlanOutcome, Planner};
use crate::runtime::{
    correct, execute, validate, CorrectError, CorrectedChain, Correction, ExecError, ExecutionResult, StepLog,
    ValidationReport,
};
use crate::table::{ColumnMeta, Table};
use crate::value::Value;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Ambiguous(#[from] CorrectError),
    #[error("chain failed validation: {}", .0.issues.iter().map(|i| i.detail.as_str()).collect::<Vec<_>>().join("; "))]
    Invalid(ValidationReport),
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// A successfully executed chain.
#[derive(Debug, Clone)]
pub struct Answer {
    pub chain: CommandChain,
    pub corrections: Vec<Correction>,
    pub result: ExecutionResult,
    pub rationale: Vec<String>,
}

#[derive(Debug, Clone)]
pub enum Outcome {
    Answered(Answer),
    Clarification { question: String, candidates: Vec<String> },
}

/// Row-major rendering of a table for JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub columns: Vec<ColumnMeta>,
    pub rows: Vec<Vec<Value>>,
}

impl From<&Table> for ResultTable {
    fn from(t: &Table) -> Self {
        ResultTable {
            columns: t.schema().columns.clone(),
            rows: t.rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum QueryResponse {
    Answered {
        chain_text: String,
        corrections: Vec<Correction>,
        result_table: ResultTable,
        reply: String,
        step_logs: Vec<StepLog>,
        rationale: Vec<String>,
    },
    Clarification {
        question: String,
        candidates: Vec<String>,
    },
}

impl Answer {
    pub fn chain_text(&self) -> String {
        serialize_chain(&self.chain)
    }

    pub fn response(&self) -> QueryResponse {
        QueryResponse::Answered {
            chain_text: self.chain_text(),
            corrections: self.corrections.clone(),
            result_table: ResultTable::from(&self.result.table),
            reply: self.result.reply.clone(),
            step_logs: self.result.step_logs.clone(),
            rationale: self.rationale.clone(),
        }
    }
}

impl Outcome {
    pub fn response(&self) -> QueryResponse {
        match self {
            Outcome::Answered(a) => a.response(),
            Outcome::Clarification { question, candidates } => QueryResponse::Clarification {
                question: question.clone(),
                candidates: candidates.clone(),
            },
        }
    }
}

/// Correct, validate and execute an already parsed chain.
pub fn run_parsed(chain: &CommandChain, table: &Table, rationale: Vec<String>) -> Result<Answer, PipelineError> {
    let CorrectedChain { chain, corrections } = correct(chain, table.schema())?;
    let report = validate(&chain, table.schema());
    if !report.is_ok() {
        return Err(PipelineError::Invalid(report));
    }
    let result = execute(&chain, table)?;
    Ok(Answer {
        chain,
        corrections,
        result,
        rationale,
    })
}

/// Run raw chain text, bypassing the planner.
pub fn run_chain(text: &str, table: &Table) -> Result<Answer, PipelineError> {
    let chain = parse_chain(text)?;
    run_parsed(&chain, table, Vec::new())
}

/// Plan a natural-language query and run the resulting chain.
pub fn run_query(
    query: &str,
    table: &Table,
    planner: &dyn Planner,
    ctx: &PlanContext<'_>,
) -> Result<Outcome, PipelineError> {
    match planner.plan(query, ctx) {
        PlanOutcome::Plan { chain, rationale } => run_parsed(&chain, table, rationale).map(Outcome::Answered),
        PlanOutcome::Rejection { question, candidates } => Ok(Outcome::Clarification { question, candidates }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_csv, CsvOptions};
    use crate::planner::{default_registry, ExemplarStore, RulePlanner};

    fn movies() -> Table {
        let csv = "title,box_office,cost\nA,100,50\nB,300,100\nC,60,80\nD,240,120\nE,90,30\nF,30,20\n";
        load_csv(csv.as_bytes(), &CsvOptions::named("movies")).unwrap()
    }

    #[test]
    fn chain_text_round_trips() {
        let a = run_chain("slice top 2", &movies()).unwrap();
        assert_eq!(a.chain_text(), "SLICE TOP 2");
        assert_eq!(a.result.table.num_rows(), 2);
    }

    #[test]
    fn validation_failure_is_structured() {
        match run_chain("SORT nosuch ASC", &movies()) {
            Err(PipelineError::Invalid(r)) => assert_eq!(r.issues[0].command_index, 0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(run_chain("SORT", &movies()), Err(PipelineError::Parse(_))));
    }

    #[test]
    fn query_answers_and_clarifies() {
        let t = movies();
        let reg = default_registry();
        let store = ExemplarStore::seeded();
        let ctx = PlanContext::new(t.schema(), &reg, &store);
        let out = run_query("Show me the five movies with the highest profit margin", &t, &RulePlanner, &ctx).unwrap();
        let Outcome::Answered(a) = out else { panic!() };
        let titles: Vec<String> = a.result.table.column("title").unwrap().iter().map(|v| v.to_string()).collect();
        assert_eq!(titles, ["B", "E", "A", "D", "F"]);
        let out = run_query("Give me some numbers", &t, &RulePlanner, &ctx).unwrap();
        assert!(matches!(out, Outcome::Clarification { .. }));
    }

    #[test]
    fn response_json_shape() {
        let a = run_chain("FILTER cost > 100", &movies()).unwrap();
        let json = serde_json::to_value(a.response()).unwrap();
        assert_eq!(json["status"], "answered");
        assert_eq!(json["result_table"]["rows"][0][0], "D");
        assert_eq!(json["result_table"]["columns"][2]["type"], "int");
    }
}
