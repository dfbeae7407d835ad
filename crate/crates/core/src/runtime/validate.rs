//! Static validation with step-by-step schema evolution.

use serde::Serialize;

use crate::command::{expr_type, AggFunc, Command, CommandChain, Expr, PlotKind};
use crate::table::{normalize_name, ColumnMeta, Schema};
use crate::value::{parse_datetime, ColumnType, Value};

use super::resolve::resolve_name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum IssueKind {
    UnknownColumn,
    TypeMismatch,
    EmptyAggregate,
    PredictTargetNonNumeric,
    DuplicateColumn,
    InvalidArgument,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub kind: IssueKind,
    pub command_index: usize,
    pub detail: String,
    pub suggestion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Columns of the table produced by `DESCRIBE`, in order.
pub const DESCRIBE_COLUMNS: [(&str, ColumnType); 12] = [
    ("column", ColumnType::String),
    ("type", ColumnType::String),
    ("count", ColumnType::Int),
    ("null_frac", ColumnType::Float),
    ("mean", ColumnType::Float),
    ("std", ColumnType::Float),
    ("min", ColumnType::Float),
    ("q25", ColumnType::Float),
    ("q50", ColumnType::Float),
    ("q75", ColumnType::Float),
    ("max", ColumnType::Float),
    ("distinct", ColumnType::Int),
];

pub fn describe_schema(table_name: &str) -> Schema {
    Schema {
        table_name: table_name.to_string(),
        columns: DESCRIBE_COLUMNS
            .iter()
            .map(|(n, t)| ColumnMeta::new(*n, *t))
            .collect(),
    }
}

pub fn predicted_name(target: &str) -> String {
    format!("predicted_{target}")
}

pub(crate) fn agg_output_type(func: AggFunc, input: Option<ColumnType>) -> ColumnType {
    match func {
        AggFunc::Count => ColumnType::Int,
        AggFunc::Mean => ColumnType::Float,
        AggFunc::Sum => match input {
            Some(ColumnType::Int) => ColumnType::Int,
            _ => ColumnType::Float,
        },
        AggFunc::Min | AggFunc::Max => input.unwrap_or(ColumnType::Float),
    }
}

/// Type a `DERIVE` output column takes.
pub(crate) fn derive_type(expr: &Expr, schema: &Schema) -> ColumnType {
    match expr_type(expr, schema) {
        Ok(Some(t)) => t,
        _ => ColumnType::Float,
    }
}

/// Replace the column whose normalized name matches `meta`, or append it.
fn upsert(columns: &mut Vec<ColumnMeta>, meta: ColumnMeta) {
    let key = normalize_name(&meta.name);
    match columns.iter_mut().find(|c| normalize_name(&c.name) == key) {
        Some(slot) => *slot = meta,
        None => columns.push(meta),
    }
}

fn push_unique(columns: &mut Vec<ColumnMeta>, meta: ColumnMeta) {
    let key = normalize_name(&meta.name);
    if !columns.iter().any(|c| normalize_name(&c.name) == key) {
        columns.push(meta);
    }
}

/// Schema after applying `cmd` to a table with `schema`. Best effort for
/// invalid commands: unknown references are skipped.
pub fn evolve(schema: &Schema, cmd: &Command) -> Schema {
    let mut out = schema.clone();
    match cmd {
        Command::Select(cols) => {
            let mut columns = Vec::new();
            for c in cols {
                if let Some(meta) = schema.column(c) {
                    push_unique(&mut columns, meta.clone());
                }
            }
            out.columns = columns;
        }
        Command::GroupBy { keys, aggs } => {
            let mut columns = Vec::new();
            for k in keys {
                if let Some(meta) = schema.column(k) {
                    push_unique(&mut columns, meta.clone());
                }
            }
            for a in aggs {
                let input = schema.column(&a.column).map(|c| c.ctype);
                push_unique(
                    &mut columns,
                    ColumnMeta::new(a.out_name.clone(), agg_output_type(a.func, input)),
                );
            }
            out.columns = columns;
        }
        Command::Derive { name, expr } => {
            upsert(&mut out.columns, ColumnMeta::new(name.clone(), derive_type(expr, schema)));
        }
        Command::Describe(_) => out = describe_schema(&schema.table_name),
        Command::Predict { target, .. } => {
            upsert(&mut out.columns, ColumnMeta::new(predicted_name(target), ColumnType::Float));
        }
        Command::Filter(_)
        | Command::Sort { .. }
        | Command::SliceTop(_)
        | Command::SliceRange { .. }
        | Command::Update { .. }
        | Command::InsertRow(_)
        | Command::DeleteWhere(_)
        | Command::Plot { .. } => {}
    }
    out
}

/// Whether a value of static type `from` can be stored in a `to` column.
pub(crate) fn assignable(to: ColumnType, from: Option<ColumnType>) -> bool {
    match from {
        None => true,
        Some(f) => f == to || (to == ColumnType::Float && f == ColumnType::Int) || (to == ColumnType::DateTime && f == ColumnType::String),
    }
}

fn literal_assignable(to: ColumnType, v: &Value) -> bool {
    match v {
        Value::Text(s) if to == ColumnType::DateTime => parse_datetime(s.trim()).is_some(),
        _ => assignable(to, v.column_type()),
    }
}

struct Checker<'a> {
    index: usize,
    schema: &'a Schema,
    issues: &'a mut Vec<Issue>,
}

impl Checker<'_> {
    fn push(&mut self, kind: IssueKind, detail: String) {
        self.issues.push(Issue {
            kind,
            command_index: self.index,
            detail,
            suggestion: None,
        });
    }

    fn predicate(&mut self, what: &str, e: &Expr) {
        match expr_type(e, self.schema) {
            Ok(None | Some(ColumnType::Bool)) => {}
            Ok(Some(t)) => self.push(
                IssueKind::TypeMismatch,
                format!("{what} must be boolean, found {t}"),
            ),
            Err(err) => self.push(IssueKind::TypeMismatch, err.to_string()),
        }
    }

    fn expression(&mut self, e: &Expr) -> Option<ColumnType> {
        match expr_type(e, self.schema) {
            Ok(t) => t,
            Err(err) => {
                self.push(IssueKind::TypeMismatch, err.to_string());
                None
            }
        }
    }

    fn ctype(&self, col: &str) -> ColumnType {
        self.schema.column(col).map_or(ColumnType::String, |c| c.ctype)
    }
}

/// Check `chain` against `schema`, evolving the schema command by command.
pub fn validate(chain: &CommandChain, schema: &Schema) -> ValidationReport {
    let mut issues = Vec::new();
    let mut current = schema.clone();
    let last = chain.len().saturating_sub(1);
    for (index, cmd) in chain.commands.iter().enumerate() {
        let mut unknown = false;
        let mut seen = Vec::new();
        for name in cmd.column_refs() {
            if current.index_of(name).is_none() && !seen.contains(&name) {
                seen.push(name);
                unknown = true;
                issues.push(Issue {
                    kind: IssueKind::UnknownColumn,
                    command_index: index,
                    detail: format!("unknown column `{name}`"),
                    suggestion: resolve_name(name, &current),
                });
            }
        }
        let mut ck = Checker {
            index,
            schema: &current,
            issues: &mut issues,
        };
        match cmd {
            Command::Select(cols) if cols.is_empty() => {
                ck.push(IssueKind::InvalidArgument, "SELECT needs at least one column".into())
            }
            Command::SliceTop(0) => ck.push(IssueKind::InvalidArgument, "SLICE TOP needs n >= 1".into()),
            Command::SliceRange { lo, hi } if lo > hi => {
                ck.push(IssueKind::InvalidArgument, format!("SLICE range {lo} TO {hi} is reversed"))
            }
            Command::Predict { .. } if index != last => {
                ck.push(IssueKind::InvalidArgument, "PREDICT must be the last command".into())
            }
            _ => {}
        }
        if !unknown {
            check_command(&mut ck, cmd);
        }
        current = evolve(&current, cmd);
    }
    ValidationReport { issues }
}

fn check_command(ck: &mut Checker<'_>, cmd: &Command) {
    match cmd {
        Command::Filter(e) => ck.predicate("FILTER predicate", e),
        Command::DeleteWhere(e) => ck.predicate("DELETE predicate", e),
        Command::GroupBy { keys, aggs } => {
            if aggs.is_empty() {
                ck.push(IssueKind::EmptyAggregate, "GROUPBY needs at least one aggregate".into());
            }
            for a in aggs {
                let t = ck.ctype(&a.column);
                if a.func.requires_numeric() && !t.is_numeric() {
                    ck.push(
                        IssueKind::TypeMismatch,
                        format!("{} over {t} column `{}`", a.func.keyword(), a.column),
                    );
                }
            }
            let mut names: Vec<String> = Vec::new();
            for n in keys.iter().chain(aggs.iter().map(|a| &a.out_name)) {
                let norm = normalize_name(n);
                if names.contains(&norm) {
                    ck.push(IssueKind::DuplicateColumn, format!("output column `{n}` appears twice"));
                } else {
                    names.push(norm);
                }
            }
        }
        Command::Derive { name, expr } => {
            if normalize_name(name).is_empty() {
                ck.push(IssueKind::InvalidArgument, "DERIVE needs a non-empty column name".into());
            }
            ck.expression(expr);
        }
        Command::Update {
            column,
            value,
            predicate,
        } => {
            let to = ck.ctype(column);
            if let Some(from) = ck.expression(value) {
                if !assignable(to, Some(from)) {
                    ck.push(
                        IssueKind::TypeMismatch,
                        format!("cannot assign {from} to {to} column `{column}`"),
                    );
                }
            }
            ck.predicate("UPDATE predicate", predicate);
        }
        Command::InsertRow(values) => {
            if values.len() != ck.schema.len() {
                ck.push(
                    IssueKind::TypeMismatch,
                    format!("INSERT has {} values for {} columns", values.len(), ck.schema.len()),
                );
            } else {
                for (v, meta) in values.iter().zip(&ck.schema.columns) {
                    if !literal_assignable(meta.ctype, v) {
                        ck.push(
                            IssueKind::TypeMismatch,
                            format!("cannot insert {} into {} column `{}`", v.type_name(), meta.ctype, meta.name),
                        );
                    }
                }
            }
        }
        Command::Plot { kind, x, y, agg } => {
            if *kind == PlotKind::Hist {
                if y.is_some() || agg.is_some() {
                    ck.push(IssueKind::InvalidArgument, "HIST takes a single column".into());
                }
                if !ck.ctype(x).is_numeric() {
                    ck.push(IssueKind::TypeMismatch, format!("HIST over non-numeric column `{x}`"));
                }
            }
            if *kind == PlotKind::Bar && agg.is_some() && y.is_none() {
                ck.push(IssueKind::InvalidArgument, "BAR with AGG needs a y column".into());
            }
            if let (Some(f), Some(y)) = (agg, y) {
                if f.requires_numeric() && !ck.ctype(y).is_numeric() {
                    ck.push(IssueKind::TypeMismatch, format!("{} over non-numeric column `{y}`", f.keyword()));
                }
            }
        }
        Command::Predict { target, using } => {
            if !ck.ctype(target).is_numeric() {
                ck.push(
                    IssueKind::PredictTargetNonNumeric,
                    format!("target `{target}` has type {}", ck.ctype(target)),
                );
            }
            for c in using.iter().flatten() {
                if !ck.ctype(c).is_numeric() {
                    ck.push(IssueKind::TypeMismatch, format!("feature `{c}` is not numeric"));
                }
            }
        }
        Command::Select(_)
        | Command::Sort { .. }
        | Command::SliceTop(_)
        | Command::SliceRange { .. }
        | Command::Describe(_) => {}
    }
}
