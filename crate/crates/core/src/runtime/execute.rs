//! Deterministic chain execution over a private working copy.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::command::{
    eval_expr, note, AggFunc, Aggregate, Command, CommandChain, EvalError, Expr, PlotKind, PlotSpec,
    SortOrder, Warning,
};
use crate::error::TableError;
use crate::stats::stats_for_values;
use crate::table::{ColumnMeta, Schema, Table};
use crate::value::{parse_datetime, ColumnType, Value};

use super::summarize::summarize;
use super::validate::{agg_output_type, derive_type, describe_schema, evolve, predicted_name, validate};

/// Pivot magnitude below which the normal matrix counts as singular.
pub const PIVOT_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepExtra {
    Plot(PlotSpec),
    Predict {
        target: String,
        features: Vec<String>,
        intercept: f64,
        coefficients: Vec<f64>,
        r_squared: f64,
        fitted_rows: usize,
    },
    Affected { rows: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepLog {
    pub command_index: usize,
    pub rows_in: usize,
    pub rows_out: usize,
    pub warnings: Vec<Warning>,
    pub extra: Option<StepExtra>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionResult {
    pub table: Table,
    pub step_logs: Vec<StepLog>,
    pub reply: String,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum ExecCause {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid command: {0}")]
    Invalid(String),
    #[error("table error: {0}")]
    Table(String),
}

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("command {command_index} failed: {cause}")]
pub struct ExecError {
    pub command_index: usize,
    pub cause: ExecCause,
}

/// Mutable working copy: a schema plus aligned columns.
struct Frame {
    schema: Schema,
    columns: Vec<Vec<Value>>,
    rows: usize,
}

impl Frame {
    fn from_table(t: &Table) -> Self {
        Frame {
            schema: t.schema().clone(),
            columns: t.columns().to_vec(),
            rows: t.num_rows(),
        }
    }

    fn row(&self, r: usize) -> Vec<Value> {
        self.columns.iter().map(|c| c[r].clone()).collect()
    }

    fn col(&self, name: &str) -> Result<usize, ExecCause> {
        self.schema
            .index_of(name)
            .ok_or_else(|| ExecCause::Eval(EvalError::UnknownColumn(name.to_string())))
    }

    fn take(&mut self, indices: &[usize]) {
        for col in &mut self.columns {
            *col = indices.iter().map(|&i| col[i].clone()).collect();
        }
        self.rows = indices.len();
    }

    /// Row indices where `pred` is exactly true.
    fn matching(&self, pred: &Expr, warnings: &mut Vec<Warning>) -> Result<Vec<bool>, ExecCause> {
        (0..self.rows)
            .map(|r| Ok(eval_expr(pred, &self.row(r), &self.schema, warnings)? == Value::Bool(true)))
            .collect()
    }

    fn set_column(&mut self, meta: ColumnMeta, values: Vec<Value>) {
        match self.schema.index_of(&meta.name) {
            Some(i) => {
                self.schema.columns[i] = meta;
                self.columns[i] = values;
            }
            None => {
                let key = crate::table::normalize_name(&meta.name);
                match self
                    .schema
                    .columns
                    .iter()
                    .position(|c| crate::table::normalize_name(&c.name) == key)
                {
                    Some(i) => {
                        self.schema.columns[i] = meta;
                        self.columns[i] = values;
                    }
                    None => {
                        self.schema.columns.push(meta);
                        self.columns.push(values);
                    }
                }
            }
        }
    }

    fn into_table(self) -> Result<Table, TableError> {
        Table::new(self.schema, self.columns)
    }
}

/// Convert `v` for storage in a `ty` column; `None` when impossible.
pub(crate) fn coerce(v: Value, ty: ColumnType) -> Option<Value> {
    match (v, ty) {
        (Value::Null, _) => Some(Value::Null),
        (Value::Int(i), ColumnType::Float) => Some(Value::Float(i as f64)),
        (Value::Text(s), ColumnType::DateTime) => parse_datetime(s.trim()).map(Value::DateTime),
        (v, ty) if v.column_type() == Some(ty) => Some(v),
        _ => None,
    }
}

fn coerce_noting(v: Value, ty: ColumnType, warnings: &mut Vec<Warning>) -> Value {
    coerce(v, ty).unwrap_or_else(|| {
        note(warnings, Warning::CoercionFailed);
        Value::Null
    })
}

/// Null-last ordering for sort keys.
pub fn sort_key_cmp(a: &Value, b: &Value, order: SortOrder) -> Ordering {
    match (a.is_null(), b.is_null()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => {
            let o = a.total_cmp(b);
            match order {
                SortOrder::Asc => o,
                SortOrder::Desc => o.reverse(),
            }
        }
    }
}

/// Hashable identity of a group key cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum KeyCell {
    Null,
    Bool(bool),
    Int(i64),
    Float(u64),
    Text(String),
    DateTime(i64),
}

impl From<&Value> for KeyCell {
    fn from(v: &Value) -> Self {
        match v {
            Value::Null => KeyCell::Null,
            Value::Bool(b) => KeyCell::Bool(*b),
            Value::Int(i) => KeyCell::Int(*i),
            // -0.0 and 0.0 are the same key
            Value::Float(x) => KeyCell::Float(if *x == 0.0 { 0 } else { x.to_bits() }),
            Value::Text(s) => KeyCell::Text(s.clone()),
            Value::DateTime(t) => KeyCell::DateTime(*t),
        }
    }
}

fn aggregate(agg: &Aggregate, cells: &[&Value], input: ColumnType, warnings: &mut Vec<Warning>) -> Value {
    let present: Vec<&Value> = cells.iter().copied().filter(|v| !v.is_null()).collect();
    match agg.func {
        AggFunc::Count => Value::Int(present.len() as i64),
        _ if present.is_empty() => Value::Null,
        AggFunc::Sum if agg_output_type(AggFunc::Sum, Some(input)) == ColumnType::Int => {
            let mut acc: i64 = 0;
            for v in &present {
                if let Value::Int(i) = v {
                    match acc.checked_add(*i) {
                        Some(s) => acc = s,
                        None => {
                            note(warnings, Warning::IntegerOverflow);
                            return Value::Null;
                        }
                    }
                }
            }
            Value::Int(acc)
        }
        AggFunc::Sum | AggFunc::Mean => {
            let sum: f64 = present.iter().filter_map(|v| v.as_f64()).sum();
            let x = if agg.func == AggFunc::Mean {
                sum / present.len() as f64
            } else {
                sum
            };
            if x.is_finite() {
                Value::Float(x)
            } else {
                note(warnings, Warning::NonFiniteResult);
                Value::Null
            }
        }
        AggFunc::Min | AggFunc::Max => {
            let mut best = present[0];
            for v in &present[1..] {
                let o = v.total_cmp(best);
                if (agg.func == AggFunc::Min && o == Ordering::Less) || (agg.func == AggFunc::Max && o == Ordering::Greater)
                {
                    best = v;
                }
            }
            best.clone()
        }
    }
}

fn group_by(frame: &mut Frame, keys: &[String], aggs: &[Aggregate], warnings: &mut Vec<Warning>) -> Result<(), ExecCause> {
    let out_schema = evolve(&frame.schema, &Command::GroupBy {
        keys: keys.to_vec(),
        aggs: aggs.to_vec(),
    });
    let key_idx: Vec<usize> = keys.iter().map(|k| frame.col(k)).collect::<Result<_, _>>()?;
    let agg_idx: Vec<usize> = aggs.iter().map(|a| frame.col(&a.column)).collect::<Result<_, _>>()?;

    let mut order: Vec<Vec<KeyCell>> = Vec::new();
    let mut members: HashMap<Vec<KeyCell>, Vec<usize>> = HashMap::new();
    for r in 0..frame.rows {
        let key: Vec<KeyCell> = key_idx.iter().map(|&c| KeyCell::from(&frame.columns[c][r])).collect();
        members
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(r);
    }
    if keys.is_empty() && order.is_empty() {
        order.push(Vec::new());
        members.insert(Vec::new(), Vec::new());
    }

    let mut out_cols: Vec<Vec<Value>> = vec![Vec::with_capacity(order.len()); key_idx.len() + aggs.len()];
    for key in &order {
        let rows = &members[key];
        for (slot, &c) in key_idx.iter().enumerate() {
            out_cols[slot].push(frame.columns[c][rows[0]].clone());
        }
        for (j, (agg, &c)) in aggs.iter().zip(&agg_idx).enumerate() {
            let cells: Vec<&Value> = rows.iter().map(|&r| &frame.columns[c][r]).collect();
            let input = frame.schema.columns[c].ctype;
            out_cols[key_idx.len() + j].push(aggregate(agg, &cells, input, warnings));
        }
    }
    frame.rows = order.len();
    frame.schema = out_schema;
    frame.columns = out_cols;
    Ok(())
}

fn describe(frame: &mut Frame, cols: Option<&[String]>) -> Result<(), ExecCause> {
    let targets: Vec<usize> = match cols {
        Some(cs) if !cs.is_empty() => cs.iter().map(|c| frame.col(c)).collect::<Result<_, _>>()?,
        _ => (0..frame.schema.len()).collect(),
    };
    let schema = describe_schema(&frame.schema.table_name);
    let mut out: Vec<Vec<Value>> = vec![Vec::with_capacity(targets.len()); schema.len()];
    let opt = |x: Option<f64>| x.map_or(Value::Null, Value::Float);
    for &c in &targets {
        let meta = &frame.schema.columns[c];
        let s = stats_for_values(&frame.columns[c], meta.ctype);
        let row = [
            Value::Text(meta.name.clone()),
            Value::text(meta.ctype.name()),
            Value::Int(s.count_nonnull as i64),
            Value::Float(s.null_frac),
            opt(s.mean),
            opt(s.std),
            opt(s.min),
            opt(s.q25),
            opt(s.q50),
            opt(s.q75),
            opt(s.max),
            Value::Int(s.distinct_count as i64),
        ];
        for (col, v) in out.iter_mut().zip(row) {
            col.push(v);
        }
    }
    frame.rows = targets.len();
    frame.schema = schema;
    frame.columns = out;
    Ok(())
}

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
/// `None` when a pivot falls below [`PIVOT_EPS`].
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < PIVOT_EPS {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Some(x)
}

fn predict(
    frame: &mut Frame,
    target: &str,
    using: Option<&[String]>,
    warnings: &mut Vec<Warning>,
) -> Result<StepExtra, ExecCause> {
    let out_name = predicted_name(target);
    let t = frame.col(target)?;
    let features: Vec<String> = match using {
        Some(cols) if !cols.is_empty() => cols.to_vec(),
        _ => frame
            .schema
            .columns
            .iter()
            .filter(|c| c.ctype.is_numeric() && c.name != target && c.name != out_name)
            .map(|c| c.name.clone())
            .collect(),
    };
    let f_idx: Vec<usize> = features.iter().map(|f| frame.col(f)).collect::<Result<_, _>>()?;
    let p = f_idx.len() + 1;

    let design = |r: usize| -> Option<Vec<f64>> {
        let mut x = Vec::with_capacity(p);
        x.push(1.0);
        for &c in &f_idx {
            x.push(frame.columns[c][r].as_f64()?);
        }
        Some(x)
    };
    let fit_rows: Vec<(Vec<f64>, f64)> = (0..frame.rows)
        .filter_map(|r| Some((design(r)?, frame.columns[t][r].as_f64()?)))
        .collect();

    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (x, y) in &fit_rows {
        for i in 0..p {
            xty[i] += x[i] * y;
            for j in 0..p {
                xtx[i][j] += x[i] * x[j];
            }
        }
    }

    let beta = if fit_rows.is_empty() {
        note(warnings, Warning::NoTrainingRows);
        None
    } else {
        match solve_linear(xtx, xty) {
            Some(b) if b.iter().all(|v| v.is_finite()) => Some(b),
            _ => {
                note(warnings, Warning::SingularNormalMatrix);
                let mean = fit_rows.iter().map(|(_, y)| y).sum::<f64>() / fit_rows.len() as f64;
                let mut b = vec![0.0; p];
                b[0] = mean;
                Some(b)
            }
        }
    };
    let fallback = warnings.contains(&Warning::SingularNormalMatrix);

    let predictions: Vec<Value> = (0..frame.rows)
        .map(|r| match (&beta, design(r)) {
            (Some(b), Some(x)) => Value::float(x.iter().zip(b).map(|(a, c)| a * c).sum::<f64>()),
            _ => Value::Null,
        })
        .map(|v| match v {
            Value::Float(x) if !x.is_finite() => Value::Null,
            v => v,
        })
        .collect();

    let r_squared = match &beta {
        Some(b) if !fallback => {
            let mean = fit_rows.iter().map(|(_, y)| y).sum::<f64>() / fit_rows.len() as f64;
            let (mut ss_res, mut ss_tot) = (0.0, 0.0);
            for (x, y) in &fit_rows {
                let yhat: f64 = x.iter().zip(b).map(|(a, c)| a * c).sum();
                ss_res += (y - yhat) * (y - yhat);
                ss_tot += (y - mean) * (y - mean);
            }
            if ss_tot > 0.0 {
                1.0 - ss_res / ss_tot
            } else {
                0.0
            }
        }
        _ => 0.0,
    };

    frame.set_column(ColumnMeta::new(out_name, ColumnType::Float), predictions);
    let beta = beta.unwrap_or_else(|| vec![0.0; p]);
    Ok(StepExtra::Predict {
        target: target.to_string(),
        features,
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        r_squared,
        fitted_rows: fit_rows.len(),
    })
}

pub fn plot_spec(kind: PlotKind, x: &str, y: Option<&str>, agg: Option<AggFunc>) -> PlotSpec {
    let title = match (kind, y, agg) {
        (PlotKind::Hist, ..) => format!("distribution of {x}"),
        (_, Some(y), Some(f)) => format!("{} of {y} by {x}", f.keyword().to_lowercase()),
        (_, Some(y), None) => format!("{y} by {x}"),
        (_, None, _) => x.to_string(),
    };
    PlotSpec {
        kind,
        x: x.to_string(),
        y: y.map(str::to_string),
        agg,
        title,
    }
}

fn step(frame: &mut Frame, cmd: &Command, warnings: &mut Vec<Warning>) -> Result<Option<StepExtra>, ExecCause> {
    match cmd {
        Command::Select(cols) => {
            let mut idx: Vec<usize> = Vec::new();
            for c in cols {
                let i = frame.col(c)?;
                if !idx.contains(&i) {
                    idx.push(i);
                }
            }
            frame.schema.columns = idx.iter().map(|&i| frame.schema.columns[i].clone()).collect();
            frame.columns = idx.iter().map(|&i| std::mem::take(&mut frame.columns[i])).collect();
        }
        Command::Filter(pred) => {
            let keep = frame.matching(pred, warnings)?;
            let idx: Vec<usize> = (0..frame.rows).filter(|&r| keep[r]).collect();
            frame.take(&idx);
        }
        Command::Sort { column, order } => {
            let c = frame.col(column)?;
            let mut idx: Vec<usize> = (0..frame.rows).collect();
            let key = &frame.columns[c];
            idx.sort_by(|&a, &b| sort_key_cmp(&key[a], &key[b], *order));
            frame.take(&idx);
        }
        Command::GroupBy { keys, aggs } => group_by(frame, keys, aggs, warnings)?,
        Command::Derive { name, expr } => {
            let ty = derive_type(expr, &frame.schema);
            let values = (0..frame.rows)
                .map(|r| {
                    let v = eval_expr(expr, &frame.row(r), &frame.schema, warnings)?;
                    Ok(coerce_noting(v, ty, warnings))
                })
                .collect::<Result<Vec<_>, EvalError>>()?;
            frame.set_column(ColumnMeta::new(name.clone(), ty), values);
        }
        Command::SliceTop(n) => {
            let idx: Vec<usize> = (0..frame.rows.min(*n)).collect();
            frame.take(&idx);
        }
        Command::SliceRange { lo, hi } => {
            let end = (*hi).min(frame.rows);
            let idx: Vec<usize> = (*lo.min(&end)..end).collect();
            frame.take(&idx);
        }
        Command::Update {
            column,
            value,
            predicate,
        } => {
            let c = frame.col(column)?;
            let ty = frame.schema.columns[c].ctype;
            let hit = frame.matching(predicate, warnings)?;
            let mut affected = 0;
            for r in 0..frame.rows {
                if hit[r] {
                    let v = eval_expr(value, &frame.row(r), &frame.schema, warnings)?;
                    frame.columns[c][r] = coerce_noting(v, ty, warnings);
                    affected += 1;
                }
            }
            return Ok(Some(StepExtra::Affected { rows: affected }));
        }
        Command::InsertRow(values) => {
            if values.len() != frame.columns.len() {
                return Err(ExecCause::Invalid(format!(
                    "INSERT has {} values for {} columns",
                    values.len(),
                    frame.columns.len()
                )));
            }
            for (i, v) in values.iter().enumerate() {
                let ty = frame.schema.columns[i].ctype;
                let cell = coerce_noting(v.clone(), ty, warnings);
                frame.columns[i].push(cell);
            }
            frame.rows += 1;
            return Ok(Some(StepExtra::Affected { rows: 1 }));
        }
        Command::DeleteWhere(pred) => {
            let hit = frame.matching(pred, warnings)?;
            let idx: Vec<usize> = (0..frame.rows).filter(|&r| !hit[r]).collect();
            let deleted = frame.rows - idx.len();
            frame.take(&idx);
            return Ok(Some(StepExtra::Affected { rows: deleted }));
        }
        Command::Describe(cols) => describe(frame, cols.as_deref())?,
        Command::Plot { kind, x, y, agg } => {
            frame.col(x)?;
            if let Some(y) = y {
                frame.col(y)?;
            }
            return Ok(Some(StepExtra::Plot(plot_spec(*kind, x, y.as_deref(), *agg))));
        }
        Command::Predict { target, using } => {
            return predict(frame, target, using.as_deref(), warnings).map(Some);
        }
    }
    Ok(None)
}

/// Run `chain` over `t`. The input table is never modified.
pub fn execute(chain: &CommandChain, t: &Table) -> Result<ExecutionResult, ExecError> {
    let report = validate(chain, t.schema());
    if let Some(issue) = report.issues.first() {
        return Err(ExecError {
            command_index: issue.command_index,
            cause: ExecCause::Invalid(issue.detail.clone()),
        });
    }
    let mut frame = Frame::from_table(t);
    let mut step_logs = Vec::with_capacity(chain.len());
    for (index, cmd) in chain.commands.iter().enumerate() {
        let rows_in = frame.rows;
        let mut warnings = Vec::new();
        let extra = step(&mut frame, cmd, &mut warnings).map_err(|cause| ExecError {
            command_index: index,
            cause,
        })?;
        step_logs.push(StepLog {
            command_index: index,
            rows_in,
            rows_out: frame.rows,
            warnings,
            extra,
        });
    }
    let last = chain.len().saturating_sub(1);
    let table = frame.into_table().map_err(|e| ExecError {
        command_index: last,
        cause: ExecCause::Table(e.to_string()),
    })?;
    let mut result = ExecutionResult {
        table,
        step_logs,
        reply: String::new(),
    };
    result.reply = summarize(&result, chain);
    Ok(result)
}
