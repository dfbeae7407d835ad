use std::fmt;

use serde::Serialize;

use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl Serialize for BinOp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.symbol())
    }
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "AND",
            BinOp::Or => "OR",
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div)
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }

    pub fn is_logical(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }

    /// Binding strength; higher binds tighter.
    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
        }
    }
}

/// Row expression. Column names are stored verbatim; resolution against a
/// schema happens in the runtime.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Value),
    Col(String),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn col(name: impl Into<String>) -> Expr {
        Expr::Col(name.into())
    }

    pub fn lit(v: Value) -> Expr {
        Expr::Lit(v)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    /// Every column name referenced, in left-to-right order (with repeats).
    pub fn columns(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |e| {
            if let Expr::Col(c) = e {
                out.push(c.as_str());
            }
        });
        out
    }

    fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Unary(_, e) => e.walk(f),
            Expr::Binary(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            Expr::Lit(_) | Expr::Col(_) => {}
        }
    }

    pub fn rename_columns(&mut self, f: &mut impl FnMut(&str) -> Option<String>) {
        match self {
            Expr::Col(c) => {
                if let Some(new) = f(c) {
                    *c = new;
                }
            }
            Expr::Unary(_, e) => e.rename_columns(f),
            Expr::Binary(_, l, r) => {
                l.rename_columns(f);
                r.rename_columns(f);
            }
            Expr::Lit(_) => {}
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Lit(_) | Expr::Col(_) => 1,
            Expr::Unary(_, e) => 1 + e.depth(),
            Expr::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
        }
    }

    /// Replace column placeholders with expressions (used for measure templates).
    pub fn substitute(&self, f: &impl Fn(&str) -> Option<Expr>) -> Expr {
        match self {
            Expr::Col(c) => f(c).unwrap_or_else(|| self.clone()),
            Expr::Lit(_) => self.clone(),
            Expr::Unary(op, e) => Expr::unary(*op, e.substitute(f)),
            Expr::Binary(op, l, r) => Expr::binary(*op, l.substitute(f), r.substitute(f)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SortOrder {
    Asc,
    Desc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFunc {
    Sum,
    Mean,
    Count,
    Min,
    Max,
}

impl AggFunc {
    pub const ALL: [AggFunc; 5] = [AggFunc::Sum, AggFunc::Mean, AggFunc::Count, AggFunc::Min, AggFunc::Max];

    pub fn keyword(self) -> &'static str {
        match self {
            AggFunc::Sum => "SUM",
            AggFunc::Mean => "MEAN",
            AggFunc::Count => "COUNT",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }

    pub fn from_keyword(word: &str) -> Option<AggFunc> {
        AggFunc::ALL
            .into_iter()
            .find(|f| f.keyword().eq_ignore_ascii_case(word))
    }

    pub fn requires_numeric(self) -> bool {
        matches!(self, AggFunc::Sum | AggFunc::Mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub func: AggFunc,
    pub column: String,
    pub out_name: String,
}

impl Aggregate {
    pub fn new(func: AggFunc, column: impl Into<String>) -> Self {
        let column = column.into();
        let out_name = default_agg_name(func, &column);
        Aggregate {
            func,
            column,
            out_name,
        }
    }
}

pub fn default_agg_name(func: AggFunc, column: &str) -> String {
    format!("{}_{}", func.keyword().to_ascii_lowercase(), column)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PlotKind {
    Bar,
    Line,
    Scatter,
    Hist,
}

impl PlotKind {
    pub const ALL: [PlotKind; 4] = [PlotKind::Bar, PlotKind::Line, PlotKind::Scatter, PlotKind::Hist];

    pub fn keyword(self) -> &'static str {
        match self {
            PlotKind::Bar => "BAR",
            PlotKind::Line => "LINE",
            PlotKind::Scatter => "SCATTER",
            PlotKind::Hist => "HIST",
        }
    }

    pub fn from_keyword(word: &str) -> Option<PlotKind> {
        PlotKind::ALL
            .into_iter()
            .find(|k| k.keyword().eq_ignore_ascii_case(word))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Select(Vec<String>),
    Filter(Expr),
    Sort {
        column: String,
        order: SortOrder,
    },
    GroupBy {
        keys: Vec<String>,
        aggs: Vec<Aggregate>,
    },
    Derive {
        name: String,
        expr: Expr,
    },
    SliceTop(usize),
    /// Half-open row range `[lo, hi)`.
    SliceRange {
        lo: usize,
        hi: usize,
    },
    Update {
        column: String,
        value: Expr,
        predicate: Expr,
    },
    InsertRow(Vec<Value>),
    DeleteWhere(Expr),
    /// `None` describes every column.
    Describe(Option<Vec<String>>),
    Plot {
        kind: PlotKind,
        x: String,
        y: Option<String>,
        agg: Option<AggFunc>,
    },
    /// `using: None` fits on every other numeric column.
    Predict {
        target: String,
        using: Option<Vec<String>>,
    },
}

impl Command {
    pub fn kind(&self) -> &'static str {
        match self {
            Command::Select(_) => "select",
            Command::Filter(_) => "filter",
            Command::Sort { .. } => "sort",
            Command::GroupBy { .. } => "groupby",
            Command::Derive { .. } => "derive",
            Command::SliceTop(_) => "slice_top",
            Command::SliceRange { .. } => "slice_range",
            Command::Update { .. } => "update",
            Command::InsertRow(_) => "insert",
            Command::DeleteWhere(_) => "delete",
            Command::Describe(_) => "describe",
            Command::Plot { .. } => "plot",
            Command::Predict { .. } => "predict",
        }
    }

    pub fn is_mutating(&self) -> bool {
        matches!(
            self,
            Command::Update { .. } | Command::InsertRow(_) | Command::DeleteWhere(_)
        )
    }

    /// Column references (not output names), in syntactic order.
    pub fn column_refs(&self) -> Vec<&str> {
        match self {
            Command::Select(cols) => cols.iter().map(String::as_str).collect(),
            Command::Filter(e) | Command::DeleteWhere(e) => e.columns(),
            Command::Sort { column, .. } => vec![column.as_str()],
            Command::GroupBy { keys, aggs } => keys
                .iter()
                .map(String::as_str)
                .chain(aggs.iter().map(|a| a.column.as_str()))
                .collect(),
            Command::Derive { expr, .. } => expr.columns(),
            Command::SliceTop(_) | Command::SliceRange { .. } | Command::InsertRow(_) => vec![],
            Command::Update {
                column,
                value,
                predicate,
            } => {
                let mut out = vec![column.as_str()];
                out.extend(value.columns());
                out.extend(predicate.columns());
                out
            }
            Command::Describe(cols) => cols
                .iter()
                .flatten()
                .map(String::as_str)
                .collect(),
            Command::Plot { x, y, .. } => std::iter::once(x.as_str()).chain(y.as_deref()).collect(),
            Command::Predict { target, using } => std::iter::once(target.as_str())
                .chain(using.iter().flatten().map(String::as_str))
                .collect(),
        }
    }

    /// Apply `f` to every column reference; `Some(new)` replaces it.
    pub fn rename_refs(&mut self, mut f: impl FnMut(&str) -> Option<String>) {
        let mut rename = |s: &mut String| {
            if let Some(new) = f(s) {
                *s = new;
            }
        };
        match self {
            Command::Select(cols) => cols.iter_mut().for_each(rename),
            Command::Filter(e) | Command::DeleteWhere(e) => e.rename_columns(&mut f),
            Command::Sort { column, .. } => rename(column),
            Command::GroupBy { keys, aggs } => {
                keys.iter_mut().for_each(&mut rename);
                aggs.iter_mut().for_each(|a| rename(&mut a.column));
            }
            Command::Derive { expr, .. } => expr.rename_columns(&mut f),
            Command::SliceTop(_) | Command::SliceRange { .. } | Command::InsertRow(_) => {}
            Command::Update {
                column,
                value,
                predicate,
            } => {
                rename(column);
                value.rename_columns(&mut f);
                predicate.rename_columns(&mut f);
            }
            Command::Describe(cols) => cols.iter_mut().flatten().for_each(rename),
            Command::Plot { x, y, .. } => {
                rename(x);
                if let Some(y) = y {
                    rename(y);
                }
            }
            Command::Predict { target, using } => {
                rename(target);
                using.iter_mut().flatten().for_each(rename);
            }
        }
    }
}

/// Ordered sequence of commands; empty is the identity.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CommandChain {
    pub commands: Vec<Command>,
}

impl CommandChain {
    pub fn new(commands: Vec<Command>) -> Self {
        CommandChain { commands }
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Command> {
        self.commands.iter()
    }
}

impl fmt::Display for CommandChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::serialize_chain(self))
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::serialize_command(self))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::serialize_expr(self))
    }
}

/// Declarative description of a chart, emitted by `PLOT`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotSpec {
    pub kind: PlotKind,
    pub x: String,
    pub y: Option<String>,
    pub agg: Option<AggFunc>,
    pub title: String,
}
