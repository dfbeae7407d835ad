//! The structured command language: AST, parser, canonical serializer and
//! the row-expression evaluator shared by the runtime.

mod ast;
mod eval;
mod parser;
mod serialize;

pub use ast::{
    default_agg_name, AggFunc, Aggregate, BinOp, Command, CommandChain, Expr, PlotKind, PlotSpec, SortOrder,
    UnaryOp,
};
pub use eval::{compare_values, eval_expr, expr_type, note, EvalError, Warning};
pub use parser::{parse_chain, parse_expr, ParseError};
pub use serialize::{quote_ident, serialize_chain, serialize_command, serialize_expr};
