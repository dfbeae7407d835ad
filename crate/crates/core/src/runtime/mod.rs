//! Chain validation, repair, execution and textual replies.

mod correct;
mod execute;
mod resolve;
mod summarize;
mod validate;

pub use correct::{apply_corrections, correct, CorrectError, CorrectedChain, Correction};
pub use execute::{
    execute, plot_spec, solve_linear, sort_key_cmp, ExecCause, ExecError, ExecutionResult, StepExtra, StepLog,
    PIVOT_EPS,
};
pub use resolve::{edit_threshold, resolve_column, resolve_name, CorrectionMethod, Resolution};
pub use summarize::{summarize, INLINE_CELLS};
pub use validate::{describe_schema, evolve, predicted_name, validate, Issue, IssueKind, ValidationReport, DESCRIBE_COLUMNS};
