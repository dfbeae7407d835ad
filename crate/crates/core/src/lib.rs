//! Table model, command language, chain runtime and query planner.

pub mod command;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod planner;
pub mod runtime;
pub mod stats;
pub mod table;
pub mod text;
pub mod value;

pub use error::TableError;
pub use ingest::{load_csv, to_csv, CsvOptions};
pub use table::{ColumnMeta, Schema, Table};
pub use value::{ColumnType, Value};
