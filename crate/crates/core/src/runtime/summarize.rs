//! Templated textual replies.

use crate::command::{Command, CommandChain, PlotKind, SortOrder};

use super::execute::{ExecutionResult, StepExtra, StepLog};

/// Largest result (in cells) whose values are quoted in the reply.
pub const INLINE_CELLS: usize = 5;

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

fn quoted(names: &[String]) -> String {
    names.iter().map(|n| format!("`{n}`")).collect::<Vec<_>>().join(", ")
}

fn phrase(cmd: &Command, log: &StepLog) -> String {
    let (rin, rout) = (log.rows_in, log.rows_out);
    match cmd {
        Command::Select(cols) => format!("selected {}", quoted(cols)),
        Command::Filter(_) => format!("filtered to {rout} of {}", plural(rin, "row")),
        Command::Sort { column, order } => {
            let dir = match order {
                SortOrder::Asc => "ascending",
                SortOrder::Desc => "descending",
            };
            format!("sorted by `{column}` {dir}")
        }
        Command::GroupBy { keys, .. } if keys.is_empty() => format!("aggregated {}", plural(rin, "row")),
        Command::GroupBy { keys, .. } => format!("grouped by {} into {}", quoted(keys), plural(rout, "group")),
        Command::Derive { name, .. } => format!("derived `{name}`"),
        Command::SliceTop(_) => format!("returned top {rout} of {}", plural(rin, "row")),
        Command::SliceRange { lo, hi } => format!("returned rows {lo} to {hi} ({})", plural(rout, "row")),
        Command::Update { column, .. } => {
            let n = match log.extra {
                Some(StepExtra::Affected { rows }) => rows,
                _ => 0,
            };
            format!("updated `{column}` in {}", plural(n, "row"))
        }
        Command::InsertRow(_) => "inserted 1 row".to_string(),
        Command::DeleteWhere(_) => format!("deleted {}", plural(rin - rout, "row")),
        Command::Describe(_) => format!("computed statistics for {}", plural(rout, "column")),
        Command::Plot { kind, .. } => {
            let title = match &log.extra {
                Some(StepExtra::Plot(spec)) => spec.title.clone(),
                _ => String::new(),
            };
            let kind = match kind {
                PlotKind::Bar => "bar chart",
                PlotKind::Line => "line chart",
                PlotKind::Scatter => "scatter plot",
                PlotKind::Hist => "histogram",
            };
            format!("prepared a {kind} of {title}")
        }
        Command::Predict { target, .. } => match &log.extra {
            Some(StepExtra::Predict {
                r_squared, features, ..
            }) => format!(
                "predicted `{target}` from {} (R² = {r_squared:.4})",
                plural(features.len(), "feature")
            ),
            _ => format!("predicted `{target}`"),
        },
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// One clause per executed step, joined into a sentence, plus the values of
/// very small results.
pub fn summarize(r: &ExecutionResult, chain: &CommandChain) -> String {
    let t = &r.table;
    if chain.is_empty() {
        return format!(
            "No operations performed; table unchanged ({} × {}).",
            plural(t.num_rows(), "row"),
            plural(t.num_columns(), "column")
        );
    }
    let clauses: Vec<String> = chain
        .iter()
        .zip(&r.step_logs)
        .map(|(cmd, log)| {
            let mut p = phrase(cmd, log);
            if !log.warnings.is_empty() {
                let w: Vec<String> = log.warnings.iter().map(|w| w.to_string()).collect();
                p.push_str(&format!(" ({})", w.join(", ")));
            }
            p
        })
        .collect();
    let mut reply = capitalize(&clauses.join("; "));
    reply.push('.');

    let cells = t.num_rows() * t.num_columns();
    if (1..=INLINE_CELLS).contains(&cells) {
        let names: Vec<&str> = t.schema().names().collect();
        let parts: Vec<String> = (0..t.num_rows())
            .flat_map(|r| names.iter().enumerate().map(move |(c, n)| (r, c, *n)))
            .map(|(r, c, n)| format!("{n} = {}", t.cell(r, c)))
            .collect();
        reply.push_str(&format!(" Result: {}.", parts.join(", ")));
    }
    reply
}

#[cfg(test)]
mod tests {
    use crate::command::parse_chain;
    use crate::ingest::{load_csv, CsvOptions};
    use crate::runtime::execute;
    use crate::table::Table;

    fn movies() -> Table {
        let csv = "title,box_office,cost\nA,100,50\nB,300,100\nC,60,80\nD,240,120\nE,90,30\nF,30,20\n";
        load_csv(csv.as_bytes(), &CsvOptions::named("movies")).unwrap()
    }

    fn reply(text: &str) -> String {
        execute(&parse_chain(text).unwrap(), &movies()).unwrap().reply
    }

    #[test]
    fn movie_chain_reply() {
        assert_eq!(
            reply("DERIVE profit_margin = (box_office - cost) / cost; SORT profit_margin DESC; SLICE TOP 5"),
            "Derived `profit_margin`; sorted by `profit_margin` descending; returned top 5 of 6 rows."
        );
    }

    #[test]
    fn empty_chain_reply() {
        assert_eq!(reply(""), "No operations performed; table unchanged (6 rows × 3 columns).");
    }

    #[test]
    fn describe_reply() {
        assert_eq!(reply("DESCRIBE"), "Computed statistics for 3 columns.");
    }

    #[test]
    fn small_results_are_inlined() {
        assert_eq!(
            reply("GROUPBY MEAN(box_office) AS avg"),
            "Aggregated 6 rows. Result: avg = 136.66666666666666."
        );
        assert_eq!(
            reply("FILTER cost > 100; SELECT title"),
            "Filtered to 1 of 6 rows; selected `title`. Result: title = D."
        );
    }

    #[test]
    fn warnings_are_mentioned() {
        let r = reply("UPDATE cost = 0 WHERE title = 'A'; DERIVE r = box_office / cost; SLICE TOP 1; SELECT r");
        assert!(r.contains("division by zero"), "{r}");
    }
}
