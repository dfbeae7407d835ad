//! The interactive loop.

use std::io::{self, BufRead, Write};

use tabchain_core::pipeline::{run_chain, run_query, Answer, Outcome, PipelineError};
use tabchain_core::planner::{ExemplarStore, MeasureRegistry, PlanContext, RulePlanner};
use tabchain_core::Table;
use tabchain_service::Config;

use crate::render;

pub const PREVIEW_ROWS: usize = 10;

fn show_answer(out: &mut impl Write, a: &Answer) -> io::Result<()> {
    writeln!(out, "chain: {}", a.chain_text())?;
    for c in &a.corrections {
        writeln!(out, "  corrected `{}` -> `{}`", c.original, c.replacement)?;
    }
    writeln!(out, "{}", render::grid(&a.result.table, Some(PREVIEW_ROWS)))?;
    writeln!(out, "{}", a.result.reply)
}

fn show_error(out: &mut impl Write, e: &PipelineError) -> io::Result<()> {
    match e {
        PipelineError::Invalid(r) => {
            for i in &r.issues {
                write!(out, "error: command {}: {}", i.command_index + 1, i.detail)?;
                match &i.suggestion {
                    Some(s) => writeln!(out, " (did you mean `{s}`?)")?,
                    None => writeln!(out)?,
                }
            }
            Ok(())
        }
        other => writeln!(out, "error: {other}"),
    }
}

/// Reads lines until `:quit` or end of input. Mutating chains replace the
/// working table.
pub fn run(
    input: impl BufRead,
    mut out: impl Write,
    mut table: Table,
    registry: &MeasureRegistry,
    cfg: &Config,
    prompt: bool,
) -> io::Result<()> {
    let exemplars = ExemplarStore::seeded();
    if prompt {
        write!(out, "> ")?;
        out.flush()?;
    }
    for line in input.lines() {
        let line = line?;
        let line = line.trim();
        if line == ":quit" || line == ":q" {
            break;
        }
        if !line.is_empty() {
            let result = match line.strip_prefix(':') {
                Some(chain) => run_chain(chain, &table).map(Outcome::Answered),
                None => {
                    let ctx = PlanContext {
                        vagueness_threshold: cfg.planner.vagueness_threshold,
                        ..PlanContext::new(table.schema(), registry, &exemplars)
                    };
                    run_query(line, &table, &RulePlanner, &ctx)
                }
            };
            match result {
                Ok(Outcome::Answered(a)) => {
                    show_answer(&mut out, &a)?;
                    if a.chain.iter().any(|c| c.is_mutating()) {
                        table = a.result.table;
                    }
                }
                Ok(Outcome::Clarification { question, candidates }) => {
                    writeln!(out, "? {question}")?;
                    if !candidates.is_empty() {
                        writeln!(out, "  candidates: {}", candidates.join(", "))?;
                    }
                }
                Err(e) => show_error(&mut out, &e)?,
            }
        }
        if prompt {
            write!(out, "> ")?;
        }
        out.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tabchain_core::{load_csv, CsvOptions};

    const MOVIES: &str = "title,box_office,cost\nA,100,50\nB,300,100\nC,60,80\nD,240,120\nE,90,30\nF,30,20\n";

    fn session(input: &str) -> String {
        let t = load_csv(MOVIES.as_bytes(), &CsvOptions::named("movies")).unwrap();
        let mut out = Vec::new();
        run(
            input.as_bytes(),
            &mut out,
            t,
            &tabchain_core::planner::default_registry(),
            &Config::default(),
            false,
        )
        .unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn raw_chain_preview() {
        let out = session(":SLICE TOP 1\n:quit\n");
        assert!(out.contains("chain: SLICE TOP 1"));
        assert!(out.contains("(1 row)"));
    }

    #[test]
    fn vague_query_keeps_looping() {
        let out = session("Give me some numbers\n:SORT nosuch ASC\n:SORT\n:SLICE TOP 2\n");
        assert!(out.starts_with("? "));
        assert!(out.contains("candidates: box_office, cost"));
        assert!(out.contains("error: command 1"));
        assert!(out.contains("error: parse error"));
        assert!(out.contains("(2 rows)"));
    }

    #[test]
    fn preview_is_capped() {
        let out = session(":INSERT VALUES ('G', 1, 1); INSERT VALUES ('H', 1, 1); INSERT VALUES ('I', 1, 1); INSERT VALUES ('J', 1, 1); INSERT VALUES ('K', 1, 1)\n");
        assert!(out.contains("... 1 more rows"));
        assert!(out.contains("(11 rows)"));
    }

    #[test]
    fn mutations_carry_forward() {
        let out = session(":DELETE WHERE cost > 60\n:SLICE TOP 100\n");
        assert_eq!(out.matches("(3 rows)").count(), 2, "{out}");
    }
}
