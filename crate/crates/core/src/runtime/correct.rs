//! Static repair of column references.

use serde::Serialize;
use thiserror::Error;

use crate::command::{Command, CommandChain};
use crate::table::Schema;

use super::resolve::{resolve_column, CorrectionMethod, Resolution};
use super::validate::evolve;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correction {
    pub command_index: usize,
    pub original: String,
    pub replacement: String,
    pub method: CorrectionMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedChain {
    pub chain: CommandChain,
    pub corrections: Vec<Correction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
pub enum CorrectError {
    #[error("column reference `{name}` in command {command_index} is ambiguous: {}", candidates.join(", "))]
    AmbiguousColumn {
        command_index: usize,
        name: String,
        candidates: Vec<String>,
    },
}

/// Rewrite unresolved column references using the resolution rules.
/// References that cannot be repaired are left for `validate` to report.
pub fn correct(chain: &CommandChain, schema: &Schema) -> Result<CorrectedChain, CorrectError> {
    let mut current = schema.clone();
    let mut commands = Vec::with_capacity(chain.len());
    let mut corrections = Vec::new();
    for (index, cmd) in chain.commands.iter().enumerate() {
        let mut fixes: Vec<(String, String)> = Vec::new();
        for name in cmd.column_refs() {
            if fixes.iter().any(|(o, _)| o == name) {
                continue;
            }
            match resolve_column(name, &current) {
                Resolution::Exact | Resolution::Unresolved => {}
                Resolution::Corrected { name: replacement, method } => {
                    corrections.push(Correction {
                        command_index: index,
                        original: name.to_string(),
                        replacement: replacement.clone(),
                        method,
                    });
                    fixes.push((name.to_string(), replacement));
                }
                Resolution::Ambiguous(candidates) => {
                    return Err(CorrectError::AmbiguousColumn {
                        command_index: index,
                        name: name.to_string(),
                        candidates,
                    })
                }
            }
        }
        let mut fixed = cmd.clone();
        rename_in(&mut fixed, &fixes);
        current = evolve(&current, &fixed);
        commands.push(fixed);
    }
    Ok(CorrectedChain {
        chain: CommandChain::new(commands),
        corrections,
    })
}

fn rename_in(cmd: &mut Command, fixes: &[(String, String)]) {
    if fixes.is_empty() {
        return;
    }
    cmd.rename_refs(|name| {
        fixes
            .iter()
            .find(|(o, _)| o == name)
            .map(|(_, r)| r.clone())
    });
}

/// Replay a list of corrections onto the chain they were computed from.
pub fn apply_corrections(chain: &CommandChain, corrections: &[Correction]) -> CommandChain {
    let mut out = chain.clone();
    for (index, cmd) in out.commands.iter_mut().enumerate() {
        let fixes: Vec<(String, String)> = corrections
            .iter()
            .filter(|c| c.command_index == index)
            .map(|c| (c.original.clone(), c.replacement.clone()))
            .collect();
        rename_in(cmd, &fixes);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command::parse_chain;
    use crate::table::ColumnMeta;
    use crate::value::ColumnType;

    fn movies() -> Schema {
        let mut s = Schema::new(
            "movies",
            vec![
                ColumnMeta::new("title", ColumnType::String),
                ColumnMeta::new("box_office", ColumnType::Int),
                ColumnMeta::new("cost", ColumnType::Int),
            ],
        )
        .unwrap();
        s.columns[1].synonyms.push("revenue".into());
        s
    }

    #[test]
    fn normalization_repair() {
        let c = correct(&parse_chain("SORT `Box Office` DESC").unwrap(), &movies()).unwrap();
        assert_eq!(c.chain, parse_chain("SORT box_office DESC").unwrap());
        assert_eq!(c.corrections[0].method, CorrectionMethod::Normalize);
        assert_eq!(c.corrections[0].original, "Box Office");
    }

    #[test]
    fn synonym_repair() {
        let c = correct(&parse_chain("FILTER revenue > 100").unwrap(), &movies()).unwrap();
        assert_eq!(c.chain, parse_chain("FILTER box_office > 100").unwrap());
        assert_eq!(c.corrections[0].method, CorrectionMethod::Synonym);
    }

    #[test]
    fn ambiguous_tie() {
        let schema = Schema::new(
            "t",
            vec![ColumnMeta::new("cost", ColumnType::Int), ColumnMeta::new("cast", ColumnType::String)],
        )
        .unwrap();
        let err = correct(&parse_chain("SORT cst").unwrap(), &schema).unwrap_err();
        assert_eq!(
            err,
            CorrectError::AmbiguousColumn {
                command_index: 0,
                name: "cst".into(),
                candidates: vec!["cast".into(), "cost".into()]
            }
        );
    }

    #[test]
    fn later_commands_see_derived_columns() {
        let chain = parse_chain("DERIVE profit_margin = (box_office - cost) / cost; SORT `Profit Margin` DESC").unwrap();
        let c = correct(&chain, &movies()).unwrap();
        assert_eq!(c.corrections.len(), 1);
        assert_eq!(c.corrections[0].command_index, 1);
        assert_eq!(c.corrections[0].replacement, "profit_margin");
    }

    #[test]
    fn unresolvable_left_alone() {
        let chain = parse_chain("SORT profit").unwrap();
        let c = correct(&chain, &movies()).unwrap();
        assert_eq!(c.chain, chain);
        assert!(c.corrections.is_empty());
    }

    #[test]
    fn corrections_replay_and_idempotence() {
        let chain = parse_chain("FILTER Cost > 1 AND revenue < 500; SELECT Title, box_ofice").unwrap();
        let c = correct(&chain, &movies()).unwrap();
        assert_eq!(apply_corrections(&chain, &c.corrections), c.chain);
        let again = correct(&c.chain, &movies()).unwrap();
        assert!(again.corrections.is_empty());
        assert_eq!(again.chain, c.chain);
    }
}
