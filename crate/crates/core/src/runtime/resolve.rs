//! Column-reference resolution shared by the corrector, the validator's
//! suggestions and the planner.

use serde::Serialize;

use crate::table::{normalize_name, Schema};
use crate::text::levenshtein;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionMethod {
    Case,
    Normalize,
    Synonym,
    EditDistance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Resolution {
    Exact,
    Corrected { name: String, method: CorrectionMethod },
    Ambiguous(Vec<String>),
    Unresolved,
}

/// Maximum edit distance accepted for a reference of `len` characters.
pub fn edit_threshold(len: usize) -> usize {
    if len < 5 {
        1
    } else {
        2
    }
}

/// Resolve `name` by the first applicable rule: exact, case or
/// normalization match, schema synonym, unique closest edit-distance match.
pub fn resolve_column(name: &str, schema: &Schema) -> Resolution {
    if schema.index_of(name).is_some() {
        return Resolution::Exact;
    }
    let norm = normalize_name(name);
    if norm.is_empty() {
        return Resolution::Unresolved;
    }
    if let Some(col) = schema.columns.iter().find(|c| normalize_name(&c.name) == norm) {
        let method = if col.name.to_lowercase() == name.to_lowercase() {
            CorrectionMethod::Case
        } else {
            CorrectionMethod::Normalize
        };
        return Resolution::Corrected {
            name: col.name.clone(),
            method,
        };
    }

    let mut by_synonym: Vec<String> = schema
        .columns
        .iter()
        .filter(|c| c.synonyms.iter().any(|s| normalize_name(s) == norm))
        .map(|c| c.name.clone())
        .collect();
    match by_synonym.len() {
        0 => {}
        1 => {
            return Resolution::Corrected {
                name: by_synonym.remove(0),
                method: CorrectionMethod::Synonym,
            }
        }
        _ => {
            by_synonym.sort();
            return Resolution::Ambiguous(by_synonym);
        }
    }

    let threshold = edit_threshold(norm.chars().count());
    let scored: Vec<(usize, &str)> = schema
        .columns
        .iter()
        .map(|c| (levenshtein(&norm, &normalize_name(&c.name)), c.name.as_str()))
        .filter(|(d, _)| *d <= threshold)
        .collect();
    let Some(best) = scored.iter().map(|(d, _)| *d).min() else {
        return Resolution::Unresolved;
    };
    let mut tied: Vec<String> = scored
        .iter()
        .filter(|(d, _)| *d == best)
        .map(|(_, n)| n.to_string())
        .collect();
    if tied.len() == 1 {
        Resolution::Corrected {
            name: tied.remove(0),
            method: CorrectionMethod::EditDistance,
        }
    } else {
        tied.sort();
        Resolution::Ambiguous(tied)
    }
}

/// Resolved column name, if `name` resolves uniquely.
pub fn resolve_name(name: &str, schema: &Schema) -> Option<String> {
    match resolve_column(name, schema) {
        Resolution::Exact => Some(name.to_string()),
        Resolution::Corrected { name, .. } => Some(name),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::ColumnMeta;
    use crate::value::ColumnType;

    fn schema(names: &[&str]) -> Schema {
        Schema::new(
            "t",
            names.iter().map(|n| ColumnMeta::new(*n, ColumnType::Int)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn rules_in_order() {
        let s = schema(&["box_office", "cost", "Title"]);
        assert_eq!(resolve_column("cost", &s), Resolution::Exact);
        assert_eq!(
            resolve_column("title", &s),
            Resolution::Corrected {
                name: "Title".into(),
                method: CorrectionMethod::Case
            }
        );
        assert_eq!(
            resolve_column("Box Office", &s),
            Resolution::Corrected {
                name: "box_office".into(),
                method: CorrectionMethod::Normalize
            }
        );
        assert_eq!(
            resolve_column("box_ofice", &s),
            Resolution::Corrected {
                name: "box_office".into(),
                method: CorrectionMethod::EditDistance
            }
        );
        assert_eq!(resolve_column("profit", &s), Resolution::Unresolved);
    }

    #[test]
    fn short_names_allow_one_edit() {
        let s = schema(&["cost"]);
        assert_eq!(resolve_column("cst", &s), resolve_column("cozt", &s));
        assert_eq!(resolve_column("cs", &s), Resolution::Unresolved);
    }

    #[test]
    fn ties_are_ambiguous() {
        let s = schema(&["cost", "cast"]);
        assert_eq!(
            resolve_column("cst", &s),
            Resolution::Ambiguous(vec!["cast".into(), "cost".into()])
        );
    }

    #[test]
    fn synonyms() {
        let mut s = schema(&["box_office", "cost"]);
        s.columns[0].synonyms = vec!["revenue".into()];
        assert_eq!(
            resolve_column("Revenue", &s),
            Resolution::Corrected {
                name: "box_office".into(),
                method: CorrectionMethod::Synonym
            }
        );
    }
}
