//! Registry of derivable measures and column synonym lists.

use std::collections::BTreeMap;

use serde::Deserialize;
use thiserror::Error;

use crate::command::{parse_expr, Command, Expr, ParseError};
use crate::runtime::{resolve_column, Resolution};
use crate::table::{normalize_name, Schema};

/// A measure computed from other columns. Each role lists one or more
/// acceptable column names separated by `|`; the first alternative is the
/// placeholder used in the expression.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureDef {
    pub name: String,
    pub roles: Vec<Vec<String>>,
    pub expr: Expr,
    pub synonyms: Vec<String>,
}

impl MeasureDef {
    pub fn placeholders(&self) -> impl Iterator<Item = &str> {
        self.roles.iter().map(|alts| alts[0].as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasureRegistry {
    pub measures: Vec<MeasureDef>,
    /// Column name -> extra names users may call it by.
    pub synonyms: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Error)]
pub enum RegistryError {
    #[error("invalid registry file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("measure `{name}`: bad expression: {source}")]
    Expr { name: String, source: ParseError },
    #[error("measure `{name}` references `{column}`, which is not one of its roles")]
    UndeclaredRole { name: String, column: String },
    #[error("measure `{name}` has an empty role")]
    EmptyRole { name: String },
    #[error("measure `{0}` is defined twice")]
    Duplicate(String),
}

#[derive(Deserialize)]
struct RawRegistry {
    #[serde(default)]
    measure: Vec<RawMeasure>,
    #[serde(default)]
    synonyms: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct RawMeasure {
    name: String,
    roles: Vec<String>,
    expr: String,
    #[serde(default)]
    synonyms: Vec<String>,
}

const DEFAULT_REGISTRY: &str = r#"
[[measure]]
name = "profit_margin"
roles = ["box_office|revenue|sales", "cost|budget|expenses"]
expr = "(box_office - cost) / cost"
synonyms = ["margin", "profitability"]

[[measure]]
name = "profit"
roles = ["box_office|revenue|sales", "cost|budget|expenses"]
expr = "box_office - cost"
synonyms = ["net", "earnings"]

[synonyms]
box_office = ["revenue", "gross", "takings"]
cost = ["budget", "expense", "expenses"]
"#;

impl MeasureRegistry {
    pub fn from_toml(text: &str) -> Result<Self, RegistryError> {
        let raw: RawRegistry = toml::from_str(text)?;
        let mut measures: Vec<MeasureDef> = Vec::with_capacity(raw.measure.len());
        for m in raw.measure {
            let name = normalize_name(&m.name);
            if measures.iter().any(|d| d.name == name) {
                return Err(RegistryError::Duplicate(name));
            }
            let roles: Vec<Vec<String>> = m
                .roles
                .iter()
                .map(|r| {
                    r.split('|')
                        .map(|a| a.trim().to_string())
                        .filter(|a| !a.is_empty())
                        .collect::<Vec<_>>()
                })
                .collect();
            if roles.iter().any(|r| r.is_empty()) {
                return Err(RegistryError::EmptyRole { name });
            }
            let expr = parse_expr(&m.expr).map_err(|source| RegistryError::Expr {
                name: name.clone(),
                source,
            })?;
            for col in expr.columns() {
                if !roles.iter().any(|r| r[0] == col) {
                    return Err(RegistryError::UndeclaredRole {
                        name,
                        column: col.to_string(),
                    });
                }
            }
            measures.push(MeasureDef {
                name,
                roles,
                expr,
                synonyms: m.synonyms,
            });
        }
        Ok(MeasureRegistry {
            measures,
            synonyms: raw.synonyms,
        })
    }

    /// Measure whose name or synonym normalizes to `name`.
    pub fn lookup(&self, name: &str) -> Option<&MeasureDef> {
        let key = normalize_name(name);
        self.measures
            .iter()
            .find(|m| m.name == key)
            .or_else(|| {
                self.measures
                    .iter()
                    .find(|m| m.synonyms.iter().any(|s| normalize_name(s) == key))
            })
    }

    /// `schema` with the registry's synonym lists attached.
    pub fn annotate(&self, schema: &Schema) -> Schema {
        schema.clone().with_synonyms(&self.synonyms)
    }
}

/// Built-in registry: `profit_margin` and `profit` over box office and cost.
pub fn default_registry() -> MeasureRegistry {
    MeasureRegistry::from_toml(DEFAULT_REGISTRY).expect("built-in registry parses")
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureResolution {
    /// An existing column, after correction.
    Direct(String),
    /// A `DERIVE` producing the measure from existing columns.
    Derivation(Command),
    /// Roles (or the measure itself) that have no matching column.
    Unresolvable { missing: Vec<String> },
    /// The name matches several columns equally well.
    Ambiguous { candidates: Vec<String> },
}

fn resolve_role(alternatives: &[String], schema: &Schema) -> Option<String> {
    alternatives.iter().find_map(|alt| match resolve_column(alt, schema) {
        Resolution::Exact => Some(alt.clone()),
        Resolution::Corrected { name, .. } => Some(name),
        _ => None,
    })
}

/// Decide how `name` can be obtained on `schema`: an existing column, a
/// registry derivation whose roles all resolve, or neither.
pub fn resolve_measure(name: &str, schema: &Schema, registry: &MeasureRegistry) -> MeasureResolution {
    let schema = registry.annotate(schema);
    let def = registry.lookup(name);
    match resolve_column(name, &schema) {
        Resolution::Exact => return MeasureResolution::Direct(name.to_string()),
        Resolution::Corrected { name, .. } => return MeasureResolution::Direct(name),
        Resolution::Ambiguous(candidates) if def.is_none() => return MeasureResolution::Ambiguous { candidates },
        _ => {}
    }
    let Some(def) = def else {
        return MeasureResolution::Unresolvable {
            missing: vec![normalize_name(name)],
        };
    };
    if let Some(col) = schema.columns.iter().find(|c| normalize_name(&c.name) == def.name) {
        return MeasureResolution::Direct(col.name.clone());
    }
    let mut bound: Vec<(String, String)> = Vec::new();
    let mut missing = Vec::new();
    for alts in &def.roles {
        match resolve_role(alts, &schema) {
            Some(col) => bound.push((alts[0].clone(), col)),
            None => missing.push(alts[0].clone()),
        }
    }
    if !missing.is_empty() {
        return MeasureResolution::Unresolvable { missing };
    }
    let expr = def.expr.substitute(&|placeholder| {
        bound
            .iter()
            .find(|(p, _)| p == placeholder)
            .map(|(_, col)| Expr::col(col.clone()))
    });
    MeasureResolution::Derivation(Command::Derive {
        name: def.name.clone(),
        expr,
    })
}
