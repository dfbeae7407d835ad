//! Deterministic slot-pattern planner.

use crate::command::{AggFunc, Aggregate, BinOp, Command, CommandChain, Expr, PlotKind, SortOrder};
use crate::runtime::edit_threshold;
use crate::table::{normalize_name, Schema};
use crate::text::levenshtein;
use crate::value::{ColumnType, Value};

use super::measure::{resolve_measure, MeasureRegistry, MeasureResolution};
use super::{
    candidate_columns, finalize, Action, Constraint, ExemplarStore, Intent, PlanContext, PlanOutcome, Planner,
    DEFAULT_VAGUENESS_THRESHOLD,
};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word { lower: String, raw: String },
    Num { value: f64, raw: String },
    Str(String),
    Cmp(BinOp),
}

impl Tok {
    fn word(&self) -> Option<&str> {
        match self {
            Tok::Word { lower, .. } => Some(lower),
            _ => None,
        }
    }
}

const NUMBER_WORDS: [&str; 20] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve", "thirteen",
    "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
];

fn tokenize(text: &str) -> Vec<Tok> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        if c.is_whitespace() {
            i += 1;
        } else if c == '\'' || c == '"' {
            let close = chars[i + 1..].iter().position(|&d| d == c);
            match close {
                Some(n) => {
                    toks.push(Tok::Str(chars[i + 1..i + 1 + n].iter().collect()));
                    i += n + 2;
                }
                None => i += 1,
            }
        } else if c.is_ascii_digit()
            || (c == '-' && next.is_some_and(|d| d.is_ascii_digit()) && !matches!(toks.last(), Some(Tok::Num { .. })))
        {
            let start = i;
            i += 1;
            while i < chars.len()
                && (chars[i].is_ascii_digit()
                    || (chars[i] == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())))
            {
                i += 1;
            }
            let raw: String = chars[start..i].iter().collect();
            match raw.parse::<f64>() {
                Ok(value) if i == chars.len() || !(chars[i].is_alphanumeric() || chars[i] == '_') => {
                    toks.push(Tok::Num { value, raw })
                }
                _ => {
                    // digits glued to letters form a word, e.g. `q3_sales`
                    while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    let raw: String = chars[start..i].iter().collect();
                    toks.push(Tok::Word {
                        lower: raw.to_lowercase(),
                        raw,
                    });
                }
            }
        } else if c.is_alphanumeric() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let raw: String = chars[start..i].iter().collect();
            let lower = raw.to_lowercase();
            match NUMBER_WORDS.iter().position(|w| *w == lower) {
                Some(n) => toks.push(Tok::Num {
                    value: (n + 1) as f64,
                    raw,
                }),
                None => toks.push(Tok::Word { lower, raw }),
            }
        } else {
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let op = match two.as_str() {
                ">=" => Some((BinOp::Ge, 2)),
                "<=" => Some((BinOp::Le, 2)),
                "!=" | "<>" => Some((BinOp::Ne, 2)),
                "==" => Some((BinOp::Eq, 2)),
                _ => match c {
                    '>' => Some((BinOp::Gt, 1)),
                    '<' => Some((BinOp::Lt, 1)),
                    '=' => Some((BinOp::Eq, 1)),
                    _ => None,
                },
            };
            match op {
                Some((op, n)) => {
                    toks.push(Tok::Cmp(op));
                    i += n;
                }
                None => i += 1,
            }
        }
    }
    toks
}

const PREDICT_WORDS: &[&str] = &["predict", "forecast", "estimate", "regress", "regression", "projection"];
const PLOT_WORDS: &[&str] = &[
    "plot", "chart", "graph", "visualize", "visualise", "histogram", "draw", "scatter",
];
const DESCRIBE_WORDS: &[&str] = &[
    "describe", "summary", "summarize", "summarise", "statistics", "stats", "overview", "profile",
];
const SORT_WORDS: &[&str] = &["sort", "sorted", "order", "ordered", "rank", "ranked", "arrange", "arranged"];
const TOP_DESC: &[&str] = &["top", "highest", "largest", "biggest", "most", "best", "greatest"];
const TOP_ASC: &[&str] = &["bottom", "lowest", "smallest", "least", "worst", "fewest"];
const FILTER_WORDS: &[&str] = &["filter", "where", "only", "whose"];
const SHOW_WORDS: &[&str] = &[
    "show", "list", "display", "give", "get", "what", "which", "select", "see", "find", "return", "view", "tell",
];
const DESC_WORDS: &[&str] = &["desc", "descending", "decreasing", "reverse", "reversed"];
const ASC_WORDS: &[&str] = &["asc", "ascending", "increasing"];
const KEY_WORDS: &[&str] = &["per", "by", "each", "across"];
const USING_WORDS: &[&str] = &["from", "using", "with", "given", "on"];
const FILLER_WORDS: &[&str] = &[
    "a", "an", "the", "me", "us", "i", "my", "some", "of", "in", "to", "for", "and", "or", "is", "are", "was", "be",
    "it", "that", "this", "these", "those", "all", "rows", "row", "table", "data", "please", "can", "you", "want",
    "would", "like", "how", "many", "number", "numbers", "than", "then", "first", "last", "time", "based", "vs",
    "versus", "against", "over", "under", "above", "below", "at", "no", "not", "equal", "equals", "high", "low",
    "value", "values", "column", "columns", "have", "has", "with", "by", "per", "each", "across", "between",
];

fn agg_word(w: &str) -> Option<AggFunc> {
    match w {
        "total" | "sum" => Some(AggFunc::Sum),
        "average" | "mean" | "avg" => Some(AggFunc::Mean),
        "count" => Some(AggFunc::Count),
        "minimum" | "min" => Some(AggFunc::Min),
        "maximum" | "max" => Some(AggFunc::Max),
        _ => None,
    }
}

fn is_vocabulary(w: &str) -> bool {
    [
        PREDICT_WORDS,
        PLOT_WORDS,
        DESCRIBE_WORDS,
        SORT_WORDS,
        TOP_DESC,
        TOP_ASC,
        FILTER_WORDS,
        SHOW_WORDS,
        DESC_WORDS,
        ASC_WORDS,
        KEY_WORDS,
        USING_WORDS,
        FILLER_WORDS,
        &["bar", "line", "trend", "distribution", "hist", "more", "less", "greater", "higher", "larger", "bigger",
            "fewer", "lower", "smaller", "exceeding", "exceeds", "other", "movies", "records", "entries", "items"],
    ]
    .iter()
    .any(|list| list.contains(&w))
        || agg_word(w).is_some()
}

#[derive(Debug, Clone, PartialEq)]
enum Target {
    Column(String),
    Measure(String),
}

impl Target {
    fn name(&self) -> &str {
        match self {
            Target::Column(n) | Target::Measure(n) => n,
        }
    }
}

#[derive(Debug, Clone)]
struct Mention {
    start: usize,
    end: usize,
    target: Target,
    label: String,
}

const MAX_NGRAM: usize = 4;

/// Longest-first, left-to-right matching of token n-grams against column
/// names, synonyms and registry measures. Fuzzy matching is limited to
/// n-grams of at least five characters made of non-vocabulary words.
fn find_mentions(toks: &[Tok], schema: &Schema, registry: &MeasureRegistry) -> Vec<Mention> {
    let cols: Vec<(String, &str)> = schema
        .columns
        .iter()
        .map(|c| (normalize_name(&c.name), c.name.as_str()))
        .collect();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < toks.len() {
        for n in (1..=MAX_NGRAM.min(toks.len() - i)).rev() {
            let words: Option<Vec<&str>> = toks[i..i + n].iter().map(Tok::word).collect();
            let Some(words) = words else { continue };
            let key = normalize_name(&words.join("_"));
            let label = words.join(" ");
            let exact = cols
                .iter()
                .find(|(norm, _)| *norm == key)
                .map(|(_, name)| Target::Column(name.to_string()))
                .or_else(|| {
                    schema
                        .columns
                        .iter()
                        .find(|c| c.synonyms.iter().any(|s| normalize_name(s) == key))
                        .map(|c| Target::Column(c.name.clone()))
                })
                .or_else(|| registry.lookup(&key).map(|m| Target::Measure(m.name.clone())));
            let target = exact.or_else(|| {
                if key.chars().count() < 5 || words.iter().any(|w| is_vocabulary(w)) {
                    return None;
                }
                let limit = edit_threshold(key.chars().count());
                let mut scored: Vec<(usize, Target)> = cols
                    .iter()
                    .map(|(norm, name)| (levenshtein(&key, norm), Target::Column(name.to_string())))
                    .chain(
                        registry
                            .measures
                            .iter()
                            .map(|m| (levenshtein(&key, &m.name), Target::Measure(m.name.clone()))),
                    )
                    .filter(|(d, _)| *d <= limit)
                    .collect();
                scored.sort_by_key(|(d, _)| *d);
                match scored.as_slice() {
                    [(_, t)] => Some(t.clone()),
                    [(d0, t), (d1, _), ..] if d0 < d1 => Some(t.clone()),
                    _ => None,
                }
            });
            if let Some(target) = target {
                out.push(Mention {
                    start: i,
                    end: i + n,
                    target,
                    label,
                });
                i += n;
                continue 'outer;
            }
        }
        i += 1;
    }
    out
}

const COMPARATORS: &[(&[&str], BinOp)] = &[
    (&["greater", "than", "or", "equal", "to"], BinOp::Ge),
    (&["less", "than", "or", "equal", "to"], BinOp::Le),
    (&["at", "least"], BinOp::Ge),
    (&["no", "less", "than"], BinOp::Ge),
    (&["at", "most"], BinOp::Le),
    (&["no", "more", "than"], BinOp::Le),
    (&["greater", "than"], BinOp::Gt),
    (&["more", "than"], BinOp::Gt),
    (&["higher", "than"], BinOp::Gt),
    (&["larger", "than"], BinOp::Gt),
    (&["bigger", "than"], BinOp::Gt),
    (&["above"], BinOp::Gt),
    (&["over"], BinOp::Gt),
    (&["exceeding"], BinOp::Gt),
    (&["exceeds"], BinOp::Gt),
    (&["less", "than"], BinOp::Lt),
    (&["fewer", "than"], BinOp::Lt),
    (&["lower", "than"], BinOp::Lt),
    (&["smaller", "than"], BinOp::Lt),
    (&["below"], BinOp::Lt),
    (&["under"], BinOp::Lt),
    (&["not", "equal", "to"], BinOp::Ne),
    (&["other", "than"], BinOp::Ne),
    (&["not"], BinOp::Ne),
    (&["equal", "to"], BinOp::Eq),
    (&["equals"], BinOp::Eq),
    (&["equal"], BinOp::Eq),
];

fn words_at(toks: &[Tok], i: usize, phrase: &[&str]) -> bool {
    phrase
        .iter()
        .enumerate()
        .all(|(k, w)| toks.get(i + k).and_then(Tok::word) == Some(*w))
}

/// Comparator starting at `i`: the operator and the index after it.
fn comparator_at(toks: &[Tok], mut i: usize) -> Option<(BinOp, usize)> {
    let mut linked = false;
    if matches!(toks.get(i).and_then(Tok::word), Some("is" | "are" | "was" | "of")) {
        i += 1;
        linked = true;
    }
    if let Some(Tok::Cmp(op)) = toks.get(i) {
        return Some((*op, i + 1));
    }
    for (phrase, op) in COMPARATORS {
        if words_at(toks, i, phrase) {
            return Some((*op, i + phrase.len()));
        }
    }
    if linked && !matches!(toks.get(i - 1).and_then(Tok::word), Some("of")) {
        return Some((BinOp::Eq, i));
    }
    None
}

fn literal_for(tok: &Tok, ty: ColumnType) -> Option<Value> {
    match (tok, ty) {
        (Tok::Num { value, raw }, ColumnType::Int | ColumnType::Float) => {
            if value.fract() == 0.0 && value.abs() < 9.0e15 && !raw.contains('.') {
                Some(Value::Int(*value as i64))
            } else {
                Some(Value::Float(*value))
            }
        }
        (Tok::Num { raw, .. }, ColumnType::String | ColumnType::DateTime) => Some(Value::Text(raw.clone())),
        (Tok::Str(s), ColumnType::String | ColumnType::DateTime) => Some(Value::Text(s.clone())),
        (Tok::Word { raw, lower }, ColumnType::String) if !is_vocabulary(lower) => Some(Value::Text(raw.clone())),
        (Tok::Word { lower, .. }, ColumnType::Bool) if lower == "true" || lower == "false" => {
            Some(Value::Bool(lower == "true"))
        }
        _ => None,
    }
}

fn target_type(t: &Target, schema: &Schema) -> ColumnType {
    match t {
        Target::Column(c) => schema.column(c).map_or(ColumnType::String, |m| m.ctype),
        Target::Measure(_) => ColumnType::Float,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pattern {
    Predict,
    Plot,
    Describe,
    Aggregate,
    Sort,
    TopK,
    Filter,
    Show,
}

/// Everything extracted from one query.
#[derive(Debug, Clone)]
struct Analysis {
    toks: Vec<Tok>,
    mentions: Vec<Mention>,
    /// Indices of mentions not consumed by a constraint.
    free: Vec<usize>,
    constraints: Vec<Constraint>,
    /// Mentions consumed by constraints, parallel to `constraints`.
    constraint_targets: Vec<Target>,
    limit: Option<usize>,
    pattern: Option<Pattern>,
    agg: Option<AggFunc>,
}

impl Analysis {
    fn has_word(&self, list: &[&str]) -> bool {
        self.toks.iter().filter_map(Tok::word).any(|w| list.contains(&w))
    }

    fn word_index(&self, list: &[&str]) -> Option<usize> {
        self.toks.iter().position(|t| t.word().is_some_and(|w| list.contains(&w)))
    }

    fn preceded_by(&self, m: &Mention, list: &[&str]) -> bool {
        m.start > 0 && self.toks[m.start - 1].word().is_some_and(|w| list.contains(&w))
    }

    fn free_mentions(&self) -> impl Iterator<Item = &Mention> {
        self.free.iter().map(|&i| &self.mentions[i])
    }
}

fn analyze(query: &str, schema: &Schema, registry: &MeasureRegistry) -> Analysis {
    let toks = tokenize(query);
    let mentions = find_mentions(&toks, schema, registry);
    let mut used = vec![false; toks.len()];
    let mut constraints = Vec::new();
    let mut constraint_targets = Vec::new();
    let mut free = Vec::new();
    for (mi, m) in mentions.iter().enumerate() {
        let ty = target_type(&m.target, schema);
        let mut consumed = false;
        if words_at(&toks, m.end, &["between"]) {
            if let (Some(lo), Some("and"), Some(hi)) = (
                toks.get(m.end + 1).and_then(|t| literal_for(t, ty)),
                toks.get(m.end + 2).and_then(Tok::word),
                toks.get(m.end + 3).and_then(|t| literal_for(t, ty)),
            ) {
                for (op, v) in [(BinOp::Ge, lo), (BinOp::Le, hi)] {
                    constraints.push(Constraint {
                        column: m.target.name().to_string(),
                        op,
                        value: v,
                    });
                    constraint_targets.push(m.target.clone());
                }
                used[m.end..m.end + 4].iter_mut().for_each(|u| *u = true);
                consumed = true;
            }
        } else if let Some((op, at)) = comparator_at(&toks, m.end) {
            let is_mention = mentions.iter().any(|o| o.start == at);
            if let Some(v) = toks.get(at).and_then(|t| literal_for(t, ty)).filter(|_| !is_mention) {
                constraints.push(Constraint {
                    column: m.target.name().to_string(),
                    op,
                    value: v,
                });
                constraint_targets.push(m.target.clone());
                used[m.end..=at].iter_mut().for_each(|u| *u = true);
                consumed = true;
            }
        }
        if !consumed {
            free.push(mi);
        }
    }
    let in_mention = |i: usize| mentions.iter().any(|m| (m.start..m.end).contains(&i));
    let limit = toks.iter().enumerate().find_map(|(i, t)| match t {
        Tok::Num { value, .. } if !used[i] && !in_mention(i) && value.fract() == 0.0 && *value >= 1.0 => {
            Some(*value as usize)
        }
        _ => None,
    });

    let agg = toks
        .iter()
        .enumerate()
        .filter(|(i, _)| !in_mention(*i))
        .find_map(|(_, t)| t.word().and_then(agg_word))
        .or_else(|| {
            toks.windows(2)
                .any(|w| {
                    matches!(
                        (w[0].word(), w[1].word()),
                        (Some("how"), Some("many")) | (Some("number"), Some("of"))
                    )
                })
                .then_some(AggFunc::Count)
        });
    let mut a = Analysis {
        toks,
        mentions,
        free,
        constraints,
        constraint_targets,
        limit,
        pattern: None,
        agg,
    };
    a.pattern = if a.has_word(PREDICT_WORDS) {
        Some(Pattern::Predict)
    } else if a.has_word(PLOT_WORDS) {
        Some(Pattern::Plot)
    } else if a.has_word(DESCRIBE_WORDS) {
        Some(Pattern::Describe)
    } else if a.agg.is_some() {
        Some(Pattern::Aggregate)
    } else if a.has_word(SORT_WORDS) {
        Some(Pattern::Sort)
    } else if a.has_word(TOP_DESC) || a.has_word(TOP_ASC) {
        Some(Pattern::TopK)
    } else if !a.constraints.is_empty() || a.has_word(FILTER_WORDS) {
        Some(Pattern::Filter)
    } else if a.has_word(SHOW_WORDS) || !a.mentions.is_empty() {
        Some(Pattern::Show)
    } else {
        None
    };
    a
}

/// A mandatory slot of the matched pattern and whether it was filled.
struct Slot {
    filled: bool,
    ask: &'static str,
}

/// Choice of ranking measure for top-k and sort: the mention right after
/// the trigger or after "by", else the last free mention.
fn ranking_mention<'a>(a: &'a Analysis, triggers: &[&str]) -> Option<&'a Mention> {
    a.free_mentions()
        .find(|m| a.preceded_by(m, triggers) || a.preceded_by(m, &["by"]))
        .or_else(|| a.free_mentions().last())
}

fn slots(a: &Analysis, schema: &Schema) -> Vec<Slot> {
    let any_free = a.free_mentions().next().is_some();
    match a.pattern {
        None => vec![Slot {
            filled: false,
            ask: "which columns or statistics you want",
        }],
        Some(Pattern::TopK) => vec![
            Slot {
                filled: a.limit.is_some(),
                ask: "how many rows to return",
            },
            Slot {
                filled: any_free,
                ask: "which column to rank by",
            },
        ],
        Some(Pattern::Sort) => vec![Slot {
            filled: any_free,
            ask: "which column to sort by",
        }],
        Some(Pattern::Filter) => vec![Slot {
            filled: !a.constraints.is_empty(),
            ask: "which condition to filter on",
        }],
        Some(Pattern::Aggregate) => vec![Slot {
            filled: a.agg == Some(AggFunc::Count) || any_free,
            ask: "which column to aggregate",
        }],
        Some(Pattern::Describe) => vec![],
        Some(Pattern::Plot) => vec![Slot {
            filled: any_free,
            ask: "which column to plot",
        }],
        Some(Pattern::Predict) => vec![Slot {
            filled: a
                .free_mentions()
                .any(|m| target_type(&m.target, schema).is_numeric()),
            ask: "which numeric column to predict",
        }],
        Some(Pattern::Show) => vec![Slot {
            filled: any_free || !a.constraints.is_empty(),
            ask: "which columns or statistics you want",
        }],
    }
}

fn score(slots: &[Slot]) -> f64 {
    if slots.is_empty() {
        return 0.0;
    }
    let filled = slots.iter().filter(|s| s.filled).count();
    1.0 - filled as f64 / slots.len() as f64
}

/// Vagueness of `query` under the built-in measure registry.
pub fn vagueness_score(query: &str, schema: &Schema) -> f64 {
    RulePlanner.vagueness(query, schema, &super::default_registry())
}

fn direction_words(a: &Analysis) -> Option<SortOrder> {
    let desc = a.has_word(DESC_WORDS)
        || a.toks.windows(2).any(|w| {
            matches!(
                (w[0].word(), w[1].word()),
                (Some("highest" | "largest" | "biggest" | "most"), Some("first")) | (Some("high"), Some("to"))
            )
        });
    if desc {
        Some(SortOrder::Desc)
    } else if a.has_word(ASC_WORDS) {
        Some(SortOrder::Asc)
    } else {
        None
    }
}

/// The rule-based reference planner.
#[derive(Debug, Clone, Copy, Default)]
pub struct RulePlanner;

impl RulePlanner {
    pub fn vagueness(&self, query: &str, schema: &Schema, registry: &MeasureRegistry) -> f64 {
        let schema = registry.annotate(schema);
        let a = analyze(query, &schema, registry);
        score(&slots(&a, &schema))
    }

    pub fn intent(&self, query: &str, schema: &Schema, registry: &MeasureRegistry) -> Intent {
        let schema = registry.annotate(schema);
        let a = analyze(query, &schema, registry);
        let action = match a.pattern {
            None => Action::Unknown,
            Some(Pattern::Predict) => Action::Predict,
            Some(Pattern::Plot) => Action::Plot,
            Some(Pattern::Describe) => Action::Describe,
            Some(Pattern::Aggregate) => Action::Aggregate,
            Some(Pattern::Sort | Pattern::TopK) => Action::Sort,
            Some(Pattern::Filter) => Action::Filter,
            Some(Pattern::Show) => Action::Show,
        };
        let measures = if action == Action::Unknown {
            Vec::new()
        } else {
            a.free_mentions().map(|m| m.target.name().to_string()).collect()
        };
        let direction = match a.pattern {
            Some(Pattern::TopK) => Some(top_direction(&a)),
            Some(Pattern::Sort) => Some(direction_words(&a).unwrap_or(SortOrder::Asc)),
            _ => direction_words(&a),
        };
        Intent {
            action,
            measures,
            constraints: a.constraints.clone(),
            limit: a.limit,
            direction,
        }
    }
}

fn top_direction(a: &Analysis) -> SortOrder {
    if let Some(d) = direction_words(a) {
        return d;
    }
    let desc = a.word_index(TOP_DESC);
    let asc = a.word_index(TOP_ASC);
    match (desc, asc) {
        (Some(d), Some(s)) if s < d => SortOrder::Asc,
        (None, Some(_)) => SortOrder::Asc,
        _ => SortOrder::Desc,
    }
}

fn clarification(asks: &[&str], schema: &Schema) -> PlanOutcome {
    PlanOutcome::Rejection {
        question: format!(
            "That request is too vague for me to act on. Could you tell me {}?",
            asks.join(" and ")
        ),
        candidates: candidate_columns(schema),
    }
}

fn literal_text(v: &Value) -> String {
    match v {
        Value::Text(s) => format!("'{s}'"),
        other => other.to_string(),
    }
}

/// Accumulates chain pieces in their fixed order.
struct Builder<'a> {
    schema: &'a Schema,
    registry: &'a MeasureRegistry,
    derives: Vec<Command>,
    derive_notes: Vec<String>,
    main: Vec<Command>,
    main_notes: Vec<String>,
}

impl Builder<'_> {
    /// Make `target` available as a column, adding a derivation if needed.
    fn need(&mut self, m: &Mention) -> Result<String, PlanOutcome> {
        let name = match &m.target {
            Target::Column(c) => return Ok(c.clone()),
            Target::Measure(n) => n.clone(),
        };
        match resolve_measure(&name, self.schema, self.registry) {
            MeasureResolution::Direct(col) => Ok(col),
            MeasureResolution::Derivation(cmd) => {
                if !self.derives.contains(&cmd) {
                    if let Command::Derive { expr, .. } = &cmd {
                        self.derive_notes.push(format!(
                            "`{name}` is not a column, so derive it as {}",
                            crate::command::serialize_expr(expr)
                        ));
                    }
                    self.derives.push(cmd);
                }
                Ok(name)
            }
            MeasureResolution::Unresolvable { missing } => Err(PlanOutcome::Rejection {
                question: format!(
                    "I cannot compute {} because the table has no column for {}. Which column should I use instead?",
                    m.label,
                    missing.join(" or ")
                ),
                candidates: candidate_columns(self.schema),
            }),
            MeasureResolution::Ambiguous { candidates } => Err(PlanOutcome::Rejection {
                question: format!("Which column did you mean by \"{}\": {}?", m.label, candidates.join(" or ")),
                candidates,
            }),
        }
    }

    fn push(&mut self, cmd: Command, note: String) {
        self.main.push(cmd);
        self.main_notes.push(note);
    }
}

fn build(a: &Analysis, ctx: &PlanContext<'_>, schema: &Schema) -> Result<(CommandChain, Vec<String>), PlanOutcome> {
    let mut b = Builder {
        schema,
        registry: ctx.registry,
        derives: Vec::new(),
        derive_notes: Vec::new(),
        main: Vec::new(),
        main_notes: Vec::new(),
    };

    // constraints first, so their derivations come first too
    let mut filter: Option<Expr> = None;
    let mut filter_notes = Vec::new();
    for (c, t) in a.constraints.iter().zip(&a.constraint_targets) {
        let m = a
            .mentions
            .iter()
            .find(|m| &m.target == t)
            .expect("constraint target comes from a mention");
        let col = b.need(m)?;
        let e = Expr::binary(c.op, Expr::col(col.clone()), Expr::lit(c.value.clone()));
        filter_notes.push(format!("`{col}` {} {}", c.op.symbol(), literal_text(&c.value)));
        filter = Some(match filter {
            None => e,
            Some(prev) => Expr::binary(BinOp::And, prev, e),
        });
    }

    let show = a.has_word(SHOW_WORDS);
    let mut projection: Vec<String> = Vec::new();
    match a.pattern.expect("planning requires a matched pattern") {
        Pattern::TopK | Pattern::Sort => {
            let top_words = [TOP_DESC, TOP_ASC].concat();
            let triggers: &[&str] = if a.pattern == Some(Pattern::TopK) {
                &top_words
            } else {
                SORT_WORDS
            };
            let m = ranking_mention(a, triggers).expect("slot filled");
            let col = b.need(m)?;
            let order = if a.pattern == Some(Pattern::TopK) {
                top_direction(a)
            } else {
                direction_words(a).unwrap_or(SortOrder::Asc)
            };
            let how = match (order, a.pattern) {
                (SortOrder::Desc, Some(Pattern::TopK)) => "highest first",
                (SortOrder::Asc, Some(Pattern::TopK)) => "lowest first",
                (SortOrder::Desc, _) => "descending",
                (SortOrder::Asc, _) => "ascending",
            };
            b.push(
                Command::Sort {
                    column: col.clone(),
                    order,
                },
                format!("sort by `{col}` {how}"),
            );
            match a.limit {
                Some(n) => b.push(Command::SliceTop(n), format!("keep the first {n} rows")),
                None if a.pattern == Some(Pattern::TopK) => {
                    b.main_notes.push("no count was given, so every row is kept in ranked order".into())
                }
                None => {}
            }
            let extras: Vec<&Mention> = a.free_mentions().filter(|o| o.start != m.start).collect();
            if show && !extras.is_empty() {
                for o in extras {
                    projection.push(b.need(o)?);
                }
                projection.push(col);
            }
        }
        Pattern::Filter => {
            if show {
                for m in a.free_mentions() {
                    projection.push(b.need(m)?);
                }
            }
        }
        Pattern::Show => {
            for m in a.free_mentions() {
                projection.push(b.need(m)?);
            }
        }
        Pattern::Aggregate => {
            let func = a.agg.expect("aggregate pattern has a function");
            let mut keys = Vec::new();
            let mut measures = Vec::new();
            for m in a.free_mentions() {
                let col = b.need(m)?;
                if a.preceded_by(m, KEY_WORDS) || words_at(&a.toks, m.start.saturating_sub(2), &["for", "each"]) {
                    keys.push(col);
                } else {
                    measures.push(col);
                }
            }
            if measures.is_empty() {
                // counting needs some column; the first one not used as a key
                let fallback = schema
                    .columns
                    .iter()
                    .map(|c| c.name.clone())
                    .find(|c| !keys.contains(c))
                    .or_else(|| keys.first().cloned());
                if let Some(c) = fallback.filter(|_| func == AggFunc::Count) {
                    measures.push(c);
                }
            }
            let aggs: Vec<Aggregate> = measures.iter().map(|c| Aggregate::new(func, c.clone())).collect();
            let what: Vec<String> = aggs
                .iter()
                .map(|g| format!("{} of `{}`", g.func.keyword().to_lowercase(), g.column))
                .collect();
            let note = if keys.is_empty() {
                format!("compute the {} over all rows", what.join(", "))
            } else {
                format!("compute the {} for each `{}`", what.join(", "), keys.join("`, `"))
            };
            b.push(Command::GroupBy { keys, aggs }, note);
        }
        Pattern::Describe => {
            let mut cols = Vec::new();
            for m in a.free_mentions() {
                cols.push(b.need(m)?);
            }
            let note = if cols.is_empty() {
                "summarize every column".to_string()
            } else {
                format!("summarize `{}`", cols.join("`, `"))
            };
            b.push(Command::Describe((!cols.is_empty()).then_some(cols)), note);
        }
        Pattern::Plot => {
            let ms: Vec<&Mention> = a.free_mentions().collect();
            let mut cols = Vec::new();
            for m in &ms {
                cols.push(b.need(m)?);
            }
            let vs = a.has_word(&["vs", "versus", "against"]);
            let keyed = ms.iter().position(|m| a.preceded_by(m, &["by", "per", "across", "over"]));
            let (x, y) = match (cols.len(), vs, keyed) {
                (1, ..) => (cols[0].clone(), None),
                (_, true, _) => (cols[1].clone(), Some(cols[0].clone())),
                (_, false, Some(k)) => (cols[k].clone(), Some(cols[if k == 0 { 1 } else { 0 }].clone())),
                _ => (cols[0].clone(), Some(cols[1].clone())),
            };
            let ty = |c: &str| schema.column(c).map_or(ColumnType::Float, |m| m.ctype);
            let mut kind = if a.has_word(&["histogram", "hist", "distribution"]) {
                PlotKind::Hist
            } else if a.has_word(&["scatter"]) {
                PlotKind::Scatter
            } else if a.has_word(&["line", "trend"]) {
                PlotKind::Line
            } else if a.has_word(&["bar"]) {
                PlotKind::Bar
            } else {
                match &y {
                    None if ty(&x).is_numeric() => PlotKind::Hist,
                    None => PlotKind::Bar,
                    Some(y) if ty(&x).is_numeric() && ty(y).is_numeric() => PlotKind::Scatter,
                    Some(_) if ty(&x) == ColumnType::DateTime => PlotKind::Line,
                    Some(_) => PlotKind::Bar,
                }
            };
            let (x, y) = if kind == PlotKind::Hist {
                let x = match &y {
                    Some(y) if !ty(&x).is_numeric() => y.clone(),
                    _ => x,
                };
                (x, None)
            } else {
                (x, y)
            };
            if kind == PlotKind::Hist && !ty(&x).is_numeric() {
                kind = PlotKind::Bar;
            }
            let agg = a.agg.filter(|_| y.is_some() && kind != PlotKind::Hist);
            let spec = crate::runtime::plot_spec(kind, &x, y.as_deref(), agg);
            b.push(
                Command::Plot { kind, x, y, agg },
                format!("draw a {} of {}", kind.keyword().to_lowercase(), spec.title),
            );
        }
        Pattern::Predict => {
            let using_at = a.word_index(USING_WORDS);
            let after_using = |m: &Mention| using_at.is_some_and(|u| m.start > u);
            let numeric = |m: &Mention| target_type(&m.target, schema).is_numeric();
            let m = a
                .free_mentions()
                .find(|m| numeric(m) && !after_using(m))
                .or_else(|| a.free_mentions().find(|m| numeric(m)))
                .expect("slot filled");
            let target = b.need(m)?;
            let mut using = Vec::new();
            for o in a.free_mentions().filter(|o| after_using(o) && o.start != m.start) {
                using.push(b.need(o)?);
            }
            using.retain(|c| c != &target);
            let note = if using.is_empty() {
                format!("fit a linear model of `{target}` on the other numeric columns")
            } else {
                format!("fit a linear model of `{target}` on `{}`", using.join("`, `"))
            };
            b.push(
                Command::Predict {
                    target,
                    using: (!using.is_empty()).then_some(using),
                },
                note,
            );
        }
    }

    let mut commands = b.derives;
    let mut notes = b.derive_notes;
    if let Some(f) = filter {
        commands.push(Command::Filter(f));
        notes.push(format!("keep rows where {}", filter_notes.join(" and ")));
    }
    let predict = b.main.iter().position(|c| matches!(c, Command::Predict { .. }));
    commands.extend(b.main);
    notes.extend(b.main_notes);
    if !projection.is_empty() && predict.is_none() {
        let mut cols: Vec<String> = Vec::new();
        for c in projection {
            if !cols.contains(&c) {
                cols.push(c);
            }
        }
        notes.push(format!("show `{}`", cols.join("`, `")));
        commands.push(Command::Select(cols));
    }
    Ok((CommandChain::new(commands), notes))
}

fn exemplar_note(store: &ExemplarStore, query: &str) -> Option<String> {
    store
        .retrieve(query, 1)
        .into_iter()
        .find(|(_, sim)| *sim > 0.0)
        .map(|(e, sim)| format!("closest worked example: \"{}\" (similarity {sim:.2})", e.query))
}

impl Planner for RulePlanner {
    fn plan(&self, query: &str, ctx: &PlanContext<'_>) -> PlanOutcome {
        let schema = ctx.registry.annotate(ctx.schema);
        let a = analyze(query, &schema, ctx.registry);
        let slots = slots(&a, &schema);
        let vagueness = score(&slots);
        let threshold = if ctx.vagueness_threshold.is_finite() {
            ctx.vagueness_threshold
        } else {
            DEFAULT_VAGUENESS_THRESHOLD
        };
        // Slots that cannot be defaulted: everything except the top-k count.
        let blocking: Vec<&str> = slots
            .iter()
            .filter(|s| !s.filled && s.ask != "how many rows to return")
            .map(|s| s.ask)
            .collect();
        if a.pattern.is_none() || vagueness >= threshold || !blocking.is_empty() {
            let asks: Vec<&str> = slots.iter().filter(|s| !s.filled).map(|s| s.ask).collect();
            return clarification(&asks, &schema);
        }
        match build(&a, ctx, &schema) {
            Ok((chain, mut rationale)) => {
                rationale.extend(exemplar_note(ctx.exemplars, query));
                finalize(chain, rationale, &schema)
            }
            Err(rejection) => rejection,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::command::parse_chain;
    use crate::planner::default_registry;
    use crate::table::ColumnMeta;

    fn movies() -> Schema {
        Schema::new(
            "movies",
            vec![
                ColumnMeta::new("title", ColumnType::String),
                ColumnMeta::new("box_office", ColumnType::Int),
                ColumnMeta::new("cost", ColumnType::Int),
            ],
        )
        .unwrap()
    }

    fn plan_text(q: &str) -> PlanOutcome {
        super::super::plan(q, &movies(), &default_registry(), &ExemplarStore::seeded())
    }

    fn chain_of(q: &str) -> CommandChain {
        match plan_text(q) {
            PlanOutcome::Plan { chain, .. } => chain,
            other => panic!("{q:?} was not planned: {other:?}"),
        }
    }

    #[test]
    fn golden_movie_query() {
        assert_eq!(
            chain_of("Show me the five movies with the highest profit margin"),
            parse_chain("DERIVE profit_margin = (box_office - cost) / cost; SORT profit_margin DESC; SLICE TOP 5")
                .unwrap()
        );
    }

    #[test]
    fn vague_query_is_rejected() {
        match plan_text("Give me some numbers") {
            PlanOutcome::Rejection { question, candidates } => {
                assert!(!question.is_empty());
                assert_eq!(candidates, vec!["box_office", "cost", "title"]);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(vagueness_score("Give me some numbers", &movies()), 1.0);
    }

    #[test]
    fn vagueness_examples() {
        assert_eq!(vagueness_score("show top 5 by profit_margin", &movies()), 0.0);
        assert_eq!(vagueness_score("show top movies", &movies()), 1.0);
        assert_eq!(vagueness_score("show top movies by cost", &movies()), 0.5);
        assert_eq!(vagueness_score("completely unrelated words", &movies()), 1.0);
    }

    #[test]
    fn sort_defaults_ascending() {
        assert_eq!(chain_of("sort by cost"), parse_chain("SORT cost ASC").unwrap());
        assert_eq!(
            chain_of("sort by box office descending"),
            parse_chain("SORT box_office DESC").unwrap()
        );
    }

    #[test]
    fn filters() {
        assert_eq!(chain_of("movies with cost above 100"), parse_chain("FILTER cost > 100").unwrap());
        assert_eq!(
            chain_of("show title where cost >= 50 and box office is less than 200"),
            parse_chain("FILTER cost >= 50 AND box_office < 200; SELECT title").unwrap()
        );
        assert_eq!(
            chain_of("rows where title is 'B'"),
            parse_chain("FILTER title = 'B'").unwrap()
        );
        assert_eq!(
            chain_of("movies with profit margin between 1 and 2"),
            parse_chain(
                "DERIVE profit_margin = (box_office - cost) / cost; FILTER profit_margin >= 1 AND profit_margin <= 2"
            )
            .unwrap()
        );
    }

    #[test]
    fn aggregates() {
        assert_eq!(chain_of("average box office"), parse_chain("GROUPBY MEAN(box_office)").unwrap());
        assert_eq!(
            chain_of("total cost per title"),
            parse_chain("GROUPBY title SUM(cost)").unwrap()
        );
        assert_eq!(
            chain_of("how many movies have cost over 50"),
            parse_chain("FILTER cost > 50; GROUPBY COUNT(title)").unwrap()
        );
    }

    #[test]
    fn describe_plot_predict() {
        assert_eq!(chain_of("describe the table"), parse_chain("DESCRIBE").unwrap());
        assert_eq!(chain_of("summary statistics of cost"), parse_chain("DESCRIBE cost").unwrap());
        assert_eq!(chain_of("plot box office by title"), parse_chain("PLOT BAR title box_office").unwrap());
        assert_eq!(chain_of("histogram of cost"), parse_chain("PLOT HIST cost").unwrap());
        assert_eq!(
            chain_of("scatter box office vs cost"),
            parse_chain("PLOT SCATTER cost box_office").unwrap()
        );
        assert_eq!(
            chain_of("predict box office from cost"),
            parse_chain("PREDICT box_office USING cost").unwrap()
        );
        assert_eq!(chain_of("forecast box office"), parse_chain("PREDICT box_office").unwrap());
    }

    #[test]
    fn fuzzy_and_synonym_mentions() {
        assert_eq!(chain_of("sort by revenue"), parse_chain("SORT box_office ASC").unwrap());
        assert_eq!(chain_of("sort by box_ofice"), parse_chain("SORT box_office ASC").unwrap());
        assert_eq!(
            chain_of("top 2 by profit"),
            parse_chain("DERIVE profit = box_office - cost; SORT profit DESC; SLICE TOP 2").unwrap()
        );
        assert_eq!(
            chain_of("the 3 lowest cost movies"),
            parse_chain("SORT cost ASC; SLICE TOP 3").unwrap()
        );
    }

    #[test]
    fn missing_measure_role_is_a_clarification() {
        let schema = Schema::new(
            "m",
            vec![ColumnMeta::new("title", ColumnType::String), ColumnMeta::new("box_office", ColumnType::Int)],
        )
        .unwrap();
        let out = super::super::plan(
            "Show me the five movies with the highest profit margin",
            &schema,
            &default_registry(),
            &ExemplarStore::new(),
        );
        match out {
            PlanOutcome::Rejection { question, .. } => assert!(question.contains("cost"), "{question}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rationale_mentions_each_step() {
        match plan_text("Show me the five movies with the highest profit margin") {
            PlanOutcome::Plan { rationale, .. } => {
                assert!(rationale[0].contains("derive"));
                assert!(rationale[1].contains("highest first"));
                assert!(rationale[2].contains("5"));
                assert!(rationale[3].contains("closest worked example"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn intent_extraction() {
        let i = RulePlanner.intent("Show me the five movies with the highest profit margin", &movies(), &default_registry());
        assert_eq!(i.action, Action::Sort);
        assert_eq!(i.limit, Some(5));
        assert_eq!(i.direction, Some(SortOrder::Desc));
        assert_eq!(i.measures, vec!["profit_margin"]);
        let i = RulePlanner.intent("Give me some numbers", &movies(), &default_registry());
        assert!(i.measures.is_empty());
    }
}
