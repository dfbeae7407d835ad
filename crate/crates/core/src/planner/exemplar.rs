//! Past (query, chain) pairs retrieved by trigram-hash similarity.

use crate::command::{parse_chain, serialize_chain, CommandChain};
use crate::table::Schema;
use crate::text::{dot, trigram_vector};

pub const EMBED_DIM: usize = 256;

/// Hashed character-trigram embedding of a query, unit length or zero.
pub fn embed_text(q: &str) -> Vec<f64> {
    trigram_vector(q, EMBED_DIM)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub query: String,
    pub chain: CommandChain,
    pub embedding: Vec<f64>,
}

impl Exemplar {
    pub fn new(query: impl Into<String>, chain: CommandChain) -> Self {
        let query = query.into();
        let embedding = embed_text(&query);
        Exemplar {
            query,
            chain,
            embedding,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExemplarStore {
    items: Vec<Exemplar>,
}

const SEED_EXEMPLARS: [(&str, &str); 6] = [
    (
        "Show me the five movies with the highest profit margin",
        "DERIVE profit_margin = (box_office - cost) / cost; SORT profit_margin DESC; SLICE TOP 5",
    ),
    ("sort by cost", "SORT cost ASC"),
    ("movies with cost above 100", "FILTER cost > 100"),
    ("average box office per genre", "GROUPBY genre MEAN(box_office)"),
    ("describe the table", "DESCRIBE"),
    ("predict box office from cost", "PREDICT box_office USING cost"),
];

impl ExemplarStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// A small store of hand-written examples.
    pub fn seeded() -> Self {
        let mut s = Self::new();
        for (q, c) in SEED_EXEMPLARS {
            s.add(Exemplar::new(q, parse_chain(c).expect("seed exemplar parses")));
        }
        s
    }

    pub fn add(&mut self, e: Exemplar) {
        self.items.push(e);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Exemplar> {
        self.items.iter()
    }

    /// Top `k` exemplars by cosine similarity, ties in insertion order.
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<(&Exemplar, f64)> {
        let q = embed_text(query);
        let mut scored: Vec<(usize, f64)> = self
            .items
            .iter()
            .enumerate()
            .map(|(i, e)| (i, dot(&q, &e.embedding)))
            .collect();
        // sort_by is stable, so equal scores keep insertion order
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        scored
            .into_iter()
            .take(k)
            .map(|(i, s)| (&self.items[i], s))
            .collect()
    }
}

/// Few-shot prompt for a text-generating planner: schema, the optional
/// table embedding, retrieved examples, then the query.
pub fn build_prompt(query: &str, schema: &Schema, shots: &[(&Exemplar, f64)], embedding: Option<&[f64]>) -> String {
    let mut p = String::from("Translate the request into a command chain over the table.\n\nColumns:\n");
    for c in &schema.columns {
        p.push_str(&format!("- {} ({})", c.name, c.ctype));
        if !c.synonyms.is_empty() {
            p.push_str(&format!(" aka {}", c.synonyms.join(", ")));
        }
        p.push('\n');
    }
    if let Some(v) = embedding {
        let shown: Vec<String> = v.iter().take(8).map(|x| format!("{x:.4}")).collect();
        p.push_str(&format!("\nTable embedding ({} dims): [{}, ...]\n", v.len(), shown.join(", ")));
    }
    for (e, _) in shots {
        p.push_str(&format!("\nRequest: {}\nChain:\n{}\n", e.query, serialize_chain(&e.chain)));
    }
    p.push_str(&format!("\nRequest: {query}\nChain:\n"));
    p
}
