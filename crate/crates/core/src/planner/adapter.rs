//! Seam for planners that generate chain text from a prompt, such as a
//! language model. The generated text is parsed, corrected and validated
//! like any user-written chain.

use crate::command::parse_chain;

use super::exemplar::build_prompt;
use super::{candidate_columns, finalize, PlanContext, PlanOutcome, Planner};

/// Produces chain text for a prompt, or `None` to decline.
pub trait ChainGenerator: Send + Sync {
    fn generate(&self, prompt: &str) -> Option<String>;
}

/// Wraps a [`ChainGenerator`] with few-shot prompting and output checks.
#[derive(Debug, Clone)]
pub struct AdapterPlanner<G> {
    pub generator: G,
    /// Number of retrieved examples placed in the prompt.
    pub shots: usize,
}

impl<G: ChainGenerator> AdapterPlanner<G> {
    pub fn new(generator: G) -> Self {
        AdapterPlanner { generator, shots: 3 }
    }
}

impl<G: ChainGenerator> Planner for AdapterPlanner<G> {
    fn plan(&self, query: &str, ctx: &PlanContext<'_>) -> PlanOutcome {
        let schema = ctx.registry.annotate(ctx.schema);
        let shots = ctx.exemplars.retrieve(query, self.shots);
        let prompt = build_prompt(query, &schema, &shots, ctx.embedding);
        let decline = || PlanOutcome::Rejection {
            question: "Could you say more precisely which columns and operations you want?".to_string(),
            candidates: candidate_columns(&schema),
        };
        let Some(text) = self.generator.generate(&prompt) else {
            return decline();
        };
        match parse_chain(&text) {
            Ok(chain) if !chain.is_empty() => {
                let mut rationale = vec![format!("generated from a prompt with {} worked examples", shots.len())];
                rationale.extend(chain.iter().map(|c| format!("{} step", c.kind())));
                finalize(chain, rationale, &schema)
            }
            _ => decline(),
        }
    }
}

/// Canned generator: answers prompts whose final request matches one of
/// its queries (case-insensitively) and declines everything else.
#[derive(Debug, Clone, Default)]
pub struct MockGenerator {
    responses: Vec<(String, String)>,
}

impl MockGenerator {
    pub fn new<I, Q, C>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (Q, C)>,
        Q: Into<String>,
        C: Into<String>,
    {
        MockGenerator {
            responses: pairs
                .into_iter()
                .map(|(q, c)| (q.into().trim().to_lowercase(), c.into()))
                .collect(),
        }
    }
}

impl ChainGenerator for MockGenerator {
    fn generate(&self, prompt: &str) -> Option<String> {
        let request = prompt.rsplit("\nRequest: ").next()?.lines().next()?.trim().to_lowercase();
        self.responses
            .iter()
            .find(|(q, _)| *q == request)
            .map(|(_, c)| c.clone())
    }
}

pub type MockPlanner = AdapterPlanner<MockGenerator>;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{default_registry, ExemplarStore};
    use crate::table::{ColumnMeta, Schema};
    use crate::value::ColumnType;

    fn schema() -> Schema {
        Schema::new(
            "movies",
            vec![ColumnMeta::new("title", ColumnType::String), ColumnMeta::new("cost", ColumnType::Int)],
        )
        .unwrap()
    }

    #[test]
    fn canned_answers_are_checked() {
        let planner = MockPlanner::new(MockGenerator::new([
            ("sort by cost", "SORT Cost DESC"),
            ("bad", "SORT nosuch"),
            ("garbage", "SORT"),
        ]));
        let reg = default_registry();
        let store = ExemplarStore::seeded();
        let schema = schema();
        let ctx = PlanContext::new(&schema, &reg, &store);
        match planner.plan("Sort by cost", &ctx) {
            PlanOutcome::Plan { chain, rationale } => {
                assert_eq!(chain.to_string(), "SORT cost DESC");
                assert!(rationale.iter().any(|r| r.contains("`Cost` as `cost`")));
            }
            other => panic!("{other:?}"),
        }
        for q in ["bad", "garbage", "Give me some numbers"] {
            assert!(!planner.plan(q, &ctx).is_plan(), "{q}");
        }
    }

    #[test]
    fn prompt_carries_query_and_shots() {
        let store = ExemplarStore::seeded();
        let shots = store.retrieve("sort by cost", 2);
        let p = build_prompt("sort by cost", &schema(), &shots, Some(&[0.5; 64]));
        assert!(p.ends_with("Request: sort by cost\nChain:\n"));
        assert!(p.contains("- cost (int)"));
        assert!(p.contains("Table embedding (64 dims)"));
        assert_eq!(p.matches("Request: ").count(), 3);
    }
}
