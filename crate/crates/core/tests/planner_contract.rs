use tabchain_core::planner::{
    default_registry, ExemplarStore, MockGenerator, MockPlanner, PlanContext, PlanOutcome, Planner, RulePlanner,
    MAX_CANDIDATES,
};
use tabchain_core::runtime::{correct, execute, validate};
use tabchain_core::{Schema, Table};
use tabchain_testkit::{gen, movies, GOLDEN_QUERY};

const QUERIES: [&str; 30] = [
    GOLDEN_QUERY,
    "Give me some numbers",
    "sort by cost",
    "sort by price descending",
    "top 3 by score",
    "show the 2 cheapest rows by cost",
    "rows with qty above 2",
    "rows where price is at least 1 and qty below 5",
    "average price per name",
    "total qty by flag",
    "how many rows per label",
    "describe the table",
    "summary statistics of score",
    "plot price by name",
    "histogram of qty",
    "predict score from price and qty",
    "forecast cost",
    "profit margin",
    "highest profit",
    "show everything",
    "what is going on",
    "",
    "  ",
    "top",
    "sort",
    "filter",
    "mean of cast",
    "show me name and price",
    "between 1 and 5 price",
    "sort by rank then sort by cost",
];

fn schemas() -> Vec<Table> {
    let mut out = vec![movies()];
    for seed in 0..40 {
        let mut rng = gen::rng(seed);
        out.push(gen::with_synonyms(gen::random_table(&mut rng, 6, 5)));
    }
    out
}

fn mock() -> MockPlanner {
    MockPlanner::new(MockGenerator::new([
        ("sort by cost", "SORT cost ASC"),
        ("top 3 by score", "SORT score DESC; SLICE TOP 3"),
        ("describe the table", "DESCRIBE"),
        ("rows with qty above 2", "FILTER Qty > 2"),
        ("forecast cost", "PREDICT cost"),
        ("histogram of qty", "PLOT HIST qty"),
    ]))
}

fn check_contract(planner: &dyn Planner, schema: &Schema, t: &Table, q: &str) -> bool {
    let registry = default_registry();
    let store = ExemplarStore::seeded();
    let ctx = PlanContext::new(schema, &registry, &store);
    let first = planner.plan(q, &ctx);
    assert_eq!(first, planner.plan(q, &ctx), "planning is deterministic for {q:?}");
    match first {
        PlanOutcome::Plan { chain, rationale } => {
            assert!(!chain.is_empty(), "{q:?}");
            assert!(!rationale.is_empty(), "{q:?}");
            let report = validate(&chain, schema);
            assert!(report.is_ok(), "{q:?} on {:?}: {chain} -> {:?}", schema.names().collect::<Vec<_>>(), report);
            assert!(correct(&chain, schema).unwrap().corrections.is_empty(), "{q:?}: plans are already corrected");
            execute(&chain, t).unwrap_or_else(|e| panic!("{q:?}: {chain}: {e}"));
            true
        }
        PlanOutcome::Rejection { question, candidates } => {
            assert!(!question.trim().is_empty(), "{q:?}");
            assert!(candidates.len() <= MAX_CANDIDATES);
            for c in &candidates {
                assert!(schema.index_of(c).is_some(), "{q:?}: candidate {c} is not a column");
            }
            false
        }
    }
}

#[test]
fn rule_planner_contract() {
    let mut plans = 0;
    for t in schemas() {
        let schema = default_registry().annotate(t.schema());
        for q in QUERIES {
            plans += usize::from(check_contract(&RulePlanner, &schema, &t, q));
        }
    }
    eprintln!("rule planner produced {plans} plans");
    assert!(plans >= 100, "only {plans} plans");
}

#[test]
fn mock_planner_contract() {
    let planner = mock();
    let mut plans = 0;
    for t in schemas() {
        let schema = default_registry().annotate(t.schema());
        for q in QUERIES {
            plans += usize::from(check_contract(&planner, &schema, &t, q));
        }
    }
    eprintln!("mock planner produced {plans} plans");
    assert!(plans >= 20, "only {plans} plans");
}

#[test]
fn vague_request_is_clarified_by_both() {
    let t = movies();
    let registry = default_registry();
    let store = ExemplarStore::seeded();
    let schema = registry.annotate(t.schema());
    let ctx = PlanContext::new(&schema, &registry, &store);
    for planner in [&RulePlanner as &dyn Planner, &mock()] {
        match planner.plan("Give me some numbers", &ctx) {
            PlanOutcome::Rejection { question, candidates } => {
                assert!(question.ends_with('?'), "{question}");
                assert!(!candidates.is_empty());
            }
            other => panic!("{other:?}"),
        }
    }
}

#[test]
fn raising_the_threshold_never_loses_a_plan() {
    let registry = default_registry();
    let store = ExemplarStore::seeded();
    for t in schemas() {
        let schema = registry.annotate(t.schema());
        for q in QUERIES {
            let mut was_plan = false;
            for threshold in [0.0, 0.2, 0.4, 0.5, 0.6, 0.8, 1.0, 1.1] {
                let mut ctx = PlanContext::new(&schema, &registry, &store);
                ctx.vagueness_threshold = threshold;
                let is_plan = RulePlanner.plan(q, &ctx).is_plan();
                assert!(!was_plan || is_plan, "{q:?} lost its plan at threshold {threshold}");
                was_plan = is_plan;
            }
        }
    }
}

#[test]
fn vagueness_is_a_fraction() {
    let registry = default_registry();
    for t in schemas() {
        for q in QUERIES {
            let v = RulePlanner.vagueness(q, t.schema(), &registry);
            assert!((0.0..=1.0).contains(&v), "{q:?}: {v}");
        }
    }
}
