//! Property tests for invariants that span module boundaries or need
//! generated corpora.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use proptest::prelude::*;

use explbench::corpus::{parse_score_text, ScoreFile};
use explbench::expl_eval::{
    comp_b, completeness, ensemble, f1_ex, relevance, Explanation, ExplanationFact, OverrideRecord, Overrides,
};
use explbench::rank_eval::{average_precision, ndcg, Gain, GoldSetting};
use explbench::ratings::{rating_distribution, Grade, MergedRating, MergedRatings};
use explbench::schema::{build_schema_explanation, score_solution, SchemaScoring, SchemaSolution, SolutionCache};
use explbench::synth::Fixture;
use explbench::text_align::rouge1;

fn fact(i: usize) -> String {
    format!("f{i:02}")
}

fn expl(facts: &[usize]) -> Explanation {
    let mut e = Explanation::new("Q", "m");
    for &f in facts {
        e.push(ExplanationFact { fact: fact(f), score: None, source: "m".into() });
    }
    e
}

fn merged(grades: &[u8]) -> MergedRatings {
    grades
        .iter()
        .enumerate()
        .map(|(i, &g)| MergedRating {
            question_id: "Q".into(),
            fact_id: fact(i),
            tr: Grade::new(g as i64).unwrap(),
            rater_count: 2,
        })
        .collect()
}

fn fact_set(e: &Explanation) -> BTreeSet<String> {
    e.facts.iter().map(|f| f.fact.clone()).collect()
}

fn grades_strategy() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..4, 2..12)
}

proptest! {
    #[test]
    fn column_index_is_consistent(seed in any::<u64>()) {
        let fx = Fixture::generate(2, 60, seed);
        prop_assert_eq!(fx.kb.rebuild_column_index(), fx.kb.column_index_snapshot());
    }

    #[test]
    fn score_parsing_keeps_every_pair(
        rows in prop::collection::btree_map((0u8..4, 0u8..20), 0i32..50, 0..60),
        seed in any::<u64>(),
    ) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut lines: Vec<String> = rows.iter().map(|((q, f), s)| format!("Q{q}\t{}\t{s}", fact(*f as usize))).collect();
        lines.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let parsed = parse_score_text(&lines.join("\n"), "m", Path::new("m.tsv")).unwrap();
        let pairs: BTreeMap<(String, String), f64> = parsed
            .entries
            .iter()
            .flat_map(|(q, fs)| fs.iter().map(move |f| ((q.clone(), f.fact.clone()), f.score)))
            .collect();
        let want: BTreeMap<(String, String), f64> =
            rows.iter().map(|((q, f), s)| ((format!("Q{q}"), fact(*f as usize)), *s as f64)).collect();
        prop_assert_eq!(pairs, want);
    }

    #[test]
    fn distribution_counts_every_merged_pair(seed in any::<u64>()) {
        let fx = Fixture::generate(4, 80, seed);
        let m = explbench::ratings::merge_ratings(&fx.ratings).unwrap();
        prop_assert_eq!(rating_distribution(&m, &fx.questions).total(), m.len() as u64);
    }

    #[test]
    fn ranking_metrics_depend_only_on_order(
        scores in prop::collection::vec(-20i32..20, 1..12),
        grades in grades_strategy(),
        gold in prop::collection::btree_set(0usize..12, 0..5),
    ) {
        let triples = |f: &dyn Fn(f64) -> f64| {
            ScoreFile::from_triples("m", scores.iter().enumerate().map(|(i, &s)| ("Q".to_string(), fact(i), f(s as f64)))).unwrap()
        };
        let a = triples(&|x| x);
        let b = triples(&|x| x * x * x + 7.0);
        let (ra, rb) = (a.ranking("Q").unwrap(), b.ranking("Q").unwrap());
        prop_assert_eq!(&ra, &rb);
        let gold: HashSet<String> = gold.into_iter().map(fact).collect();
        let gold: HashSet<&str> = gold.iter().map(String::as_str).collect();
        prop_assert_eq!(average_precision(&ra, &gold), average_precision(&rb, &gold));
        let names: Vec<String> = (0..grades.len()).map(fact).collect();
        let g: HashMap<&str, Grade> = names.iter().zip(&grades).map(|(f, &v)| (f.as_str(), Grade::new(v as i64).unwrap())).collect();
        prop_assert_eq!(ndcg(&ra, &g, None, Gain::Exponential), ndcg(&rb, &g, None, Gain::Exponential));
    }

    #[test]
    fn promoting_a_better_fact_never_lowers_ndcg(grades in grades_strategy(), at in 0usize..11) {
        let names: Vec<String> = (0..grades.len()).map(fact).collect();
        let g: HashMap<&str, Grade> = names.iter().zip(&grades).map(|(f, &v)| (f.as_str(), Grade::new(v as i64).unwrap())).collect();
        let mut ranking: Vec<&str> = names.iter().map(String::as_str).collect();
        let i = at % (ranking.len() - 1);
        prop_assume!(g[ranking[i]] < g[ranking[i + 1]]);
        for gain in [Gain::Exponential, Gain::Linear] {
            let before = ndcg(&ranking, &g, None, gain).unwrap();
            ranking.swap(i, i + 1);
            let after = ndcg(&ranking, &g, None, gain).unwrap();
            ranking.swap(i, i + 1);
            prop_assert!(after >= before - 1e-15, "{} -> {}", before, after);
        }
    }

    #[test]
    fn strict_gold_is_a_subset(seed in any::<u64>()) {
        let fx = Fixture::generate(4, 80, seed);
        let m = explbench::ratings::merge_ratings(&fx.ratings).unwrap();
        for q in &fx.questions {
            prop_assert!(GoldSetting::Tr2.gold(q, &m).is_subset(&GoldSetting::Tr1.gold(q, &m)));
        }
    }

    #[test]
    fn adding_gold_never_lowers_completeness(
        facts in prop::collection::btree_set(0usize..12, 0..8),
        gold in prop::collection::btree_set(0usize..12, 1..6),
    ) {
        let gold_ids: Vec<String> = gold.iter().map(|&g| fact(g)).collect();
        let g: HashSet<&str> = gold_ids.iter().map(String::as_str).collect();
        let facts: Vec<usize> = facts.into_iter().collect();
        let before = completeness(&expl(&facts), &g).unwrap();
        for &extra in &gold {
            let mut more = facts.clone();
            more.push(extra);
            prop_assert!(completeness(&expl(&more), &g).unwrap() >= before);
        }
    }

    #[test]
    fn adding_an_irrelevant_fact_lowers_relevance(grades in grades_strategy(), picks in prop::collection::btree_set(0usize..12, 1..8)) {
        let m = merged(&grades);
        let facts: Vec<usize> = picks.into_iter().filter(|&p| p < grades.len()).collect();
        prop_assume!(!facts.is_empty());
        let before = relevance(&expl(&facts), &m, &Overrides::default());
        let mut more = facts.clone();
        more.push(99); // unrated, so grade 0
        let after = relevance(&expl(&more), &m, &Overrides::default());
        prop_assert!(after < before || before == 0.0);
    }

    #[test]
    fn binary_completeness_implies_full_strict_recall(
        grades in grades_strategy(),
        facts in prop::collection::btree_set(0usize..12, 0..10),
        gold in prop::collection::btree_set(0usize..12, 1..6),
    ) {
        let m = merged(&grades);
        let gold_ids: Vec<String> = gold.iter().map(|&g| fact(g)).collect();
        let g: HashSet<&str> = gold_ids.iter().map(String::as_str).collect();
        let e = expl(&facts.into_iter().collect::<Vec<_>>());
        if comp_b(&e, &g, &m).complete {
            let strict: HashSet<&str> = g.iter().copied().filter(|f| m.tr_or_zero("Q", f) >= Grade::IMPORTANT).collect();
            if !strict.is_empty() {
                prop_assert_eq!(completeness(&e, &strict), Some(1.0));
            }
        }
    }

    #[test]
    fn f1_identities(r in 0.0f64..=1.0, c in 0.0f64..=1.0) {
        prop_assert_eq!(f1_ex(r, c), f1_ex(c, r));
        prop_assert!((f1_ex(r, r) - r).abs() <= 1e-15);
        prop_assert!(f1_ex(r, c) <= 2.0 * r.min(c) + 1e-15);
    }

    #[test]
    fn ensemble_is_a_set_union(
        a in prop::collection::vec(0usize..12, 0..6),
        b in prop::collection::vec(0usize..12, 0..6),
        c in prop::collection::vec(0usize..12, 0..6),
    ) {
        let (a, b, c) = (expl(&a), expl(&b), expl(&c));
        let ab = ensemble(&[a.clone(), b.clone()]).unwrap();
        let ba = ensemble(&[b.clone(), a.clone()]).unwrap();
        prop_assert_eq!(fact_set(&ab), fact_set(&ba));
        let left = ensemble(&[ab, c.clone()]).unwrap();
        let right = ensemble(&[a.clone(), ensemble(&[b.clone(), c.clone()]).unwrap()]).unwrap();
        prop_assert_eq!(fact_set(&left), fact_set(&right));
        let union: BTreeSet<String> = [&a, &b, &c].iter().flat_map(|e| fact_set(e)).collect();
        prop_assert_eq!(fact_set(&left), union);
    }

    #[test]
    fn overrides_dominate_ratings(grades in grades_strategy(), verdict in any::<bool>()) {
        let m = merged(&grades);
        let facts: Vec<usize> = (0..grades.len()).collect();
        let o = Overrides::from_records(facts.iter().map(|&f| OverrideRecord::Relevance {
            question: "Q".into(),
            fact: fact(f),
            relevant: verdict,
        }));
        let want = if verdict { 1.0 } else { 0.0 };
        prop_assert_eq!(relevance(&expl(&facts), &m, &o), want);
    }

    #[test]
    fn rouge_is_symmetric_and_reflexive(a in "[a-d ]{0,20}", b in "[a-d ]{0,20}") {
        prop_assert_eq!(rouge1(&a, &b), rouge1(&b, &a));
        if a.split_whitespace().next().is_some() {
            prop_assert_eq!(rouge1(&a, &a), 1.0);
        }
    }

    #[test]
    fn solution_scores_are_monotone(
        scores in prop::collection::vec(-3.0f64..3.0, 6),
        bound in prop::collection::vec(0usize..6, 1..4),
        which in 0usize..6,
        bump in 0.0f64..2.0,
        clip in -2.0f64..2.0,
        clip_bump in 0.0f64..2.0,
    ) {
        let names: Vec<String> = (0..6).map(fact).collect();
        let sol = SchemaSolution {
            schema_name: "s".into(),
            bindings: bound.iter().map(|&i| fact(i)).collect(),
            var_assignments: BTreeMap::new(),
            score: None,
        };
        let mut map: HashMap<&str, f64> = names.iter().map(String::as_str).zip(scores.iter().copied()).collect();
        let base = score_solution(&sol, &map, clip);
        prop_assert!(score_solution(&sol, &map, clip + clip_bump) >= base);
        *map.get_mut(names[which].as_str()).unwrap() += bump;
        prop_assert!(score_solution(&sol, &map, clip) >= base);
    }

    #[test]
    fn more_schemas_never_drop_facts(
        sols in prop::collection::vec(prop::collection::vec(prop::collection::vec(0usize..10, 1..4), 1..4), 1..6),
        scores in prop::collection::vec(-1.0f64..1.0, 10),
    ) {
        let entries = sols
            .iter()
            .enumerate()
            .map(|(s, list)| {
                let name = format!("s{s}");
                let v = list
                    .iter()
                    .map(|facts| SchemaSolution {
                        schema_name: name.clone(),
                        bindings: facts.iter().map(|&f| fact(f)).collect(),
                        var_assignments: BTreeMap::new(),
                        score: None,
                    })
                    .collect();
                (name, v)
            })
            .collect();
        let cache = SolutionCache { entries, kb_fingerprint: "x".into() };
        let names: Vec<String> = (0..10).map(fact).collect();
        let map: HashMap<&str, f64> = names.iter().map(String::as_str).zip(scores.iter().copied()).collect();
        for k in 1..sols.len() {
            let at = |n: usize| {
                let scoring = SchemaScoring { clip_threshold: 0.0, filter_threshold: f64::NEG_INFINITY, n_schemas: n };
                fact_set(&build_schema_explanation("Q", &cache, &map, &scoring))
            };
            prop_assert!(at(k).is_subset(&at(k + 1)));
        }
    }
}
