use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{SchemaSolution, SolutionCache};
use crate::expl_eval::{Explanation, ExplanationFact};

/// Thresholds for turning cached solutions into an explanation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemaScoring {
    /// Fact scores below this count as this value when summing.
    pub clip_threshold: f64,
    /// Facts scoring below this are dropped from the final explanation.
    pub filter_threshold: f64,
    /// Number of top schemas combined.
    pub n_schemas: usize,
}

impl Default for SchemaScoring {
    fn default() -> Self {
        Self {
            clip_threshold: 0.0,
            filter_threshold: 0.0,
            n_schemas: 3,
        }
    }
}

/// Clipped sum over the distinct facts of a solution. Facts without a score
/// contribute the clip value.
pub fn score_solution(sol: &SchemaSolution, scores: &HashMap<&str, f64>, clip_threshold: f64) -> f64 {
    sol.facts()
        .into_iter()
        .map(|f| scores.get(f).copied().unwrap_or(clip_threshold).max(clip_threshold))
        .sum()
}

/// A schema's best-scoring solution for one question.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectedSchema<'c> {
    pub schema: &'c str,
    pub solution: &'c SchemaSolution,
    pub score: f64,
}

/// Every schema with at least one solution, each represented by its best
/// solution (earliest on ties), ordered by that score descending then name.
pub fn select_schemas<'c>(
    cache: &'c SolutionCache,
    scores: &HashMap<&str, f64>,
    clip_threshold: f64,
) -> Vec<SelectedSchema<'c>> {
    let mut best: Vec<SelectedSchema<'c>> = cache
        .entries
        .iter()
        .filter_map(|(name, sols)| {
            let mut top: Option<(f64, &SchemaSolution)> = None;
            for sol in sols {
                let s = score_solution(sol, scores, clip_threshold);
                if top.is_none_or(|(t, _)| s > t) {
                    top = Some((s, sol));
                }
            }
            top.map(|(score, solution)| SelectedSchema {
                schema: name.as_str(),
                solution,
                score,
            })
        })
        .collect();
    best.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.schema.cmp(b.schema)));
    best
}

/// Combines the facts of the top `n_schemas` schemas and drops facts scoring
/// below the filter threshold. Each fact's source names its schema.
pub fn build_schema_explanation(
    question_id: &str,
    cache: &SolutionCache,
    scores: &HashMap<&str, f64>,
    scoring: &SchemaScoring,
) -> Explanation {
    let model = format!("schema-{}", scoring.n_schemas);
    let mut expl = Explanation::new(question_id, model);
    if cache.entries.values().all(Vec::is_empty) {
        log::warn!("question {question_id}: solution cache is empty");
        return expl;
    }
    let selected = select_schemas(cache, scores, scoring.clip_threshold);
    for sel in selected.iter().take(scoring.n_schemas) {
        for fact in sel.solution.facts() {
            let score = scores.get(fact).copied();
            if score.unwrap_or(f64::NEG_INFINITY) < scoring.filter_threshold {
                continue;
            }
            expl.push(ExplanationFact {
                fact: fact.to_string(),
                score,
                source: format!("schema:{}", sel.schema),
            });
        }
    }
    expl
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;

    fn sol(schema: &str, facts: &[&str]) -> SchemaSolution {
        SchemaSolution {
            schema_name: schema.into(),
            bindings: facts.iter().map(|f| (*f).into()).collect(),
            var_assignments: BTreeMap::new(),
            score: None,
        }
    }

    fn cache(entries: &[(&str, Vec<SchemaSolution>)]) -> SolutionCache {
        SolutionCache {
            entries: entries.iter().map(|(n, s)| (n.to_string(), s.clone())).collect(),
            kb_fingerprint: "x".into(),
        }
    }

    #[test]
    fn clipping() {
        let scores: HashMap<&str, f64> = [("a", 2.0), ("b", -5.0)].into();
        let s = sol("s", &["a", "b"]);
        assert_eq!(score_solution(&s, &scores, 0.0), 2.0);
        assert_eq!(score_solution(&s, &scores, f64::NEG_INFINITY), -3.0);
        let pos: HashMap<&str, f64> = [("a", 2.0), ("b", 1.5)].into();
        assert_eq!(score_solution(&s, &pos, 0.0), 3.5);
        // missing facts count as the clip value
        assert_eq!(score_solution(&sol("s", &["a", "zzz"]), &scores, 0.5), 2.5);
        // a fact bound twice counts once
        assert_eq!(score_solution(&sol("s", &["a", "a"]), &scores, 0.0), 2.0);
    }

    #[test]
    fn picks_best_schemas_and_filters() {
        let c = cache(&[
            ("s1", vec![sol("s1", &["a", "b"]), sol("s1", &["c", "d"])]),
            ("s2", vec![sol("s2", &["e", "b"])]),
            ("s3", vec![]),
        ]);
        let scores: HashMap<&str, f64> = [("a", 1.0), ("b", -1.0), ("c", 3.0), ("d", 0.5), ("e", 0.2)].into();
        let one = build_schema_explanation("Q", &c, &scores, &SchemaScoring { n_schemas: 1, ..Default::default() });
        let facts: Vec<&str> = one.facts.iter().map(|f| f.fact.as_str()).collect();
        assert_eq!(facts, ["c", "d"]);
        assert_eq!(one.facts[0].source, "schema:s1");

        let two = build_schema_explanation("Q", &c, &scores, &SchemaScoring { n_schemas: 2, ..Default::default() });
        let facts: Vec<&str> = two.facts.iter().map(|f| f.fact.as_str()).collect();
        // "b" scores below the zero filter
        assert_eq!(facts, ["c", "d", "e"]);

        let none = build_schema_explanation(
            "Q",
            &c,
            &scores,
            &SchemaScoring { filter_threshold: f64::INFINITY, ..Default::default() },
        );
        assert!(none.is_empty());
    }

    #[test]
    fn empty_cache() {
        let e = build_schema_explanation("Q", &cache(&[]), &HashMap::new(), &SchemaScoring::default());
        assert!(e.is_empty());
    }
}
