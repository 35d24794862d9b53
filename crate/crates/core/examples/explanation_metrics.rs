//! Treats each ranker's top 8 facts as an explanation and scores it, first
//! automatically and then with a manual completeness judgement.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use explbench::corpus::{parse_knowledge_base, parse_questions, parse_score_file, read_jsonl, CorpusConfig};
use explbench::expl_eval::{evaluate_explanations, f1_ex, topk_explanation, Aggregation, ExplReport, Overrides};
use explbench::ratings::{merge_ratings, RatingRecord};

pub fn run(fixtures: &Path) -> anyhow::Result<String> {
    let kb = parse_knowledge_base(&fixtures.join("kb"), &CorpusConfig::default())?;
    let questions = parse_questions(&fixtures.join("questions.jsonl"), &kb)?;
    let merged = merge_ratings(&read_jsonl::<RatingRecord>(&fixtures.join("ratings.jsonl"))?)?;
    let mut out = ExplReport::summary_header() + "\n";
    for model in ["bert", "tfr-bert"] {
        let scores = parse_score_file(&fixtures.join(format!("scores/{model}.tsv")))?;
        let expls = questions
            .iter()
            .map(|q| topk_explanation(&scores, &q.id, 8))
            .collect::<Result<Vec<_>, _>>()?;
        for agg in [Aggregation::PerQuestion, Aggregation::Corpus] {
            let mut r = evaluate_explanations(&expls, &questions, &merged, &Overrides::default(), agg)?;
            r.model_name = format!("{model} ({agg})");
            writeln!(out, "{}", r.summary_row())?;
        }
    }

    // a rater marks the first explanation complete; the override wins
    let scores = parse_score_file(&fixtures.join("scores/bert.tsv"))?;
    let first = topk_explanation(&scores, &questions[0].id, 8)?;
    let mut overrides = Overrides::default();
    overrides.completeness.insert((first.model_name.clone(), first.question_id.clone()), true);
    let r = evaluate_explanations(&[first], &questions, &merged, &overrides, Aggregation::PerQuestion)?;
    writeln!(out, "\nmanual Comp_B for {}: {:?}", questions[0].id, r.manual_comp_b)?;
    writeln!(out, "F1 of Rel 0.62 and Comp 0.32: {:.4}", f1_ex(0.62, 0.32))?;
    Ok(out)
}

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"));
    print!("{}", run(&dir)?);
    Ok(())
}
