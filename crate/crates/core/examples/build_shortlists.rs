//! Pools the top 20 facts of two rankers with the gold facts into the
//! per-question lists shown to raters.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use explbench::corpus::{parse_knowledge_base, parse_questions, parse_score_file, CorpusConfig};
use explbench::shortlist::{build_shortlists, Source};

pub fn run(fixtures: &Path) -> anyhow::Result<String> {
    let kb = parse_knowledge_base(&fixtures.join("kb"), &CorpusConfig::default())?;
    let questions = parse_questions(&fixtures.join("questions.jsonl"), &kb)?;
    let scores = vec![
        parse_score_file(&fixtures.join("scores/bert.tsv"))?,
        parse_score_file(&fixtures.join("scores/tfr-bert.tsv"))?,
    ];
    let lists = build_shortlists(&questions, &scores, 20, &kb)?;
    let mut out = String::new();
    for sl in &lists {
        let gold_only = sl.facts.iter().filter(|e| e.sources.len() == 1 && e.sources.contains(&Source::Gold)).count();
        writeln!(out, "{}  {:>2} facts, {} added only because they are gold", sl.question_id, sl.len(), gold_only)?;
    }
    let mean = lists.iter().map(|s| s.len()).sum::<usize>() as f64 / lists.len() as f64;
    writeln!(out, "mean shortlist size {mean:.1}")?;
    Ok(out)
}

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"));
    print!("{}", run(&dir)?);
    Ok(())
}
