//! Merges two raters' grades and measures how well they agree.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use explbench::corpus::{parse_knowledge_base, parse_questions, read_jsonl, CorpusConfig};
use explbench::ratings::{agreement, merge_ratings, rating_distribution, KappaWeighting, RatingRecord};

pub fn run(fixtures: &Path) -> anyhow::Result<String> {
    let kb = parse_knowledge_base(&fixtures.join("kb"), &CorpusConfig::default())?;
    let questions = parse_questions(&fixtures.join("questions.jsonl"), &kb)?;
    let records: Vec<RatingRecord> = read_jsonl(&fixtures.join("ratings.jsonl"))?;
    let merged = merge_ratings(&records)?;

    let mut out = String::new();
    writeln!(out, "{} records -> {} merged ratings\n", records.len(), merged.len())?;
    write!(out, "{}", rating_distribution(&merged, &questions))?;
    for w in [KappaWeighting::Unweighted, KappaWeighting::Linear] {
        let a = agreement(&records, "expert-a", "expert-b", w)?;
        writeln!(
            out,
            "\n{w:?}: kappa {:.3}, exact agreement {:.1}%, within one grade {:.1}% over {} items",
            a.cohen_kappa.unwrap_or(f64::NAN),
            100.0 * a.percent_agreement,
            100.0 * a.within_one_fraction.unwrap_or(1.0),
            a.co_rated
        )?;
    }
    Ok(out)
}

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"));
    print!("{}", run(&dir)?);
    Ok(())
}
