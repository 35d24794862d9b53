//! Solves the fixture schemas once, then builds a schema explanation for a
//! question from one ranker's fact scores.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use explbench::corpus::{parse_knowledge_base, parse_score_file, CorpusConfig};
use explbench::schema::{build_schema_explanation, parse_schema_file, select_schemas, SchemaScoring, SolutionCache};

pub fn run(fixtures: &Path) -> anyhow::Result<String> {
    let kb = parse_knowledge_base(&fixtures.join("kb"), &CorpusConfig::default())?;
    let schemas = parse_schema_file(&fixtures.join("schemas.schema"))?;
    let cache = SolutionCache::build(&schemas, &kb)?;
    let mut out = format!("{} schemas, {} solutions\n", schemas.len(), cache.solution_count());

    let scores = parse_score_file(&fixtures.join("scores/tfr-bert.tsv"))?;
    let question = "Q001";
    let map = scores.score_map(question);
    let scoring = SchemaScoring::default();
    for sel in select_schemas(&cache, &map, scoring.clip_threshold).iter().take(scoring.n_schemas) {
        writeln!(out, "  {:<20} {:>7.3}", sel.schema, sel.score)?;
    }
    let expl = build_schema_explanation(question, &cache, &map, &scoring);
    writeln!(out, "{question} explanation ({}):", expl.model_name)?;
    for f in &expl.facts {
        writeln!(out, "  {:<24} {}", f.source, kb.fact(&f.fact).unwrap().text)?;
    }
    Ok(out)
}

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"));
    print!("{}", run(&dir)?);
    Ok(())
}
