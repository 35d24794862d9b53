//! Loads the fixture tables and questions and looks a few things up.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use explbench::corpus::{parse_knowledge_base, parse_questions, CorpusConfig};

pub fn run(fixtures: &Path) -> anyhow::Result<String> {
    let kb = parse_knowledge_base(&fixtures.join("kb"), &CorpusConfig::default())?;
    let questions = parse_questions(&fixtures.join("questions.jsonl"), &kb)?;
    let mut out = String::new();
    for table in kb.table_names() {
        writeln!(out, "{table:<12} {:>3} rows  {:?}", kb.table(table).unwrap().len(), kb.columns(table).unwrap())?;
    }
    let q = &questions[0];
    writeln!(out, "\n{}: {}\nanswer: {}", q.id, q.stem, q.correct_answer())?;
    for g in &q.gold_explanation {
        writeln!(out, "  [{}] {}", g.role, kb.fact(&g.fact).unwrap().text)?;
    }
    // the column index finds rows by normalized cell content
    let hits = kb.lookup("KINDOF", "HYPERNYM", &["living".into(), "thing".into()]);
    writeln!(out, "\n{} facts say something is a kind of living thing", hits.len())?;
    writeln!(out, "fingerprint {}", kb.fingerprint())?;
    Ok(out)
}

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"));
    print!("{}", run(&dir)?);
    Ok(())
}
