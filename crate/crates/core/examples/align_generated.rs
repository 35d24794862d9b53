//! Maps free-text generated facts onto the closest knowledge-base rows.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use explbench::corpus::{parse_knowledge_base, read_jsonl, CorpusConfig};
use explbench::text_align::{rouge1, Aligner, GeneratedOutput, DEFAULT_SEPARATOR, DEFAULT_THRESHOLD};

pub fn run(fixtures: &Path) -> anyhow::Result<String> {
    let kb = parse_knowledge_base(&fixtures.join("kb"), &CorpusConfig::default())?;
    let outputs: Vec<GeneratedOutput> = read_jsonl(&fixtures.join("generated.jsonl"))?;
    let aligner = Aligner::new(&kb);
    let mut out = String::new();
    for g in outputs.into_iter().take(3) {
        let g = g.resplit(DEFAULT_SEPARATOR);
        writeln!(out, "{}", g.question_id)?;
        for a in aligner.align(&g, DEFAULT_THRESHOLD) {
            let target = a.best_fact.as_deref().and_then(|f| kb.fact(f)).map_or("-", |f| f.text.as_str());
            let mark = if a.accepted { "ok " } else { "   " };
            writeln!(out, "  {mark}{:.2}  {:<40} -> {target}", a.score, a.generated)?;
        }
    }
    writeln!(out, "\nrouge1(\"ice is cold\", \"the ice is cold\") = {:.3}", rouge1("ice is cold", "the ice is cold"))?;
    Ok(out)
}

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"));
    print!("{}", run(&dir)?);
    Ok(())
}
