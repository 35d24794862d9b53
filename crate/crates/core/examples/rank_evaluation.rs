//! Scores both rankers under the three definitions of a relevant fact.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use explbench::corpus::{parse_knowledge_base, parse_questions, parse_score_file, read_jsonl, CorpusConfig};
use explbench::rank_eval::{evaluate_ranking, GoldSetting, RankOptions};
use explbench::ratings::{merge_ratings, RatingRecord};

pub fn run(fixtures: &Path) -> anyhow::Result<String> {
    let kb = parse_knowledge_base(&fixtures.join("kb"), &CorpusConfig::default())?;
    let questions = parse_questions(&fixtures.join("questions.jsonl"), &kb)?;
    let merged = merge_ratings(&read_jsonl::<RatingRecord>(&fixtures.join("ratings.jsonl"))?)?;
    let mut out = format!("{:<10} {:>7} {:>7} {:>7} {:>7}\n", "model", "WT2", "TR>=1", "TR>=2", "NDCG");
    for model in ["bert", "tfr-bert"] {
        let scores = parse_score_file(&fixtures.join(format!("scores/{model}.tsv")))?;
        let mut row = format!("{model:<10}");
        let mut ndcg = 0.0;
        for setting in [GoldSetting::Wt2, GoldSetting::Tr1, GoldSetting::Tr2] {
            let r = evaluate_ranking(&scores, &questions, &merged, setting, RankOptions::default())?;
            write!(row, " {:>7.4}", r.map_score)?;
            ndcg = r.ndcg_score;
        }
        writeln!(out, "{row} {ndcg:>7.4}")?;
    }
    Ok(out)
}

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"));
    print!("{}", run(&dir)?);
    Ok(())
}
