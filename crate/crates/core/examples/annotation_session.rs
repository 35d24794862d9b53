//! Drives the annotation service in-process: two raters pull tasks and
//! submit grades, then the live statistics are printed. Pass `--serve` to
//! expose the same service over HTTP on 127.0.0.1:8080 afterwards.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use explbench::cli::build_tasks;
use explbench::corpus::{parse_knowledge_base, parse_questions, parse_score_file, CorpusConfig};
use explbench::ratings::MergedRatings;
use explbench::service::{AnnotationService, AnnotationStore, RawPayload, ServeConfig, Submission, TaskKind};

pub fn run(fixtures: &Path, data_dir: &Path) -> anyhow::Result<(String, Arc<AnnotationService>)> {
    let kb = parse_knowledge_base(&fixtures.join("kb"), &CorpusConfig::default())?;
    let questions = parse_questions(&fixtures.join("questions.jsonl"), &kb)?;
    let scores = vec![parse_score_file(&fixtures.join("scores/tfr-bert.tsv"))?];
    let tasks = build_tasks(&kb, &questions[..3], &scores, 5, &[], &MergedRatings::default())?;
    let raters: BTreeMap<String, String> = [("ana", "t1"), ("ben", "t2")].map(|(r, t)| (r.into(), t.into())).into();
    let store = AnnotationStore::new(tasks, raters.keys().cloned(), 2, &questions, Vec::new());
    let svc = AnnotationService::open(store, &data_dir.join("events.jsonl"), raters, None)?;

    // ben shifts every third grade by one
    for (rater, shift) in [("ana", 0i64), ("ben", 1)] {
        while let Some(task) = svc.next_task(rater)? {
            assert_eq!(task.kind, TaskKind::Relevance);
            let ratings = task
                .items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    let g = i as i64 % 4 + if i % 3 == 0 { shift } else { 0 };
                    (item.fact.clone(), g.min(3))
                })
                .collect();
            svc.submit(&Submission {
                task_id: task.task_id,
                rater: rater.into(),
                payload: RawPayload::Relevance { ratings },
            })?;
        }
    }
    let stats = serde_json::to_string_pretty(&svc.stats())?;
    Ok((stats, Arc::new(svc)))
}

fn main() -> anyhow::Result<()> {
    let fixtures = PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures"));
    let data = tempfile::tempdir()?;
    let (stats, svc) = run(&fixtures, data.path())?;
    println!("{stats}");
    if std::env::args().any(|a| a == "--serve") {
        let config = ServeConfig::default();
        tokio::runtime::Runtime::new()?.block_on(explbench::service::serve(&config, svc))?;
    }
    Ok(())
}
