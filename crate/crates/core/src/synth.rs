//! Deterministic synthetic data.
//!
//! [`Fixture`] is a small but complete corpus (tables, questions, ranker
//! scores, two raters, generator output, schemas) wired so every pipeline
//! stage has something to chew on. [`ScaleSet`] is a large score set for
//! load tests, with rankings produced lazily per question to stay light on
//! memory. Both are pure functions of their seed.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use chrono::{TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    write_jsonl, CorpusConfig, CorpusError, FactId, GoldFact, KnowledgeBase, KnowledgeBaseBuilder, Question,
    RowLocation, ScoreFile, Split,
};
use crate::ratings::{Grade, MergedRating, MergedRatings, RatingRecord};
use crate::shortlist::build_shortlist;
use crate::text_align::GeneratedOutput;

const THINGS: &[&str] = &[
    "water", "ice", "steam", "sun", "moon", "earth", "star", "plant", "tree", "leaf", "root", "stem", "seed",
    "flower", "animal", "bird", "fish", "frog", "mammal", "insect", "rock", "soil", "sand", "metal", "iron",
    "copper", "magnet", "wire", "battery", "light bulb", "thermometer", "ruler", "lens", "wind", "rain",
    "cloud", "ocean", "river", "glacier", "volcano",
];
const CATEGORIES: &[&str] = &[
    "liquid", "solid", "gas", "matter", "living thing", "object", "celestial body", "body of water", "tool",
    "electrical conductor", "organism", "precipitation", "plant part", "natural resource", "landform",
];
const PROPERTIES: &[&str] = &[
    "hot", "cold", "hard", "soft", "magnetic", "transparent", "heavy", "light", "wet", "dry", "round", "bright",
];
const PROCESSES: &[&str] = &[
    "melting", "freezing", "evaporation", "condensation", "erosion", "photosynthesis", "heating", "cooling",
    "growth", "friction", "weathering", "pollination",
];
const PURPOSES: &[&str] = &[
    "measuring temperature", "measuring length", "making electricity", "seeing small objects", "growing food",
    "building shelter", "heating", "cooling", "cooking",
];
const SYNONYMS: &[(&str, &str)] = &[
    ("warm", "hot"), ("chilly", "cold"), ("rigid", "hard"), ("boulder", "rock"), ("dirt", "soil"),
    ("sea", "ocean"), ("stream", "river"), ("vapor", "steam"), ("creature", "animal"), ("bloom", "flower"),
    ("sunlight", "light"), ("breeze", "wind"), ("stone", "rock"), ("kernel", "seed"), ("shine", "bright"),
];

/// Table name, columns, connective placed in the `REL` column, row count.
const TABLES: &[(&str, [&str; 3], &str, usize)] = &[
    ("KINDOF", ["HYPONYM", "REL", "HYPERNYM"], "is a kind of", 50),
    ("HASPROPERTY", ["OBJECT", "REL", "PROPERTY"], "is", 40),
    ("CAUSE", ["CAUSE", "REL", "EFFECT"], "causes", 35),
    ("PARTOF", ["PART", "REL", "WHOLE"], "is a part of", 30),
    ("USEDFOR", ["OBJECT", "REL", "PURPOSE"], "is used for", 30),
    ("SYNONYMY", ["TERM", "REL", "SYNONYM"], "means", 15),
];

/// The ten fixture schemas.
pub const FIXTURE_SCHEMAS: &str = r#"# Fixture inference patterns over the synthetic tables.

schema kind-chain
slot KINDOF HYPONYM=$a HYPERNYM=$b
slot KINDOF HYPONYM=$b HYPERNYM=$c

schema kind-property
slot KINDOF HYPONYM=$a HYPERNYM=$b
slot HASPROPERTY OBJECT=$b PROPERTY=$p

schema cause-chain
slot CAUSE CAUSE=$a EFFECT=$b
slot CAUSE CAUSE=$b EFFECT=$c

schema part-kind
slot PARTOF PART=$p WHOLE=$w
slot KINDOF HYPONYM=$w HYPERNYM=$k

schema tool-kind
slot USEDFOR OBJECT=$o PURPOSE=$u
slot KINDOF HYPONYM=$o

schema property-cause
slot HASPROPERTY OBJECT=$o PROPERTY=$p
slot CAUSE CAUSE=$p

schema part-property
slot PARTOF PART=$p WHOLE=$w
slot HASPROPERTY OBJECT=$p

schema kind-part-property
slot KINDOF HYPONYM=$a HYPERNYM=$b
slot PARTOF WHOLE=$b PART=$c
slot HASPROPERTY OBJECT=$c

schema hot-things
slot HASPROPERTY OBJECT=$o PROPERTY="hot"
slot KINDOF HYPONYM=$o

schema process-purpose
slot CAUSE EFFECT=$e
slot USEDFOR PURPOSE=$e
"#;

pub const RANKERS: [(&str, f64); 2] = [("bert", 1.6), ("tfr-bert", 0.9)];
pub const RATERS: [&str; 2] = ["expert-a", "expert-b"];
pub const GENERATOR_MODEL: &str = "t5";

/// A complete small corpus.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub kb: KnowledgeBase,
    pub questions: Vec<Question>,
    pub ratings: Vec<RatingRecord>,
    pub scores: Vec<ScoreFile>,
    pub generated: Vec<GeneratedOutput>,
    pub schemas: String,
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool.choose(rng).copied().expect("non-empty pool")
}

fn fact_id(rng: &mut ChaCha8Rng, used: &mut HashSet<String>) -> String {
    loop {
        let id = format!(
            "{:04x}-{:04x}-{:04x}-{:04x}",
            rng.gen::<u16>(),
            rng.gen::<u16>(),
            rng.gen::<u16>(),
            rng.gen::<u16>()
        );
        if used.insert(id.clone()) {
            return id;
        }
    }
}

fn row_values(rng: &mut ChaCha8Rng, table: &str, i: usize) -> (String, String) {
    let things_cats: Vec<&str> = THINGS.iter().chain(CATEGORIES).copied().collect();
    let causes: Vec<&str> = THINGS.iter().chain(PROPERTIES).chain(PROCESSES).copied().collect();
    let effects: Vec<&str> = PROCESSES.iter().chain(PROPERTIES).copied().collect();
    let (a, b) = match table {
        "KINDOF" if rng.gen_bool(0.6) => (pick(rng, THINGS), pick(rng, CATEGORIES)),
        "KINDOF" => (pick(rng, THINGS), pick(rng, THINGS)),
        "HASPROPERTY" => (pick(rng, &things_cats), pick(rng, PROPERTIES)),
        "CAUSE" => (pick(rng, &causes), pick(rng, &effects)),
        "PARTOF" => (pick(rng, THINGS), pick(rng, THINGS)),
        "USEDFOR" => (pick(rng, THINGS), pick(rng, PURPOSES)),
        _ => SYNONYMS[i % SYNONYMS.len()],
    };
    (a.to_string(), b.to_string())
}

fn build_kb(rng: &mut ChaCha8Rng, total: usize) -> KnowledgeBase {
    let quota: usize = TABLES.iter().map(|t| t.3).sum();
    let mut builder = KnowledgeBaseBuilder::new(CorpusConfig::default());
    let mut used_ids = HashSet::new();
    for (ti, &(table, cols, rel, base)) in TABLES.iter().enumerate() {
        let mut n = base * total / quota;
        if ti == 0 {
            // rounding slack goes to the first table
            n += total - TABLES.iter().map(|t| t.3 * total / quota).sum::<usize>();
        }
        builder.add_table(table, cols.iter().map(|c| c.to_string()).collect()).expect("fresh table");
        let mut seen = HashSet::new();
        let mut i = 0;
        while seen.len() < n {
            let (a, b) = row_values(rng, table, i);
            i += 1;
            if a == b || !seen.insert((a.clone(), b.clone())) {
                if i > 50 * n + 1000 {
                    break;
                }
                continue;
            }
            let id = fact_id(rng, &mut used_ids);
            let loc = RowLocation {
                table: table.into(),
                line: seen.len() as u64 + 1,
            };
            builder.add_row(table, &id, vec![a, rel.into(), b], loc).expect("unique ids");
        }
    }
    builder.build()
}

/// Concept cells of a fact (the connective excluded).
fn concepts(kb: &KnowledgeBase, id: &str) -> Vec<String> {
    kb.fact(id)
        .map(|f| f.cells.iter().filter(|(c, _)| c != "REL").map(|(_, v)| v.clone()).collect())
        .unwrap_or_default()
}

/// Intended grade of every fact for one question.
fn true_grades(kb: &KnowledgeBase, q: &Question) -> BTreeMap<FactId, Grade> {
    let topic: BTreeSet<String> = q.gold_explanation.iter().flat_map(|g| concepts(kb, &g.fact)).collect();
    let mut out = BTreeMap::new();
    for f in kb.facts() {
        let grade = if let Some(g) = q.gold_explanation.iter().find(|g| g.fact == f.id) {
            if g.role == "CENTRAL" {
                Grade::CORE
            } else {
                Grade::IMPORTANT
            }
        } else {
            match concepts(kb, &f.id).iter().filter(|c| topic.contains(*c)).count() {
                0 => Grade::IRRELEVANT,
                1 => Grade::EXTRA_DETAIL,
                _ => Grade::IMPORTANT,
            }
        };
        out.insert(f.id.clone(), grade);
    }
    out
}

fn article(noun: &str) -> String {
    let an = noun.starts_with(['a', 'e', 'i', 'o', 'u']);
    format!("{} {noun}", if an { "an" } else { "a" })
}

fn build_question(rng: &mut ChaCha8Rng, kb: &KnowledgeBase, index: usize) -> Question {
    let kinds = kb.table("KINDOF").expect("fixture table");
    let central = kinds[rng.gen_range(0..kinds.len())].clone();
    let fact = kb.fact(&central).expect("listed");
    let hypo = fact.cell("HYPONYM").unwrap_or_default().to_string();
    let hyper = fact.cell("HYPERNYM").unwrap_or_default().to_string();

    let mut gold = vec![GoldFact {
        fact: central.clone(),
        role: "CENTRAL".into(),
    }];
    let mut linked: Vec<&str> = kb
        .facts()
        .filter(|f| !f.is_synonymy && f.id != central)
        .filter(|f| {
            let c = concepts(kb, &f.id);
            c.contains(&hypo) || c.contains(&hyper)
        })
        .map(|f| f.id.as_str())
        .collect();
    linked.sort_unstable();
    linked.shuffle(rng);
    let extra = rng.gen_range(1..=4).min(linked.len());
    for (i, id) in linked.into_iter().take(extra).enumerate() {
        gold.push(GoldFact {
            fact: id.to_string(),
            role: if i == 0 { "GROUNDING" } else { "LEXGLUE" }.into(),
        });
    }

    let mut distractors: Vec<&str> = THINGS
        .iter()
        .chain(CATEGORIES)
        .copied()
        .filter(|c| *c != hyper && *c != hypo)
        .collect();
    distractors.shuffle(rng);
    let mut choices: Vec<String> = distractors.into_iter().take(3).map(String::from).collect();
    let answer = rng.gen_range(0..=choices.len());
    choices.insert(answer, hyper);
    Question {
        id: format!("Q{:03}", index + 1),
        stem: format!("A student observes {}. Which of these best describes what it is?", article(&hypo)),
        choices,
        correct_choice: answer,
        gold_explanation: gold,
        split: match index % 5 {
            0 => Split::Train,
            1 => Split::Dev,
            _ => Split::Test,
        },
    }
}

fn ranker_scores(rng: &mut ChaCha8Rng, name: &str, noise: f64, truth: &[BTreeMap<FactId, Grade>], questions: &[Question]) -> ScoreFile {
    let mut triples = Vec::new();
    for (q, grades) in questions.iter().zip(truth) {
        for (fact, g) in grades {
            let s = g.value() as f64 + noise * (rng.gen::<f64>() + rng.gen::<f64>() - 1.0) * 2.0;
            triples.push((q.id.clone(), fact.clone(), (s * 1e4).round() / 1e4));
        }
    }
    ScoreFile::from_triples(name, triples).expect("one score per pair")
}

fn noisy_grade(rng: &mut ChaCha8Rng, g: Grade) -> Grade {
    let v = g.value() as i64;
    let v = match rng.gen_range(0..10) {
        0 | 1 => v - 1,
        2 => v + 1,
        _ => v,
    };
    Grade::new(v.clamp(0, 3)).expect("clamped")
}

fn perturb(rng: &mut ChaCha8Rng, text: &str) -> String {
    let mut words: Vec<&str> = text.split(' ').collect();
    if words.len() > 4 && rng.gen_bool(0.5) {
        words.remove(rng.gen_range(0..words.len()));
    }
    if rng.gen_bool(0.3) {
        words.insert(0, "the");
    }
    words.join(" ")
}

fn generated_output(rng: &mut ChaCha8Rng, kb: &KnowledgeBase, q: &Question) -> GeneratedOutput {
    let mut pieces = Vec::new();
    for g in &q.gold_explanation {
        if rng.gen_bool(0.7) {
            pieces.push(perturb(rng, &kb.fact(&g.fact).expect("gold resolves").text));
        }
    }
    let all: Vec<&str> = kb.facts().map(|f| f.id.as_str()).collect();
    let other = all[rng.gen_range(0..all.len())];
    pieces.push(perturb(rng, &kb.fact(other).expect("listed").text));
    pieces.push(format!("{} is made of {}", article(pick(rng, THINGS)), pick(rng, PROPERTIES)));
    let raw = pieces.join(" [AND] ");
    GeneratedOutput::new(q.id.clone(), raw, crate::text_align::DEFAULT_SEPARATOR)
}

impl Fixture {
    /// The shipped fixture: 20 questions over 200 facts.
    pub fn standard() -> Self {
        Self::generate(20, 200, 7)
    }

    pub fn generate(n_questions: usize, n_facts: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kb = build_kb(&mut rng, n_facts);
        let questions: Vec<Question> = (0..n_questions).map(|i| build_question(&mut rng, &kb, i)).collect();
        let truth: Vec<BTreeMap<FactId, Grade>> = questions.iter().map(|q| true_grades(&kb, q)).collect();
        let scores: Vec<ScoreFile> = RANKERS
            .iter()
            .map(|(name, noise)| ranker_scores(&mut rng, name, *noise, &truth, &questions))
            .collect();

        let t0 = Utc.with_ymd_and_hms(2021, 3, 1, 9, 0, 0).unwrap();
        let mut ratings = Vec::new();
        for (q, grades) in questions.iter().zip(&truth) {
            let sl = build_shortlist(q, &scores, 20, &kb).expect("every question scored");
            for fact in sl.fact_ids() {
                for rater in RATERS {
                    let rating = noisy_grade(&mut rng, grades[fact]);
                    ratings.push(RatingRecord {
                        question_id: q.id.clone(),
                        fact_id: fact.to_string(),
                        rater_id: rater.to_string(),
                        rating,
                        timestamp: t0 + chrono::Duration::seconds(ratings.len() as i64),
                    });
                }
            }
        }
        let generated = questions.iter().map(|q| generated_output(&mut rng, &kb, q)).collect();
        Self {
            kb,
            questions,
            ratings,
            scores,
            generated,
            schemas: FIXTURE_SCHEMAS.to_string(),
        }
    }

    /// Config file matching the layout written by [`Fixture::write`].
    pub fn config_toml(&self) -> String {
        let scores: Vec<String> = self.scores.iter().map(|s| format!("\"scores/{}.tsv\"", s.model_name)).collect();
        format!(
            r#"# Fixture run configuration. Paths are relative to this file.
workers = 1

[paths]
kb_dir = "kb"
questions = "questions.jsonl"
ratings = "ratings.jsonl"
scores = [{}]
generated = "generated.jsonl"
schemas = "schemas.schema"
output_dir = "out"

[thresholds]
rouge = 0.70
clip = 0.0
filter = 0.0
top_k = 8
shortlist_k = 20
n_schemas = 3

[eval]
setting = "tr2"
aggregation = "per-question"

[serve]
bind = "127.0.0.1:8080"
data_dir = "annotation"
coverage = 2

[serve.raters]
{} = "token-a"
{} = "token-b"
"#,
            scores.join(", "),
            RATERS[0],
            RATERS[1]
        )
    }

    /// Writes the fixture as a data directory.
    pub fn write(&self, dir: &Path) -> Result<(), CorpusError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CorpusError::Io { path, source }
        };
        self.kb.write_dir(&dir.join("kb"))?;
        write_jsonl(&dir.join("questions.jsonl"), &self.questions)?;
        write_jsonl(&dir.join("ratings.jsonl"), &self.ratings)?;
        write_jsonl(&dir.join("generated.jsonl"), &self.generated)?;
        let scores = dir.join("scores");
        fs::create_dir_all(&scores).map_err(io(&scores))?;
        for s in &self.scores {
            let p = scores.join(format!("{}.tsv", s.model_name));
            fs::write(&p, s.to_tsv()).map_err(io(&p))?;
        }
        let p = dir.join("schemas.schema");
        fs::write(&p, &self.schemas).map_err(io(&p))?;
        let p = dir.join("config.toml");
        fs::write(&p, self.config_toml()).map_err(io(&p))?;
        Ok(())
    }
}

/// A large synthetic score set. Each question has a few gold facts and a
/// band of graded facts; its ranking is regenerated on demand.
#[derive(Debug, Clone)]
pub struct ScaleSet {
    pub fact_ids: Vec<FactId>,
    pub questions: Vec<ScaleQuestion>,
    seed: u64,
}

#[derive(Debug, Clone)]
pub struct ScaleQuestion {
    pub id: String,
    /// Indices into `fact_ids`.
    pub gold: Vec<u32>,
    /// Facts with a positive merged grade.
    pub graded: Vec<(u32, Grade)>,
}

fn question_rng(seed: u64, q: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (q as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

impl ScaleSet {
    pub fn generate(n_questions: usize, n_facts: usize, seed: u64) -> Self {
        let fact_ids = (0..n_facts).map(|i| format!("F{i:06}")).collect();
        let questions = (0..n_questions)
            .map(|q| {
                let mut rng = question_rng(seed, q);
                let picks = rand::seq::index::sample(&mut rng, n_facts, 30.min(n_facts));
                let picks: Vec<u32> = picks.into_iter().map(|i| i as u32).collect();
                let n_gold = rng.gen_range(2..=8).min(picks.len());
                let gold = picks[..n_gold].to_vec();
                let graded = picks
                    .iter()
                    .enumerate()
                    .map(|(i, &f)| {
                        let g = if i < n_gold { rng.gen_range(2..=3) } else { rng.gen_range(1..=2) };
                        (f, Grade::new(g).expect("in range"))
                    })
                    .collect();
                ScaleQuestion {
                    id: format!("S{q:05}"),
                    gold,
                    graded,
                }
            })
            .collect();
        Self {
            fact_ids,
            questions,
            seed,
        }
    }

    /// Merged ratings for every graded fact.
    pub fn merged(&self) -> MergedRatings {
        self.questions
            .iter()
            .flat_map(|q| {
                q.graded.iter().map(|&(f, tr)| MergedRating {
                    question_id: q.id.clone(),
                    fact_id: self.fact_ids[f as usize].clone(),
                    tr,
                    rater_count: 2,
                })
            })
            .collect()
    }

    /// Scores of every fact for question `q`, indexed like `fact_ids`.
    /// Graded facts are shifted up so rankings are informative.
    pub fn scores(&self, q: usize) -> Vec<f64> {
        let mut rng = question_rng(self.seed ^ 0x5eed, q);
        let mut s: Vec<f64> = (0..self.fact_ids.len()).map(|_| rng.gen::<f64>()).collect();
        for &(f, g) in &self.questions[q].graded {
            s[f as usize] += 0.3 * g.value() as f64;
        }
        s
    }

    /// Fact indices of question `q` by descending score, ties by index.
    pub fn ranking(&self, q: usize) -> Vec<u32> {
        let s = self.scores(q);
        let mut order: Vec<u32> = (0..s.len() as u32).collect();
        order.sort_by(|&a, &b| s[b as usize].total_cmp(&s[a as usize]).then(a.cmp(&b)));
        order
    }
}
