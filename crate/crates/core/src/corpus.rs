//! Knowledge base, question and score-file types and their on-disk formats.
//!
//! * Knowledge base: a directory of `<table>.tsv` files with a header row.
//!   Columns whose header starts with `[SKIP]` are ignored and the id column
//!   (default `UID`) holds the fact identifier.
//! * Questions: JSONL with `id`, `stem`, `choices`, `answer_key`, `gold`
//!   (`[{fact, role}]`) and `split`.
//! * Score files: `question_id <TAB> fact_id <TAB> score` lines.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::normalize;

pub type FactId = String;
pub type QuestionId = String;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Tsv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("duplicate fact id {id:?}: first at {first}, again at {second}")]
    DuplicateFactId {
        id: FactId,
        first: RowLocation,
        second: RowLocation,
    },
    #[error("table {table:?} has no {column:?} id column")]
    MissingIdColumn { table: String, column: String },
    #[error("{location}: {reason}")]
    BadRow { location: RowLocation, reason: String },
    #[error("{path}:{line}: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("question {question:?} cites unknown fact {fact:?}")]
    UnknownGoldFact { question: QuestionId, fact: FactId },
    #[error("question {question:?}: {reason}")]
    InvalidQuestion { question: QuestionId, reason: String },
    #[error("{path}:{line}: {reason}")]
    BadScoreLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

/// `table.tsv:line` position of a knowledge-base row, used in error messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowLocation {
    pub table: String,
    pub line: u64,
}

impl fmt::Display for RowLocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.tsv:{}", self.table, self.line)
    }
}

/// One row of a semi-structured table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fact {
    pub id: FactId,
    pub table: String,
    /// `(column, cell)` pairs in header order, id and skipped columns excluded.
    pub cells: Vec<(String, String)>,
    /// Non-empty cells joined with single spaces.
    pub text: String,
    pub is_synonymy: bool,
}

impl Fact {
    pub fn cell(&self, column: &str) -> Option<&str> {
        self.cells
            .iter()
            .find(|(c, _)| c == column)
            .map(|(_, v)| v.as_str())
    }
}

/// Joins the non-empty cells of a row into its sentence form.
pub fn flatten_cells<'a>(cells: impl IntoIterator<Item = &'a str>) -> String {
    cells
        .into_iter()
        .filter(|c| !c.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub id_column: String,
    /// Explicit list of synonymy tables. When unset, any table whose name
    /// contains `SYNONYMY` (case-insensitive) is a synonymy table.
    pub synonymy_tables: Option<Vec<String>>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            id_column: "UID".to_string(),
            synonymy_tables: None,
        }
    }
}

impl CorpusConfig {
    pub fn is_synonymy_table(&self, table: &str) -> bool {
        match &self.synonymy_tables {
            Some(list) => list.iter().any(|t| t == table),
            None => table.to_uppercase().contains("SYNONYMY"),
        }
    }
}

type ColumnIndex = BTreeMap<String, BTreeMap<String, BTreeMap<Vec<String>, Vec<FactId>>>>;

/// The fact store with its table and column indexes. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    facts: BTreeMap<FactId, Fact>,
    /// Row order is the order rows were added (file order when parsed).
    tables: BTreeMap<String, Vec<FactId>>,
    columns: BTreeMap<String, Vec<String>>,
    /// table → column → normalized cell → fact ids (ascending).
    column_index: ColumnIndex,
    id_column: String,
}

impl KnowledgeBase {
    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn fact(&self, id: &str) -> Option<&Fact> {
        self.facts.get(id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.facts.contains_key(id)
    }

    /// Facts in ascending id order.
    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.facts.values()
    }

    pub fn table_names(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    /// Fact ids of a table in row order.
    pub fn table(&self, name: &str) -> Option<&[FactId]> {
        self.tables.get(name).map(Vec::as_slice)
    }

    pub fn columns(&self, table: &str) -> Option<&[String]> {
        self.columns.get(table).map(Vec::as_slice)
    }

    pub fn has_column(&self, table: &str, column: &str) -> bool {
        self.columns
            .get(table)
            .is_some_and(|cols| cols.iter().any(|c| c == column))
    }

    pub fn id_column(&self) -> &str {
        &self.id_column
    }

    /// Facts of `table` whose `column` cell normalizes to `tokens`, ascending by id.
    pub fn lookup(&self, table: &str, column: &str, tokens: &[String]) -> &[FactId] {
        self.column_index
            .get(table)
            .and_then(|cols| cols.get(column))
            .and_then(|cells| cells.get(tokens))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Recomputes the column index from the stored cells.
    pub fn rebuild_column_index(&self) -> ColumnIndexSnapshot {
        ColumnIndexSnapshot(build_column_index(&self.facts, &self.columns))
    }

    pub fn column_index_snapshot(&self) -> ColumnIndexSnapshot {
        ColumnIndexSnapshot(self.column_index.clone())
    }

    /// Canonical TSV text of one table: header then rows in row order.
    pub fn table_tsv(&self, table: &str) -> Option<String> {
        let ids = self.tables.get(table)?;
        let columns = &self.columns[table];
        let mut out = String::new();
        out.push_str(&self.id_column);
        for c in columns {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for id in ids {
            let fact = &self.facts[id];
            out.push_str(id);
            for c in columns {
                out.push('\t');
                out.push_str(fact.cell(c).unwrap_or(""));
            }
            out.push('\n');
        }
        Some(out)
    }

    /// Writes every table as `<dir>/<table>.tsv` in canonical form.
    pub fn write_dir(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir).map_err(|source| CorpusError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for table in self.tables.keys() {
            let path = dir.join(format!("{table}.tsv"));
            let body = self.table_tsv(table).expect("table exists");
            fs::write(&path, body).map_err(|source| CorpusError::Io { path, source })?;
        }
        Ok(())
    }

    /// SHA-256 over the canonical serialization of every table.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for table in self.tables.keys() {
            hasher.update(table.as_bytes());
            hasher.update(b"\n");
            hasher.update(self.table_tsv(table).expect("table exists").as_bytes());
            hasher.update(b"\x00");
        }
        hex::encode(hasher.finalize())
    }
}

/// Opaque copy of a column index, comparable for consistency checks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnIndexSnapshot(ColumnIndex);

fn build_column_index(
    facts: &BTreeMap<FactId, Fact>,
    columns: &BTreeMap<String, Vec<String>>,
) -> ColumnIndex {
    let mut index: ColumnIndex = BTreeMap::new();
    for (table, cols) in columns {
        let per_table = index.entry(table.clone()).or_default();
        for c in cols {
            per_table.entry(c.clone()).or_default();
        }
    }
    // facts iterate in ascending id order, so each bucket ends up sorted
    for fact in facts.values() {
        let per_table = index.entry(fact.table.clone()).or_default();
        for (column, cell) in &fact.cells {
            per_table
                .entry(column.clone())
                .or_default()
                .entry(normalize(cell))
                .or_default()
                .push(fact.id.clone());
        }
    }
    index
}

/// Incremental construction of a [`KnowledgeBase`] from in-memory tables.
#[derive(Debug)]
pub struct KnowledgeBaseBuilder {
    config: CorpusConfig,
    facts: BTreeMap<FactId, Fact>,
    locations: HashMap<FactId, RowLocation>,
    tables: BTreeMap<String, Vec<FactId>>,
    columns: BTreeMap<String, Vec<String>>,
}

impl KnowledgeBaseBuilder {
    pub fn new(config: CorpusConfig) -> Self {
        Self {
            config,
            facts: BTreeMap::new(),
            locations: HashMap::new(),
            tables: BTreeMap::new(),
            columns: BTreeMap::new(),
        }
    }

    /// Declares a table and its (non-id) columns. Declaring an existing table
    /// again is an error only if the columns differ.
    pub fn add_table(&mut self, table: &str, columns: Vec<String>) -> Result<(), CorpusError> {
        if let Some(existing) = self.columns.get(table) {
            if *existing != columns {
                return Err(CorpusError::BadRow {
                    location: RowLocation {
                        table: table.to_string(),
                        line: 1,
                    },
                    reason: "table declared twice with different columns".into(),
                });
            }
            return Ok(());
        }
        self.columns.insert(table.to_string(), columns);
        self.tables.entry(table.to_string()).or_default();
        Ok(())
    }

    /// Adds a row with one cell per declared column (missing trailing cells
    /// are empty).
    pub fn add_row(
        &mut self,
        table: &str,
        id: &str,
        cells: Vec<String>,
        location: RowLocation,
    ) -> Result<(), CorpusError> {
        let columns = self.columns.get(table).ok_or_else(|| CorpusError::BadRow {
            location: location.clone(),
            reason: format!("table {table:?} was not declared"),
        })?;
        if id.is_empty() {
            return Err(CorpusError::BadRow {
                location,
                reason: "empty fact id".into(),
            });
        }
        if cells.len() > columns.len() {
            return Err(CorpusError::BadRow {
                location,
                reason: format!("{} cells for {} columns", cells.len(), columns.len()),
            });
        }
        if let Some(first) = self.locations.get(id) {
            return Err(CorpusError::DuplicateFactId {
                id: id.to_string(),
                first: first.clone(),
                second: location,
            });
        }
        let mut cells = cells.into_iter();
        let cells: Vec<(String, String)> = columns
            .iter()
            .map(|c| (c.clone(), cells.next().unwrap_or_default().trim().to_string()))
            .collect();
        let text = flatten_cells(cells.iter().map(|(_, v)| v.as_str()));
        let fact = Fact {
            id: id.to_string(),
            table: table.to_string(),
            cells,
            text,
            is_synonymy: self.config.is_synonymy_table(table),
        };
        self.locations.insert(id.to_string(), location);
        self.tables
            .get_mut(table)
            .expect("declared")
            .push(id.to_string());
        self.facts.insert(id.to_string(), fact);
        Ok(())
    }

    pub fn build(self) -> KnowledgeBase {
        let column_index = build_column_index(&self.facts, &self.columns);
        KnowledgeBase {
            facts: self.facts,
            tables: self.tables,
            columns: self.columns,
            column_index,
            id_column: self.config.id_column,
        }
    }
}

/// Reads every `*.tsv` file in `dir` (sorted by file name) as one table.
pub fn parse_knowledge_base(dir: &Path, config: &CorpusConfig) -> Result<KnowledgeBase, CorpusError> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusError::Io { path, source }
    };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "tsv"))
        .collect();
    files.sort();

    let mut builder = KnowledgeBaseBuilder::new(config.clone());
    for path in files {
        let table = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        read_table(&path, &table, config, &mut builder)?;
    }
    Ok(builder.build())
}

fn read_table(
    path: &Path,
    table: &str,
    config: &CorpusConfig,
    builder: &mut KnowledgeBaseBuilder,
) -> Result<(), CorpusError> {
    let tsv_err = |source| CorpusError::Tsv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .quoting(false)
        .flexible(true)
        .from_path(path)
        .map_err(tsv_err)?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(h) => h.map_err(tsv_err)?,
        None => {
            log::warn!("{}: empty table file", path.display());
            return builder.add_table(table, Vec::new());
        }
    };
    let header: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let id_pos = header
        .iter()
        .position(|h| *h == config.id_column)
        .ok_or_else(|| CorpusError::MissingIdColumn {
            table: table.to_string(),
            column: config.id_column.clone(),
        })?;
    let kept: Vec<usize> = (0..header.len())
        .filter(|&i| i != id_pos && !header[i].starts_with("[SKIP]"))
        .collect();
    builder.add_table(table, kept.iter().map(|&i| header[i].clone()).collect())?;

    let mut rows = 0usize;
    for record in records {
        let record = record.map_err(tsv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let location = RowLocation {
            table: table.to_string(),
            line,
        };
        if record.len() > header.len() {
            return Err(CorpusError::BadRow {
                location,
                reason: format!("{} fields for {} header columns", record.len(), header.len()),
            });
        }
        let id = record.get(id_pos).unwrap_or("").trim();
        let cells = kept
            .iter()
            .map(|&i| record.get(i).unwrap_or("").to_string())
            .collect();
        builder.add_row(table, id, cells, location)?;
        rows += 1;
    }
    if rows == 0 {
        log::warn!("{}: table has no rows", path.display());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldFact {
    pub fact: FactId,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: QuestionId,
    pub stem: String,
    pub choices: Vec<String>,
    #[serde(rename = "answer_key")]
    pub correct_choice: usize,
    #[serde(rename = "gold")]
    pub gold_explanation: Vec<GoldFact>,
    pub split: Split,
}

impl Question {
    pub fn correct_answer(&self) -> &str {
        &self.choices[self.correct_choice]
    }

    pub fn gold_ids(&self) -> BTreeSet<&str> {
        self.gold_explanation.iter().map(|g| g.fact.as_str()).collect()
    }

    /// Checks the structural invariants and that every gold fact resolves.
    pub fn validate(&self, kb: &KnowledgeBase) -> Result<(), CorpusError> {
        let invalid = |reason: String| CorpusError::InvalidQuestion {
            question: self.id.clone(),
            reason,
        };
        if self.correct_choice >= self.choices.len() {
            return Err(invalid(format!(
                "answer_key {} out of range for {} choices",
                self.correct_choice,
                self.choices.len()
            )));
        }
        if self.gold_explanation.is_empty() {
            return Err(invalid("empty gold explanation".into()));
        }
        let mut seen = BTreeSet::new();
        for g in &self.gold_explanation {
            if !kb.contains(&g.fact) {
                return Err(CorpusError::UnknownGoldFact {
                    question: self.id.clone(),
                    fact: g.fact.clone(),
                });
            }
            if !seen.insert(g.fact.as_str()) {
                return Err(invalid(format!("gold fact {:?} listed twice", g.fact)));
            }
        }
        Ok(())
    }
}

/// Reads a JSON-lines file into records, skipping blank lines.
pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| CorpusError::Json {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Serializes records one JSON object per line.
pub fn to_jsonl<T: Serialize>(records: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).expect("serializable record"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl<T: Serialize>(
    path: &Path,
    records: impl IntoIterator<Item = T>,
) -> Result<(), CorpusError> {
    let mut file = fs::File::create(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    file.write_all(to_jsonl(records).as_bytes())
        .map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
}

pub fn parse_questions(path: &Path, kb: &KnowledgeBase) -> Result<Vec<Question>, CorpusError> {
    let questions: Vec<Question> = read_jsonl(path)?;
    let mut ids = BTreeSet::new();
    for q in &questions {
        if !ids.insert(q.id.as_str()) {
            return Err(CorpusError::InvalidQuestion {
                question: q.id.clone(),
                reason: "duplicate question id".into(),
            });
        }
        q.validate(kb)?;
    }
    Ok(questions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFact {
    pub fact: FactId,
    pub score: f64,
}

/// One model's scored fact ordering per question.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreFile {
    pub model_name: String,
    /// Per question: descending by score, ties by ascending fact id.
    pub entries: BTreeMap<QuestionId, Vec<ScoredFact>>,
}

fn sort_scored(facts: &mut [ScoredFact]) {
    facts.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.fact.cmp(&b.fact)));
}

impl ScoreFile {
    /// Groups `(question, fact, score)` triples and sorts each group.
    /// Returns the offending pair if a fact is scored twice for a question.
    pub fn from_triples(
        model_name: impl Into<String>,
        triples: impl IntoIterator<Item = (QuestionId, FactId, f64)>,
    ) -> Result<Self, (QuestionId, FactId)> {
        let mut entries: BTreeMap<QuestionId, Vec<ScoredFact>> = BTreeMap::new();
        let mut seen: BTreeSet<(QuestionId, FactId)> = BTreeSet::new();
        for (q, fact, score) in triples {
            if !seen.insert((q.clone(), fact.clone())) {
                return Err((q, fact));
            }
            entries.entry(q).or_default().push(ScoredFact { fact, score });
        }
        for facts in entries.values_mut() {
            sort_scored(facts);
        }
        Ok(Self {
            model_name: model_name.into(),
            entries,
        })
    }

    pub fn question(&self, id: &str) -> Option<&[ScoredFact]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    /// Fact ids of a question in ranked order.
    pub fn ranking(&self, id: &str) -> Option<Vec<&str>> {
        self.question(id)
            .map(|fs| fs.iter().map(|f| f.fact.as_str()).collect())
    }

    pub fn score_map(&self, id: &str) -> HashMap<&str, f64> {
        self.question(id)
            .unwrap_or(&[])
            .iter()
            .map(|f| (f.fact.as_str(), f.score))
            .collect()
    }

    /// Canonical TSV: questions ascending, facts in ranked order, scores in
    /// shortest round-trip form.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (q, facts) in &self.entries {
            for f in facts {
                out.push_str(&format!("{q}\t{}\t{}\n", f.fact, f.score));
            }
        }
        out
    }
}

/// Parses a score file; the model name is the file stem.
pub fn parse_score_file(path: &Path) -> Result<ScoreFile, CorpusError> {
    let body = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let model = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_score_text(&body, &model, path)
}

pub fn parse_score_text(body: &str, model: &str, path: &Path) -> Result<ScoreFile, CorpusError> {
    let bad = |line: usize, reason: String| CorpusError::BadScoreLine {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut triples = Vec::new();
    let mut lines_of: HashMap<(String, String), usize> = HashMap::new();
    for (i, line) in body.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(q), Some(f), Some(s), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad(lineno, "expected 3 tab-separated columns".into()));
        };
        let score: f64 = s
            .trim()
            .parse()
            .map_err(|_| bad(lineno, format!("non-numeric score {s:?}")))?;
        if !score.is_finite() {
            return Err(bad(lineno, format!("non-finite score {s:?}")));
        }
        let key = (q.trim().to_string(), f.trim().to_string());
        if let Some(first) = lines_of.insert(key.clone(), lineno) {
            return Err(bad(
                lineno,
                format!("fact {:?} already scored for {:?} on line {first}", key.1, key.0),
            ));
        }
        triples.push((key.0, key.1, score));
    }
    Ok(ScoreFile::from_triples(model, triples).expect("duplicates rejected above"))
}
