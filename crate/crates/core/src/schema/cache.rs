//! Solution cache on disk.
//!
//! JSON lines. The first line is a header carrying the format tag, the
//! knowledge-base fingerprint and the per-schema solution counts in name
//! order; every following line is one solution, grouped by schema in the
//! same order. Writing is deterministic, so a cache built twice from the
//! same inputs is byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{solve_all, Schema, SchemaError, SchemaSolution};
use crate::corpus::{FactId, KnowledgeBase};

const FORMAT: &str = "explbench-solution-cache";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolutionCache {
    pub entries: BTreeMap<String, Vec<SchemaSolution>>,
    pub kb_fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    kb_fingerprint: String,
    schemas: Vec<SchemaCount>,
}

#[derive(Serialize, Deserialize)]
struct SchemaCount {
    name: String,
    solutions: usize,
}

#[derive(Serialize, Deserialize)]
struct Line {
    schema: String,
    bindings: Vec<FactId>,
    vars: BTreeMap<String, Vec<String>>,
}

impl SolutionCache {
    pub fn build(schemas: &[Schema], kb: &KnowledgeBase) -> Result<Self, SchemaError> {
        Ok(Self {
            entries: solve_all(schemas, kb)?,
            kb_fingerprint: kb.fingerprint(),
        })
    }

    pub fn solution_count(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            kb_fingerprint: self.kb_fingerprint.clone(),
            schemas: self
                .entries
                .iter()
                .map(|(name, sols)| SchemaCount {
                    name: name.clone(),
                    solutions: sols.len(),
                })
                .collect(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for (name, sols) in &self.entries {
            for s in sols {
                let line = Line {
                    schema: name.clone(),
                    bindings: s.bindings.clone(),
                    vars: s.var_assignments.clone(),
                };
                out.push_str(&serde_json::to_string(&line).expect("line serializes"));
                out.push('\n');
            }
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, SchemaError> {
        let bad = |line: usize, message: String| SchemaError::CacheFormat { line, message };
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| bad(1, "empty cache file".into()))?;
        let header: Header = serde_json::from_str(first).map_err(|e| bad(1, e.to_string()))?;
        if header.format != FORMAT || header.version != VERSION {
            return Err(bad(1, format!("unsupported format {} v{}", header.format, header.version)));
        }
        let mut entries = BTreeMap::new();
        for count in &header.schemas {
            let mut sols = Vec::with_capacity(count.solutions);
            for _ in 0..count.solutions {
                let (i, raw) = lines
                    .next()
                    .ok_or_else(|| bad(0, format!("truncated: schema {:?} is short of solutions", count.name)))?;
                let line: Line = serde_json::from_str(raw).map_err(|e| bad(i + 1, e.to_string()))?;
                if line.schema != count.name {
                    return Err(bad(i + 1, format!("expected schema {:?}, found {:?}", count.name, line.schema)));
                }
                sols.push(SchemaSolution {
                    schema_name: line.schema,
                    bindings: line.bindings,
                    var_assignments: line.vars,
                    score: None,
                });
            }
            entries.insert(count.name.clone(), sols);
        }
        if let Some((i, _)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(bad(i + 1, "trailing data after the declared solutions".into()));
        }
        Ok(Self {
            entries,
            kb_fingerprint: header.kb_fingerprint,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), SchemaError> {
        fs::write(path, self.to_jsonl()).map_err(|source| SchemaError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Solves every schema and writes the result to `path`.
pub fn cache_solutions(schemas: &[Schema], kb: &KnowledgeBase, path: &Path) -> Result<SolutionCache, SchemaError> {
    let cache = SolutionCache::build(schemas, kb)?;
    cache.write(path)?;
    Ok(cache)
}

/// Reads a cache, rejecting it if it was built for a different knowledge base.
pub fn load_cache(path: &Path, kb: &KnowledgeBase) -> Result<SolutionCache, SchemaError> {
    let text = fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cache = SolutionCache::from_jsonl(&text)?;
    let current = kb.fingerprint();
    if cache.kb_fingerprint != current {
        return Err(SchemaError::StaleCache {
            cached: cache.kb_fingerprint,
            current,
        });
    }
    Ok(cache)
}
