//! The line-oriented `.schema` format:
//!
//! ```text
//! # comment
//! schema kind_chain
//! slot KINDOF HYPONYM=$a HYPERNYM=$b
//! slot KINDOF HYPONYM=$b HYPERNYM="matter"
//!
//! schema next ...
//! ```
//!
//! A schema runs from its `schema` line to the next blank line (or end of
//! file). Literals are double-quoted (`\"` and `\\` escapes) and stored
//! normalized. Table and column names are checked against the knowledge
//! base at solve time, not here.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::{Constraint, Schema, SchemaError, Slot};
use crate::text::normalize;

fn syntax(line: usize, column: usize, message: impl Into<String>) -> SchemaError {
    SchemaError::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn col(&self) -> usize {
        self.text[..self.pos].chars().count() + 1
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.text[self.pos..].chars().next() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.text.len()
    }

    /// Reads up to whitespace or `stop`.
    fn word(&mut self, stop: char) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.text[self.pos..].chars().next() {
            if c.is_whitespace() || c == stop {
                break;
            }
            self.pos += c.len_utf8();
        }
        &self.text[start..self.pos]
    }

    fn quoted(&mut self) -> Result<String, SchemaError> {
        let start_col = self.col();
        self.pos += 1; // opening quote
        let mut out = String::new();
        let mut chars = self.text[self.pos..].char_indices();
        while let Some((i, c)) = chars.next() {
            match c {
                '"' => {
                    self.pos += i + 1;
                    return Ok(out);
                }
                '\\' => match chars.next() {
                    Some((_, e @ ('"' | '\\'))) => out.push(e),
                    _ => return Err(syntax(self.line, start_col, "bad escape in literal")),
                },
                c => out.push(c),
            }
        }
        Err(syntax(self.line, start_col, "unterminated literal"))
    }
}

fn parse_slot(rest: &str, offset: usize, line: usize) -> Result<Slot, SchemaError> {
    let mut cur = Cursor { text: rest, pos: 0, line };
    let col = |cur: &Cursor| cur.col() + offset;
    cur.skip_ws();
    let table_col = col(&cur);
    let table = cur.word('\0');
    if table.is_empty() || table.contains('=') {
        return Err(syntax(line, table_col, "expected a table name after `slot`"));
    }
    let mut constraints = BTreeMap::new();
    loop {
        cur.skip_ws();
        if cur.at_end() {
            break;
        }
        let start = col(&cur);
        let column = cur.word('=');
        if column.is_empty() {
            return Err(syntax(line, start, "expected COLUMN=value"));
        }
        if !cur.text[cur.pos..].starts_with('=') {
            return Err(syntax(line, col(&cur), format!("expected `=` after column {column:?}")));
        }
        cur.pos += 1;
        let value_col = col(&cur);
        let constraint = match cur.text[cur.pos..].chars().next() {
            Some('$') => {
                cur.pos += 1;
                let name = cur.word('\0');
                if !is_ident(name) {
                    return Err(syntax(line, value_col, format!("bad variable name {name:?}")));
                }
                Constraint::Var(name.to_string())
            }
            Some('"') => {
                let lit = cur.quoted().map_err(|e| match e {
                    SchemaError::Syntax { message, .. } => syntax(line, value_col, message),
                    other => other,
                })?;
                Constraint::Literal(normalize(&lit))
            }
            _ => return Err(syntax(line, value_col, "expected $variable or \"literal\"")),
        };
        if constraints.insert(column.to_string(), constraint).is_some() {
            return Err(syntax(line, start, format!("column {column:?} constrained twice")));
        }
    }
    Ok(Slot {
        table: table.to_string(),
        constraints,
    })
}

/// Parses schema text. Names must be unique and every schema needs a slot.
pub fn parse_schemas(text: &str) -> Result<Vec<Schema>, SchemaError> {
    let mut schemas: Vec<Schema> = Vec::new();
    let mut names = BTreeSet::new();
    let mut current: Option<(Schema, usize)> = None;

    fn finish(
        current: &mut Option<(Schema, usize)>,
        schemas: &mut Vec<Schema>,
        names: &mut BTreeSet<String>,
    ) -> Result<(), SchemaError> {
        if let Some((schema, line)) = current.take() {
            if schema.slots.is_empty() {
                return Err(syntax(line, 1, format!("schema {:?} has no slots", schema.name)));
            }
            if !names.insert(schema.name.clone()) {
                return Err(SchemaError::DuplicateSchema { name: schema.name, line });
            }
            schemas.push(schema);
        }
        Ok(())
    }

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_start();
        let indent = raw.chars().count() - trimmed.chars().count();
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.trim().is_empty() {
            finish(&mut current, &mut schemas, &mut names)?;
            continue;
        }
        let (keyword, rest) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
        let rest_offset = indent + keyword.chars().count() + 1;
        match keyword {
            "schema" => {
                if let Some((s, _)) = &current {
                    return Err(syntax(
                        line,
                        indent + 1,
                        format!("schema {:?} must end with a blank line before the next schema", s.name),
                    ));
                }
                let name = rest.trim();
                if name.is_empty() || name.contains(char::is_whitespace) {
                    return Err(syntax(line, rest_offset, "expected a single schema name"));
                }
                current = Some((
                    Schema {
                        name: name.to_string(),
                        slots: Vec::new(),
                    },
                    line,
                ));
            }
            "slot" => {
                let Some((schema, _)) = current.as_mut() else {
                    return Err(syntax(line, indent + 1, "`slot` outside of a schema"));
                };
                schema.slots.push(parse_slot(rest, rest_offset, line)?);
            }
            other => {
                return Err(syntax(line, indent + 1, format!("unknown keyword {other:?}")));
            }
        }
    }
    finish(&mut current, &mut schemas, &mut names)?;
    Ok(schemas)
}

pub fn parse_schema_file(path: &Path) -> Result<Vec<Schema>, SchemaError> {
    let text = fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_schemas(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_slots_share_a_variable() {
        let s = parse_schemas("schema chain\nslot KINDOF HYPONYM=$a HYPERNYM=$x\nslot KINDOF HYPONYM=$x HYPERNYM=$b\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].slots.len(), 2);
        assert_eq!(s[0].shared_variables(), ["x"]);
    }

    #[test]
    fn literal_only_slot() {
        let s = parse_schemas("schema lit\nslot KINDOF HYPERNYM=\"Living Thing\"\n").unwrap();
        assert_eq!(
            s[0].slots[0].constraints["HYPERNYM"],
            Constraint::Literal(vec!["living".into(), "thing".into()])
        );
    }

    #[test]
    fn zero_slot_schema_is_an_error() {
        let err = parse_schemas("schema empty\n\nschema b\nslot T\n").unwrap_err();
        assert!(matches!(err, SchemaError::Syntax { line: 1, .. }), "{err}");
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = parse_schemas("schema a\nslot T\n\nschema a\nslot T\n").unwrap_err();
        assert!(matches!(err, SchemaError::DuplicateSchema { line: 4, .. }));
    }

    #[test]
    fn error_positions() {
        match parse_schemas("schema a\nslot T COL=oops\n").unwrap_err() {
            SchemaError::Syntax { line, column, .. } => assert_eq!((line, column), (2, 12)),
            e => panic!("{e}"),
        }
        match parse_schemas("schema a\nslot T COL=\"open\n").unwrap_err() {
            SchemaError::Syntax { line, column, message } => {
                assert_eq!((line, column), (2, 12));
                assert!(message.contains("unterminated"));
            }
            e => panic!("{e}"),
        }
        assert!(parse_schemas("slot T\n").is_err());
        assert!(parse_schemas("schema a\nslot T A=$x A=$y\n").is_err());
        assert!(parse_schemas("schema a\nslot T A=$1x\n").is_err());
    }

    #[test]
    fn comments_escapes_and_round_trip() {
        let text = "# header\nschema a\n  slot T A=\"say \\\"hi\\\"\" B=$v\n# trailing\nslot U\n";
        let s = parse_schemas(text).unwrap();
        assert_eq!(s[0].slots.len(), 2);
        assert_eq!(s[0].slots[0].constraints["A"], Constraint::Literal(vec!["say".into(), "hi".into()]));
        let again = parse_schemas(&s[0].to_text()).unwrap();
        assert_eq!(again, s);
    }
}
