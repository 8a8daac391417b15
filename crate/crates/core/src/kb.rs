//! Source-tagged ground facts loaded from tab-separated snapshot files.
//!
//! Each row is `predicate TAB arg1 TAB arg2 TAB source`; `#` lines are
//! comments. A manifest lists snapshot files, one per line, as
//! `path [TAB source_label [TAB predicate_prefix]]`, with `-` standing for
//! "take the label from each row".

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::lexicon::is_predicate_name;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Symbol(pub u32);

/// Bijection between strings and dense symbol ids.
#[derive(Debug, Clone, Default)]
pub struct Interner {
    ids: HashMap<String, Symbol>,
    strings: Vec<String>,
}

impl Interner {
    pub fn intern(&mut self, s: &str) -> Symbol {
        if let Some(&sym) = self.ids.get(s) {
            return sym;
        }
        let sym = Symbol(self.strings.len() as u32);
        self.strings.push(s.to_string());
        self.ids.insert(s.to_string(), sym);
        sym
    }

    pub fn get(&self, s: &str) -> Option<Symbol> {
        self.ids.get(s).copied()
    }

    pub fn resolve(&self, sym: Symbol) -> &str {
        &self.strings[sym.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RowProblem {
    WrongColumnCount { found: usize },
    EmptyField { column: usize },
    InvalidPredicate { predicate: String },
    SourceMismatch { expected: String, found: String },
    PredicatePrefix { expected: String, found: String },
}

impl fmt::Display for RowProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowProblem::WrongColumnCount { found } => {
                write!(f, "wrong column count: expected 4, found {found}")
            }
            RowProblem::EmptyField { column } => write!(f, "empty field in column {column}"),
            RowProblem::InvalidPredicate { predicate } => {
                write!(f, "invalid predicate name \"{predicate}\"")
            }
            RowProblem::SourceMismatch { expected, found } => {
                write!(f, "source \"{found}\" does not match manifest label \"{expected}\"")
            }
            RowProblem::PredicatePrefix { expected, found } => {
                write!(f, "predicate \"{found}\" lacks prefix \"{expected}\"")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Error)]
#[error("line {line}: {problem}")]
pub struct RowError {
    pub line: usize,
    pub problem: RowProblem,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub added: usize,
    pub duplicates: usize,
    pub errors: Vec<RowError>,
}

/// Restrictions a manifest entry places on the rows of its file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestOptions<'a> {
    /// Every row's source column must equal this label.
    pub source: Option<&'a str>,
    /// Every row's predicate must start with this prefix.
    pub predicate_prefix: Option<&'a str>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub total: usize,
    pub per_predicate: BTreeMap<String, usize>,
    pub per_source: BTreeMap<String, usize>,
}

/// Interned binary facts, each tagged with the source it came from.
#[derive(Debug, Clone, Default)]
pub struct FactStore {
    interner: Interner,
    tables: BTreeMap<String, BTreeSet<(Symbol, Symbol, Symbol)>>,
    per_source: BTreeMap<Symbol, usize>,
}

impl FactStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn interner(&self) -> &Interner {
        &self.interner
    }

    pub fn resolve(&self, sym: Symbol) -> &str {
        self.interner.resolve(sym)
    }

    pub fn lookup(&self, s: &str) -> Option<Symbol> {
        self.interner.get(s)
    }

    /// Adds one fact; returns false if it was already present.
    pub fn insert(&mut self, predicate: &str, arg1: &str, arg2: &str, source: &str) -> bool {
        let key = (
            self.interner.intern(arg1),
            self.interner.intern(arg2),
            self.interner.intern(source),
        );
        let added = self
            .tables
            .entry(predicate.to_string())
            .or_default()
            .insert(key);
        if added {
            *self.per_source.entry(key.2).or_default() += 1;
        }
        added
    }

    /// Ingests TSV rows. Malformed rows are reported and skipped.
    pub fn ingest(&mut self, text: &str, options: &IngestOptions<'_>) -> IngestReport {
        let mut report = IngestReport::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.starts_with('#') {
                continue;
            }
            match check_row(raw, options) {
                Ok([p, a, b, s]) => {
                    if self.insert(p, a, b, s) {
                        report.added += 1;
                    } else {
                        report.duplicates += 1;
                    }
                }
                Err(problem) => report.errors.push(RowError { line, problem }),
            }
        }
        report
    }

    pub fn predicates(&self) -> impl Iterator<Item = &str> {
        self.tables.keys().map(String::as_str)
    }

    pub fn contains_predicate(&self, predicate: &str) -> bool {
        self.tables.get(predicate).is_some_and(|t| !t.is_empty())
    }

    /// `(arg1, arg2, source)` triples of one predicate.
    pub fn facts_of(&self, predicate: &str) -> impl Iterator<Item = (Symbol, Symbol, Symbol)> + '_ {
        self.tables.get(predicate).into_iter().flatten().copied()
    }

    /// Every fact, resolved, in predicate order.
    pub fn facts(&self) -> impl Iterator<Item = (&str, &str, &str, &str)> + '_ {
        self.tables.iter().flat_map(move |(p, rows)| {
            rows.iter().map(move |&(a, b, s)| {
                (p.as_str(), self.resolve(a), self.resolve(b), self.resolve(s))
            })
        })
    }

    pub fn len(&self) -> usize {
        self.tables.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> Stats {
        Stats {
            total: self.len(),
            per_predicate: self
                .tables
                .iter()
                .filter(|(_, t)| !t.is_empty())
                .map(|(p, t)| (p.clone(), t.len()))
                .collect(),
            per_source: self
                .per_source
                .iter()
                .map(|(s, n)| (self.resolve(*s).to_string(), *n))
                .collect(),
        }
    }

    fn resolved_set(&self) -> BTreeSet<(&str, &str, &str, &str)> {
        self.facts().collect()
    }
}

/// Stores are equal when they hold the same resolved facts, whatever the
/// symbol numbering.
impl PartialEq for FactStore {
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.resolved_set() == other.resolved_set()
    }
}

impl Eq for FactStore {}

fn check_row<'t>(raw: &'t str, options: &IngestOptions<'_>) -> Result<[&'t str; 4], RowProblem> {
    let fields: Vec<&str> = raw.trim_end_matches('\r').split('\t').collect();
    let [p, a, b, s] = fields[..] else {
        return Err(RowProblem::WrongColumnCount {
            found: fields.len(),
        });
    };
    if let Some(column) = [p, a, b, s].iter().position(|f| f.trim().is_empty()) {
        return Err(RowProblem::EmptyField { column: column + 1 });
    }
    if !is_predicate_name(p) {
        return Err(RowProblem::InvalidPredicate {
            predicate: p.to_string(),
        });
    }
    if let Some(prefix) = options.predicate_prefix {
        if !p.starts_with(prefix) {
            return Err(RowProblem::PredicatePrefix {
                expected: prefix.to_string(),
                found: p.to_string(),
            });
        }
    }
    if let Some(expected) = options.source {
        if s != expected {
            return Err(RowProblem::SourceMismatch {
                expected: expected.to_string(),
                found: s.to_string(),
            });
        }
    }
    Ok([p, a, b, s])
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub source: Option<String>,
    pub predicate_prefix: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceManifest {
    pub entries: Vec<ManifestEntry>,
}

impl SourceManifest {
    /// Parses manifest text; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self, KbError> {
        let mut entries: Vec<ManifestEntry> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
            if fields.len() > 3 || fields[0].is_empty() {
                return Err(KbError::Manifest {
                    line,
                    message: "expected `path [TAB source [TAB prefix]]`".into(),
                });
            }
            let source = match fields.get(1) {
                None | Some(&"-") => None,
                Some(&"") => {
                    return Err(KbError::Manifest {
                        line,
                        message: "empty source label".into(),
                    })
                }
                Some(s) => Some(s.to_string()),
            };
            let predicate_prefix = fields.get(2).filter(|p| !p.is_empty()).map(|p| p.to_string());
            let path = base.join(fields[0]);
            if entries.iter().any(|e| e.path == path) {
                return Err(KbError::Manifest {
                    line,
                    message: format!("{} listed twice", path.display()),
                });
            }
            entries.push(ManifestEntry {
                path,
                source,
                predicate_prefix,
            });
        }
        Ok(SourceManifest { entries })
    }

    pub fn read(path: &Path) -> Result<Self, KbError> {
        let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Loads every listed file into a fresh store.
    pub fn load(&self) -> Result<(FactStore, Vec<(PathBuf, IngestReport)>), KbError> {
        let mut store = FactStore::new();
        let mut reports = Vec::new();
        for entry in &self.entries {
            let text = std::fs::read_to_string(&entry.path).map_err(|source| KbError::Io {
                path: entry.path.clone(),
                source,
            })?;
            let options = IngestOptions {
                source: entry.source.as_deref(),
                predicate_prefix: entry.predicate_prefix.as_deref(),
            };
            let report = store.ingest(&text, &options);
            log::info!(
                "{}: {} added, {} duplicates, {} bad rows",
                entry.path.display(),
                report.added,
                report.duplicates,
                report.errors.len()
            );
            reports.push((entry.path.clone(), report));
        }
        Ok((store, reports))
    }
}
