//! The full pipeline behind one object: parse, compile, slice, evaluate,
//! explain. Results are cached by query id so that explanations can be
//! requested afterwards.

use std::collections::BTreeSet;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, RwLock};

use lru::LruCache;
use serde::Serialize;
use thiserror::Error;

use crate::cnl::{self, CnlError, Expected};
use crate::compiler::compile;
use crate::engine::{evaluate, DerivedStore, EngineError};
use crate::explain::{explain_fact, render_tree, verbalize, ExplainError, ProofDoc, TemplateTable};
use crate::kb::{FactStore, Stats};
use crate::lexicon::{EntityType, Lexicon, VerbFrame};
use crate::program::{Rule, Term};
use crate::rule_layer::RuleLayer;

pub const DEFAULT_CACHE_CAPACITY: usize = 256;

/// Most names offered for one completion request.
const MAX_NAME_SUGGESTIONS: usize = 20;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Query(#[from] CnlError),
    #[error("unknown or expired query id {0}")]
    UnknownQueryId(String),
    #[error("{0:?} is not an answer of this query")]
    AnswerNotFound(Vec<String>),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
}

/// Machine-readable error document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<String>>,
}

impl ServiceError {
    /// HTTP-style status: 4xx for bad requests, 500 for internal faults.
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::Query(_) => 400,
            ServiceError::UnknownQueryId(_) | ServiceError::AnswerNotFound(_) => 404,
            ServiceError::Engine(_) | ServiceError::Explain(_) => 500,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Query(e) => match e {
                CnlError::EmptyInput => "empty_input",
                CnlError::UnknownWord { .. } => "unknown_word",
                CnlError::UnterminatedQuote { .. } => "unterminated_quote",
                CnlError::Grammar { .. } => "grammar_error",
                CnlError::TypeMismatch { .. } => "type_mismatch",
            },
            ServiceError::UnknownQueryId(_) => "unknown_query_id",
            ServiceError::AnswerNotFound(_) => "answer_not_found",
            ServiceError::Engine(_) => "evaluation_error",
            ServiceError::Explain(_) => "explanation_error",
        }
    }

    pub fn body(&self) -> ErrorBody {
        let (position, expected) = match self {
            ServiceError::Query(e) => (
                e.position(),
                match e {
                    CnlError::Grammar { expected, .. } => {
                        Some(expected.iter().map(Expected::to_string).collect())
                    }
                    _ => None,
                },
            ),
            _ => (None, None),
        };
        ErrorBody {
            code: self.code(),
            message: self.to_string(),
            position,
            expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct QueryResult {
    pub query_id: String,
    pub answers: Vec<Vec<String>>,
    pub program: String,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Explanation {
    pub text: String,
    pub tree: ProofDoc,
}

#[derive(Debug, Clone, Serialize)]
pub struct Vocabulary {
    pub types: Vec<EntityType>,
    pub verbs: Vec<VerbFrame>,
}

struct CachedQuery {
    rule: Rule,
    derived: DerivedStore,
}

/// Lexicon and facts that are replaced together on reload.
struct Knowledge {
    lexicon: Lexicon,
    store: Arc<FactStore>,
}

pub struct Service {
    base_lexicon: Lexicon,
    layer: RuleLayer,
    templates: TemplateTable,
    knowledge: RwLock<Arc<Knowledge>>,
    sessions: Mutex<LruCache<String, Arc<CachedQuery>>>,
}

impl Service {
    pub fn new(
        lexicon: Lexicon,
        layer: RuleLayer,
        templates: TemplateTable,
        store: FactStore,
        cache_capacity: usize,
    ) -> Self {
        let capacity = NonZeroUsize::new(cache_capacity).unwrap_or(NonZeroUsize::MIN);
        let knowledge = Knowledge {
            lexicon: with_known_names(&lexicon, &layer, &store),
            store: Arc::new(store),
        };
        Service {
            base_lexicon: lexicon,
            layer,
            templates,
            knowledge: RwLock::new(Arc::new(knowledge)),
            sessions: Mutex::new(LruCache::new(capacity)),
        }
    }

    /// Default lexicon, rule layer and templates over `store`.
    pub fn with_defaults(store: FactStore) -> Self {
        Self::new(
            Lexicon::default_lexicon(),
            RuleLayer::default_layer(),
            TemplateTable::default_templates(),
            store,
            DEFAULT_CACHE_CAPACITY,
        )
    }

    fn knowledge(&self) -> Arc<Knowledge> {
        Arc::clone(&self.knowledge.read().expect("knowledge lock poisoned"))
    }

    /// Swaps in a new fact store. Cached results keep the store they were
    /// computed against.
    pub fn reload(&self, store: FactStore) {
        let knowledge = Knowledge {
            lexicon: with_known_names(&self.base_lexicon, &self.layer, &store),
            store: Arc::new(store),
        };
        *self.knowledge.write().expect("knowledge lock poisoned") = Arc::new(knowledge);
    }

    pub fn layer(&self) -> &RuleLayer {
        &self.layer
    }

    pub fn lexicon(&self) -> Lexicon {
        self.knowledge().lexicon.clone()
    }

    /// Runs the whole pipeline and caches the result under a fresh id.
    pub fn handle_query(&self, text: &str) -> Result<QueryResult, ServiceError> {
        let knowledge = self.knowledge();
        let ir = cnl::parse_query(text, &knowledge.lexicon)?;
        let rule = compile(&ir);
        let (slice, mut warnings) = self.layer.slice_for(&rule);
        let derived = evaluate(&slice, Some(&rule), &knowledge.store)?;
        for w in derived.warnings() {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
        let answers = derived.answers(&rule.head.predicate);
        if knowledge.store.is_empty() {
            warnings.push("the knowledge base is empty".into());
        }
        let query_id = uuid::Uuid::new_v4().simple().to_string();
        let program = rule.to_string();
        self.sessions
            .lock()
            .expect("session lock poisoned")
            .put(query_id.clone(), Arc::new(CachedQuery { rule, derived }));
        Ok(QueryResult {
            query_id,
            answers,
            program,
            warnings,
        })
    }

    /// Minimal explanation of one answer of a cached query.
    pub fn handle_explain(&self, query_id: &str, answer: &[String]) -> Result<Explanation, ServiceError> {
        let cached = self
            .sessions
            .lock()
            .expect("session lock poisoned")
            .get(query_id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownQueryId(query_id.to_string()))?;
        let head = &cached.rule.head.predicate;
        let justification = match explain_fact(&cached.derived, head, answer) {
            Err(ExplainError::FactNotFound(_)) => {
                return Err(ServiceError::AnswerNotFound(answer.to_vec()))
            }
            other => other?,
        };
        Ok(Explanation {
            text: verbalize(&justification, &self.templates)?,
            tree: render_tree(&justification),
        })
    }

    /// Suggestions for the next word of `prefix`. A trailing partial word
    /// (no whitespace after it) filters the suggestions.
    pub fn handle_complete(&self, prefix: &str) -> Vec<String> {
        let knowledge = self.knowledge();
        let lexicon = &knowledge.lexicon;
        let mut out = BTreeSet::new();
        for (head, partial) in completion_splits(prefix) {
            let tokens = if head.trim().is_empty() {
                Vec::new()
            } else {
                match cnl::tokenize(head, lexicon) {
                    Ok(t) => t,
                    Err(_) => continue,
                }
            };
            let lower = partial.to_lowercase();
            for e in cnl::expected_next(&tokens, lexicon) {
                match &e {
                    Expected::Name(ty) => match lexicon.known_names(ty) {
                        Some(names) if !names.is_empty() => out.extend(
                            names
                                .iter()
                                .filter(|n| n.to_lowercase().starts_with(&lower))
                                .take(MAX_NAME_SUGGESTIONS)
                                .cloned(),
                        ),
                        _ => {
                            out.insert(e.to_string());
                        }
                    },
                    Expected::End => {
                        if partial.is_empty() {
                            out.insert(e.to_string());
                        }
                    }
                    Expected::Literal(word) => {
                        if word.to_lowercase().starts_with(&lower) {
                            out.insert(word.clone());
                        }
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    pub fn stats(&self) -> Stats {
        self.knowledge().store.stats()
    }

    pub fn vocabulary(&self) -> Vocabulary {
        let k = self.knowledge();
        Vocabulary {
            types: k.lexicon.types().to_vec(),
            verbs: k.lexicon.frames().to_vec(),
        }
    }
}

/// Ways to split `prefix` into (completed text, partial trailing words).
/// Without trailing whitespace the last one to three words may be the
/// start of a (multi-word) suggestion.
fn completion_splits(prefix: &str) -> Vec<(&str, String)> {
    if prefix.trim().is_empty() {
        return vec![("", String::new())];
    }
    if prefix.matches('"').count() % 2 == 1 {
        let q = prefix.rfind('"').expect("odd quote count");
        return vec![(&prefix[..q], prefix[q + 1..].to_string())];
    }
    if prefix.ends_with(char::is_whitespace) || prefix.ends_with('?') || prefix.ends_with('"') {
        return vec![(prefix, String::new())];
    }
    let mut starts: Vec<usize> = Vec::new();
    let mut in_word = false;
    for (i, c) in prefix.char_indices() {
        let boundary = c.is_whitespace() || c == '?';
        if !boundary && !in_word {
            starts.push(i);
        }
        in_word = !boundary;
    }
    starts
        .iter()
        .rev()
        .take(3)
        .map(|&s| {
            let partial = prefix[s..].split_whitespace().collect::<Vec<_>>().join(" ");
            (&prefix[..s], partial)
        })
        .collect()
}

/// Adds entity names found in the facts behind each frame's predicate.
fn with_known_names(lexicon: &Lexicon, layer: &RuleLayer, store: &FactStore) -> Lexicon {
    let mut lexicon = lexicon.clone();
    for frame in lexicon.frames().to_vec() {
        let types = if frame.object_first {
            [&frame.object_type, &frame.subject_type]
        } else {
            [&frame.subject_type, &frame.object_type]
        };
        for (_, rule) in layer.rules() {
            if rule.head.predicate != frame.predicate {
                continue;
            }
            for (pos, term) in rule.head.args.iter().enumerate().take(2) {
                let Term::Var(v) = term else { continue };
                for atom in &rule.body {
                    for (j, t) in atom.args.iter().enumerate().take(2) {
                        if t.as_var() == Some(v.as_str()) {
                            let names: Vec<String> = store
                                .facts_of(&atom.predicate)
                                .map(|(a, b, _)| store.resolve(if j == 0 { a } else { b }).to_string())
                                .collect();
                            lexicon.add_known_names(types[pos], names);
                        }
                    }
                }
            }
        }
    }
    lexicon
}
