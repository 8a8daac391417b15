//! Vocabulary of the query language: entity types and verb frames.
//!
//! The grammar is fixed; everything that varies between deployments (which
//! nouns exist, which verbs connect them, and which predicate a verb maps
//! to) lives in a [`Lexicon`] loaded from a small line-oriented file.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

/// The lexicon shipped with the crate.
pub const DEFAULT_LEXICON: &str = include_str!("../data/default.lexicon");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: duplicate frame for verb \"{verb}\" with subject type \"{subject}\"")]
    DuplicateFrame {
        line: usize,
        verb: String,
        subject: String,
    },
    #[error("line {line}: duplicate entity type \"{name}\"")]
    DuplicateType { line: usize, name: String },
    #[error("line {line}: unknown entity type \"{name}\"")]
    UnknownType { line: usize, name: String },
    #[error("line {line}: phrase \"{phrase}\" is a prefix of \"{other}\"")]
    AmbiguousPhrase {
        line: usize,
        phrase: String,
        other: String,
    },
}

/// A kind of entity that queries can ask about, e.g. `gene`/`genes`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntityType {
    /// Type id; identical to the singular noun.
    pub id: String,
    pub singular: String,
    pub plural: String,
}

/// How a verb phrase maps onto a binary predicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerbFrame {
    pub active: String,
    pub third_person: String,
    /// Participle plus preposition, e.g. `targeted by`.
    pub passive: Option<String>,
    pub subject_type: String,
    pub object_type: String,
    pub predicate: String,
    /// When set, the predicate stores the object first.
    pub object_first: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    types: Vec<EntityType>,
    frames: Vec<VerbFrame>,
    known_names: BTreeMap<String, BTreeSet<String>>,
}

/// Lower-cased words of a phrase.
pub(crate) fn phrase_words(phrase: &str) -> Vec<String> {
    phrase.split_whitespace().map(str::to_lowercase).collect()
}

impl Lexicon {
    pub fn load(text: &str) -> Result<Self, LexiconError> {
        let mut lex = Lexicon::default();
        let mut frame_lines = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = raw.split('\t').map(str::trim).collect();
            match fields[0] {
                "type" => {
                    if fields.len() != 3 {
                        return Err(syntax(line, "type lines need 3 tab-separated fields"));
                    }
                    let (singular, plural) = (normalize(fields[1]), normalize(fields[2]));
                    if singular.is_empty() || plural.is_empty() {
                        return Err(syntax(line, "empty noun"));
                    }
                    if lex.entity_type(&singular).is_some() {
                        return Err(LexiconError::DuplicateType {
                            line,
                            name: singular,
                        });
                    }
                    lex.types.push(EntityType {
                        id: singular.clone(),
                        singular,
                        plural,
                    });
                }
                "verb" => {
                    if fields.len() != 7 && fields.len() != 8 {
                        return Err(syntax(line, "verb lines need 7 tab-separated fields"));
                    }
                    let predicate = fields[6].to_string();
                    if !is_predicate_name(&predicate) {
                        return Err(syntax(line, &format!("invalid predicate name \"{predicate}\"")));
                    }
                    let object_first = match fields.get(7).copied() {
                        None | Some("") | Some("subject-first") => false,
                        Some("object-first") => true,
                        Some(other) => {
                            return Err(syntax(line, &format!("unknown argument order \"{other}\"")))
                        }
                    };
                    let passive = match normalize(fields[3]) {
                        p if p.is_empty() || p == "-" => None,
                        p => Some(p),
                    };
                    let frame = VerbFrame {
                        active: normalize(fields[1]),
                        third_person: normalize(fields[2]),
                        passive,
                        subject_type: normalize(fields[4]),
                        object_type: normalize(fields[5]),
                        predicate,
                        object_first,
                    };
                    if frame.active.is_empty() || frame.third_person.is_empty() {
                        return Err(syntax(line, "empty verb form"));
                    }
                    frame_lines.push(line);
                    lex.frames.push(frame);
                }
                other => return Err(syntax(line, &format!("unknown line kind \"{other}\""))),
            }
        }
        lex.validate(&frame_lines)?;
        Ok(lex)
    }

    pub fn default_lexicon() -> Self {
        Self::load(DEFAULT_LEXICON).expect("default lexicon is valid")
    }

    fn validate(&self, frame_lines: &[usize]) -> Result<(), LexiconError> {
        for (i, frame) in self.frames.iter().enumerate() {
            let line = frame_lines[i];
            for ty in [&frame.subject_type, &frame.object_type] {
                if self.entity_type(ty).is_none() {
                    return Err(LexiconError::UnknownType {
                        line,
                        name: ty.clone(),
                    });
                }
            }
            if self.frames[..i]
                .iter()
                .any(|f| f.active == frame.active && f.subject_type == frame.subject_type)
            {
                return Err(LexiconError::DuplicateFrame {
                    line,
                    verb: frame.active.clone(),
                    subject: frame.subject_type.clone(),
                });
            }
        }
        // Verb phrases are matched greedily, so no phrase may be a proper
        // prefix of another one in the same position.
        let phrases = self.verb_phrases();
        for (i, (a, _)) in phrases.iter().enumerate() {
            for (b, _) in &phrases {
                if a.len() < b.len() && b[..a.len()] == a[..] {
                    return Err(LexiconError::AmbiguousPhrase {
                        line: frame_lines[phrases[i].1],
                        phrase: a.join(" "),
                        other: b.join(" "),
                    });
                }
            }
        }
        Ok(())
    }

    /// All verb phrases as word lists, with the index of their frame.
    /// Passive phrases include the leading auxiliary.
    fn verb_phrases(&self) -> Vec<(Vec<String>, usize)> {
        let mut out = Vec::new();
        for (i, f) in self.frames.iter().enumerate() {
            out.push((phrase_words(&f.active), i));
            out.push((phrase_words(&f.third_person), i));
            if let Some(p) = &f.passive {
                for aux in ["is", "are"] {
                    let mut words = vec![aux.to_string()];
                    words.extend(phrase_words(p));
                    out.push((words, i));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn types(&self) -> &[EntityType] {
        &self.types
    }

    pub fn frames(&self) -> &[VerbFrame] {
        &self.frames
    }

    pub fn entity_type(&self, id: &str) -> Option<&EntityType> {
        self.types.iter().find(|t| t.id == id)
    }

    pub fn known_names(&self, type_id: &str) -> Option<&BTreeSet<String>> {
        self.known_names.get(type_id)
    }

    /// Registers entity names used for validation-free autocomplete.
    pub fn add_known_names<I, S>(&mut self, type_id: &str, names: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.known_names
            .entry(type_id.to_string())
            .or_default()
            .extend(names.into_iter().map(Into::into));
    }

    /// Every lower-cased word that occurs in a type noun or verb phrase.
    pub(crate) fn vocabulary_words(&self) -> BTreeSet<String> {
        let mut words = BTreeSet::new();
        for t in &self.types {
            words.extend(phrase_words(&t.singular));
            words.extend(phrase_words(&t.plural));
        }
        for (phrase, _) in self.verb_phrases() {
            words.extend(phrase);
        }
        words
    }
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

fn syntax(line: usize, message: &str) -> LexiconError {
    LexiconError::Syntax {
        line,
        message: message.to_string(),
    }
}

pub(crate) fn is_predicate_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase())
        && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}
