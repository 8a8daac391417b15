use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use super::ir::{IrArg, IrAtom, QueryIr, VarId};
use super::token::{Number, Token, TokenKind};
use super::{CnlError, Expected};
use crate::lexicon::{phrase_words, Lexicon, VerbFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Voice {
    Active,
    Passive,
}

#[derive(Debug, Clone)]
struct Phrase<'l> {
    words: Vec<String>,
    frame: &'l VerbFrame,
    voice: Voice,
}

impl Phrase<'_> {
    /// Type the relative clause's subject must have.
    fn subject_type(&self) -> &str {
        match self.voice {
            Voice::Active => &self.frame.subject_type,
            Voice::Passive => &self.frame.object_type,
        }
    }

    /// Type the noun phrase after the verb must have.
    fn object_type(&self) -> &str {
        match self.voice {
            Voice::Active => &self.frame.object_type,
            Voice::Passive => &self.frame.subject_type,
        }
    }
}

fn phrases(lexicon: &Lexicon) -> Vec<Phrase<'_>> {
    let mut out = Vec::new();
    for frame in lexicon.frames() {
        let mut forms = vec![phrase_words(&frame.active)];
        if frame.third_person != frame.active {
            forms.push(phrase_words(&frame.third_person));
        }
        for words in forms {
            out.push(Phrase {
                words,
                frame,
                voice: Voice::Active,
            });
        }
        if let Some(passive) = &frame.passive {
            for aux in ["is", "are"] {
                let mut words = vec![aux.to_string()];
                words.extend(phrase_words(passive));
                out.push(Phrase {
                    words,
                    frame,
                    voice: Voice::Passive,
                });
            }
        }
    }
    out
}

enum Fail {
    /// Ran out of tokens; carries what could have come next.
    Incomplete(BTreeSet<Expected>),
    Error(CnlError),
}

impl From<CnlError> for Fail {
    fn from(e: CnlError) -> Self {
        Fail::Error(e)
    }
}

type PResult<T> = Result<T, Fail>;

struct Parser<'a> {
    tokens: &'a [Token],
    lexicon: &'a Lexicon,
    phrases: Rc<[Phrase<'a>]>,
    pos: usize,
    /// Expectations registered at the current position.
    expected: BTreeSet<Expected>,
    vars: BTreeMap<VarId, String>,
    atoms: Vec<IrAtom>,
}

impl<'a> Parser<'a> {
    fn new(tokens: &'a [Token], lexicon: &'a Lexicon) -> Self {
        Parser {
            tokens,
            lexicon,
            phrases: phrases(lexicon).into(),
            pos: 0,
            expected: BTreeSet::new(),
            vars: BTreeMap::new(),
            atoms: Vec::new(),
        }
    }

    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn advance(&mut self) {
        self.pos += 1;
        self.expected.clear();
    }

    fn eat(&mut self, word: &str) -> bool {
        let e = Expected::literal(word);
        let hit = self.peek().is_some_and(|t| e.admits(t));
        self.expected.insert(e);
        if hit {
            self.advance();
        }
        hit
    }

    fn need(&mut self, word: &str) -> PResult<()> {
        if self.eat(word) {
            Ok(())
        } else {
            Err(self.fail())
        }
    }

    fn fail(&self) -> Fail {
        match self.peek() {
            None => Fail::Incomplete(self.expected.clone()),
            Some(tok) => Fail::Error(CnlError::Grammar {
                position: tok.span.start,
                expected: self.expected.iter().cloned().collect(),
            }),
        }
    }

    /// A type can head a relative clause only if some verb phrase accepts
    /// it as the clause subject.
    fn viable(&self, ty: &str) -> bool {
        self.phrases.iter().any(|p| p.subject_type() == ty)
    }

    fn noun_type(&self, tok: &Token) -> Option<(String, Number)> {
        let TokenKind::TypeNoun(number) = tok.kind else {
            return None;
        };
        let lower = tok.lower();
        self.lexicon
            .types()
            .iter()
            .find(|t| match number {
                Number::Singular => t.singular == lower,
                Number::Plural => t.plural == lower,
            })
            .map(|t| (t.id.clone(), number))
    }

    fn fresh_var(&mut self, ty: &str) -> VarId {
        let v = VarId(self.vars.len() as u32 + 1);
        self.vars.insert(v, ty.to_string());
        v
    }

    fn query(&mut self) -> PResult<QueryIr> {
        let which = if self.eat("What") {
            self.need("are")?;
            self.need("the")?;
            false
        } else if self.eat("Which") {
            true
        } else {
            return Err(self.fail());
        };
        for t in self.lexicon.types() {
            if self.viable(&t.id) {
                self.expected.insert(Expected::literal(&t.plural));
            }
        }
        let answer_type = match self.peek().and_then(|t| self.noun_type(t)) {
            Some((ty, Number::Plural)) => ty,
            _ => return Err(self.fail()),
        };
        self.advance();
        let answer = self.fresh_var(&answer_type);
        if which {
            self.which_chain(answer)?;
        } else {
            self.chain(answer, None)?;
        }
        self.need("?")?;
        if let Some(tok) = self.peek() {
            return Err(Fail::Error(CnlError::Grammar {
                position: tok.span.start,
                expected: vec![Expected::End],
            }));
        }
        let answer_noun = self
            .lexicon
            .entity_type(&answer_type)
            .map(|t| t.plural.clone())
            .unwrap_or_default();
        Ok(QueryIr {
            answer,
            answer_noun,
            vars: std::mem::take(&mut self.vars),
            atoms: std::mem::take(&mut self.atoms),
        })
    }

    /// `VP { "and" VP }` directly after `Which <plural>`.
    fn which_chain(&mut self, subject: VarId) -> PResult<()> {
        let outer = self.vars[&subject].clone();
        if !self.viable(&outer) && self.peek().is_none() {
            return Err(Fail::Incomplete(BTreeSet::new()));
        }
        self.verb_phrase(subject, Some(&outer))?;
        while self.eat("and") {
            self.verb_phrase(subject, Some(&outer))?;
        }
        Ok(())
    }

    /// `"that" VP { "and" "that" VP }`. Inside a `Which` query, `outer` is
    /// the type of the top-level subject: an `and` not followed by `that`
    /// is left for the top-level chain.
    fn chain(&mut self, subject: VarId, outer: Option<&str>) -> PResult<()> {
        if !self.viable(&self.vars[&subject]) && self.peek().is_none() {
            return Err(Fail::Incomplete(BTreeSet::new()));
        }
        self.need("that")?;
        self.verb_phrase(subject, outer)?;
        loop {
            let and = Expected::literal("and");
            self.expected.insert(and.clone());
            if !self.peek().is_some_and(|t| and.admits(t)) {
                return Ok(());
            }
            match self.tokens.get(self.pos + 1) {
                Some(t) if Expected::literal("that").admits(t) => {
                    self.advance();
                    self.advance();
                    self.verb_phrase(subject, outer)?;
                }
                Some(_) if outer.is_some() => return Ok(()),
                None => {
                    self.advance();
                    self.expected.insert(Expected::literal("that"));
                    if let Some(outer) = outer {
                        for p in self.phrases.iter() {
                            if p.subject_type() == outer {
                                self.expected.insert(Expected::literal(&p.words[0]));
                            }
                        }
                    }
                    return Err(self.fail());
                }
                Some(_) => {
                    self.advance();
                    self.need("that")?;
                }
            }
        }
    }

    fn verb_phrase(&mut self, subject: VarId, outer: Option<&str>) -> PResult<()> {
        let subject_type = self.vars[&subject].clone();
        let start = self.pos;
        let phrases = Rc::clone(&self.phrases);
        let mut candidates: Vec<&Phrase<'a>> = phrases.iter().collect();
        let mut k = 0;
        // The lexicon guarantees no phrase is a proper prefix of another,
        // so the first completed length is the only one.
        while !candidates.iter().any(|p| p.words.len() == k) {
            for p in &candidates {
                if p.subject_type() == subject_type {
                    self.expected.insert(Expected::literal(&p.words[k]));
                }
            }
            let Some(tok) = self.peek() else {
                return Err(self.fail());
            };
            let word = tok.lower();
            let fits = matches!(tok.kind, TokenKind::Keyword | TokenKind::VerbWord);
            let next: Vec<_> = candidates
                .iter()
                .copied()
                .filter(|p| fits && p.words[k] == word)
                .collect();
            if next.is_empty() {
                return Err(self.fail());
            }
            candidates = next;
            self.advance();
            k += 1;
        }
        let valid: Vec<&Phrase<'a>> = candidates
            .iter()
            .copied()
            .filter(|p| p.subject_type() == subject_type)
            .collect();
        if valid.is_empty() {
            let p = candidates[0];
            return Err(Fail::Error(CnlError::TypeMismatch {
                verb: p.words.join(" "),
                expected: p.subject_type().to_string(),
                found: subject_type,
                position: self.tokens[start].span.start,
            }));
        }
        self.object(subject, &valid, start, outer)
    }

    fn object(
        &mut self,
        subject: VarId,
        valid: &[&Phrase<'a>],
        verb_start: usize,
        outer: Option<&str>,
    ) -> PResult<()> {
        self.need("the")?;
        for p in valid {
            let ty = p.object_type();
            if let Some(t) = self.lexicon.entity_type(ty) {
                self.expected.insert(Expected::literal(&t.singular));
                if self.viable(ty) {
                    self.expected.insert(Expected::literal(&t.plural));
                }
            }
        }
        let Some((ty, number)) = self.peek().and_then(|t| self.noun_type(t)) else {
            return Err(self.fail());
        };
        let Some(phrase) = valid.iter().find(|p| p.object_type() == ty) else {
            return Err(Fail::Error(CnlError::TypeMismatch {
                verb: self.tokens[verb_start..self.pos - 1]
                    .iter()
                    .map(|t| t.lower())
                    .collect::<Vec<_>>()
                    .join(" "),
                expected: valid[0].object_type().to_string(),
                found: ty,
                position: self.tokens[self.pos].span.start,
            }));
        };
        self.advance();
        let object = match number {
            Number::Singular => {
                self.expected.insert(Expected::Name(ty.clone()));
                match self.peek() {
                    Some(tok) if tok.kind == TokenKind::ProperName => {
                        self.advance();
                        IrArg::Const {
                            name: tok.surface.clone(),
                            entity_type: ty,
                        }
                    }
                    _ => return Err(self.fail()),
                }
            }
            Number::Plural => IrArg::Var(self.fresh_var(&ty)),
        };
        let subject_arg = IrArg::Var(subject);
        let (frame_subject, frame_object) = match phrase.voice {
            Voice::Active => (subject_arg, object.clone()),
            Voice::Passive => (object.clone(), subject_arg),
        };
        let args = if phrase.frame.object_first {
            [frame_object, frame_subject]
        } else {
            [frame_subject, frame_object]
        };
        self.atoms.push(IrAtom {
            predicate: phrase.frame.predicate.clone(),
            args,
        });
        if let IrArg::Var(v) = object {
            self.chain(v, outer)?;
        }
        Ok(())
    }
}

/// Parses a tokenized query into its intermediate form.
pub fn parse(tokens: &[Token], lexicon: &Lexicon) -> Result<QueryIr, CnlError> {
    let mut parser = Parser::new(tokens, lexicon);
    match parser.query() {
        Ok(ir) => Ok(ir),
        Err(Fail::Error(e)) => Err(e),
        Err(Fail::Incomplete(expected)) => Err(CnlError::Grammar {
            position: tokens.last().map_or(0, |t| t.span.end),
            expected: expected.into_iter().collect(),
        }),
    }
}

/// Everything that may follow `prefix` in some complete query. Returns
/// `{End}` for a complete query and the empty set for a prefix that cannot
/// be extended.
pub fn expected_next(prefix: &[Token], lexicon: &Lexicon) -> BTreeSet<Expected> {
    let mut parser = Parser::new(prefix, lexicon);
    match parser.query() {
        Ok(_) => BTreeSet::from([Expected::End]),
        Err(Fail::Incomplete(expected)) => expected,
        Err(Fail::Error(_)) => BTreeSet::new(),
    }
}
