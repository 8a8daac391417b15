use std::ops::Range;

use serde::Serialize;

use super::CnlError;
use crate::lexicon::{phrase_words, Lexicon};

/// Closed-class words. Anything here is a keyword even when it also
/// appears inside a verb phrase (`interact with`, `targeted by`).
const KEYWORDS: &[&str] = &[
    "what", "which", "are", "is", "the", "that", "and", "by", "with", "to", "of", "in", "for",
    "from", "on", "at", "as",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Number {
    Singular,
    Plural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Keyword,
    TypeNoun(Number),
    VerbWord,
    ProperName,
    QuestionMark,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Token {
    pub kind: TokenKind,
    /// Matched text; whitespace inside multi-word nouns and names is
    /// collapsed to single spaces and quotes are stripped.
    pub surface: String,
    /// Byte range in the input, including any quotes.
    pub span: Range<usize>,
}

impl Token {
    pub(crate) fn lower(&self) -> String {
        self.surface.to_lowercase()
    }
}

pub(crate) fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

#[derive(Debug)]
enum Raw {
    Word { text: String, span: Range<usize> },
    Quoted { text: String, span: Range<usize> },
    Question { span: Range<usize> },
}

fn split_raw(text: &str) -> Result<Vec<Raw>, CnlError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '?' {
            chars.next();
            out.push(Raw::Question {
                span: start..start + 1,
            });
        } else if c == '"' {
            chars.next();
            let mut end = None;
            for (i, c) in chars.by_ref() {
                if c == '"' {
                    end = Some(i);
                    break;
                }
            }
            let end = end.ok_or(CnlError::UnterminatedQuote { position: start })?;
            out.push(Raw::Quoted {
                text: text[start + 1..end].split_whitespace().collect::<Vec<_>>().join(" "),
                span: start..end + 1,
            });
        } else {
            let mut end = start;
            while let Some(&(i, c)) = chars.peek() {
                if c.is_whitespace() || c == '?' || c == '"' {
                    break;
                }
                end = i + c.len_utf8();
                chars.next();
            }
            out.push(Raw::Word {
                text: text[start..end].to_string(),
                span: start..end,
            });
        }
    }
    Ok(out)
}

fn starts_name(word: &str) -> bool {
    word.chars()
        .next()
        .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
}

/// Splits a query into classified tokens.
///
/// Keywords and lexicon words match case-insensitively. Proper names are
/// only recognised right after a singular type noun (as a maximal run of
/// capitalised or digit-initial words) or when written in double quotes.
pub fn tokenize(text: &str, lexicon: &Lexicon) -> Result<Vec<Token>, CnlError> {
    let raw = split_raw(text)?;
    if raw.is_empty() {
        return Err(CnlError::EmptyInput);
    }
    let vocabulary = lexicon.vocabulary_words();
    let nouns: Vec<(Vec<String>, Number)> = lexicon
        .types()
        .iter()
        .flat_map(|t| {
            [
                (phrase_words(&t.singular), Number::Singular),
                (phrase_words(&t.plural), Number::Plural),
            ]
        })
        .collect();

    let mut tokens: Vec<Token> = Vec::new();
    let mut i = 0;
    while i < raw.len() {
        let name_position = matches!(
            tokens.last(),
            Some(Token {
                kind: TokenKind::TypeNoun(Number::Singular),
                ..
            })
        );
        match &raw[i] {
            Raw::Question { span } => {
                tokens.push(Token {
                    kind: TokenKind::QuestionMark,
                    surface: "?".into(),
                    span: span.clone(),
                });
                i += 1;
            }
            Raw::Quoted { text, span } => {
                tokens.push(Token {
                    kind: TokenKind::ProperName,
                    surface: text.clone(),
                    span: span.clone(),
                });
                i += 1;
            }
            Raw::Word { text, span } if name_position && starts_name(text) => {
                let mut words = vec![text.as_str()];
                let mut end = span.end;
                let mut j = i + 1;
                while let Some(Raw::Word { text, span }) = raw.get(j) {
                    if !starts_name(text) {
                        break;
                    }
                    words.push(text);
                    end = span.end;
                    j += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::ProperName,
                    surface: words.join(" "),
                    span: span.start..end,
                });
                i = j;
            }
            Raw::Word { text, span } => {
                if let Some((len, number)) = match_noun(&raw[i..], &nouns) {
                    let end = match &raw[i + len - 1] {
                        Raw::Word { span, .. } => span.end,
                        _ => unreachable!("nouns only match plain words"),
                    };
                    let surface = raw[i..i + len]
                        .iter()
                        .map(|r| match r {
                            Raw::Word { text, .. } => text.as_str(),
                            _ => "",
                        })
                        .collect::<Vec<_>>()
                        .join(" ");
                    tokens.push(Token {
                        kind: TokenKind::TypeNoun(number),
                        surface,
                        span: span.start..end,
                    });
                    i += len;
                    continue;
                }
                let lower = text.to_lowercase();
                let kind = if is_keyword(&lower) {
                    TokenKind::Keyword
                } else if vocabulary.contains(&lower) {
                    TokenKind::VerbWord
                } else {
                    return Err(CnlError::UnknownWord {
                        surface: text.clone(),
                        span: span.clone(),
                    });
                };
                tokens.push(Token {
                    kind,
                    surface: text.clone(),
                    span: span.clone(),
                });
                i += 1;
            }
        }
    }
    Ok(tokens)
}

/// Longest type noun starting at `raw[0]`: (word count, number).
fn match_noun(raw: &[Raw], nouns: &[(Vec<String>, Number)]) -> Option<(usize, Number)> {
    nouns
        .iter()
        .filter(|(words, _)| {
            words.len() <= raw.len()
                && words.iter().zip(raw).all(|(w, r)| match r {
                    Raw::Word { text, .. } => text.to_lowercase() == *w,
                    _ => false,
                })
        })
        .map(|(words, n)| (words.len(), *n))
        .max_by_key(|(len, n)| (*len, *n == Number::Plural))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<(TokenKind, String)> {
        tokenize(text, &Lexicon::default_lexicon())
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, t.surface))
            .collect()
    }

    #[test]
    fn example_query_fragment() {
        use Number::*;
        use TokenKind::*;
        let got = kinds("What are the genes that interact with the gene DLG4?");
        let want = [
            (Keyword, "What"),
            (Keyword, "are"),
            (Keyword, "the"),
            (TypeNoun(Plural), "genes"),
            (Keyword, "that"),
            (VerbWord, "interact"),
            (Keyword, "with"),
            (Keyword, "the"),
            (TypeNoun(Singular), "gene"),
            (ProperName, "DLG4"),
            (QuestionMark, "?"),
        ];
        assert_eq!(
            got,
            want.iter()
                .map(|(k, s)| (*k, s.to_string()))
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn empty_and_whitespace_input() {
        let lex = Lexicon::default_lexicon();
        assert_eq!(tokenize("", &lex), Err(CnlError::EmptyInput));
        assert_eq!(tokenize("  \t ", &lex), Err(CnlError::EmptyInput));
    }

    #[test]
    fn unknown_word() {
        let err = tokenize("What are the blargs?", &Lexicon::default_lexicon()).unwrap_err();
        assert_eq!(
            err,
            CnlError::UnknownWord {
                surface: "blargs".into(),
                span: 13..19
            }
        );
    }

    #[test]
    fn multiword_nouns_and_names() {
        use TokenKind::*;
        let got = kinds("Which drugs have the SIDE  effect Acute Renal Failure?");
        assert_eq!(got[4], (TypeNoun(Number::Singular), "SIDE effect".into()));
        assert_eq!(got[5], (ProperName, "Acute Renal Failure".into()));
        assert_eq!(got.len(), 7);
    }

    #[test]
    fn quoted_names_keep_case_and_strip_quotes() {
        let lex = Lexicon::default_lexicon();
        let toks = tokenize("Which drugs target the gene \"c-Myc and that\"?", &lex).unwrap();
        let name = &toks[5];
        assert_eq!(name.kind, TokenKind::ProperName);
        assert_eq!(name.surface, "c-Myc and that");
        assert_eq!(name.span, 28..44);
        assert!(matches!(
            tokenize("Which drugs target the gene \"oops", &lex),
            Err(CnlError::UnterminatedQuote { position: 28 })
        ));
    }

    #[test]
    fn lowercase_name_is_unknown() {
        let err = tokenize("Which drugs target the gene dlg4?", &Lexicon::default_lexicon())
            .unwrap_err();
        assert!(matches!(err, CnlError::UnknownWord { surface, .. } if surface == "dlg4"));
    }

    #[test]
    fn capitalised_word_outside_name_position_is_unknown() {
        let err = tokenize("What are the Foo?", &Lexicon::default_lexicon()).unwrap_err();
        assert!(matches!(err, CnlError::UnknownWord { surface, .. } if surface == "Foo"));
    }
}
