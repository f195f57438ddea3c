//! Locating lexicon words in tweets and aligning them to subword tokens.
//!
//! Offsets are counted in Unicode scalar values (`char`s), never bytes.

use std::collections::HashMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::lexicon::Lexicon;

pub const DEFAULT_MAX_EDIT: usize = 1;
/// Fuzzy matching only considers tokens and headwords at least this long.
pub const MIN_FUZZY_LEN: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaMode {
    ExternalTable,
    #[default]
    SuffixRules,
    /// Lowercasing only.
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LemmatizerConfig {
    pub mode: LemmaMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table_path: Option<PathBuf>,
}

impl LemmatizerConfig {
    pub fn suffix_rules() -> Self {
        LemmatizerConfig {
            mode: LemmaMode::SuffixRules,
            table_path: None,
        }
    }

    pub fn lowercase_only() -> Self {
        LemmatizerConfig {
            mode: LemmaMode::None,
            table_path: None,
        }
    }
}

/// Italian feminine plural endings and their singular form, longest first.
const SUFFIX_RULES: &[(&str, &str)] = &[("acce", "accia"), ("che", "ca"), ("ghe", "ga"), ("e", "a")];
const MIN_RULE_LEN: usize = 4;

#[derive(Debug, Clone)]
pub enum Lemmatizer {
    Table(HashMap<String, String>),
    SuffixRules,
    Lowercase,
}

impl Lemmatizer {
    pub fn from_config(config: &LemmatizerConfig) -> Result<Self> {
        match config.mode {
            LemmaMode::SuffixRules => Ok(Lemmatizer::SuffixRules),
            LemmaMode::None => Ok(Lemmatizer::Lowercase),
            LemmaMode::ExternalTable => {
                let path = config.table_path.as_deref().ok_or_else(|| {
                    Error::Config("lemmatizer mode external_table requires table_path".into())
                })?;
                Self::load_table(path)
            }
        }
    }

    /// Reads a `form<TAB>lemma` table.
    pub fn load_table(path: &Path) -> Result<Self> {
        let text = io::read_text(path)?;
        Self::parse_table(&text, &path.display().to_string())
    }

    pub fn parse_table(text: &str, origin: &str) -> Result<Self> {
        let mut table = HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (form, lemma) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(origin, idx + 1, "expected form<TAB>lemma"))?;
            table.insert(form.trim().to_lowercase(), lemma.trim().to_lowercase());
        }
        Ok(Lemmatizer::Table(table))
    }

    pub fn lemma(&self, token: &str) -> String {
        let lower = token.to_lowercase();
        match self {
            Lemmatizer::Lowercase => lower,
            Lemmatizer::Table(table) => table.get(&lower).cloned().unwrap_or(lower),
            Lemmatizer::SuffixRules => apply_suffix_rules(lower),
        }
    }
}

fn apply_suffix_rules(lower: String) -> String {
    if lower.chars().count() < MIN_RULE_LEN {
        return lower;
    }
    for (suffix, replacement) in SUFFIX_RULES {
        if let Some(stem) = lower.strip_suffix(suffix) {
            return format!("{stem}{replacement}");
        }
    }
    lower
}

/// Convenience wrapper matching the one-shot `lemma(token, config)` form.
pub fn lemma(token: &str, config: &LemmatizerConfig) -> Result<String> {
    Ok(Lemmatizer::from_config(config)?.lemma(token))
}

/// A word token of tweet text with char offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordToken<'a> {
    pub text: &'a str,
    pub char_start: usize,
    pub char_end: usize,
}

/// Splits on every char that is neither alphabetic nor numeric.
pub fn word_tokens(text: &str) -> Vec<WordToken<'_>> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, usize)> = None; // (byte start, char start)
    let mut char_idx = 0;
    for (byte_idx, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if current.is_none() {
                current = Some((byte_idx, char_idx));
            }
        } else if let Some((b, c)) = current.take() {
            tokens.push(WordToken {
                text: &text[b..byte_idx],
                char_start: c,
                char_end: char_idx,
            });
        }
        char_idx += 1;
    }
    if let Some((b, c)) = current {
        tokens.push(WordToken {
            text: &text[b..],
            char_start: c,
            char_end: char_idx,
        });
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchSpan {
    pub tweet_id: String,
    pub char_start: usize,
    pub char_end: usize,
    pub surface: String,
    pub headword: String,
}

/// Lemma-then-fuzzy lexicon matcher.
#[derive(Debug, Clone)]
pub struct Matcher {
    lemmatizer: Lemmatizer,
    max_edit: usize,
}

impl Matcher {
    pub fn new(lemmatizer: Lemmatizer, max_edit: usize) -> Self {
        Matcher { lemmatizer, max_edit }
    }

    pub fn from_config(config: &LemmatizerConfig, max_edit: usize) -> Result<Self> {
        Ok(Self::new(Lemmatizer::from_config(config)?, max_edit))
    }

    pub fn lemmatizer(&self) -> &Lemmatizer {
        &self.lemmatizer
    }

    pub fn max_edit(&self) -> usize {
        self.max_edit
    }

    /// Headword matched by a single word token, if any.
    ///
    /// Exact lemma equality wins. Otherwise the closest headword within
    /// `max_edit` of the lowercased surface is taken, provided both are at
    /// least [`MIN_FUZZY_LEN`] chars; ties go to the alphabetically first word.
    /// The distance uses the surface rather than the lemma because suffix
    /// rules can turn unrelated words into near misses (cane -> cana ~ cagna).
    pub fn match_token<'l>(&self, token: &str, lexicon: &'l Lexicon) -> Option<&'l str> {
        let lemma = self.lemmatizer.lemma(token);
        if let Some(entry) = lexicon.get(&lemma) {
            return Some(entry.word.as_str());
        }
        if self.max_edit == 0 {
            return None;
        }
        let surface = token.to_lowercase();
        if surface.chars().count() < MIN_FUZZY_LEN {
            return None;
        }
        let mut best: Option<(usize, &str)> = None;
        for word in lexicon.words() {
            if word.chars().count() < MIN_FUZZY_LEN {
                continue;
            }
            let d = strsim::levenshtein(&surface, word);
            if d <= self.max_edit && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, word));
            }
        }
        best.map(|(_, w)| w)
    }

    /// All lexicon occurrences in `text`, sorted and non-overlapping.
    pub fn find_matches(&self, tweet_id: &str, text: &str, lexicon: &Lexicon) -> Vec<MatchSpan> {
        word_tokens(text)
            .into_iter()
            .filter_map(|tok| {
                self.match_token(tok.text, lexicon).map(|headword| MatchSpan {
                    tweet_id: tweet_id.to_string(),
                    char_start: tok.char_start,
                    char_end: tok.char_end,
                    surface: tok.text.to_string(),
                    headword: headword.to_string(),
                })
            })
            .collect()
    }

    /// Number of occurrences of a (possibly multi-word) phrase, compared
    /// lemma by lemma over consecutive word tokens.
    pub fn count_phrase(&self, phrase: &str, text: &str) -> usize {
        let needle: Vec<String> = word_tokens(phrase).iter().map(|t| self.lemmatizer.lemma(t.text)).collect();
        if needle.is_empty() {
            return 0;
        }
        let hay: Vec<String> = word_tokens(text).iter().map(|t| self.lemmatizer.lemma(t.text)).collect();
        hay.windows(needle.len()).filter(|w| *w == needle.as_slice()).count()
    }
}

impl Default for Matcher {
    fn default() -> Self {
        Matcher::new(Lemmatizer::SuffixRules, DEFAULT_MAX_EDIT)
    }
}

/// Converts a char offset into a byte offset of `text`.
pub fn char_to_byte(text: &str, char_idx: usize) -> usize {
    text.char_indices().nth(char_idx).map_or(text.len(), |(b, _)| b)
}

/// Substring of `text` between two char offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    &text[char_to_byte(text, start)..char_to_byte(text, end)]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(String, usize, usize)", into = "(String, usize, usize)")]
pub struct Piece {
    pub piece: String,
    pub char_start: usize,
    pub char_end: usize,
}

impl From<(String, usize, usize)> for Piece {
    fn from((piece, char_start, char_end): (String, usize, usize)) -> Self {
        Piece {
            piece,
            char_start,
            char_end,
        }
    }
}

impl From<Piece> for (String, usize, usize) {
    fn from(p: Piece) -> Self {
        (p.piece, p.char_start, p.char_end)
    }
}

/// Subword tokenization of one tweet, produced by an external tokenizer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tokenization {
    pub id: String,
    pub pieces: Vec<Piece>,
}

impl Tokenization {
    /// Checks that piece spans are well-formed, increasing and non-overlapping.
    pub fn validate(&self) -> Result<()> {
        let mut prev_end = 0;
        for (i, p) in self.pieces.iter().enumerate() {
            if p.char_start > p.char_end || p.char_start < prev_end {
                return Err(Error::Validation(format!(
                    "tokenization {:?}: piece {i} ({:?}, {}..{}) overlaps or is reversed",
                    self.id, p.piece, p.char_start, p.char_end
                )));
            }
            prev_end = p.char_end;
        }
        Ok(())
    }
}

pub fn load_tokenizations(path: &Path) -> Result<Vec<Tokenization>> {
    let toks: Vec<Tokenization> = io::read_jsonl(path)?;
    for t in &toks {
        t.validate()?;
    }
    Ok(toks)
}

/// Minimal contiguous range of pieces covering the span.
///
/// Whitespace inside the span (multi-word phrases) need not be covered, since
/// tokenizers drop it.
pub fn align_subword_span(span: &MatchSpan, tokenization: &Tokenization) -> Result<Range<usize>> {
    let overlapping: Vec<usize> = tokenization
        .pieces
        .iter()
        .enumerate()
        .filter(|(_, p)| p.char_start < span.char_end && p.char_end > span.char_start)
        .map(|(i, _)| i)
        .collect();
    let (first, last) = match (overlapping.first(), overlapping.last()) {
        (Some(&f), Some(&l)) => (f, l),
        _ => {
            return Err(Error::Alignment(format!(
                "no piece of {:?} overlaps span {}..{} ({:?})",
                tokenization.id, span.char_start, span.char_end, span.surface
            )))
        }
    };
    let range = first..last + 1;

    for (offset, ch) in span.surface.chars().enumerate() {
        if ch.is_whitespace() {
            continue;
        }
        let pos = span.char_start + offset;
        let covered = tokenization.pieces[range.clone()]
            .iter()
            .any(|p| p.char_start <= pos && pos < p.char_end);
        if !covered {
            return Err(Error::Alignment(format!(
                "char {pos} of span {:?} in {:?} is not covered by any piece",
                span.surface, tokenization.id
            )));
        }
    }
    Ok(range)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn piece(p: &str, s: usize, e: usize) -> Piece {
        Piece {
            piece: p.to_string(),
            char_start: s,
            char_end: e,
        }
    }

    #[test]
    fn suffix_rule_lemmas() {
        let cfg = LemmatizerConfig::suffix_rules();
        assert_eq!(lemma("balene", &cfg).unwrap(), "balena");
        assert_eq!(lemma("balena", &cfg).unwrap(), "balena");
        assert_eq!(lemma("CAGNA", &cfg).unwrap(), "cagna");
        assert_eq!(lemma("vacche", &cfg).unwrap(), "vacca");
        assert_eq!(lemma("streghe", &cfg).unwrap(), "strega");
        assert_eq!(lemma("parolacce", &cfg).unwrap(), "parolaccia");
        // too short for any rule
        assert_eq!(lemma("che", &cfg).unwrap(), "che");
    }

    #[test]
    fn external_table_requires_path() {
        let cfg = LemmatizerConfig {
            mode: LemmaMode::ExternalTable,
            table_path: None,
        };
        assert!(matches!(Lemmatizer::from_config(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn table_lemmatizer_falls_back_to_lowercase() {
        let lem = Lemmatizer::parse_table("Cagne\tcagna\noche\toca\n", "t").unwrap();
        assert_eq!(lem.lemma("CAGNE"), "cagna");
        assert_eq!(lem.lemma("oche"), "oca");
        assert_eq!(lem.lemma("Balene"), "balene");
        assert!(Lemmatizer::parse_table("nocolumn\n", "t").is_err());
    }

    #[test]
    fn word_tokens_use_char_offsets() {
        let toks = word_tokens("Xchè l'ho già!");
        let texts: Vec<&str> = toks.iter().map(|t| t.text).collect();
        assert_eq!(texts, ["Xchè", "l", "ho", "già"]);
        assert_eq!((toks[3].char_start, toks[3].char_end), (10, 13));
    }

    #[test]
    fn cagna_tweet_has_single_span() {
        let lex = Lexicon::bundled();
        let text = "Non voglio una cagna un cane ce l'ho giaaaa";
        let spans = Matcher::default().find_matches("70019", text, &lex);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].surface, "cagna");
        assert_eq!(spans[0].headword, "cagna");
        assert_eq!(char_slice(text, spans[0].char_start, spans[0].char_end), "cagna");
    }

    #[test]
    fn balcone_does_not_match() {
        let lex = Lexicon::bundled();
        assert!(Matcher::default().find_matches("t", "Il balcone è grande", &lex).is_empty());
    }

    #[test]
    fn plural_matches_through_lemma() {
        let lex = Lexicon::bundled();
        let spans = Matcher::default().find_matches("t", "Le balene nuotano", &lex);
        assert_eq!(spans.len(), 1);
        assert_eq!((spans[0].surface.as_str(), spans[0].headword.as_str()), ("balene", "balena"));
    }

    #[test]
    fn fuzzy_catches_one_typo_but_not_short_words() {
        let lex = Lexicon::bundled();
        let m = Matcher::default();
        let spans = m.find_matches("t", "che gallna!", &lex);
        assert_eq!(spans[0].headword, "gallina");
        // "orca" is one edit from "oca", but "oca" is below the fuzzy length floor
        assert!(m.find_matches("t", "una orca", &lex).is_empty());
        let exact = Matcher::new(Lemmatizer::Lowercase, 0);
        assert!(exact.find_matches("t", "che gallna!", &lex).is_empty());
    }

    #[test]
    fn count_phrase_multiword() {
        let m = Matcher::default();
        assert_eq!(m.count_phrase("donna di facili costumi", "Sei una donna di facili costumi, donna!"), 1);
        assert_eq!(m.count_phrase("grassa", "grassa e GRASSE"), 2);
        assert_eq!(m.count_phrase("", "x"), 0);
    }

    #[test]
    fn align_balena_two_pieces() {
        let span = MatchSpan {
            tweet_id: "t".into(),
            char_start: 0,
            char_end: 6,
            surface: "balena".into(),
            headword: "balena".into(),
        };
        let tok = Tokenization {
            id: "t".into(),
            pieces: vec![piece("balen", 0, 5), piece("##a", 5, 6)],
        };
        assert_eq!(align_subword_span(&span, &tok).unwrap(), 0..2);
    }

    #[test]
    fn align_single_piece_and_multiword() {
        let text = "una donna di facili costumi qui";
        let span = MatchSpan {
            tweet_id: "t".into(),
            char_start: 4,
            char_end: 27,
            surface: char_slice(text, 4, 27).to_string(),
            headword: "cagna".into(),
        };
        let tok = Tokenization {
            id: "t".into(),
            pieces: vec![
                piece("una", 0, 3),
                piece("donna", 4, 9),
                piece("di", 10, 12),
                piece("facil", 13, 18),
                piece("##i", 18, 19),
                piece("cost", 20, 24),
                piece("##umi", 24, 27),
                piece("qui", 28, 31),
            ],
        };
        assert_eq!(align_subword_span(&span, &tok).unwrap(), 1..7);

        let single = MatchSpan {
            char_start: 0,
            char_end: 3,
            surface: "una".into(),
            ..span.clone()
        };
        assert_eq!(align_subword_span(&single, &tok).unwrap(), 0..1);
    }

    #[test]
    fn align_errors() {
        let span = MatchSpan {
            tweet_id: "t".into(),
            char_start: 10,
            char_end: 16,
            surface: "balena".into(),
            headword: "balena".into(),
        };
        let tok = Tokenization {
            id: "t".into(),
            pieces: vec![piece("sei", 0, 3)],
        };
        assert!(matches!(align_subword_span(&span, &tok), Err(Error::Alignment(_))));
        let partial = Tokenization {
            id: "t".into(),
            pieces: vec![piece("bal", 10, 13)],
        };
        assert!(matches!(align_subword_span(&span, &partial), Err(Error::Alignment(_))));
    }

    #[test]
    fn tokenization_jsonl_shape() {
        let line = r###"{"id":"t1","pieces":[["balen",0,5],["##a",5,6]]}"###;
        let tok: Tokenization = serde_json::from_str(line).unwrap();
        assert_eq!(tok.pieces[1], piece("##a", 5, 6));
        assert_eq!(serde_json::to_string(&tok).unwrap(), line);
        let bad = Tokenization {
            id: "x".into(),
            pieces: vec![piece("a", 0, 3), piece("b", 2, 4)],
        };
        assert!(bad.validate().is_err());
    }
}
