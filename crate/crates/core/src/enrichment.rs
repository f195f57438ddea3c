//! Injecting word-level connotation into tweet text.
//!
//! Two strategies: `concat` appends a ` [SEP] word: peggiorativo|neutro` tag per
//! span, `subst` replaces each span with the anchors of its connotation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedTweet, Corpus};
use crate::error::{Error, Result};
use crate::lexicon::{Connotation, Lexicon};
use crate::matcher::{char_to_byte, MatchSpan};

pub const SEP: &str = " [SEP] ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Concat,
    Subst,
    None,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Concat => "concat",
            Strategy::Subst => "subst",
            Strategy::None => "none",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Gold,
    Predicted,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSource::Gold => "gold",
            LabelSource::Predicted => "predicted",
        }
    }
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How many anchors replace a span under `subst`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorMode {
    /// Every anchor of the connotation, space-joined.
    #[default]
    All,
    /// Only the first listed anchor.
    First,
}

/// Connotation per span of one tweet, keyed by char offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnotationAssignment {
    pub tweet_id: String,
    pub source: LabelSource,
    pub spans: BTreeMap<(usize, usize), Connotation>,
}

impl ConnotationAssignment {
    pub fn uniform(tweet_id: &str, spans: &[MatchSpan], connotation: Connotation, source: LabelSource) -> Self {
        ConnotationAssignment {
            tweet_id: tweet_id.to_string(),
            source,
            spans: spans
                .iter()
                .map(|s| ((s.char_start, s.char_end), connotation))
                .collect(),
        }
    }

    pub fn get(&self, span: &MatchSpan) -> Result<Connotation> {
        self.spans
            .get(&(span.char_start, span.char_end))
            .copied()
            .ok_or_else(|| Error::UnassignedSpan {
                tweet_id: span.tweet_id.clone(),
                start: span.char_start,
                end: span.char_end,
            })
    }
}

/// The spans a tweet-level pejorativity label refers to: those of the
/// tweet's target word, or of the first matched headword when the tweet has
/// no target word.
pub fn focus_spans(tweet: &AnnotatedTweet, spans: &[MatchSpan]) -> Vec<MatchSpan> {
    let focus = match &tweet.target_word {
        Some(w) => w.to_lowercase(),
        None => match spans.first() {
            Some(s) => s.headword.clone(),
            None => return Vec::new(),
        },
    };
    spans.iter().filter(|s| s.headword == focus).cloned().collect()
}

/// Assignment from the tweet's own pejorativity label.
pub fn gold_assignment(tweet: &AnnotatedTweet, spans: &[MatchSpan]) -> Result<ConnotationAssignment> {
    let pej = tweet.pejorative.ok_or_else(|| Error::Schema {
        id: tweet.id.clone(),
        message: "gold enrichment needs a pejorative label".into(),
    })?;
    Ok(ConnotationAssignment::uniform(
        &tweet.id,
        &focus_spans(tweet, spans),
        Connotation::from_label(pej),
        LabelSource::Gold,
    ))
}

pub fn predicted_assignment(tweet: &AnnotatedTweet, spans: &[MatchSpan], pejorative: bool) -> ConnotationAssignment {
    ConnotationAssignment::uniform(
        &tweet.id,
        &focus_spans(tweet, spans),
        Connotation::from_label(pejorative),
        LabelSource::Predicted,
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichedTweet {
    #[serde(flatten)]
    pub tweet: AnnotatedTweet,
    pub strategy: Strategy,
    pub source: Option<LabelSource>,
    pub original_text: String,
}

impl EnrichedTweet {
    fn unchanged(tweet: &AnnotatedTweet, source: LabelSource) -> Self {
        EnrichedTweet {
            tweet: tweet.clone(),
            strategy: Strategy::None,
            source: Some(source),
            original_text: tweet.text.clone(),
        }
    }
}

fn sorted(spans: &[MatchSpan]) -> Vec<&MatchSpan> {
    let mut v: Vec<&MatchSpan> = spans.iter().collect();
    v.sort_by_key(|s| (s.char_start, s.char_end));
    v
}

pub fn concat_enrich(
    tweet: &AnnotatedTweet,
    spans: &[MatchSpan],
    assignment: &ConnotationAssignment,
) -> Result<EnrichedTweet> {
    if spans.is_empty() {
        return Ok(EnrichedTweet::unchanged(tweet, assignment.source));
    }
    let mut text = tweet.text.clone();
    for span in sorted(spans) {
        let connotation = assignment.get(span)?;
        text.push_str(SEP);
        text.push_str(&span.headword);
        text.push_str(": ");
        text.push_str(connotation.italian_tag());
    }
    Ok(EnrichedTweet {
        tweet: AnnotatedTweet {
            text,
            ..tweet.clone()
        },
        strategy: Strategy::Concat,
        source: Some(assignment.source),
        original_text: tweet.text.clone(),
    })
}

/// Removes every trailing ` [SEP] word: tag` suffix added by [`concat_enrich`].
pub fn strip_concat(text: &str) -> &str {
    let mut rest = text;
    while let Some(idx) = rest.rfind(SEP) {
        let tail = &rest[idx + SEP.len()..];
        let well_formed = tail.split_once(": ").is_some_and(|(word, tag)| {
            !word.is_empty()
                && !word.contains(char::is_whitespace)
                && (tag == Connotation::Pejorative.italian_tag() || tag == Connotation::Neutral.italian_tag())
        });
        if !well_formed {
            break;
        }
        rest = &rest[..idx];
    }
    rest
}

pub fn subst_enrich(
    tweet: &AnnotatedTweet,
    spans: &[MatchSpan],
    assignment: &ConnotationAssignment,
    lexicon: &Lexicon,
    mode: AnchorMode,
) -> Result<EnrichedTweet> {
    if spans.is_empty() {
        return Ok(EnrichedTweet::unchanged(tweet, assignment.source));
    }
    let mut text = tweet.text.clone();
    // Right to left so earlier offsets stay valid.
    for span in sorted(spans).into_iter().rev() {
        let connotation = assignment.get(span)?;
        let anchors = lexicon.anchors_for(&span.headword, connotation)?;
        let replacement = match mode {
            AnchorMode::All => anchors.join(" "),
            AnchorMode::First => anchors[0].clone(),
        };
        let start = char_to_byte(&text, span.char_start);
        let end = char_to_byte(&text, span.char_end);
        text.replace_range(start..end, &replacement);
    }
    Ok(EnrichedTweet {
        tweet: AnnotatedTweet {
            text,
            ..tweet.clone()
        },
        strategy: Strategy::Subst,
        source: Some(assignment.source),
        original_text: tweet.text.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EnrichedCorpus {
    pub records: Vec<EnrichedTweet>,
}

impl EnrichedCorpus {
    pub fn corpus(&self) -> Corpus {
        Corpus::new(self.records.iter().map(|r| r.tweet.clone()).collect())
    }

    pub fn to_jsonl(&self) -> String {
        crate::io::to_jsonl(&self.records)
    }
}

/// Enriches every matched tweet; unmatched tweets pass through with strategy
/// `none`. Only the focus spans of each tweet are rewritten.
pub fn enrich_corpus(
    corpus: &Corpus,
    matches: &BTreeMap<String, Vec<MatchSpan>>,
    assignments: &BTreeMap<String, ConnotationAssignment>,
    strategy: Strategy,
    source: LabelSource,
    lexicon: &Lexicon,
    anchor_mode: AnchorMode,
) -> Result<EnrichedCorpus> {
    if strategy == Strategy::None {
        return Err(Error::Config("enrich_corpus needs strategy concat or subst".into()));
    }
    let missing: Vec<String> = corpus
        .tweets
        .iter()
        .filter(|t| matches.get(&t.id).is_some_and(|s| !s.is_empty()) && !assignments.contains_key(&t.id))
        .map(|t| t.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage {
            what: "tweets without a connotation assignment".into(),
            missing,
        });
    }

    let mut records = Vec::with_capacity(corpus.len());
    for tweet in &corpus.tweets {
        let spans = matches.get(&tweet.id).map(|s| focus_spans(tweet, s)).unwrap_or_default();
        let record = match assignments.get(&tweet.id) {
            Some(assignment) if !spans.is_empty() => match strategy {
                Strategy::Concat => concat_enrich(tweet, &spans, assignment)?,
                Strategy::Subst => subst_enrich(tweet, &spans, assignment, lexicon, anchor_mode)?,
                Strategy::None => unreachable!(),
            },
            _ => EnrichedTweet::unchanged(tweet, source),
        };
        records.push(record);
    }
    Ok(EnrichedCorpus { records })
}
