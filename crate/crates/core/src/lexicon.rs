//! The polysemic-epithet lexicon.
//!
//! Every headword has one neutral and one pejorative sense, and each sense is
//! pinned down by one or more unambiguous anchor words. The bundled lexicon
//! covers 24 Italian words; other lexicons can be loaded from TSV or JSON.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

const BUNDLED_TSV: &str = include_str!("../data/lexicon.tsv");
const EXCLUDED_TXT: &str = include_str!("../data/excluded_words.txt");

pub const TSV_HEADER: [&str; 5] = [
    "word",
    "literal_gloss",
    "pejorative_gloss",
    "neutral_anchors",
    "pejorative_anchors",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connotation {
    Neutral,
    Pejorative,
}

impl Connotation {
    pub const ALL: [Connotation; 2] = [Connotation::Neutral, Connotation::Pejorative];

    pub fn as_str(self) -> &'static str {
        match self {
            Connotation::Neutral => "neutral",
            Connotation::Pejorative => "pejorative",
        }
    }

    /// Italian tag used when the connotation is spelled out in tweet text.
    pub fn italian_tag(self) -> &'static str {
        match self {
            Connotation::Neutral => "neutro",
            Connotation::Pejorative => "peggiorativo",
        }
    }

    pub fn from_label(pejorative: bool) -> Self {
        if pejorative {
            Connotation::Pejorative
        } else {
            Connotation::Neutral
        }
    }

    pub fn is_pejorative(self) -> bool {
        self == Connotation::Pejorative
    }
}

impl fmt::Display for Connotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    pub literal_gloss: String,
    pub pejorative_gloss: String,
    pub neutral_anchors: Vec<String>,
    pub pejorative_anchors: Vec<String>,
}

impl LexiconEntry {
    pub fn anchors(&self, connotation: Connotation) -> &[String] {
        match connotation {
            Connotation::Neutral => &self.neutral_anchors,
            Connotation::Pejorative => &self.pejorative_anchors,
        }
    }
}

/// A broken lexicon invariant. Violations are reported as data by
/// [`validate_entries`]; [`Lexicon::from_entries`] turns them into an error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    BadHeadword { word: String },
    DuplicateWord { word: String },
    EmptyAnchors { word: String, connotation: Connotation },
    BlankAnchor { word: String, connotation: Connotation },
    AnchorIsHeadword { word: String, anchor: String, connotation: Connotation },
    AnchorInBothSenses { word: String, anchor: String },
    AnchorIsOtherHeadword { word: String, anchor: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadHeadword { word } => {
                write!(f, "headword {word:?} must be non-empty, lowercase and without whitespace")
            }
            Violation::DuplicateWord { word } => write!(f, "duplicate headword {word:?}"),
            Violation::EmptyAnchors { word, connotation } => {
                write!(f, "{word}: no {connotation} anchors")
            }
            Violation::BlankAnchor { word, connotation } => {
                write!(f, "{word}: blank {connotation} anchor")
            }
            Violation::AnchorIsHeadword {
                word,
                anchor,
                connotation,
            } => write!(f, "{word}: {connotation} anchor {anchor:?} equals the headword"),
            Violation::AnchorInBothSenses { word, anchor } => {
                write!(f, "{word}: anchor {anchor:?} listed for both connotations")
            }
            Violation::AnchorIsOtherHeadword { word, anchor } => {
                write!(f, "{word}: anchor {anchor:?} is itself a lexicon headword")
            }
        }
    }
}

/// Checks every entry invariant and returns the violations found, in entry order.
///
/// A neutral anchor identical to its own headword is accepted when it is the
/// only neutral anchor: the literal sense is then named by the word itself
/// (the bundled `femminista` row). Pejorative self-anchors are always rejected.
pub fn validate_entries(entries: &[LexiconEntry]) -> Vec<Violation> {
    let mut violations = Vec::new();
    let headwords: BTreeSet<&str> = entries.iter().map(|e| e.word.as_str()).collect();
    let mut seen = BTreeSet::new();

    for entry in entries {
        let word = &entry.word;
        if word.is_empty() || word.chars().any(char::is_whitespace) || *word != word.to_lowercase() {
            violations.push(Violation::BadHeadword { word: word.clone() });
        }
        if !seen.insert(word.as_str()) {
            violations.push(Violation::DuplicateWord { word: word.clone() });
        }

        for connotation in Connotation::ALL {
            let anchors = entry.anchors(connotation);
            if anchors.is_empty() {
                violations.push(Violation::EmptyAnchors {
                    word: word.clone(),
                    connotation,
                });
            }
            let self_anchor_ok = connotation == Connotation::Neutral && anchors.len() == 1;
            for anchor in anchors {
                if anchor.trim().is_empty() {
                    violations.push(Violation::BlankAnchor {
                        word: word.clone(),
                        connotation,
                    });
                } else if anchor == word {
                    if !self_anchor_ok {
                        violations.push(Violation::AnchorIsHeadword {
                            word: word.clone(),
                            anchor: anchor.clone(),
                            connotation,
                        });
                    }
                } else if headwords.contains(anchor.as_str()) {
                    violations.push(Violation::AnchorIsOtherHeadword {
                        word: word.clone(),
                        anchor: anchor.clone(),
                    });
                }
            }
        }

        for anchor in &entry.neutral_anchors {
            if entry.pejorative_anchors.contains(anchor) {
                violations.push(Violation::AnchorInBothSenses {
                    word: word.clone(),
                    anchor: anchor.clone(),
                });
            }
        }
    }
    violations
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
}

impl Lexicon {
    /// Builds a lexicon, failing on the first batch of invariant violations.
    pub fn from_entries(entries: Vec<LexiconEntry>) -> Result<Self> {
        let violations = validate_entries(&entries);
        if !violations.is_empty() {
            let msgs: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Error::Validation(msgs.join("; ")));
        }
        Ok(Lexicon {
            entries: entries.into_iter().map(|e| (e.word.clone(), e)).collect(),
        })
    }

    pub fn empty() -> Self {
        Lexicon {
            entries: BTreeMap::new(),
        }
    }

    /// The 24-word Italian lexicon shipped with the crate.
    pub fn bundled() -> Self {
        Self::parse_tsv(BUNDLED_TSV, "bundled lexicon").expect("bundled lexicon is valid")
    }

    /// Loads a TSV or JSON lexicon. JSON is detected by a `.json` extension
    /// or a leading `[`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = io::read_text(path)?;
        let origin = path.display().to_string();
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('[');
        if is_json {
            Self::parse_json(&text, &origin)
        } else {
            Self::parse_tsv(&text, &origin)
        }
    }

    pub fn parse_tsv(text: &str, origin: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "empty lexicon file"))?;
        let columns: Vec<&str> = header.split('\t').map(str::trim).collect();
        if columns != TSV_HEADER {
            return Err(Error::parse(origin, 1, format!("unexpected header {columns:?}")));
        }

        let mut entries = Vec::new();
        for (idx, line) in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != TSV_HEADER.len() {
                return Err(Error::parse(
                    origin,
                    idx + 1,
                    format!("expected {} tab-separated fields, found {}", TSV_HEADER.len(), fields.len()),
                ));
            }
            entries.push(LexiconEntry {
                word: fields[0].trim().to_string(),
                literal_gloss: fields[1].trim().to_string(),
                pejorative_gloss: fields[2].trim().to_string(),
                neutral_anchors: split_anchors(fields[3]),
                pejorative_anchors: split_anchors(fields[4]),
            });
        }
        if entries.is_empty() {
            return Err(Error::parse(origin, 1, "lexicon has no entries"));
        }
        Self::from_entries(entries)
    }

    pub fn parse_json(text: &str, origin: &str) -> Result<Self> {
        let entries: Vec<LexiconEntry> =
            serde_json::from_str(text).map_err(|e| Error::parse(origin, e.line(), e))?;
        if entries.is_empty() {
            return Err(Error::parse(origin, 1, "lexicon has no entries"));
        }
        Self::from_entries(entries)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = TSV_HEADER.join("\t");
        out.push('\n');
        for e in self.entries.values() {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                e.word,
                e.literal_gloss,
                e.pejorative_gloss,
                e.neutral_anchors.join("|"),
                e.pejorative_anchors.join("|")
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let entries: Vec<&LexiconEntry> = self.entries.values().collect();
        serde_json::to_string_pretty(&entries).expect("serializable lexicon")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Case-insensitive lookup.
    pub fn get(&self, word: &str) -> Option<&LexiconEntry> {
        self.entries.get(&word.to_lowercase())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.get(word).is_some()
    }

    pub fn entries(&self) -> impl Iterator<Item = &LexiconEntry> {
        self.entries.values()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Anchors of `word` for one connotation, in file order.
    pub fn anchors_for(&self, word: &str, connotation: Connotation) -> Result<&[String]> {
        self.get(word)
            .map(|e| e.anchors(connotation))
            .ok_or_else(|| Error::UnknownWord(word.to_string()))
    }

    pub fn validate(&self) -> Vec<Violation> {
        let entries: Vec<LexiconEntry> = self.entries.values().cloned().collect();
        validate_entries(&entries)
    }

    /// Every distinct anchor string with the connotation it anchors, sorted.
    pub fn all_anchors(&self) -> BTreeSet<(String, Connotation)> {
        let mut out = BTreeSet::new();
        for entry in self.entries.values() {
            for connotation in Connotation::ALL {
                for anchor in entry.anchors(connotation) {
                    out.insert((anchor.clone(), connotation));
                }
            }
        }
        out
    }
}

fn split_anchors(field: &str) -> Vec<String> {
    field
        .split('|')
        .map(str::trim)
        .filter(|a| !a.is_empty())
        .map(str::to_string)
        .collect()
}

/// Candidate words that were considered and left out of the lexicon because
/// they carry a single connotation in practice.
pub fn excluded_candidates() -> Vec<&'static str> {
    EXCLUDED_TXT
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .collect()
}
