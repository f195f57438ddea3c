//! Cosine-similarity analysis between contextual lexicon-word embeddings and
//! context-free anchor embeddings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::enrichment::focus_spans;
use crate::error::{Error, Result};
use crate::evaluation::MeanStd;
use crate::io;
use crate::lexicon::{Connotation, Lexicon};
use crate::matcher::{MatchSpan, Matcher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    LexiconOccurrence,
    Anchor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelTag {
    Pretrained,
    Finetuned,
}

impl ModelTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Pretrained => "pretrained",
            ModelTag::Finetuned => "finetuned",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub kind: EmbeddingKind,
    pub word: String,
    pub model_tag: ModelTag,
    pub vector: Vec<f64>,
}

/// Id of the embedding of one matched occurrence: `{tweet_id}:{start}-{end}`.
pub fn occurrence_id(span: &MatchSpan) -> String {
    format!("{}:{}-{}", span.tweet_id, span.char_start, span.char_end)
}

/// Id of a context-free anchor embedding.
pub fn anchor_id(anchor: &str) -> String {
    format!("anchor:{anchor}")
}

pub fn load_embeddings(path: &Path) -> Result<Vec<EmbeddingRecord>> {
    let records: Vec<EmbeddingRecord> = io::read_jsonl(path)?;
    check_embeddings(&records)?;
    Ok(records)
}

/// All vectors finite and of one dimension.
pub fn check_embeddings(records: &[EmbeddingRecord]) -> Result<()> {
    let Some(first) = records.first() else {
        return Ok(());
    };
    let dim = first.vector.len();
    for r in records {
        if r.vector.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.vector.len(),
            });
        }
        if r.vector.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation(format!("embedding {:?} has non-finite values", r.id)));
        }
    }
    Ok(())
}

/// Componentwise mean.
pub fn mean_pool(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::Precondition("mean_pool of an empty list".into()))?;
    let dim = first.len();
    let mut sum = vec![0.0; dim];
    for v in vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: v.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = vectors.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Pools the token vectors of an aligned subword range.
pub fn pool_span(token_vectors: &[Vec<f64>], range: Range<usize>) -> Result<Vec<f64>> {
    let slice = token_vectors
        .get(range.clone())
        .ok_or_else(|| Error::Alignment(format!("range {range:?} outside {} token vectors", token_vectors.len())))?;
    mean_pool(slice)
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::Degenerate("cosine with a zero vector".into()));
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityCell {
    pub headword: String,
    pub anchor: String,
    pub anchor_connotation: Connotation,
    /// Gold connotation of the occurrences averaged in this cell.
    pub sample_class: Connotation,
    pub model_tag: ModelTag,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

type CellKey = (String, Connotation, String, Connotation, ModelTag);

/// One cell per (headword, anchor, sample class, model tag) with at least one
/// occurrence. Sample classes come from the gold pejorativity label, and only
/// occurrences of each tweet's target word are used.
pub fn anchor_similarity_table(
    corpus: &Corpus,
    lexicon: &Lexicon,
    matcher: &Matcher,
    embeddings: &[EmbeddingRecord],
) -> Result<Vec<SimilarityCell>> {
    check_embeddings(embeddings)?;
    let tags: BTreeSet<ModelTag> = embeddings.iter().map(|e| e.model_tag).collect();
    let mut occurrences: HashMap<(&str, ModelTag), &[f64]> = HashMap::new();
    let mut anchors: HashMap<(&str, ModelTag), &[f64]> = HashMap::new();
    for e in embeddings {
        match e.kind {
            EmbeddingKind::LexiconOccurrence => occurrences.insert((e.id.as_str(), e.model_tag), &e.vector),
            EmbeddingKind::Anchor => anchors.insert((e.word.as_str(), e.model_tag), &e.vector),
        };
    }

    let mut groups: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();
    let mut missing = BTreeSet::new();
    for tweet in &corpus.tweets {
        let Some(pej) = tweet.pejorative else { continue };
        let sample_class = Connotation::from_label(pej);
        let spans = matcher.find_matches(&tweet.id, &tweet.text, lexicon);
        for span in focus_spans(tweet, &spans) {
            let entry = lexicon.get(&span.headword).ok_or_else(|| Error::UnknownWord(span.headword.clone()))?;
            let occ_id = occurrence_id(&span);
            for &tag in &tags {
                let Some(occ) = occurrences.get(&(occ_id.as_str(), tag)) else {
                    missing.insert(format!("{occ_id} ({tag})"));
                    continue;
                };
                for anchor_conn in Connotation::ALL {
                    for anchor in entry.anchors(anchor_conn) {
                        let Some(anchor_vec) = anchors.get(&(anchor.as_str(), tag)) else {
                            missing.insert(format!("{} ({tag})", anchor_id(anchor)));
                            continue;
                        };
                        groups
                            .entry((entry.word.clone(), anchor_conn, anchor.clone(), sample_class, tag))
                            .or_default()
                            .push(cosine(occ, anchor_vec)?);
                    }
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Coverage {
            what: "missing embeddings".into(),
            missing: missing.into_iter().collect(),
        });
    }

    Ok(groups
        .into_iter()
        .map(|((headword, anchor_connotation, anchor, sample_class, model_tag), sims)| {
            let stats = MeanStd::of(&sims);
            SimilarityCell {
                headword,
                anchor,
                anchor_connotation,
                sample_class,
                model_tag,
                mean: stats.mean,
                std: stats.std,
                n: sims.len(),
            }
        })
        .collect())
}

/// How often each anchor occurs in the corpus, lemma-matched.
pub fn anchor_frequency(corpus: &Corpus, lexicon: &Lexicon, matcher: &Matcher) -> BTreeMap<String, usize> {
    lexicon
        .all_anchors()
        .into_iter()
        .map(|(anchor, _)| {
            let count = corpus.tweets.iter().map(|t| matcher.count_phrase(&anchor, &t.text)).sum();
            (anchor, count)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAverage {
    pub model_tag: ModelTag,
    pub anchor_connotation: Connotation,
    pub sample_class: Connotation,
    /// Unweighted mean of the cell means.
    pub mean: f64,
    pub cells: usize,
}

/// Mean cosine per (model tag, anchor connotation, sample class). Groups
/// without cells are omitted.
pub fn class_average_summary(cells: &[SimilarityCell]) -> Vec<ClassAverage> {
    let mut groups: BTreeMap<(ModelTag, Connotation, Connotation), Vec<f64>> = BTreeMap::new();
    for c in cells {
        groups
            .entry((c.model_tag, c.anchor_connotation, c.sample_class))
            .or_default()
            .push(c.mean);
    }
    groups
        .into_iter()
        .map(|((model_tag, anchor_connotation, sample_class), means)| ClassAverage {
            model_tag,
            anchor_connotation,
            sample_class,
            mean: means.iter().sum::<f64>() / means.len() as f64,
            cells: means.len(),
        })
        .collect()
}

pub fn summary_lookup(
    summary: &[ClassAverage],
    tag: ModelTag,
    anchor_connotation: Connotation,
    sample_class: Connotation,
) -> Option<f64> {
    summary
        .iter()
        .find(|s| s.model_tag == tag && s.anchor_connotation == anchor_connotation && s.sample_class == sample_class)
        .map(|s| s.mean)
}

/// One row per (headword, anchor) with mean and std for each model tag and
/// sample class; empty fields where a class has no occurrences.
pub fn render_similarity_csv(cells: &[SimilarityCell]) -> String {
    let mut rows: BTreeMap<(String, Connotation, String), BTreeMap<(ModelTag, Connotation), &SimilarityCell>> =
        BTreeMap::new();
    for c in cells {
        rows.entry((c.headword.clone(), c.anchor_connotation, c.anchor.clone()))
            .or_default()
            .insert((c.model_tag, c.sample_class), c);
    }
    let columns = [
        (ModelTag::Pretrained, Connotation::Pejorative),
        (ModelTag::Pretrained, Connotation::Neutral),
        (ModelTag::Finetuned, Connotation::Pejorative),
        (ModelTag::Finetuned, Connotation::Neutral),
    ];
    let mut out = String::from("lexicon,anchor,anchor_connotation");
    for (tag, class) in columns {
        out.push_str(&format!(",{tag}_{class}_mean,{tag}_{class}_std,{tag}_{class}_n"));
    }
    out.push('\n');
    for ((headword, conn, anchor), by_col) in rows {
        out.push_str(&format!("{headword},{anchor},{conn}"));
        for key in columns {
            match by_col.get(&key) {
                Some(c) => out.push_str(&format!(",{:.4},{:.4},{}", c.mean, c.std, c.n)),
                None => out.push_str(",,,"),
            }
        }
        out.push('\n');
    }
    out
}
