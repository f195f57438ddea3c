//! Deterministic synthetic corpora and embeddings for tests and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{AnnotatedTweet, ContingencyTable, Corpus, Split};
use crate::embedding::{anchor_id, occurrence_id, EmbeddingKind, EmbeddingRecord, ModelTag};
use crate::enrichment::focus_spans;
use crate::error::{Error, Result};
use crate::lexicon::{Connotation, Lexicon};
use crate::matcher::Matcher;

/// Train cells of the released corpus (misogynous x pejorative).
pub const PEJORATIVITY_TRAIN: ContingencyTable = ContingencyTable { a: 363, b: 6, c: 172, d: 563 };
pub const PEJORATIVITY_TEST: ContingencyTable = ContingencyTable { a: 28, b: 0, c: 18, d: 50 };

const FIXTURE_SEED: u64 = 1200;
const TWEETS_PER_WORD: usize = 50;
const TEST_PER_WORD: usize = 4;

const OPENERS: &[&str] = &["oggi", "ieri", "stasera", "davvero", "sempre", "adesso"];
const MIDDLES: &[&str] = &["ho visto una", "sembra una", "parlavo di una", "guarda quella", "pensavo a una"];
const PEJ_CUES: &[&str] = &["zitta", "vergogna", "schifo", "taci", "insopportabile", "ridicola"];
const NEUTRAL_CUES: &[&str] = &["fattoria", "campagna", "natura", "documentario", "allevamento", "museo"];

fn labels(table: &ContingencyTable) -> Vec<(bool, bool)> {
    let mut out = Vec::with_capacity(table.total() as usize);
    out.extend(std::iter::repeat_n((true, true), table.a as usize));
    out.extend(std::iter::repeat_n((true, false), table.b as usize));
    out.extend(std::iter::repeat_n((false, true), table.c as usize));
    out.extend(std::iter::repeat_n((false, false), table.d as usize));
    out
}

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn sentence(rng: &mut ChaCha8Rng, word: &str, cue: Option<&str>) -> String {
    let opener = pick(rng, OPENERS);
    let middle = pick(rng, MIDDLES);
    match cue {
        Some(cue) => format!("{opener} {middle} {word} {cue}"),
        None => format!("{opener} {middle} {word}"),
    }
}

/// 1,200 tweets, 50 per lexicon word, whose label cells per split equal the
/// released corpus counts. Each tweet names its target word once.
pub fn pejorativity_fixture(lexicon: &Lexicon) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(FIXTURE_SEED);
    let mut train = labels(&PEJORATIVITY_TRAIN);
    let mut test = labels(&PEJORATIVITY_TEST);
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    let (mut train, mut test) = (train.into_iter(), test.into_iter());

    let mut tweets = Vec::new();
    for word in lexicon.words() {
        for j in 0..TWEETS_PER_WORD {
            let split = if j < TEST_PER_WORD { Split::Test } else { Split::Train };
            let (mis, pej) = match split {
                Split::Test => test.next(),
                Split::Train => train.next(),
            }
            .expect("cell totals match the slot count");
            tweets.push(AnnotatedTweet {
                id: format!("pj{:04}", tweets.len() + 1),
                text: sentence(&mut rng, word, None),
                target_word: Some(word.to_string()),
                pejorative: Some(pej),
                misogynous: Some(mis),
                split,
            });
        }
    }
    Corpus::new(tweets)
}

/// Words used by the directional corpus.
pub const DIRECTIONAL_WORDS: &[&str] = &["asina", "balena", "gallina", "mucca", "oca", "pecora", "strega", "vacca"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalSpec {
    pub tweets: usize,
    /// Share of tweets carrying a context word that reveals the sense.
    pub cued: f64,
    pub seed: u64,
}

impl Default for DirectionalSpec {
    fn default() -> Self {
        DirectionalSpec {
            tweets: 400,
            cued: 0.6,
            seed: 7,
        }
    }
}

/// A corpus where a tweet is misogynous exactly when its epithet is used
/// pejoratively. Uncued tweets look the same in both senses, so only the
/// connotation label separates them. Every word contributes a quarter of its
/// tweets to the test split.
pub fn directional_corpus(spec: DirectionalSpec) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tweets = (0..spec.tweets)
        .map(|i| {
            let word = DIRECTIONAL_WORDS[i % DIRECTIONAL_WORDS.len()];
            let pej = rng.gen_bool(0.5);
            let cue = if rng.gen_bool(spec.cued) {
                Some(pick(&mut rng, if pej { PEJ_CUES } else { NEUTRAL_CUES }))
            } else {
                None
            };
            AnnotatedTweet {
                id: format!("d{:04}", i + 1),
                text: sentence(&mut rng, word, cue),
                target_word: Some(word.to_string()),
                pejorative: Some(pej),
                misogynous: Some(pej),
                split: if (i / DIRECTIONAL_WORDS.len()) % 4 == 3 { Split::Test } else { Split::Train },
            }
        })
        .collect();
    Corpus::new(tweets)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometrySpec {
    pub dim: usize,
    /// Weight of the connotation direction in occurrence vectors, per tag.
    pub pretrained_signal: f64,
    pub finetuned_signal: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        GeometrySpec {
            dim: 16,
            pretrained_signal: 0.4,
            finetuned_signal: 1.2,
            noise: 0.3,
            seed: 11,
        }
    }
}

fn noisy(rng: &mut ChaCha8Rng, base: &[f64], noise: f64) -> Vec<f64> {
    base.iter().map(|b| b + rng.gen_range(-noise..=noise)).collect()
}

fn axis(dim: usize, i: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[i] = 1.0;
    v
}

/// Embeddings where occurrence vectors lean toward the anchors of their gold
/// connotation. Covers every focus occurrence and every anchor of the
/// headwords involved, for both model tags.
pub fn constructed_embeddings(
    corpus: &Corpus,
    lexicon: &Lexicon,
    matcher: &Matcher,
    spec: GeometrySpec,
) -> Result<Vec<EmbeddingRecord>> {
    if spec.dim < 3 {
        return Err(Error::Precondition("geometry needs at least 3 dimensions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let direction = |c: Connotation| axis(spec.dim, if c.is_pejorative() { 0 } else { 1 });
    let mut records = Vec::new();
    let mut headwords = std::collections::BTreeSet::new();

    for tweet in &corpus.tweets {
        let Some(pej) = tweet.pejorative else { continue };
        let spans = matcher.find_matches(&tweet.id, &tweet.text, lexicon);
        for span in focus_spans(tweet, &spans) {
            headwords.insert(span.headword.clone());
            for (tag, signal) in [
                (ModelTag::Pretrained, spec.pretrained_signal),
                (ModelTag::Finetuned, spec.finetuned_signal),
            ] {
                let mut base = axis(spec.dim, 2);
                for (b, d) in base.iter_mut().zip(direction(Connotation::from_label(pej))) {
                    *b += signal * d;
                }
                records.push(EmbeddingRecord {
                    id: occurrence_id(&span),
                    kind: EmbeddingKind::LexiconOccurrence,
                    word: span.surface.clone(),
                    model_tag: tag,
                    vector: noisy(&mut rng, &base, spec.noise),
                });
            }
        }
    }

    let mut anchors = std::collections::BTreeMap::new();
    for word in &headwords {
        let entry = lexicon.get(word).ok_or_else(|| Error::UnknownWord(word.clone()))?;
        for conn in Connotation::ALL {
            for anchor in entry.anchors(conn) {
                anchors.entry(anchor.clone()).or_insert(conn);
            }
        }
    }
    for (anchor, conn) in anchors {
        for tag in [ModelTag::Pretrained, ModelTag::Finetuned] {
            records.push(EmbeddingRecord {
                id: anchor_id(&anchor),
                kind: EmbeddingKind::Anchor,
                word: anchor.clone(),
                model_tag: tag,
                vector: noisy(&mut rng, &direction(conn), spec.noise),
            });
        }
    }
    Ok(records)
}
