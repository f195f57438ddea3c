//! Zero-shot disambiguation prompts for instruction-tuned LLMs.
//!
//! The kit only writes prompt batches and reads responses back; generation
//! itself happens in whatever runner consumes the batch.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Split};
use crate::enrichment::focus_spans;
use crate::error::{Error, Result};
use crate::io;
use crate::lexicon::{Connotation, Lexicon};
use crate::matcher::Matcher;

const PROMPT_HEAD: &str = "[INST] Di seguito è riportata un'istruzione che descrive un task. \
Scrivete una risposta che completi adeguatamente la richiesta.\n### Istruzione:\nQual è il significato della parola \"";
const PROMPT_MID: &str = "\" in questa frase?\n\"";
const PROMPT_TAIL: &str = "\"[/INST]\n### Risposta:";

/// Fills the Italian instruction template. Slots are inserted verbatim.
pub fn build_prompt(word: &str, sentence: &str) -> Result<String> {
    if word.is_empty() || sentence.is_empty() {
        return Err(Error::Precondition("build_prompt needs a non-empty word and sentence".into()));
    }
    let mut prompt = String::with_capacity(PROMPT_HEAD.len() + word.len() + sentence.len() + 48);
    prompt.push_str(PROMPT_HEAD);
    prompt.push_str(word);
    prompt.push_str(PROMPT_MID);
    prompt.push_str(sentence);
    prompt.push_str(PROMPT_TAIL);
    Ok(prompt)
}

/// Beam-search settings recorded with every exported batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub temperature: f64,
    pub num_beams: u32,
    pub top_p: f64,
    pub max_new_tokens: u32,
    pub repetition_penalty: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            temperature: 0.2,
            num_beams: 4,
            top_p: 0.75,
            max_new_tokens: 300,
            repetition_penalty: 1.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub id: String,
    pub word: String,
    pub sentence: String,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub generation: GenerationConfig,
    pub model: String,
    pub prompts: usize,
}

pub const MODEL_PLACEHOLDER: &str = "<model-name>";

#[derive(Debug, Clone, PartialEq)]
pub struct PromptBatch {
    pub prompts: Vec<PromptRecord>,
    pub manifest: BatchManifest,
}

/// One prompt per test tweet with a match. The prompted word is the surface
/// form of the first focus occurrence, as written in the tweet.
pub fn export_prompt_batch(
    corpus: &Corpus,
    lexicon: &Lexicon,
    matcher: &Matcher,
    config: GenerationConfig,
) -> Result<PromptBatch> {
    let mut prompts = Vec::new();
    for tweet in corpus.split(Split::Test) {
        let spans = matcher.find_matches(&tweet.id, &tweet.text, lexicon);
        let Some(span) = focus_spans(tweet, &spans).into_iter().next() else {
            continue;
        };
        prompts.push(PromptRecord {
            id: tweet.id.clone(),
            word: span.surface.clone(),
            sentence: tweet.text.clone(),
            prompt: build_prompt(&span.surface, &tweet.text)?,
        });
    }
    let manifest = BatchManifest {
        generation: config,
        model: MODEL_PLACEHOLDER.to_string(),
        prompts: prompts.len(),
    };
    Ok(PromptBatch { prompts, manifest })
}

impl PromptBatch {
    /// Writes `prompts.jsonl` and `manifest.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        io::write_jsonl(&dir.join("prompts.jsonl"), &self.prompts)?;
        io::write_json(&dir.join("manifest.json"), &self.manifest)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let prompts: Vec<PromptRecord> = io::read_jsonl(&dir.join("prompts.jsonl"))?;
        let manifest: BatchManifest = io::read_json(&dir.join("manifest.json"))?;
        if manifest.prompts != prompts.len() {
            return Err(Error::Integrity(format!(
                "manifest lists {} prompts, batch has {}",
                manifest.prompts,
                prompts.len()
            )));
        }
        Ok(PromptBatch { prompts, manifest })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawResponse {
    pub id: String,
    pub model: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub id: String,
    pub word: String,
    pub sentence: String,
    pub prompt: String,
    pub response: String,
    pub model: String,
}

/// Joins responses to their prompts, checking that every stored prompt is
/// exactly what [`build_prompt`] produces for its word and sentence.
pub fn join_responses(batch: &[PromptRecord], responses: Vec<RawResponse>) -> Result<Vec<ResponseRecord>> {
    let prompts: HashMap<&str, &PromptRecord> = batch.iter().map(|p| (p.id.as_str(), p)).collect();
    responses
        .into_iter()
        .map(|r| {
            let p = prompts.get(r.id.as_str()).ok_or_else(|| Error::UnknownId(r.id.clone()))?;
            if build_prompt(&p.word, &p.sentence)? != p.prompt {
                return Err(Error::Integrity(format!("stored prompt of {:?} does not reconstruct", p.id)));
            }
            Ok(ResponseRecord {
                id: r.id,
                word: p.word.clone(),
                sentence: p.sentence.clone(),
                prompt: p.prompt.clone(),
                response: r.response,
                model: r.model,
            })
        })
        .collect()
}

pub fn ingest_responses(path: &Path, batch: &[PromptRecord]) -> Result<Vec<ResponseRecord>> {
    let raw: Vec<RawResponse> = io::read_jsonl(path)?;
    join_responses(batch, raw)
}

/// Review layout: tweet, target word, gold connotation, an empty translation
/// slot for the reviewer, and the model response. Tab-separated.
pub fn render_review_table(records: &[ResponseRecord], corpus: &Corpus) -> String {
    let gold: BTreeMap<&str, Option<bool>> = corpus.tweets.iter().map(|t| (t.id.as_str(), t.pejorative)).collect();
    let clean = |s: &str| s.replace(['\t', '\n', '\r'], " ");
    let mut out = String::from("id\tmodel\ttweet\tword\tgold\ttranslation\tresponse\n");
    for r in records {
        let gold = match gold.get(r.id.as_str()).copied().flatten() {
            Some(p) => Connotation::from_label(p).as_str(),
            None => "",
        };
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t\t{}\n",
            r.id,
            clean(&r.model),
            clean(&r.sentence),
            r.word,
            gold,
            clean(&r.response)
        ));
    }
    out
}
