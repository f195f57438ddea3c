//! Pejorative-epithet disambiguation toolkit for Italian misogyny detection.
//!
//! Detects lexicon epithets in tweets, injects their connotation into the
//! text, trains and evaluates baseline classifiers, analyses contextual
//! embeddings and prepares LLM prompt batches.

pub mod classifier;
pub mod corpus;
pub mod embedding;
pub mod enrichment;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod lexicon;
pub mod llm;
pub mod matcher;
pub mod pipeline;
pub mod synth;

pub use error::{Error, Result};
pub use lexicon::{Connotation, Lexicon, LexiconEntry};
pub use matcher::{MatchSpan, Matcher};
pub use corpus::{AnnotatedTweet, Corpus, Split};
