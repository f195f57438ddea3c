//! The two classification roles and the in-repo baseline backend.
//!
//! The baseline is an L2-regularised logistic regression over hashed
//! character n-grams (n in 2..=5), trained with seeded mini-batch gradient
//! descent. Transformer predictions enter through [`load_predictions`]; the
//! evaluation code only ever sees [`PredictionRecord`]s, so both backends are
//! interchangeable.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedTweet, Corpus, Split};
use crate::enrichment::focus_spans;
use crate::error::{Error, Result};
use crate::io;
use crate::matcher::{char_to_byte, MatchSpan};

pub const DEFAULT_SEEDS: [u64; 3] = [13, 42, 2024];
pub const THRESHOLD: f64 = 0.5;
pub const MARK_OPEN: &str = "⟦";
pub const MARK_CLOSE: &str = "⟧";
const CHECKPOINT_FORMAT: &str = "pejkit-baseline/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Word-in-context pejorativity.
    Pej,
    /// Sentence-level misogyny.
    Mis,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Pej => "pej",
            Task::Mis => "mis",
        }
    }

    pub fn gold(self, tweet: &AnnotatedTweet) -> Option<bool> {
        match self {
            Task::Pej => tweet.pejorative,
            Task::Mis => tweet.misogynous,
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub task: Task,
    pub label: bool,
    pub score: f64,
    pub run_id: u32,
}

/// Positive iff the score is strictly above the threshold; ties go negative.
pub fn decide(score: f64) -> bool {
    score > THRESHOLD
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    /// Feature space has 2^hash_bits dimensions.
    pub hash_bits: u32,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            hash_bits: 16,
            ngram_min: 2,
            ngram_max: 5,
            epochs: 30,
            batch_size: 16,
            learning_rate: 2.0,
            l2: 1e-5,
        }
    }
}

impl Hyperparams {
    pub fn dim(&self) -> usize {
        1usize << self.hash_bits
    }

    fn check(&self) -> Result<()> {
        if !(1..=24).contains(&self.hash_bits)
            || self.ngram_min == 0
            || self.ngram_min > self.ngram_max
            || self.batch_size == 0
            || !(self.learning_rate > 0.0)
            || !(self.l2 >= 0.0)
        {
            return Err(Error::Config(format!("invalid baseline hyperparameters {self:?}")));
        }
        Ok(())
    }
}

/// Sparse feature vector: sorted, de-duplicated indices.
pub type SparseVec = Vec<(u32, f64)>;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// L2-normalised hashed character n-gram counts of the lowercased,
/// space-padded text.
pub fn featurize(text: &str, hp: &Hyperparams) -> SparseVec {
    let padded: Vec<char> = format!(" {} ", text.to_lowercase()).chars().collect();
    let mask = (hp.dim() - 1) as u64;
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    let mut buf = String::new();
    for n in hp.ngram_min..=hp.ngram_max {
        for window in padded.windows(n) {
            buf.clear();
            buf.extend(window);
            *counts.entry((fnv1a(buf.as_bytes()) & mask) as u32).or_default() += 1.0;
        }
    }
    let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Vec::new();
    }
    counts.into_iter().map(|(i, v)| (i, v / norm)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: SparseVec,
    /// 0.0 or 1.0
    pub target: f64,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub task: Task,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl BaselineModel {
    pub fn zeros(task: Task, hyperparams: Hyperparams, seed: u64) -> Self {
        BaselineModel {
            task,
            hyperparams,
            seed,
            weights: vec![0.0; hyperparams.dim()],
            bias: 0.0,
        }
    }

    fn logit(&self, features: &SparseVec) -> f64 {
        self.bias + features.iter().map(|&(i, v)| self.weights[i as usize] * v).sum::<f64>()
    }

    pub fn score_features(&self, features: &SparseVec) -> f64 {
        sigmoid(self.logit(features))
    }

    pub fn score(&self, text: &str) -> f64 {
        self.score_features(&featurize(text, &self.hyperparams))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, &Checkpoint::from(self))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt: Checkpoint = io::read_json(path)?;
        ckpt.into_model()
    }
}

/// On-disk form of a model: only non-zero weights are stored.
#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    task: Task,
    seed: u64,
    hyperparams: Hyperparams,
    bias: f64,
    weights: Vec<(u32, f64)>,
}

impl From<&BaselineModel> for Checkpoint {
    fn from(m: &BaselineModel) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            task: m.task,
            seed: m.seed,
            hyperparams: m.hyperparams,
            bias: m.bias,
            weights: m
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, w)| (i as u32, *w))
                .collect(),
        }
    }
}

impl Checkpoint {
    fn into_model(self) -> Result<BaselineModel> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Validation(format!("unsupported checkpoint format {:?}", self.format)));
        }
        self.hyperparams.check()?;
        let mut model = BaselineModel::zeros(self.task, self.hyperparams, self.seed);
        model.bias = self.bias;
        for (i, w) in self.weights {
            let slot = model
                .weights
                .get_mut(i as usize)
                .ok_or_else(|| Error::Validation(format!("weight index {i} out of range")))?;
            *slot = w;
        }
        if !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation("checkpoint has non-finite weights".into()));
        }
        Ok(model)
    }
}

/// Mean logistic loss over the batch plus `l2/2 * |w|^2` (bias unregularised).
pub fn loss(model: &BaselineModel, batch: &[Example]) -> f64 {
    let data: f64 = batch
        .iter()
        .map(|ex| {
            let z = model.logit(&ex.features);
            // log(1 + e^z) - y z, computed stably
            let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
            softplus - ex.target * z
        })
        .sum::<f64>()
        / batch.len() as f64;
    let reg = 0.5 * model.hyperparams.l2 * model.weights.iter().map(|w| w * w).sum::<f64>();
    data + reg
}

/// Gradient of [`loss`]; the last component is the bias.
pub fn loss_gradient(model: &BaselineModel, batch: &[Example]) -> Vec<f64> {
    let dim = model.weights.len();
    let l2 = model.hyperparams.l2;
    let mut grad: Vec<f64> = model.weights.iter().map(|w| l2 * w).collect();
    grad.push(0.0);
    let scale = 1.0 / batch.len() as f64;
    for ex in batch {
        let residual = (model.score_features(&ex.features) - ex.target) * scale;
        for &(i, v) in &ex.features {
            grad[i as usize] += residual * v;
        }
        grad[dim] += residual;
    }
    grad
}

/// Fits a model on prepared examples.
pub fn train_examples(examples: &[Example], task: Task, hp: Hyperparams, seed: u64) -> Result<BaselineModel> {
    hp.check()?;
    if examples.is_empty() {
        return Err(Error::Training(format!("no training examples for task {task}")));
    }
    let mut model = BaselineModel::zeros(task, hp, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    // weights = scale * v, so the L2 shrinkage is a scalar update and the
    // data gradient stays sparse.
    let mut v = vec![0.0f64; model.weights.len()];
    let mut scale = 1.0f64;
    let decay = 1.0 - hp.learning_rate * hp.l2;
    if !(decay > 0.0) {
        return Err(Error::Config("learning_rate * l2 must be below 1".into()));
    }
    let mut residuals = Vec::with_capacity(hp.batch_size);
    for _ in 0..hp.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(hp.batch_size) {
            let step = hp.learning_rate / chunk.len() as f64;
            residuals.clear();
            for &i in chunk {
                let ex = &examples[i];
                let z = model.bias + scale * ex.features.iter().map(|&(j, x)| v[j as usize] * x).sum::<f64>();
                residuals.push(sigmoid(z) - ex.target);
            }
            scale *= decay;
            for (&i, r) in chunk.iter().zip(&residuals) {
                for &(j, x) in &examples[i].features {
                    v[j as usize] -= step * r * x / scale;
                }
                model.bias -= step * r;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
        }
    }
    for (w, x) in model.weights.iter_mut().zip(&v) {
        *w = scale * x;
    }
    if !model.bias.is_finite() || model.weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Training("training diverged to non-finite weights".into()));
    }
    Ok(model)
}

/// Text shown to the model. For `pej` the focus word occurrences are wrapped
/// in `⟦ ⟧` so the classifier knows which word to judge.
pub fn model_input(task: Task, tweet: &AnnotatedTweet, spans: &[MatchSpan]) -> String {
    match task {
        Task::Mis => tweet.text.clone(),
        Task::Pej => {
            let mut focus = focus_spans(tweet, spans);
            focus.sort_by_key(|s| s.char_start);
            let mut text = tweet.text.clone();
            for span in focus.iter().rev() {
                let end = char_to_byte(&text, span.char_end);
                text.insert_str(end, MARK_CLOSE);
                let start = char_to_byte(&text, span.char_start);
                text.insert_str(start, MARK_OPEN);
            }
            text
        }
    }
}

/// Trains on the train split of `corpus`. `matches` supplies the spans used to
/// mark the focus word for `pej`; it is ignored for `mis`.
pub fn train_baseline(
    corpus: &Corpus,
    matches: &BTreeMap<String, Vec<MatchSpan>>,
    task: Task,
    hp: Hyperparams,
    seed: u64,
) -> Result<BaselineModel> {
    let mut examples = Vec::new();
    for tweet in corpus.split(Split::Train) {
        let label = task.gold(tweet).ok_or_else(|| Error::Schema {
            id: tweet.id.clone(),
            message: format!("train record lacks the {task} label"),
        })?;
        let spans = matches.get(&tweet.id).map(Vec::as_slice).unwrap_or(&[]);
        examples.push(Example {
            features: featurize(&model_input(task, tweet, spans), &hp),
            target: if label { 1.0 } else { 0.0 },
        });
    }
    train_examples(&examples, task, hp, seed)
}

/// One record per tweet of `corpus`, in corpus order.
pub fn predict(
    model: &BaselineModel,
    corpus: &Corpus,
    matches: &BTreeMap<String, Vec<MatchSpan>>,
    run_id: u32,
) -> Vec<PredictionRecord> {
    corpus
        .tweets
        .iter()
        .map(|tweet| {
            let spans = matches.get(&tweet.id).map(Vec::as_slice).unwrap_or(&[]);
            let score = model.score(&model_input(model.task, tweet, spans));
            PredictionRecord {
                id: tweet.id.clone(),
                task: model.task,
                label: decide(score),
                score,
                run_id,
            }
        })
        .collect()
}

fn check_record(r: &PredictionRecord) -> Result<()> {
    if !(0.0..=1.0).contains(&r.score) {
        return Err(Error::Validation(format!(
            "prediction for {:?} has score {} outside [0, 1]",
            r.id, r.score
        )));
    }
    Ok(())
}

/// Reads prediction JSONL and checks score ranges.
pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let records: Vec<PredictionRecord> = io::read_jsonl(path)?;
    records.iter().try_for_each(check_record)?;
    Ok(records)
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>> {
    let records: Vec<PredictionRecord> = io::parse_jsonl(text, "predictions")?;
    records.iter().try_for_each(check_record)?;
    Ok(records)
}

/// Checks that every record resolves to a corpus tweet and that no
/// (id, task, run) triple repeats.
pub fn validate_predictions(records: &[PredictionRecord], corpus: &Corpus) -> Result<()> {
    let ids = corpus.ids();
    let mut seen = HashSet::new();
    for r in records {
        check_record(r)?;
        if !ids.contains(r.id.as_str()) {
            return Err(Error::UnknownId(r.id.clone()));
        }
        if !seen.insert((r.id.as_str(), r.task, r.run_id)) {
            return Err(Error::DuplicateId(format!("{} (task {}, run {})", r.id, r.task, r.run_id)));
        }
    }
    Ok(())
}

/// Load and validate external predictions against a target corpus.
pub fn load_external_predictions(path: &Path, corpus: &Corpus) -> Result<Vec<PredictionRecord>> {
    let records = load_predictions(path)?;
    validate_predictions(&records, corpus)?;
    Ok(records)
}

pub fn run_ids(records: &[PredictionRecord]) -> Vec<u32> {
    let mut ids: Vec<u32> = records.iter().map(|r| r.run_id).collect();
    ids.sort_unstable();
    ids.dedup();
    ids
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexicon::Lexicon;
    use crate::matcher::Matcher;

    fn tweet(id: &str, text: &str, mis: bool, split: Split) -> AnnotatedTweet {
        AnnotatedTweet {
            id: id.into(),
            text: text.into(),
            target_word: None,
            pejorative: Some(mis),
            misogynous: Some(mis),
            split,
        }
    }

    /// 20 tweets, positive iff they contain the marker word "zzkk".
    fn separable() -> Corpus {
        let fillers = ["oggi", "piove", "andiamo", "mare", "tutti", "sole", "bella", "giornata", "sera", "casa"];
        let tweets = (0..20)
            .map(|i| {
                let pos = i % 2 == 0;
                let mut text = format!("{} {} {}", fillers[i % 10], fillers[(i * 3 + 1) % 10], fillers[(i * 7 + 2) % 10]);
                if pos {
                    text.push_str(" zzkk");
                }
                tweet(&format!("s{i}"), &text, pos, Split::Train)
            })
            .collect();
        Corpus::new(tweets)
    }

    #[test]
    fn separable_corpus_is_fit_exactly() {
        let corpus = separable();
        let model = train_baseline(&corpus, &BTreeMap::new(), Task::Mis, Hyperparams::default(), 13).unwrap();
        let preds = predict(&model, &corpus, &BTreeMap::new(), 0);
        for (p, t) in preds.iter().zip(&corpus.tweets) {
            assert_eq!(Some(p.label), t.misogynous, "{}", t.text);
        }
    }

    #[test]
    fn flipping_marker_flips_label() {
        let corpus = separable();
        let model = train_baseline(&corpus, &BTreeMap::new(), Task::Mis, Hyperparams::default(), 42).unwrap();
        assert!(decide(model.score("oggi piove mare zzkk")));
        assert!(!decide(model.score("oggi piove mare")));
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = separable();
        let a = train_baseline(&corpus, &BTreeMap::new(), Task::Mis, Hyperparams::default(), 7).unwrap();
        let b = train_baseline(&corpus, &BTreeMap::new(), Task::Mis, Hyperparams::default(), 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_and_unlabelled_training() {
        let empty = Corpus::new(vec![tweet("1", "x", true, Split::Test)]);
        assert!(matches!(
            train_baseline(&empty, &BTreeMap::new(), Task::Mis, Hyperparams::default(), 1),
            Err(Error::Training(_))
        ));
        let mut t = tweet("1", "x", true, Split::Train);
        t.pejorative = None;
        assert!(matches!(
            train_baseline(&Corpus::new(vec![t]), &BTreeMap::new(), Task::Pej, Hyperparams::default(), 1),
            Err(Error::Schema { .. })
        ));
    }

    #[test]
    fn identical_texts_identical_scores() {
        let model = train_baseline(&separable(), &BTreeMap::new(), Task::Mis, Hyperparams::default(), 1).unwrap();
        let corpus = Corpus::new((0..5).map(|i| tweet(&i.to_string(), "stesso testo", false, Split::Test)).collect());
        let preds = predict(&model, &corpus, &BTreeMap::new(), 0);
        assert!(preds.windows(2).all(|w| w[0].score == w[1].score));
    }

    #[test]
    fn pej_input_marks_focus_word() {
        let lex = Lexicon::bundled();
        let mut t = tweet("1", "è una cagna e un'oca", true, Split::Train);
        t.target_word = Some("oca".into());
        let spans = Matcher::default().find_matches("1", &t.text, &lex);
        assert_eq!(model_input(Task::Pej, &t, &spans), "è una cagna e un'⟦oca⟧");
        assert_eq!(model_input(Task::Mis, &t, &spans), t.text);
    }

    #[test]
    fn threshold_ties_go_negative() {
        assert!(!decide(0.5));
        assert!(decide(0.5000001));
    }

    #[test]
    fn zero_weight_symmetric_batch_has_zero_gradient() {
        let hp = Hyperparams {
            hash_bits: 3,
            ..Hyperparams::default()
        };
        let model = BaselineModel::zeros(Task::Mis, hp, 0);
        let x: SparseVec = vec![(1, 0.6), (4, 0.8)];
        let batch = vec![
            Example {
                features: x.clone(),
                target: 1.0,
            },
            Example {
                features: x,
                target: 0.0,
            },
        ];
        assert!(loss_gradient(&model, &batch).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn saturated_example_leaves_only_regularisation() {
        let hp = Hyperparams {
            hash_bits: 3,
            l2: 0.1,
            ..Hyperparams::default()
        };
        let mut model = BaselineModel::zeros(Task::Mis, hp, 0);
        model.weights = vec![0.0, 50.0, -0.5, 0.25, 0.0, 0.0, 1.5, 0.0];
        // logit = 50 -> sigmoid(50) == 1.0 in f64, so the data term vanishes
        let batch = vec![Example {
            features: vec![(1, 1.0)],
            target: 1.0,
        }];
        let grad = loss_gradient(&model, &batch);
        for (g, w) in grad.iter().zip(&model.weights) {
            assert_eq!(*g, 0.1 * w);
        }
        assert_eq!(grad[8], 0.0);
    }

    #[test]
    fn full_batch_training_equals_dense_gradient_steps() {
        let hp = Hyperparams {
            epochs: 3,
            batch_size: 64,
            l2: 0.05,
            learning_rate: 0.7,
            ..Hyperparams::default()
        };
        let examples: Vec<Example> = separable()
            .tweets
            .iter()
            .map(|t| Example {
                features: featurize(&t.text, &hp),
                target: if t.misogynous == Some(true) { 1.0 } else { 0.0 },
            })
            .collect();
        let trained = train_examples(&examples, Task::Mis, hp, 5).unwrap();
        let mut dense = BaselineModel::zeros(Task::Mis, hp, 5);
        for _ in 0..hp.epochs {
            let grad = loss_gradient(&dense, &examples);
            let dim = dense.weights.len();
            for (w, g) in dense.weights.iter_mut().zip(&grad) {
                *w -= hp.learning_rate * g;
            }
            dense.bias -= hp.learning_rate * grad[dim];
        }
        assert!((trained.bias - dense.bias).abs() < 1e-12);
        for (a, b) in trained.weights.iter().zip(&dense.weights) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let model = train_baseline(&separable(), &BTreeMap::new(), Task::Mis, Hyperparams::default(), 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        model.save(&path).unwrap();
        assert_eq!(BaselineModel::load(&path).unwrap(), model);
    }

    #[test]
    fn prediction_validation() {
        let bad = r#"{"id":"1","task":"pej","label":true,"score":1.3,"run_id":0}"#;
        assert!(matches!(parse_predictions(bad), Err(Error::Validation(_))));
        let ok = r#"{"id":"nope","task":"pej","label":true,"score":0.7,"run_id":0}"#;
        let recs = parse_predictions(ok).unwrap();
        let corpus = Corpus::new(vec![tweet("1", "x", true, Split::Test)]);
        assert!(matches!(validate_predictions(&recs, &corpus), Err(Error::UnknownId(_))));
    }

    #[test]
    fn featurize_is_normalised() {
        let f = featurize("Sei una balena", &Hyperparams::default());
        let norm: f64 = f.iter().map(|(_, v)| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        assert!(f.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(featurize("", &Hyperparams { ngram_min: 3, ..Hyperparams::default() }).is_empty());
    }
}
