//! Run configuration and the end-to-end experiment: match, predict
//! connotations, enrich, train and evaluate the misogyny classifier, compare.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{self, Hyperparams, PredictionRecord, Task};
use crate::corpus::{filter_epithet_subset, match_corpus, Corpus, CorpusSchema, Split};
use crate::enrichment::{
    enrich_corpus, gold_assignment, predicted_assignment, AnchorMode, ConnotationAssignment, EnrichedCorpus,
    LabelSource, Strategy,
};
use crate::error::{Error, Result};
use crate::evaluation::{compare_pipelines, evaluate, gold_labels, Approach, ComparisonTable, EvalReport, Subset};
use crate::io;
use crate::lexicon::Lexicon;
use crate::matcher::{LemmatizerConfig, MatchSpan, Matcher};

pub const DATA_DIR_VAR: &str = "PEJ_DATA_DIR";
const DATA_DIR_PREFIX: &str = "${PEJ_DATA_DIR}";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatcherConfig {
    pub max_edit: usize,
    pub lemmatizer: LemmatizerConfig,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            max_edit: 1,
            lemmatizer: LemmatizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Baseline,
    External,
}

/// Where connotation predictions come from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Backend {
    pub kind: BackendKind,
    /// Prediction JSONL for `external`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PathBuf>,
}

/// Fine-tuning settings of the transformer adapter, echoed into manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterEcho {
    pub optimizer: String,
    pub adam_epsilon: f64,
    pub epochs: u32,
    pub batch_size: u32,
}

impl Default for AdapterEcho {
    fn default() -> Self {
        AdapterEcho {
            optimizer: "AdamW".into(),
            adam_epsilon: 1e-8,
            epochs: 4,
            batch_size: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Corpus JSONL. Relative paths resolve against the config file;
    /// a leading `${PEJ_DATA_DIR}` expands to that variable.
    pub corpus: PathBuf,
    pub schema: CorpusSchema,
    /// Corpus with pejorativity labels the baseline `pej` model is trained
    /// on; the main corpus when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pej_corpus: Option<PathBuf>,
    /// Lexicon TSV or JSON; the bundled lexicon when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    pub output: PathBuf,
    pub seeds: Vec<u64>,
    pub strategies: Vec<Strategy>,
    pub sources: Vec<LabelSource>,
    pub anchor_mode: AnchorMode,
    pub matcher: MatcherConfig,
    pub backend: Backend,
    pub baseline: Hyperparams,
    pub adapter: AdapterEcho,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus: PathBuf::from("corpus.jsonl"),
            schema: CorpusSchema::default(),
            pej_corpus: None,
            lexicon: None,
            output: PathBuf::from("runs/default"),
            seeds: vec![13, 42, 2024],
            strategies: vec![Strategy::Concat, Strategy::Subst],
            sources: vec![LabelSource::Gold, LabelSource::Predicted],
            anchor_mode: AnchorMode::default(),
            matcher: MatcherConfig::default(),
            backend: Backend::default(),
            baseline: Hyperparams::default(),
            adapter: AdapterEcho::default(),
        }
    }
}

fn resolve(path: &Path, base: &Path) -> Result<PathBuf> {
    let raw = path.to_string_lossy();
    if let Some(rest) = raw.strip_prefix(DATA_DIR_PREFIX) {
        let dir = std::env::var_os(DATA_DIR_VAR)
            .ok_or_else(|| Error::Config(format!("{raw} needs {DATA_DIR_VAR} to be set")))?;
        return Ok(PathBuf::from(dir).join(rest.trim_start_matches(['/', '\\'])));
    }
    Ok(if path.is_relative() { base.join(path) } else { path.to_path_buf() })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("invalid run config: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    /// Reads a config and resolves its paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let config = Self::from_toml(&io::read_text(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolved(base)
    }

    pub fn resolved(mut self, base: &Path) -> Result<Self> {
        self.corpus = resolve(&self.corpus, base)?;
        self.output = resolve(&self.output, base)?;
        if let Some(p) = &self.lexicon {
            self.lexicon = Some(resolve(p, base)?);
        }
        if let Some(p) = &self.pej_corpus {
            self.pej_corpus = Some(resolve(p, base)?);
        }
        if let Some(p) = &self.backend.predictions {
            self.backend.predictions = Some(resolve(p, base)?);
        }
        if let Some(p) = &self.matcher.lemmatizer.table_path {
            self.matcher.lemmatizer.table_path = Some(resolve(p, base)?);
        }
        Ok(self)
    }

    /// Checks everything that can be checked before reading data.
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.strategies.contains(&Strategy::None) {
            return Err(Error::Config("strategies may only list concat and subst".into()));
        }
        if !self.corpus.is_file() {
            return Err(Error::Config(format!("corpus {} does not exist", self.corpus.display())));
        }
        for (what, path) in [("lexicon", &self.lexicon), ("pej_corpus", &self.pej_corpus)] {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(Error::Config(format!("{what} {} does not exist", p.display())));
                }
            }
        }
        match (self.backend.kind, &self.backend.predictions) {
            (BackendKind::External, None) => {
                return Err(Error::Config("backend external needs backend.predictions".into()))
            }
            (BackendKind::External, Some(p)) if !p.is_file() => {
                return Err(Error::Config(format!("predictions {} do not exist", p.display())))
            }
            _ => {}
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn lexicon(&self) -> Result<Lexicon> {
        match &self.lexicon {
            Some(p) => Lexicon::load(p),
            None => Ok(Lexicon::bundled()),
        }
    }

    pub fn matcher(&self) -> Result<Matcher> {
        Matcher::from_config(&self.matcher.lemmatizer, self.matcher.max_edit)
    }
}

/// Gold assignments for every matched tweet.
pub fn gold_assignments(
    corpus: &Corpus,
    matches: &BTreeMap<String, Vec<MatchSpan>>,
) -> Result<BTreeMap<String, ConnotationAssignment>> {
    corpus
        .tweets
        .iter()
        .filter_map(|t| matches.get(&t.id).map(|spans| (t, spans)))
        .map(|(t, spans)| Ok((t.id.clone(), gold_assignment(t, spans)?)))
        .collect()
}

/// Assignments from `pej` predictions of one run.
pub fn predicted_assignments(
    corpus: &Corpus,
    matches: &BTreeMap<String, Vec<MatchSpan>>,
    preds: &[PredictionRecord],
    run_id: u32,
) -> Result<BTreeMap<String, ConnotationAssignment>> {
    let labels: BTreeMap<&str, bool> = preds
        .iter()
        .filter(|p| p.task == Task::Pej && p.run_id == run_id)
        .map(|p| (p.id.as_str(), p.label))
        .collect();
    let mut out = BTreeMap::new();
    let mut missing = Vec::new();
    for t in &corpus.tweets {
        let Some(spans) = matches.get(&t.id) else { continue };
        match labels.get(t.id.as_str()) {
            Some(&pej) => {
                out.insert(t.id.clone(), predicted_assignment(t, spans, pej));
            }
            None => missing.push(t.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Coverage {
            what: format!("matched tweets without a pej prediction in run {run_id}"),
            missing,
        });
    }
    Ok(out)
}

/// Trains `mis` on the train split of `corpus` and predicts its test split.
pub fn mis_run(corpus: &Corpus, hp: Hyperparams, seed: u64, run_id: u32) -> Result<Vec<PredictionRecord>> {
    let none = BTreeMap::new();
    let model = classifier::train_baseline(corpus, &none, Task::Mis, hp, seed)?;
    Ok(classifier::predict(&model, &corpus.split_corpus(Split::Test), &none, run_id))
}

fn approach_of(strategy: Strategy) -> Approach {
    match strategy {
        Strategy::Concat => Approach::Concat,
        Strategy::Subst => Approach::Subst,
        Strategy::None => Approach::Baseline,
    }
}

fn file_label(approach: Approach, source: Option<LabelSource>) -> String {
    match source {
        Some(s) => format!("{}-{}", approach.as_str(), s.as_str()),
        None => approach.as_str().to_string(),
    }
}

/// Removes the lock file when dropped.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(".lock");
        OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                Error::Config(format!(
                    "output directory {} is locked by another run (remove {} if stale)",
                    dir.display(),
                    path.display()
                ))
            } else {
                Error::io(&path, e)
            }
        })?;
        Ok(OutputLock(path))
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub adapter: AdapterEcho,
    /// SHA-256 of every artifact, keyed by path relative to the output dir.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub reports: Vec<EvalReport>,
    pub whole: ComparisonTable,
    /// Present when some test tweets contain no epithet.
    pub epithets: Option<ComparisonTable>,
}

struct Artifacts {
    dir: PathBuf,
    hashes: BTreeMap<String, String>,
}

impl Artifacts {
    fn write(&mut self, rel: &str, text: &str) -> Result<()> {
        io::write_text(&self.dir.join(rel), text)?;
        self.hashes.insert(rel.to_string(), hex::encode(Sha256::digest(text.as_bytes())));
        Ok(())
    }
}

fn evaluate_subsets(
    gold_sets: &[(Subset, Vec<(String, bool)>)],
    preds: &[PredictionRecord],
    approach: Approach,
    source: Option<LabelSource>,
    reports: &mut Vec<EvalReport>,
) -> Result<()> {
    for (subset, gold) in gold_sets {
        reports.push(evaluate(gold, preds, Task::Mis, approach, source, *subset)?);
    }
    Ok(())
}

/// Runs the whole experiment and writes its artifacts under `config.output`.
pub fn run_pipeline(config: &RunConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let lexicon = config.lexicon()?;
    let matcher = config.matcher()?;
    let corpus = Corpus::load(&config.corpus, config.schema, &lexicon)?;
    let _lock = OutputLock::acquire(&config.output)?;
    let mut out = Artifacts {
        dir: config.output.clone(),
        hashes: BTreeMap::new(),
    };

    let matches = match_corpus(&corpus, &lexicon, &matcher);
    let flat: Vec<&MatchSpan> = corpus
        .tweets
        .iter()
        .filter_map(|t| matches.get(&t.id))
        .flatten()
        .collect();
    out.write("matches.jsonl", &io::to_jsonl(&flat))?;

    let test = corpus.split_corpus(Split::Test);
    let epithet_test = filter_epithet_subset(&test, &lexicon, &matcher);
    let mut gold_sets = vec![(Subset::Whole, gold_labels(&test, None, Task::Mis)?)];
    if epithet_test.len() < test.len() {
        gold_sets.push((Subset::Epithets, gold_labels(&epithet_test, None, Task::Mis)?));
    }
    let runs: Vec<(u32, u64)> = config.seeds.iter().enumerate().map(|(i, &s)| (i as u32, s)).collect();

    let needs_predicted = config.sources.contains(&LabelSource::Predicted) && !config.strategies.is_empty();
    let pej_preds = if !needs_predicted {
        Vec::new()
    } else {
        match config.backend.kind {
            BackendKind::Baseline => {
                let pej_train = match &config.pej_corpus {
                    Some(p) => Corpus::load(p, CorpusSchema::Pejorativity, &lexicon)?,
                    None => corpus.clone(),
                };
                let pej_matches = match_corpus(&pej_train, &lexicon, &matcher);
                let mut preds = Vec::new();
                for &(run_id, seed) in &runs {
                    let model = classifier::train_baseline(&pej_train, &pej_matches, Task::Pej, config.baseline, seed)?;
                    preds.extend(classifier::predict(&model, &corpus, &matches, run_id));
                }
                preds
            }
            BackendKind::External => {
                let path = config.backend.predictions.as_deref().expect("validated");
                let preds = classifier::load_external_predictions(path, &corpus)?;
                let available = classifier::run_ids(&preds);
                let missing: Vec<String> = runs
                    .iter()
                    .filter(|(r, _)| !available.contains(r))
                    .map(|(r, _)| format!("run {r}"))
                    .collect();
                if !missing.is_empty() {
                    return Err(Error::Coverage {
                        what: "external pej predictions".into(),
                        missing,
                    });
                }
                preds
            }
        }
    };
    if needs_predicted {
        out.write("pej_predictions.jsonl", &io::to_jsonl(&pej_preds))?;
    }

    let mut reports = Vec::new();
    let mut baseline = Vec::new();
    for &(run_id, seed) in &runs {
        baseline.extend(mis_run(&corpus, config.baseline, seed, run_id)?);
    }
    out.write("mis_predictions/baseline.jsonl", &io::to_jsonl(&baseline))?;
    evaluate_subsets(&gold_sets, &baseline, Approach::Baseline, None, &mut reports)?;

    let gold = gold_assignments(&corpus, &matches)?;
    for &strategy in &config.strategies {
        let approach = approach_of(strategy);
        for &source in &config.sources {
            let label = file_label(approach, Some(source));
            let mut preds = Vec::new();
            let mut gold_enriched: Option<EnrichedCorpus> = None;
            for &(run_id, seed) in &runs {
                let enriched = match source {
                    LabelSource::Gold => match &gold_enriched {
                        Some(e) => e.clone(),
                        None => {
                            let e = enrich_corpus(
                                &corpus,
                                &matches,
                                &gold,
                                strategy,
                                source,
                                &lexicon,
                                config.anchor_mode,
                            )?;
                            out.write(&format!("enriched/{label}.jsonl"), &e.to_jsonl())?;
                            gold_enriched = Some(e.clone());
                            e
                        }
                    },
                    LabelSource::Predicted => {
                        let assignments = predicted_assignments(&corpus, &matches, &pej_preds, run_id)?;
                        let e = enrich_corpus(
                            &corpus,
                            &matches,
                            &assignments,
                            strategy,
                            source,
                            &lexicon,
                            config.anchor_mode,
                        )?;
                        out.write(&format!("enriched/{label}-run{run_id}.jsonl"), &e.to_jsonl())?;
                        e
                    }
                };
                preds.extend(mis_run(&enriched.corpus(), config.baseline, seed, run_id)?);
            }
            out.write(&format!("mis_predictions/{label}.jsonl"), &io::to_jsonl(&preds))?;
            evaluate_subsets(&gold_sets, &preds, approach, Some(source), &mut reports)?;
        }
    }

    let pick = |subset: Subset| reports.iter().filter(|r| r.subset == subset).cloned().collect::<Vec<_>>();
    let whole = compare_pipelines(pick(Subset::Whole))?;
    let epithets = if gold_sets.len() > 1 {
        Some(compare_pipelines(pick(Subset::Epithets))?)
    } else {
        None
    };
    out.write("reports.json", &(serde_json::to_string_pretty(&reports).expect("reports serialize") + "\n"))?;
    out.write("comparison.txt", &whole.render_text())?;
    out.write("comparison.csv", &whole.render_csv())?;
    if let Some(t) = &epithets {
        out.write("comparison_epithets.txt", &t.render_text())?;
        out.write("comparison_epithets.csv", &t.render_csv())?;
    }
    out.write("config.toml", &config.to_toml())?;

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config.hash(),
        seeds: config.seeds.clone(),
        adapter: config.adapter.clone(),
        artifacts: out.hashes,
    };
    io::write_json(&config.output.join("manifest.json"), &manifest)?;
    Ok(PipelineOutcome {
        reports,
        whole,
        epithets,
    })
}
