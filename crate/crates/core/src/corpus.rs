//! Annotated tweet corpora, their statistics and agreement coefficients.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::lexicon::Lexicon;
use crate::matcher::{MatchSpan, Matcher};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub const ALL: [Split; 2] = [Split::Train, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which labels a corpus file is expected to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusSchema {
    /// Word-level pejorativity and sentence-level misogyny on every record.
    #[default]
    Pejorativity,
    /// Sentence-level misogyny only.
    Ami,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedTweet {
    pub id: String,
    pub text: String,
    pub target_word: Option<String>,
    pub pejorative: Option<bool>,
    pub misogynous: Option<bool>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Corpus {
    pub tweets: Vec<AnnotatedTweet>,
}

impl Corpus {
    pub fn new(tweets: Vec<AnnotatedTweet>) -> Self {
        Corpus { tweets }
    }

    /// Loads a JSONL corpus and validates it against `schema` and `lexicon`.
    pub fn load(path: &Path, schema: CorpusSchema, lexicon: &Lexicon) -> Result<Self> {
        let tweets: Vec<AnnotatedTweet> = io::read_jsonl(path)?;
        let corpus = Corpus { tweets };
        corpus.validate(schema, lexicon)?;
        Ok(corpus)
    }

    pub fn parse(text: &str, schema: CorpusSchema, lexicon: &Lexicon) -> Result<Self> {
        let corpus = Corpus {
            tweets: io::parse_jsonl(text, "corpus")?,
        };
        corpus.validate(schema, lexicon)?;
        Ok(corpus)
    }

    pub fn validate(&self, schema: CorpusSchema, lexicon: &Lexicon) -> Result<()> {
        let mut ids = HashSet::new();
        for t in &self.tweets {
            let violation = |message: &str| Error::Schema {
                id: t.id.clone(),
                message: message.to_string(),
            };
            if !ids.insert(t.id.as_str()) {
                return Err(Error::DuplicateId(t.id.clone()));
            }
            if t.text.is_empty() {
                return Err(violation("empty text"));
            }
            if let Some(word) = &t.target_word {
                if !lexicon.contains(word) {
                    return Err(violation(&format!("target_word {word:?} is not a lexicon headword")));
                }
            }
            if t.misogynous.is_none() {
                return Err(violation("missing misogynous label"));
            }
            match schema {
                CorpusSchema::Pejorativity if t.pejorative.is_none() => {
                    return Err(violation("missing pejorative label"))
                }
                CorpusSchema::Ami if t.pejorative.is_some() => {
                    return Err(violation("AMI-style records carry no pejorative label"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        io::to_jsonl(&self.tweets)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_jsonl(path, &self.tweets)
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &AnnotatedTweet> {
        self.tweets.iter().filter(move |t| t.split == split)
    }

    pub fn split_corpus(&self, split: Split) -> Corpus {
        Corpus::new(self.split(split).cloned().collect())
    }

    pub fn get(&self, id: &str) -> Option<&AnnotatedTweet> {
        self.tweets.iter().find(|t| t.id == id)
    }

    pub fn ids(&self) -> BTreeSet<&str> {
        self.tweets.iter().map(|t| t.id.as_str()).collect()
    }
}

/// 2x2 table of misogyny against pejorativity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// misogynous and pejorative
    pub a: u64,
    /// misogynous, not pejorative
    pub b: u64,
    /// not misogynous, pejorative
    pub c: u64,
    /// neither
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ContingencyTable { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn add(&mut self, misogynous: bool, pejorative: bool) {
        match (misogynous, pejorative) {
            (true, true) => self.a += 1,
            (true, false) => self.b += 1,
            (false, true) => self.c += 1,
            (false, false) => self.d += 1,
        }
    }

    /// Pearson correlation of the two binary labels (the phi coefficient).
    pub fn phi(&self) -> Result<f64> {
        let (a, b, c, d) = (self.a as f64, self.b as f64, self.c as f64, self.d as f64);
        let marginals = [a + b, c + d, a + c, b + d];
        if marginals.contains(&0.0) {
            return Err(Error::Degenerate(format!(
                "phi undefined: zero marginal in {self:?}"
            )));
        }
        let denom = marginals.iter().product::<f64>().sqrt();
        Ok(((a * d - b * c) / denom).clamp(-1.0, 1.0))
    }
}

impl std::ops::Add for ContingencyTable {
    type Output = ContingencyTable;

    fn add(self, o: Self) -> Self {
        ContingencyTable::new(self.a + o.a, self.b + o.b, self.c + o.c, self.d + o.d)
    }
}

pub fn phi_correlation(table: &ContingencyTable) -> Result<f64> {
    table.phi()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitStats {
    pub table: ContingencyTable,
    /// Records without a pejorativity label (AMI-style), by misogyny label.
    pub misogynous_unlabeled: u64,
    pub not_misogynous_unlabeled: u64,
}

impl SplitStats {
    pub fn misogynous(&self) -> u64 {
        self.table.a + self.table.b + self.misogynous_unlabeled
    }

    pub fn not_misogynous(&self) -> u64 {
        self.table.c + self.table.d + self.not_misogynous_unlabeled
    }

    pub fn total(&self) -> u64 {
        self.misogynous() + self.not_misogynous()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsReport {
    pub per_split: BTreeMap<Split, SplitStats>,
}

impl StatsReport {
    pub fn split(&self, split: Split) -> SplitStats {
        self.per_split.get(&split).copied().unwrap_or_default()
    }

    pub fn totals(&self) -> SplitStats {
        self.per_split.values().fold(SplitStats::default(), |acc, s| SplitStats {
            table: acc.table + s.table,
            misogynous_unlabeled: acc.misogynous_unlabeled + s.misogynous_unlabeled,
            not_misogynous_unlabeled: acc.not_misogynous_unlabeled + s.not_misogynous_unlabeled,
        })
    }

    /// Class breakdown laid out as Training / Test / Total columns.
    pub fn render(&self) -> String {
        let (tr, te, to) = (self.split(Split::Train), self.split(Split::Test), self.totals());
        let cell = |n: u64| if n == 0 { "--".to_string() } else { n.to_string() };
        let rows: Vec<(String, [u64; 3])> = vec![
            ("Misogynous".into(), [tr.misogynous(), te.misogynous(), to.misogynous()]),
            ("  Pejorative".into(), [tr.table.a, te.table.a, to.table.a]),
            ("  Not pejorative".into(), [tr.table.b, te.table.b, to.table.b]),
            ("Non-misogynous".into(), [tr.not_misogynous(), te.not_misogynous(), to.not_misogynous()]),
            ("  Pejorative".into(), [tr.table.c, te.table.c, to.table.c]),
            ("  Not pejorative".into(), [tr.table.d, te.table.d, to.table.d]),
            ("Total".into(), [tr.total(), te.total(), to.total()]),
        ];
        let mut out = format!("{:<18}{:>10}{:>10}{:>10}\n", "Class", "Training", "Test", "Total");
        for (name, v) in rows {
            out.push_str(&format!("{:<18}{:>10}{:>10}{:>10}\n", name, cell(v[0]), cell(v[1]), cell(v[2])));
        }
        out
    }
}

pub fn corpus_stats(corpus: &Corpus) -> StatsReport {
    let mut per_split: BTreeMap<Split, SplitStats> = BTreeMap::new();
    for t in &corpus.tweets {
        let stats = per_split.entry(t.split).or_default();
        let mis = t.misogynous.unwrap_or(false);
        match t.pejorative {
            Some(pej) => stats.table.add(mis, pej),
            None if mis => stats.misogynous_unlabeled += 1,
            None => stats.not_misogynous_unlabeled += 1,
        }
    }
    StatsReport { per_split }
}

/// Labels from several annotators over a set of items. Any subset of
/// (annotator, item) pairs may be labelled.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnnotationSet {
    items: Vec<String>,
    annotators: Vec<String>,
    labels: BTreeMap<(usize, usize), u32>,
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    fn index_of(list: &mut Vec<String>, key: &str) -> usize {
        match list.iter().position(|k| k == key) {
            Some(i) => i,
            None => {
                list.push(key.to_string());
                list.len() - 1
            }
        }
    }

    pub fn declare_annotator(&mut self, annotator: &str) {
        Self::index_of(&mut self.annotators, annotator);
    }

    /// Records a label, declaring the item and annotator on first use.
    pub fn add(&mut self, item: &str, annotator: &str, label: u32) -> Result<()> {
        let i = Self::index_of(&mut self.items, item);
        let a = Self::index_of(&mut self.annotators, annotator);
        if self.labels.insert((a, i), label).is_some() {
            return Err(Error::Validation(format!(
                "annotator {annotator:?} labelled item {item:?} twice"
            )));
        }
        Ok(())
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    /// Labels of one item, in annotator declaration order.
    pub fn item_values(&self, item_idx: usize) -> Vec<u32> {
        (0..self.annotators.len())
            .filter_map(|a| self.labels.get(&(a, item_idx)).copied())
            .collect()
    }

    /// Reads `item_id,annotator_id,task,label` rows, one set per task.
    pub fn load_csv(path: &Path) -> Result<BTreeMap<String, AnnotationSet>> {
        let text = io::read_text(path)?;
        Self::parse_csv(&text, &path.display().to_string())
    }

    pub fn parse_csv(text: &str, origin: &str) -> Result<BTreeMap<String, AnnotationSet>> {
        #[derive(Deserialize)]
        struct Row {
            item_id: String,
            annotator_id: String,
            task: String,
            label: u32,
        }
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut sets: BTreeMap<String, AnnotationSet> = BTreeMap::new();
        for (idx, row) in reader.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::parse(origin, idx + 2, e))?;
            if row.task != "pejorative" && row.task != "misogynous" {
                return Err(Error::parse(origin, idx + 2, format!("unknown task {:?}", row.task)));
            }
            if row.label > 1 {
                return Err(Error::parse(origin, idx + 2, format!("label {} is not 0/1", row.label)));
            }
            sets.entry(row.task)
                .or_default()
                .add(&row.item_id, &row.annotator_id, row.label)?;
        }
        Ok(sets)
    }
}

/// Krippendorff's alpha with the nominal metric, from the coincidence matrix
/// of pairable values. Items labelled by fewer than two annotators are ignored.
pub fn krippendorff_alpha(set: &AnnotationSet) -> Result<f64> {
    if set.annotators().len() < 2 {
        return Err(Error::Precondition("alpha needs at least two annotators".into()));
    }

    let categories: Vec<u32> = set.labels.values().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let k = categories.len();
    let cat = |v: u32| categories.binary_search(&v).expect("known category");

    let mut coincidence = vec![vec![0.0f64; k]; k];
    let mut pairable_items = 0;
    for item in 0..set.items().len() {
        let values = set.item_values(item);
        let m = values.len();
        if m < 2 {
            continue;
        }
        pairable_items += 1;
        let mut counts = vec![0.0f64; k];
        for &v in &values {
            counts[cat(v)] += 1.0;
        }
        let w = 1.0 / (m as f64 - 1.0);
        for c in 0..k {
            for e in 0..k {
                let pairs = if c == e { counts[c] * (counts[c] - 1.0) } else { counts[c] * counts[e] };
                coincidence[c][e] += pairs * w;
            }
        }
    }
    if pairable_items == 0 {
        return Err(Error::Precondition("alpha needs at least one doubly-annotated item".into()));
    }

    let marginals: Vec<f64> = coincidence.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    let mut observed = 0.0;
    let mut expected = 0.0;
    for c in 0..k {
        for e in 0..k {
            if c != e {
                observed += coincidence[c][e];
                expected += marginals[c] * marginals[e];
            }
        }
    }
    let observed = observed / n;
    let expected = expected / (n * (n - 1.0));
    if expected == 0.0 {
        return Err(Error::Degenerate("alpha undefined: every pairable label is identical".into()));
    }
    Ok(1.0 - observed / expected)
}

/// Tweets containing at least one lexicon word, with their match spans.
pub fn match_corpus(corpus: &Corpus, lexicon: &Lexicon, matcher: &Matcher) -> BTreeMap<String, Vec<MatchSpan>> {
    corpus
        .tweets
        .iter()
        .filter_map(|t| {
            let spans = matcher.find_matches(&t.id, &t.text, lexicon);
            (!spans.is_empty()).then(|| (t.id.clone(), spans))
        })
        .collect()
}

/// The epithet subset: tweets with at least one match, order and splits kept.
pub fn filter_epithet_subset(corpus: &Corpus, lexicon: &Lexicon, matcher: &Matcher) -> Corpus {
    Corpus::new(
        corpus
            .tweets
            .iter()
            .filter(|t| !matcher.find_matches(&t.id, &t.text, lexicon).is_empty())
            .cloned()
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tweet(id: &str, text: &str, pej: Option<bool>, mis: Option<bool>, split: Split) -> AnnotatedTweet {
        AnnotatedTweet {
            id: id.into(),
            text: text.into(),
            target_word: None,
            pejorative: pej,
            misogynous: mis,
            split,
        }
    }

    #[test]
    fn phi_reproduces_reported_correlation() {
        let phi = ContingencyTable::new(391, 6, 190, 613).phi().unwrap();
        assert!((phi - 0.70).abs() <= 0.01, "phi = {phi}");
    }

    #[test]
    fn phi_edge_cases() {
        for n in 1..20 {
            assert_eq!(ContingencyTable::new(n, 0, 0, n).phi().unwrap(), 1.0);
            assert_eq!(ContingencyTable::new(n, n, n, n).phi().unwrap(), 0.0);
        }
        assert!(matches!(ContingencyTable::new(3, 4, 0, 0).phi(), Err(Error::Degenerate(_))));
    }

    #[test]
    fn load_rejects_unknown_target_and_missing_labels() {
        let lex = Lexicon::bundled();
        let bad_target = r#"{"id":"1","text":"x","target_word":"balcone","pejorative":true,"misogynous":true,"split":"train"}"#;
        assert!(matches!(
            Corpus::parse(bad_target, CorpusSchema::Pejorativity, &lex),
            Err(Error::Schema { .. })
        ));
        let no_pej = r#"{"id":"1","text":"x","target_word":null,"pejorative":null,"misogynous":true,"split":"train"}"#;
        assert!(Corpus::parse(no_pej, CorpusSchema::Pejorativity, &lex).is_err());
        assert!(Corpus::parse(no_pej, CorpusSchema::Ami, &lex).is_ok());
        let dup = format!("{no_pej}\n{no_pej}\n");
        assert!(matches!(Corpus::parse(&dup, CorpusSchema::Ami, &lex), Err(Error::DuplicateId(_))));
        assert!(matches!(
            Corpus::parse("{not json", CorpusSchema::Ami, &lex),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn empty_corpus_stats() {
        let report = corpus_stats(&Corpus::default());
        assert_eq!(report.totals().table, ContingencyTable::default());
        assert_eq!(report.totals().total(), 0);
    }

    #[test]
    fn stats_count_cells_per_split() {
        let corpus = Corpus::new(vec![
            tweet("1", "a", Some(true), Some(true), Split::Train),
            tweet("2", "b", Some(false), Some(false), Split::Train),
            tweet("3", "c", Some(true), Some(false), Split::Test),
            tweet("4", "d", None, Some(true), Split::Test),
        ]);
        let r = corpus_stats(&corpus);
        assert_eq!(r.split(Split::Train).table, ContingencyTable::new(1, 0, 0, 1));
        assert_eq!(r.split(Split::Test).table, ContingencyTable::new(0, 0, 1, 0));
        assert_eq!(r.split(Split::Test).misogynous(), 1);
        assert_eq!(r.totals().total(), 4);
        assert!(r.render().contains("Not pejorative"));
    }

    #[test]
    fn alpha_perfect_agreement() {
        let mut set = AnnotationSet::new();
        for item in 0..10 {
            for ann in ["a", "b", "c"] {
                set.add(&item.to_string(), ann, (item % 2) as u32).unwrap();
            }
        }
        assert_eq!(krippendorff_alpha(&set).unwrap(), 1.0);
    }

    #[test]
    fn alpha_preconditions() {
        let mut single = AnnotationSet::new();
        single.add("1", "a", 1).unwrap();
        single.add("2", "a", 0).unwrap();
        assert!(matches!(krippendorff_alpha(&single), Err(Error::Precondition(_))));

        let mut constant = AnnotationSet::new();
        for item in ["1", "2"] {
            for ann in ["a", "b"] {
                constant.add(item, ann, 1).unwrap();
            }
        }
        assert!(matches!(krippendorff_alpha(&constant), Err(Error::Degenerate(_))));

        let mut no_pairs = AnnotationSet::new();
        no_pairs.add("1", "a", 1).unwrap();
        no_pairs.add("2", "b", 0).unwrap();
        assert!(matches!(krippendorff_alpha(&no_pairs), Err(Error::Precondition(_))));
    }

    #[test]
    fn alpha_csv_by_task() {
        let csv = "item_id,annotator_id,task,label\n1,a,pejorative,1\n1,b,pejorative,1\n2,a,pejorative,0\n2,b,pejorative,1\n1,a,misogynous,0\n";
        let sets = AnnotationSet::parse_csv(csv, "t").unwrap();
        assert_eq!(sets.len(), 2);
        assert_eq!(sets["pejorative"].items().len(), 2);
        assert!(AnnotationSet::parse_csv("item_id,annotator_id,task,label\n1,a,other,1\n", "t").is_err());
        assert!(AnnotationSet::parse_csv("item_id,annotator_id,task,label\n1,a,pejorative,2\n", "t").is_err());
    }

    #[test]
    fn subset_empty_lexicon() {
        let corpus = Corpus::new(vec![tweet("1", "sei una balena", Some(true), Some(true), Split::Train)]);
        let subset = filter_epithet_subset(&corpus, &Lexicon::empty(), &Matcher::default());
        assert!(subset.is_empty());
        let subset = filter_epithet_subset(&corpus, &Lexicon::bundled(), &Matcher::default());
        assert_eq!(subset.len(), 1);
    }
}
