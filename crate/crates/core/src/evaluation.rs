//! Binary classification metrics, multi-run aggregation and comparison tables.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::classifier::{PredictionRecord, Task};
use crate::corpus::{Corpus, Split};
use crate::enrichment::LabelSource;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn add(&mut self, gold: bool, pred: bool) {
        match (gold, pred) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    /// The same counts seen from the negative class.
    pub fn flipped(&self) -> Self {
        ConfusionCounts {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }
}

/// Gold labels of one split, in corpus order.
pub fn gold_labels(corpus: &Corpus, split: Option<Split>, task: Task) -> Result<Vec<(String, bool)>> {
    corpus
        .tweets
        .iter()
        .filter(|t| split.is_none_or(|s| t.split == s))
        .map(|t| {
            task.gold(t).map(|g| (t.id.clone(), g)).ok_or_else(|| Error::Schema {
                id: t.id.clone(),
                message: format!("no gold {task} label"),
            })
        })
        .collect()
}

/// Confusion counts of one run. Predictions for ids outside `gold` are ignored.
pub fn confusion(gold: &[(String, bool)], preds: &[PredictionRecord]) -> Result<ConfusionCounts> {
    let mut by_id: HashMap<&str, bool> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_id.insert(p.id.as_str(), p.label).is_some() {
            return Err(Error::DuplicateId(p.id.clone()));
        }
    }
    let mut counts = ConfusionCounts::default();
    let mut missing = Vec::new();
    for (id, g) in gold {
        match by_id.get(id.as_str()) {
            Some(&p) => counts.add(*g, p),
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Coverage {
            what: "gold items without a prediction".into(),
            missing,
        });
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassF1 {
    pub f1: f64,
    /// The class had neither gold nor predicted instances; F1 set to 0.
    pub undefined: bool,
}

/// F1 of the class counted as positive in `c`.
pub fn f1_score(c: &ConfusionCounts) -> ClassF1 {
    if c.tp + c.fp == 0 && c.tp + c.fn_ == 0 {
        return ClassF1 { f1: 0.0, undefined: true };
    }
    let precision = if c.tp + c.fp == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fp) as f64 };
    let recall = if c.tp + c.fn_ == 0 { 0.0 } else { c.tp as f64 / (c.tp + c.fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassF1 { f1, undefined: false }
}

/// (positive-class F1, negative-class F1).
pub fn f1_per_class(c: &ConfusionCounts) -> (ClassF1, ClassF1) {
    (f1_score(c), f1_score(&c.flipped()))
}

pub fn macro_f1(c: &ConfusionCounts) -> f64 {
    let (pos, neg) = f1_per_class(c);
    (pos.f1 + neg.f1) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_id: u32,
    pub counts: ConfusionCounts,
    pub f1_pos: f64,
    pub f1_neg: f64,
    pub macro_f1: f64,
    /// Classes whose F1 fell back to the zero-division convention.
    pub undefined_classes: Vec<String>,
}

pub fn evaluate_run(gold: &[(String, bool)], preds: &[PredictionRecord], run_id: u32) -> Result<RunMetrics> {
    let run_preds: Vec<PredictionRecord> = preds.iter().filter(|p| p.run_id == run_id).cloned().collect();
    let counts = confusion(gold, &run_preds)?;
    let (pos, neg) = f1_per_class(&counts);
    let mut undefined_classes = Vec::new();
    if pos.undefined {
        undefined_classes.push("positive".to_string());
    }
    if neg.undefined {
        undefined_classes.push("negative".to_string());
    }
    Ok(RunMetrics {
        run_id,
        counts,
        f1_pos: pos.f1,
        f1_neg: neg.f1,
        macro_f1: (pos.f1 + neg.f1) / 2.0,
        undefined_classes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Approach {
    Baseline,
    Concat,
    Subst,
}

impl Approach {
    pub fn as_str(self) -> &'static str {
        match self {
            Approach::Baseline => "baseline",
            Approach::Concat => "concat",
            Approach::Subst => "subst",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    #[default]
    Whole,
    Epithets,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Whole => "whole",
            Subset::Epithets => "epithets",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub approach: Approach,
    /// `None` for the baseline, which uses no connotation labels.
    pub source: Option<LabelSource>,
    pub subset: Subset,
    pub f1_pos: MeanStd,
    pub f1_neg: MeanStd,
    pub macro_f1: MeanStd,
    pub fp: MeanStd,
    pub runs: Vec<RunMetrics>,
}

impl EvalReport {
    pub fn label(&self) -> String {
        match (self.approach, self.source) {
            (Approach::Baseline, _) | (_, None) => self.approach.as_str().to_string(),
            (a, Some(s)) => format!("{} w/ {}", a.as_str(), s.as_str()),
        }
    }

    fn sort_key(&self) -> (Approach, Option<LabelSource>) {
        (self.approach, self.source)
    }
}

pub fn aggregate_runs(
    task: Task,
    approach: Approach,
    source: Option<LabelSource>,
    subset: Subset,
    runs: Vec<RunMetrics>,
) -> Result<EvalReport> {
    if runs.is_empty() {
        return Err(Error::Precondition("aggregate_runs needs at least one run".into()));
    }
    let collect = |f: fn(&RunMetrics) -> f64| MeanStd::of(&runs.iter().map(f).collect::<Vec<_>>());
    Ok(EvalReport {
        task,
        approach,
        source,
        subset,
        f1_pos: collect(|r| r.f1_pos),
        f1_neg: collect(|r| r.f1_neg),
        macro_f1: collect(|r| r.macro_f1),
        fp: collect(|r| r.counts.fp as f64),
        runs,
    })
}

/// Evaluates every run present in `preds` against `gold` and aggregates.
pub fn evaluate(
    gold: &[(String, bool)],
    preds: &[PredictionRecord],
    task: Task,
    approach: Approach,
    source: Option<LabelSource>,
    subset: Subset,
) -> Result<EvalReport> {
    let run_ids = crate::classifier::run_ids(preds);
    let runs = run_ids
        .into_iter()
        .map(|r| evaluate_run(gold, preds, r))
        .collect::<Result<Vec<_>>>()?;
    aggregate_runs(task, approach, source, subset, runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub task: Task,
    pub subset: Subset,
    pub rows: Vec<EvalReport>,
}

pub fn compare_pipelines(mut reports: Vec<EvalReport>) -> Result<ComparisonTable> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Precondition("nothing to compare".into()))?;
    let (task, subset) = (first.task, first.subset);
    if let Some(odd) = reports.iter().find(|r| r.task != task || r.subset != subset) {
        return Err(Error::Validation(format!(
            "cannot compare {}/{} with {}/{}",
            task, subset, odd.task, odd.subset
        )));
    }
    reports.sort_by_key(EvalReport::sort_key);
    Ok(ComparisonTable {
        task,
        subset,
        rows: reports,
    })
}

impl ComparisonTable {
    fn class_names(&self) -> (&'static str, &'static str) {
        match self.task {
            Task::Mis => ("Mis.", "Not"),
            Task::Pej => ("Pej.", "Neu."),
        }
    }

    pub fn render_text(&self) -> String {
        let (pos, neg) = self.class_names();
        let width = self.rows.iter().map(|r| r.label().len()).max().unwrap_or(0).max(8) + 2;
        let cell = |m: &MeanStd| format!("{:.2} ± {:.2}", m.mean, m.std);
        let mut out = format!("task: {}  subset: {}\n", self.task, self.subset);
        out.push_str(&format!(
            "{:<width$}{:>14}{:>14}{:>14}{:>10}\n",
            "Approach", "Macro", pos, neg, "FP"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:<width$}{:>14}{:>14}{:>14}{:>10}\n",
                r.label(),
                cell(&r.macro_f1),
                cell(&r.f1_pos),
                cell(&r.f1_neg),
                format!("{:.1}", r.fp.mean)
            ));
        }
        out
    }

    pub fn render_csv(&self) -> String {
        let mut out = String::from(
            "task,subset,approach,source,macro_f1,macro_f1_std,f1_pos,f1_pos_std,f1_neg,f1_neg_std,fp,fp_std,runs\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3},{:.3},{}\n",
                r.task,
                r.subset,
                r.approach.as_str(),
                r.source.map_or("n/a", LabelSource::as_str),
                r.macro_f1.mean,
                r.macro_f1.std,
                r.f1_pos.mean,
                r.f1_pos.std,
                r.f1_neg.mean,
                r.f1_neg.std,
                r.fp.mean,
                r.fp.std,
                r.runs.len()
            ));
        }
        out
    }

    pub fn get(&self, approach: Approach, source: Option<LabelSource>) -> Option<&EvalReport> {
        self.rows.iter().find(|r| r.approach == approach && r.source == source)
    }
}

/// Per-run false positive counts of each row, keyed by row label.
pub fn false_positive_table(table: &ComparisonTable) -> BTreeMap<String, Vec<u64>> {
    table
        .rows
        .iter()
        .map(|r| (r.label(), r.runs.iter().map(|m| m.counts.fp).collect()))
        .collect()
}
