#![allow(dead_code)]

use std::path::{Path, PathBuf};

use pejkit::classifier::{loss, loss_gradient, BaselineModel, Example, Hyperparams, Task};
use pejkit::corpus::AnnotationSet;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

/// Per-class F1 by set overlap: 2|G∩P| / (|G| + |P|), 0 when both are empty.
pub fn brute_f1(gold: &[bool], pred: &[bool], class: bool) -> f64 {
    let g = gold.iter().filter(|&&x| x == class).count();
    let p = pred.iter().filter(|&&x| x == class).count();
    let both = gold.iter().zip(pred).filter(|(&a, &b)| a == class && b == class).count();
    if g + p == 0 {
        0.0
    } else {
        2.0 * both as f64 / (g + p) as f64
    }
}

pub fn brute_macro(gold: &[bool], pred: &[bool]) -> f64 {
    (brute_f1(gold, pred, true) + brute_f1(gold, pred, false)) / 2.0
}

/// Alpha from explicit ordered value pairs: within-unit pairs weighted by
/// 1/(m-1) for observed disagreement, all cross pairs of pairable values for
/// the expected one.
pub fn pairwise_alpha(units: &[Vec<u32>]) -> f64 {
    let pairable: Vec<&Vec<u32>> = units.iter().filter(|u| u.len() >= 2).collect();
    let values: Vec<u32> = pairable.iter().flat_map(|u| u.iter().copied()).collect();
    let n = values.len() as f64;
    let mut d_o = 0.0;
    for u in &pairable {
        let m = u.len() as f64;
        for i in 0..u.len() {
            for j in 0..u.len() {
                if i != j && u[i] != u[j] {
                    d_o += 1.0 / (m - 1.0);
                }
            }
        }
    }
    d_o /= n;
    let mut d_e = 0.0;
    for i in 0..values.len() {
        for j in 0..values.len() {
            if i != j && values[i] != values[j] {
                d_e += 1.0;
            }
        }
    }
    d_e /= n * (n - 1.0);
    1.0 - d_o / d_e
}

/// Builds a set from a units x annotators grid; `None` is a missing label.
pub fn annotation_set(grid: &[Vec<Option<u32>>], annotator_order: &[usize]) -> AnnotationSet {
    let mut set = AnnotationSet::new();
    for &a in annotator_order {
        set.declare_annotator(&format!("a{a}"));
    }
    for (i, row) in grid.iter().enumerate() {
        for &a in annotator_order {
            if let Some(v) = row[a] {
                set.add(&format!("u{i}"), &format!("a{a}"), v).unwrap();
            }
        }
    }
    set
}

pub fn grid_units(grid: &[Vec<Option<u32>>]) -> Vec<Vec<u32>> {
    grid.iter().map(|row| row.iter().flatten().copied().collect()).collect()
}

/// Max relative error between the analytic gradient and central differences
/// on a random small model and batch.
pub fn gradient_check_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hp = Hyperparams {
        hash_bits: 5,
        l2: rng.gen_range(0.0..0.5),
        ..Hyperparams::default()
    };
    let dim = hp.dim();
    let mut model = BaselineModel::zeros(Task::Mis, hp, seed);
    for w in &mut model.weights {
        *w = rng.gen_range(-2.0..2.0);
    }
    model.bias = rng.gen_range(-1.0..1.0);
    let batch: Vec<Example> = (0..rng.gen_range(1..8))
        .map(|_| {
            let mut idx: Vec<u32> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0..dim as u32)).collect();
            idx.sort_unstable();
            idx.dedup();
            Example {
                features: idx.into_iter().map(|i| (i, rng.gen_range(-1.0..1.0))).collect(),
                target: if rng.gen_bool(0.5) { 1.0 } else { 0.0 },
            }
        })
        .collect();

    let analytic = loss_gradient(&model, &batch);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for k in 0..=dim {
        let mut plus = model.clone();
        let mut minus = model.clone();
        if k == dim {
            plus.bias += h;
            minus.bias -= h;
        } else {
            plus.weights[k] += h;
            minus.weights[k] -= h;
        }
        let numeric = (loss(&plus, &batch) - loss(&minus, &batch)) / (2.0 * h);
        let scale = analytic[k].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic[k] - numeric).abs() / scale);
    }
    worst
}

pub const FILLERS: &[&str] = &[
    "oggi", "che", "bella", "giornata", "ma", "dai", "sempre", "lei", "tutti", "andiamo", "sera", "piove", "mare", "casa",
    "perché", "così", "già", "però", "🙄", "😂", "#sabato", "@utente",
];

pub const EPITHET_FORMS: &[&str] = &[
    "balena", "Balena", "BALENE", "cagna", "cagne", "oca", "oche", "vacca", "vacche", "acida", "acide", "strega",
    "streghe", "cozza", "cozze", "cesso", "femminista", "lurida", "lesbica", "lesbiche", "gallina", "galline", "zingara",
];

pub const SEPARATORS: &[&str] = &[" ", " ", " ", ", ", "! ", "... ", " - ", "\n", "'"];

/// Tweet text assembled from filler words, lexicon forms and separators.
pub fn tweet_text(with_epithets: bool) -> impl Strategy<Value = String> {
    let word = if with_epithets {
        prop_oneof![
            2 => proptest::sample::select(FILLERS),
            1 => proptest::sample::select(EPITHET_FORMS),
        ]
        .boxed()
    } else {
        proptest::sample::select(FILLERS).boxed()
    };
    proptest::collection::vec((word, proptest::sample::select(SEPARATORS)), 1..12).prop_map(|parts| {
        let mut text = String::new();
        for (i, (w, sep)) in parts.iter().enumerate() {
            if i > 0 {
                text.push_str(sep);
            }
            text.push_str(w);
        }
        text
    })
}
