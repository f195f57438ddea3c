use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pejkit::classifier::{self, BaselineModel, Hyperparams, Task};
use pejkit::corpus::{self, AnnotationSet, Corpus, CorpusSchema, Split};
use pejkit::embedding;
use pejkit::enrichment::{enrich_corpus, AnchorMode, LabelSource, Strategy};
use pejkit::evaluation::{self, Approach, EvalReport, Subset};
use pejkit::io;
use pejkit::lexicon::Lexicon;
use pejkit::llm::{self, GenerationConfig, PromptBatch};
use pejkit::matcher::{LemmaMode, LemmatizerConfig, Matcher};
use pejkit::pipeline::{self, RunConfig};

#[derive(Parser)]
#[command(name = "pejkit", version, about = "Pejorative epithet disambiguation for misogyny detection")]
struct Cli {
    /// Output format for tables.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,

    /// Print the default run configuration and exit.
    #[arg(long)]
    print_config: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Lexicon checks.
    Lexicon {
        #[command(subcommand)]
        command: LexiconCommand,
    },
    /// Corpus statistics, agreement and subsets.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Find lexicon epithets in a corpus.
    Match {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inject connotation information into matched tweets.
    Enrich {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long, value_enum, default_value_t = SourceArg::Gold)]
        source: SourceArg,
        /// pej predictions, required with `--source predicted`.
        #[arg(long)]
        predictions: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        run_id: u32,
        #[arg(long, value_enum, default_value_t = AnchorArg::All)]
        anchor_mode: AnchorArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the baseline classifier on the train split.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, default_value_t = 13)]
        seed: u64,
        /// Run config whose `[baseline]` table supplies hyperparameters.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a corpus with a trained baseline.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = SplitArg::Test)]
        split: SplitArg,
        #[arg(long, default_value_t = 0)]
        run_id: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate predictions against gold labels of the test split.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long, value_enum, default_value_t = ApproachArg::Baseline)]
        approach: ApproachArg,
        #[arg(long, value_enum)]
        source: Option<SourceArg>,
        /// Restrict to test tweets containing a lexicon epithet.
        #[arg(long)]
        epithets: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a comparison table from evaluation reports.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Cosine similarity between epithet occurrences and sense anchors.
    EmbedAnalyze {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        embeddings: PathBuf,
        /// Print anchor corpus frequencies instead.
        #[arg(long)]
        frequencies: bool,
    },
    /// LLM prompt batches.
    Prompts {
        #[command(subcommand)]
        command: PromptsCommand,
    },
    /// End-to-end experiment from a TOML run config.
    Pipeline {
        #[command(subcommand)]
        command: PipelineCommand,
    },
}

#[derive(Subcommand)]
enum LexiconCommand {
    /// Check a lexicon file (the bundled one by default).
    Validate {
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Class breakdown and phi correlation per split.
    Stats {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Krippendorff's alpha per task from `item_id,annotator_id,task,label` rows.
    Agreement { annotations: PathBuf },
    /// Keep only tweets containing a lexicon epithet.
    Subset {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum PromptsCommand {
    /// Write one prompt per matched test tweet.
    Export {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Join model responses to an exported batch and print a review table.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        batch: PathBuf,
        #[arg(long)]
        responses: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum PipelineCommand {
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Corpus JSONL (enriched corpora are accepted too).
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum, default_value_t = SchemaArg::Pejorativity)]
    schema: SchemaArg,
    /// Lexicon TSV or JSON; bundled when omitted.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LemmaArg::SuffixRules)]
    lemma_mode: LemmaArg,
    /// form<TAB>lemma table for `--lemma-mode external-table`.
    #[arg(long)]
    lemma_table: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    max_edit: usize,
}

struct Data {
    lexicon: Lexicon,
    matcher: Matcher,
    corpus: Corpus,
}

impl DataArgs {
    fn load(&self) -> Result<Data> {
        let lexicon = match &self.lexicon {
            Some(p) => Lexicon::load(p)?,
            None => Lexicon::bundled(),
        };
        let config = LemmatizerConfig {
            mode: match self.lemma_mode {
                LemmaArg::SuffixRules => LemmaMode::SuffixRules,
                LemmaArg::ExternalTable => LemmaMode::ExternalTable,
                LemmaArg::None => LemmaMode::None,
            },
            table_path: self.lemma_table.clone(),
        };
        let matcher = Matcher::from_config(&config, self.max_edit)?;
        let schema = match self.schema {
            SchemaArg::Pejorativity => CorpusSchema::Pejorativity,
            SchemaArg::Ami => CorpusSchema::Ami,
        };
        let corpus = Corpus::load(&self.corpus, schema, &lexicon)?;
        Ok(Data {
            lexicon,
            matcher,
            corpus,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaArg {
    Pejorativity,
    Ami,
}

#[derive(Clone, Copy, ValueEnum)]
enum LemmaArg {
    SuffixRules,
    ExternalTable,
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Concat,
    Subst,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Gold,
    Predicted,
}

impl From<SourceArg> for LabelSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Gold => LabelSource::Gold,
            SourceArg::Predicted => LabelSource::Predicted,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AnchorArg {
    All,
    First,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Pej,
    Mis,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Pej => Task::Pej,
            TaskArg::Mis => Task::Mis,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ApproachArg {
    Baseline,
    Concat,
    Subst,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => io::write_text(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn stats_csv(report: &corpus::StatsReport) -> String {
    let mut out = String::from("split,mis_pej,mis_not_pej,not_mis_pej,not_mis_not_pej,total\n");
    let rows = [
        ("train", report.split(Split::Train)),
        ("test", report.split(Split::Test)),
        ("total", report.totals()),
    ];
    for (name, s) in rows {
        let t = s.table;
        out.push_str(&format!("{name},{},{},{},{},{}\n", t.a, t.b, t.c, t.d, s.total()));
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    if cli.print_config {
        print!("{}", RunConfig::default().to_toml());
        return Ok(());
    }
    let Some(command) = cli.command else {
        bail!(pejkit::Error::Config("no subcommand given; see --help".into()));
    };
    let csv = cli.format == Format::Csv;

    match command {
        Command::Lexicon {
            command: LexiconCommand::Validate { lexicon },
        } => {
            let lexicon = match lexicon {
                Some(p) => Lexicon::load(&p)?,
                None => Lexicon::bundled(),
            };
            println!("ok: {} entries", lexicon.len());
        }

        Command::Corpus { command } => match command {
            CorpusCommand::Stats { data } => {
                let data = data.load()?;
                let report = corpus::corpus_stats(&data.corpus);
                if csv {
                    print!("{}", stats_csv(&report));
                } else {
                    print!("{}", report.render());
                    match report.totals().table.phi() {
                        Ok(phi) => println!("phi(misogynous, pejorative) = {phi:.4}"),
                        Err(e) => println!("phi undefined: {e}"),
                    }
                }
            }
            CorpusCommand::Agreement { annotations } => {
                let sets = AnnotationSet::load_csv(&annotations)?;
                if csv {
                    println!("task,alpha");
                }
                for (task, set) in &sets {
                    let alpha = corpus::krippendorff_alpha(set)?;
                    if csv {
                        println!("{task},{alpha:.6}");
                    } else {
                        println!("{task}: alpha = {alpha:.4} ({} items)", set.items().len());
                    }
                }
            }
            CorpusCommand::Subset { data, out } => {
                let data = data.load()?;
                let subset = corpus::filter_epithet_subset(&data.corpus, &data.lexicon, &data.matcher);
                subset.save(&out)?;
                eprintln!("{} of {} tweets contain an epithet", subset.len(), data.corpus.len());
            }
        },

        Command::Match { data, out } => {
            let data = data.load()?;
            let matches = corpus::match_corpus(&data.corpus, &data.lexicon, &data.matcher);
            let flat: Vec<_> = data.corpus.tweets.iter().filter_map(|t| matches.get(&t.id)).flatten().collect();
            io::write_jsonl(&out, &flat)?;
            eprintln!("{} spans in {} tweets", flat.len(), matches.len());
        }

        Command::Enrich {
            data,
            strategy,
            source,
            predictions,
            run_id,
            anchor_mode,
            out,
        } => {
            let data = data.load()?;
            let matches = corpus::match_corpus(&data.corpus, &data.lexicon, &data.matcher);
            let assignments = match source {
                SourceArg::Gold => pipeline::gold_assignments(&data.corpus, &matches)?,
                SourceArg::Predicted => {
                    let path = predictions
                        .ok_or_else(|| pejkit::Error::Config("--source predicted needs --predictions".into()))?;
                    let preds = classifier::load_external_predictions(&path, &data.corpus)?;
                    pipeline::predicted_assignments(&data.corpus, &matches, &preds, run_id)?
                }
            };
            let strategy = match strategy {
                StrategyArg::Concat => Strategy::Concat,
                StrategyArg::Subst => Strategy::Subst,
            };
            let anchor_mode = match anchor_mode {
                AnchorArg::All => AnchorMode::All,
                AnchorArg::First => AnchorMode::First,
            };
            let enriched = enrich_corpus(
                &data.corpus,
                &matches,
                &assignments,
                strategy,
                source.into(),
                &data.lexicon,
                anchor_mode,
            )?;
            io::write_text(&out, &enriched.to_jsonl())?;
        }

        Command::Train {
            data,
            task,
            seed,
            config,
            out,
        } => {
            let data = data.load()?;
            let hp = match config {
                Some(p) => RunConfig::load(&p)?.baseline,
                None => Hyperparams::default(),
            };
            let matches = corpus::match_corpus(&data.corpus, &data.lexicon, &data.matcher);
            let model = classifier::train_baseline(&data.corpus, &matches, task.into(), hp, seed)?;
            model.save(&out)?;
        }

        Command::Predict {
            data,
            model,
            split,
            run_id,
            out,
        } => {
            let data = data.load()?;
            let model = BaselineModel::load(&model)?;
            let target = match split {
                SplitArg::Train => data.corpus.split_corpus(Split::Train),
                SplitArg::Test => data.corpus.split_corpus(Split::Test),
                SplitArg::All => data.corpus.clone(),
            };
            let matches = corpus::match_corpus(&target, &data.lexicon, &data.matcher);
            io::write_jsonl(&out, &classifier::predict(&model, &target, &matches, run_id))?;
        }

        Command::Eval {
            data,
            predictions,
            task,
            approach,
            source,
            epithets,
            out,
        } => {
            let data = data.load()?;
            let task: Task = task.into();
            let test = data.corpus.split_corpus(Split::Test);
            let (target, subset) = if epithets {
                (corpus::filter_epithet_subset(&test, &data.lexicon, &data.matcher), Subset::Epithets)
            } else {
                (test, Subset::Whole)
            };
            let gold = evaluation::gold_labels(&target, None, task)?;
            let preds: Vec<_> = classifier::load_predictions(&predictions)?
                .into_iter()
                .filter(|p| p.task == task)
                .collect();
            let approach = match approach {
                ApproachArg::Baseline => Approach::Baseline,
                ApproachArg::Concat => Approach::Concat,
                ApproachArg::Subst => Approach::Subst,
            };
            let report = evaluation::evaluate(&gold, &preds, task, approach, source.map(Into::into), subset)?;
            if let Some(out) = out {
                io::write_json(&out, &vec![report.clone()])?;
            }
            let table = evaluation::compare_pipelines(vec![report])?;
            print!("{}", if csv { table.render_csv() } else { table.render_text() });
        }

        Command::Compare { reports } => {
            let mut all: Vec<EvalReport> = Vec::new();
            for path in &reports {
                all.extend(io::read_json::<Vec<EvalReport>>(path)?);
            }
            let mut by_subset: BTreeMap<Subset, Vec<EvalReport>> = BTreeMap::new();
            for r in all {
                by_subset.entry(r.subset).or_default().push(r);
            }
            for (_, rows) in by_subset {
                let table = evaluation::compare_pipelines(rows)?;
                print!("{}", if csv { table.render_csv() } else { table.render_text() });
            }
        }

        Command::EmbedAnalyze {
            data,
            embeddings,
            frequencies,
        } => {
            let data = data.load()?;
            if frequencies {
                println!("anchor,frequency");
                for (anchor, n) in embedding::anchor_frequency(&data.corpus, &data.lexicon, &data.matcher) {
                    println!("{anchor},{n}");
                }
                return Ok(());
            }
            let records = embedding::load_embeddings(&embeddings)?;
            let cells = embedding::anchor_similarity_table(&data.corpus, &data.lexicon, &data.matcher, &records)?;
            print!("{}", embedding::render_similarity_csv(&cells));
            if !csv {
                println!();
                for avg in embedding::class_average_summary(&cells) {
                    println!(
                        "{} {} anchors in {} samples: {:.2} ({} cells)",
                        avg.model_tag.as_str(),
                        avg.anchor_connotation.as_str(),
                        avg.sample_class.as_str(),
                        avg.mean,
                        avg.cells
                    );
                }
            }
        }

        Command::Prompts { command } => match command {
            PromptsCommand::Export { data, out } => {
                let data = data.load()?;
                let batch = llm::export_prompt_batch(&data.corpus, &data.lexicon, &data.matcher, GenerationConfig::default())?;
                if batch.prompts.is_empty() {
                    eprintln!("warning: no test tweet contains a lexicon epithet; the batch is empty");
                }
                batch.save(&out)?;
                eprintln!("{} prompts written to {}", batch.prompts.len(), out.display());
            }
            PromptsCommand::Ingest {
                data,
                batch,
                responses,
                out,
            } => {
                let data = data.load()?;
                let batch = PromptBatch::load(&batch)?;
                let records = llm::ingest_responses(&responses, &batch.prompts)?;
                emit(out.as_deref(), &llm::render_review_table(&records, &data.corpus))?;
            }
        },

        Command::Pipeline {
            command: PipelineCommand::Run { config },
        } => {
            let config = RunConfig::load(&config)?;
            let outcome = pipeline::run_pipeline(&config)
                .with_context(|| format!("pipeline run into {}", config.output.display()))?;
            for table in std::iter::once(&outcome.whole).chain(outcome.epithets.as_ref()) {
                print!("{}", if csv { table.render_csv() } else { table.render_text() });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let mut message = err.to_string();
            for cause in err.chain().skip(1) {
                let cause = cause.to_string();
                if !message.ends_with(&cause) {
                    message = format!("{message}: {cause}");
                }
            }
            eprintln!("error: {message}");
            let validation = err.chain().find_map(|e| e.downcast_ref::<pejkit::Error>()).is_some_and(|e| e.is_validation());
            ExitCode::from(if validation { 1 } else { 2 })
        }
    }
}
