use std::collections::hash_map::RandomState;
use std::fs;
use std::hash::BuildHasher;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use rcqa::config::RunConfig;
use rcqa::corpus::{
    load_corpus, synth_raw, write_corpus_dir, Corpus, CorpusFiles, LoadOptions, QaPair, Split,
};
use rcqa::eval::{
    write_oracle_dump, write_predictions_dump, write_retrieval_dump, ReaderReport, RetrievalReport,
    DEFAULT_KS,
};
use rcqa::pipeline::{article_lists, gradcheck_ranker, gradcheck_reader, oracle, rankings};
use rcqa::reader::{evaluate_reader, train_reader, ContextBundle};
use rcqa::retrieval::{train_ranker, Retriever, RetrieverKind};
use rcqa::{RankerModel, ReaderModel};

const RANKER_FILE: &str = "ranker.ckpt";
const READER_FILE: &str = "reader.ckpt";

/// Retrieval and comprehension question answering over an article corpus.
///
/// Settings come from the built-in defaults, then the `--config` file, then
/// `--set` overrides, then the subcommand's own flags.
#[derive(Parser, Debug)]
#[command(name = "rcqa", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// `key = value` settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set reader.hidden=64`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Pin every random stream to the configured seeds. With `false`, fresh
    /// seeds are drawn and printed.
    #[arg(long, global = true, default_value_t = true, action = clap::ArgAction::Set)]
    deterministic: bool,
    /// Corpus directory (entities.txt, articles.jsonl, {train,dev,test}.tsv).
    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Directory for checkpoints, dumps and reports.
    #[arg(long, global = true)]
    work: Option<PathBuf>,
    /// Read at most this many articles.
    #[arg(long, global = true)]
    max_articles: Option<usize>,
    /// Read at most this many questions from each QA file.
    #[arg(long, global = true)]
    max_questions: Option<usize>,
    /// Print the effective settings and exit.
    #[arg(long, global = true)]
    show_config: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load the corpus, match entities, build vocabularies and report counts.
    Ingest,
    /// Write a synthetic movie corpus in the standard layout.
    Synth {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        movies: Option<usize>,
        /// Fraction of facts written into the articles.
        #[arg(long)]
        consistency: Option<f64>,
        /// Output directory; defaults to the corpus directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the learned ranker on oracle labels.
    TrainRanker,
    /// Train the reader on contexts from the configured retriever.
    TrainReader,
    /// Rank articles for one split and report recall and precision.
    Retrieve {
        #[arg(long, value_parser = parse_retriever)]
        retriever: Option<RetrieverKind>,
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: Split,
    },
    /// Answer one free-text question with the trained reader.
    Answer {
        #[arg(long)]
        question: String,
    },
    /// Score the trained reader on one split.
    Evaluate {
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: Split,
    },
    /// Compare analytic and finite-difference gradients on toy models.
    Gradcheck {
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
    },
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse().map_err(|e: rcqa::Error| e.to_string())
}

fn parse_retriever(s: &str) -> Result<RetrieverKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "r0" => Ok(RetrieverKind::R0),
        "r1" => Ok(RetrieverKind::R1),
        "r2" => Ok(RetrieverKind::R2),
        other => Err(format!("unknown retriever {other:?} (r0, r1, r2)")),
    }
}

fn fresh_seed() -> u64 {
    RandomState::new().hash_one(std::time::SystemTime::now())
}

fn build_config(global: &Global) -> Result<RunConfig> {
    let mut config = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    config.apply(global.overrides.iter().map(String::as_str))?;
    if let Some(dir) = &global.corpus {
        config.corpus_dir = dir.clone();
    }
    if let Some(dir) = &global.work {
        config.work_dir = dir.clone();
    }
    if !global.deterministic {
        config.retrieval_seed = fresh_seed();
        config.reader.seed = fresh_seed();
        config.ranker.seed = fresh_seed();
        config.synth.seed = fresh_seed();
        println!(
            "seeds: retrieval_seed={} reader.seed={} ranker.seed={} synth.seed={}",
            config.retrieval_seed, config.reader.seed, config.ranker.seed, config.synth.seed
        );
    }
    config.validate()?;
    Ok(config)
}

struct Ctx {
    config: RunConfig,
    load: LoadOptions,
}

impl Ctx {
    fn corpus(&self) -> Result<Corpus> {
        let dir = &self.config.corpus_dir;
        if !dir.is_dir() {
            bail!(rcqa::Error::invalid(format!(
                "corpus directory {} does not exist",
                dir.display()
            )));
        }
        let (corpus, report) = load_corpus(&CorpusFiles::in_dir(dir), &self.load)?;
        if report.dropped_qa > 0 {
            log::warn!(
                "{} questions dropped (no answer matched an entity)",
                report.dropped_qa
            );
        }
        Ok(corpus)
    }

    fn work(&self, file: &str) -> Result<PathBuf> {
        let dir = &self.config.work_dir;
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir.join(file))
    }

    fn ranker(&self, corpus: &Corpus) -> Result<RankerModel> {
        let path = self.config.work_dir.join(RANKER_FILE);
        RankerModel::load(&path, corpus)
            .with_context(|| format!("run train-ranker first ({})", path.display()))
    }

    fn reader(&self, corpus: &Corpus) -> Result<ReaderModel> {
        let path = self.config.work_dir.join(READER_FILE);
        ReaderModel::load(&path, corpus)
            .with_context(|| format!("run train-reader first ({})", path.display()))
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn ingest(ctx: &Ctx) -> Result<()> {
    let dir = &ctx.config.corpus_dir;
    let (corpus, report) = load_corpus(&CorpusFiles::in_dir(dir), &ctx.load)?;
    let labels = oracle(&corpus);
    let summary = serde_json::json!({
        "entities": corpus.entities.len(),
        "articles": corpus.articles.len(),
        "questions": {
            "train": corpus.split(Split::Train).count(),
            "dev": corpus.split(Split::Dev).count(),
            "test": corpus.split(Split::Test).count(),
        },
        "vocabulary": corpus.vocab.len(),
        "entity_vocabulary": corpus.vocab.entity_subset_full.len(),
        "entity_subvocabulary": corpus.vocab.entity_subset_small.len(),
        "oracle_labeled": labels.labels.len(),
        "oracle_excluded": labels.excluded.len(),
        "duplicate_entities": report.duplicate_entities,
        "empty_entities": report.empty_entities,
        "empty_articles": report.empty_articles,
        "dropped_questions": report.dropped_questions,
    });
    let text = serde_json::to_string_pretty(&summary)?;
    println!("{text}");
    write_text(&ctx.work("ingest.json")?, &text)?;
    write_oracle_dump(&ctx.work("oracle.tsv")?, &labels)?;
    Ok(())
}

fn synth(
    ctx: &mut Ctx,
    seed: Option<u64>,
    movies: Option<usize>,
    consistency: Option<f64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let synth = &mut ctx.config.synth;
    if let Some(s) = seed {
        synth.seed = s;
    }
    if let Some(n) = movies {
        synth.n_movies = n;
    }
    if let Some(c) = consistency {
        synth.consistency = c;
    }
    let raw = synth_raw(synth)?;
    let dir = out.unwrap_or_else(|| ctx.config.corpus_dir.clone());
    write_corpus_dir(&raw, &dir)?;
    println!(
        "wrote {} articles, {} entities and {} questions to {}",
        raw.articles.len(),
        raw.entities.len(),
        raw.qa.len(),
        dir.display()
    );
    Ok(())
}

fn train_ranker_cmd(ctx: &Ctx) -> Result<()> {
    let corpus = ctx.corpus()?;
    let labels = oracle(&corpus);
    write_oracle_dump(&ctx.work("oracle.tsv")?, &labels)?;
    let (model, report) = train_ranker::<f64>(&corpus, &labels, &ctx.config.ranker)?;
    model.save(&ctx.work(RANKER_FILE)?)?;
    write_text(
        &ctx.work("ranker_train.json")?,
        &serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "ranker: {} steps, best dev R@1 {}",
        report.steps,
        report
            .best_dev
            .map_or("n/a".to_string(), |d| format!("{d:.3}"))
    );
    Ok(())
}

fn contexts(
    ctx: &Ctx,
    corpus: &Corpus,
    kind: RetrieverKind,
    split: Option<Split>,
) -> Result<std::collections::BTreeMap<usize, rcqa::retrieval::Ranking>> {
    let ranker = match kind {
        RetrieverKind::R2 => Some(ctx.ranker(corpus)?),
        _ => None,
    };
    Ok(rankings(
        corpus,
        kind,
        ranker.as_ref(),
        ctx.config.retrieval_seed,
        split,
    )?)
}

fn train_reader_cmd(ctx: &Ctx) -> Result<()> {
    let corpus = ctx.corpus()?;
    let ranked = contexts(ctx, &corpus, ctx.config.retriever, None)?;
    let (model, report) = train_reader::<f64>(&corpus, &ranked, &ctx.config.reader)?;
    model.save(&ctx.work(READER_FILE)?)?;
    write_text(
        &ctx.work("reader_train.json")?,
        &serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "reader {}: {} epochs, best dev hits@1 {}",
        ctx.config.reader.variant.name(),
        report.epochs,
        report
            .best_dev
            .map_or("n/a".to_string(), |d| format!("{d:.3}"))
    );
    Ok(())
}

fn retrieve(ctx: &Ctx, kind: RetrieverKind, split: Split) -> Result<()> {
    let corpus = ctx.corpus()?;
    let ranked = contexts(ctx, &corpus, kind, Some(split))?;
    let labels = oracle(&corpus);
    let report =
        RetrievalReport::compute(kind.name(), &article_lists(&ranked), &labels, &DEFAULT_KS);
    let stem = format!("retrieval_{}_{}", kind.name(), split.name());
    write_retrieval_dump(&ctx.work(&format!("{stem}.tsv"))?, &ranked)?;
    write_text(&ctx.work(&format!("{stem}.json"))?, &report.to_json()?)?;
    print!("{}", report.table());
    Ok(())
}

fn answer(ctx: &Ctx, question: &str) -> Result<()> {
    let corpus = ctx.corpus()?;
    let reader = ctx.reader(&corpus)?;
    let (surface, encoded) = corpus.encode_text(question);
    if encoded.is_empty() {
        bail!(rcqa::Error::invalid("the question has no tokens"));
    }
    let qa = QaPair {
        id: corpus.qa.len(),
        text: question.to_string(),
        surface,
        question: encoded,
        answers: Vec::new(),
        category: None,
        split: Split::Test,
    };
    let ranking = match ctx.config.retriever {
        RetrieverKind::R2 => {
            let ranker = ctx.ranker(&corpus)?;
            Retriever::learned(&corpus, &ranker, ctx.config.retrieval_seed)?.ranking(&qa)?
        }
        kind => Retriever::<f64>::new(&corpus, kind, ctx.config.retrieval_seed)?.ranking(&qa)?,
    };
    let context = ContextBundle::new(&corpus, &ranking.articles, reader.config.max_articles);
    let dist = reader.answer(&qa, &context)?;
    let titles: Vec<&str> = context
        .articles
        .iter()
        .map(|&a| corpus.article(a).title.as_str())
        .collect();
    println!("question: {question}");
    println!(
        "context: {}",
        if titles.is_empty() {
            "(none)".to_string()
        } else {
            titles.join(" | ")
        }
    );
    match dist.predict() {
        Some(e) => {
            println!("answer: {}", corpus.entity(e).display);
            println!("source: {}", dist.source(e));
        }
        None => println!("answer: (none)"),
    }
    if let Some(g) = dist.gate {
        println!("g: {g:.4}");
    }
    Ok(())
}

fn evaluate(ctx: &Ctx, split: Split) -> Result<()> {
    let corpus = ctx.corpus()?;
    let reader = ctx.reader(&corpus)?;
    let ranked = contexts(ctx, &corpus, ctx.config.retriever, Some(split))?;
    let eval = evaluate_reader(&reader, &corpus, &ranked, split)?;
    let report = ReaderReport::from_predictions(
        reader.config.variant.name(),
        split.name(),
        &eval.predictions,
    );
    write_predictions_dump(
        &ctx.work(&format!("predictions_{}.tsv", split.name()))?,
        &corpus,
        &eval.predictions,
    )?;
    write_text(
        &ctx.work(&format!("eval_{}.json", split.name()))?,
        &report.to_json()?,
    )?;
    print!("{}", report.table());
    Ok(())
}

fn gradcheck(ctx: &Ctx, tol: f64, step: f64) -> Result<bool> {
    let variant = ctx.config.reader.variant;
    let mut ok = true;
    for (name, report) in [
        (
            format!("reader {}", variant.name()),
            gradcheck_reader(variant, step, tol)?,
        ),
        ("ranker".to_string(), gradcheck_ranker(step, tol)?),
    ] {
        for line in report.lines() {
            println!("{name}: {line}");
        }
        println!(
            "{name}: {} (max rel err {:.3e}, tol {tol:e})",
            if report.passed() { "PASS" } else { "FAIL" },
            report.max_rel_err()
        );
        ok &= report.passed();
    }
    Ok(ok)
}

fn run(cli: Cli) -> Result<bool> {
    let config = build_config(&cli.global)?;
    if cli.global.show_config {
        print!("{}", config.to_text());
        return Ok(true);
    }
    let load = LoadOptions {
        min_count: config.min_count,
        max_articles: cli.global.max_articles,
        max_questions: cli.global.max_questions,
    };
    let mut ctx = Ctx { config, load };
    match cli.command {
        Command::Ingest => ingest(&ctx)?,
        Command::Synth {
            seed,
            movies,
            consistency,
            out,
        } => synth(&mut ctx, seed, movies, consistency, out)?,
        Command::TrainRanker => train_ranker_cmd(&ctx)?,
        Command::TrainReader => train_reader_cmd(&ctx)?,
        Command::Retrieve { retriever, split } => {
            let kind = retriever.unwrap_or(ctx.config.retriever);
            retrieve(&ctx, kind, split)?
        }
        Command::Answer { question } => answer(&ctx, &question)?,
        Command::Evaluate { split } => evaluate(&ctx, split)?,
        Command::Gradcheck { tol, step } => return gradcheck(&ctx, tol, step),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.chain().any(|c| {
                c.downcast_ref::<rcqa::Error>()
                    .is_some_and(rcqa::Error::is_validation)
            });
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}
