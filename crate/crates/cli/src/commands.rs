use std::collections::HashSet;
use std::path::{Path, PathBuf};

use mlta_core::embedding::{load_table, write_table, Embeddings};
use mlta_core::evaluation::{self, ExternalPredictions};
use mlta_core::gnn::{
    load_checkpoint, model_grad_check, save_checkpoint, Adjacency, ConvKind, GraphBatch, GraphSample,
    ModelConfig, ModelParams, Pooling, Readout,
};
use mlta_core::mln::{build_groups, read_mlns, write_mlns};
use mlta_core::preprocess::{
    filter_by_sentiment, read_clean, read_corpus, read_predictions, write_clean, write_corpus, Cleaner,
    ContractionTable, EmojiAliasTable,
};
use mlta_core::synthetic::{generate, GenConfig};
use mlta_core::training::{self, split_mlns, TrainConfig};
use mlta_core::{Error, NUM_CLASSES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::args::*;

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
}

impl CommandError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CommandError::Usage(_) | CommandError::Core(Error::InvalidConfig(_)) => 1,
            CommandError::Numerical(_) => 3,
            CommandError::Core(e) if e.is_numerical() => 3,
            CommandError::Core(_) => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CommandError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Preprocess(a) => preprocess(a),
        Command::BuildGraphs(a) => build_graphs(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Ablate(a) => ablate(a),
        Command::PairBaseline(a) => pair_baseline(a),
        Command::GenSynth(a) => gen_synth(a),
        Command::GradCheck(a) => grad_check(a),
    }
}

fn conv_kind(conv: ConvArg, heads: usize) -> ConvKind {
    match conv {
        ConvArg::Gcn => ConvKind::Gcn,
        ConvArg::Gatv2 => ConvKind::GatV2 { heads },
        ConvArg::Graphconv => ConvKind::Graph,
    }
}

fn load_embeddings(args: &EmbeddingArgs) -> Result<Embeddings> {
    let primary = load_table(&args.embeddings)?;
    Ok(match &args.fallback_embeddings {
        Some(path) => Embeddings::new(primary, load_table(path)?)?,
        None => Embeddings::single(primary),
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::from)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(())
}

fn preprocess(a: PreprocessArgs) -> Result<()> {
    let mut tweets = read_corpus(&a.corpus)?;
    if let Some(path) = &a.sentiment_filter {
        let before = tweets.len();
        tweets = filter_by_sentiment(tweets, &read_predictions(path)?)?;
        log::info!("sentiment filter kept {} of {before} tweets", tweets.len());
    }
    let contractions = match &a.contractions {
        Some(path) => ContractionTable::load(path)?,
        None => ContractionTable::builtin(),
    };
    let emoji = match &a.emoji {
        Some(path) => EmojiAliasTable::load(path)?,
        None => EmojiAliasTable::builtin(),
    };
    let mut vocabulary = HashSet::new();
    for path in &a.vocabulary {
        vocabulary.extend(load_table(path)?.tokens().into_iter().map(str::to_string));
    }
    let cleaner = Cleaner::new(contractions, emoji, vocabulary);
    let mut clean = Vec::with_capacity(tweets.len());
    let mut empty = 0;
    for tweet in &tweets {
        match cleaner.clean(tweet) {
            Ok(c) => clean.push(c),
            Err(Error::EmptyAfterCleaning { .. }) => empty += 1,
            Err(e) => return Err(e.into()),
        }
    }
    if empty > 0 {
        log::warn!("dropped {empty} tweets that were empty after cleaning");
    }
    write_clean(&a.out, &clean)?;
    log::info!("wrote {} cleaned tweets to {}", clean.len(), a.out.display());
    Ok(())
}

fn build_graphs(a: BuildGraphsArgs) -> Result<()> {
    if a.group_size == 0 {
        return Err(CommandError::Usage("--group-size must be at least 1".into()));
    }
    let tweets = read_clean(&a.corpus)?;
    let (mlns, leftover) = build_groups(&tweets, a.group_size)?;
    if leftover > 0 {
        log::info!("dropped {leftover} tweets that did not fill a group of {}", a.group_size);
    }
    write_mlns(&a.out, &mlns)?;
    log::info!("wrote {} networks to {}", mlns.len(), a.out.display());
    Ok(())
}

fn train_config(t: &TrainingArgs, record_timing: bool) -> TrainConfig {
    let m = &t.model;
    TrainConfig {
        learning_rate: t.lr,
        epochs: t.epochs,
        batch_size: t.batch_size,
        seed: t.seed,
        split_fraction: t.split,
        model: ModelConfig {
            conv: conv_kind(m.conv, m.heads),
            in_dim: 0,
            conv_dim: m.hidden,
            fc1_dim: m.fc1,
            fc2_dim: m.fc2,
            dropout: m.dropout,
            pooling: match m.pooling {
                PoolingArg::Mean => Pooling::Mean,
                PoolingArg::MaxAbs => Pooling::MaxAbs,
            },
            readout: match m.readout {
                ReadoutArg::Concat => Readout::Concat,
                ReadoutArg::Sum => Readout::Sum,
            },
            seed: t.seed,
            ..ModelConfig::default()
        },
        record_timing,
        ..TrainConfig::default()
    }
}

struct Prepared {
    config: TrainConfig,
    train: Vec<GraphSample>,
    test: Vec<GraphSample>,
    test_mlns: Vec<mlta_core::mln::TweetMln>,
}

fn prepare(t: &TrainingArgs, record_timing: bool) -> Result<Prepared> {
    let mut config = train_config(t, record_timing);
    let embeddings = load_embeddings(&t.embeddings)?;
    config.model.in_dim = embeddings.dimension();
    config.validate()?;
    let mlns = read_mlns(&t.graphs)?;
    let (train, test) = split_mlns(mlns, t.split, t.seed)?;
    log::info!("{} training and {} test networks", train.len(), test.len());
    let featurize = |set: &[mlta_core::mln::TweetMln]| -> Vec<GraphSample> {
        set.iter().map(|m| GraphSample::new(m, &embeddings)).collect()
    };
    Ok(Prepared {
        config,
        train: featurize(&train),
        test: featurize(&test),
        test_mlns: test,
    })
}

fn train(a: TrainArgs) -> Result<()> {
    let p = prepare(&a.training, a.timing == Switch::On)?;
    let outcome = training::train(&p.train, &p.test, &p.config)?;
    save_checkpoint(&a.out, &outcome.best)?;
    let history = a.history.clone().unwrap_or_else(|| history_path(&a.out));
    training::save_history(&history, &outcome.history)?;
    if let Some(path) = &a.test_out {
        write_mlns(path, &p.test_mlns)?;
    }
    match outcome.best_epoch {
        Some(epoch) => log::info!(
            "best test macro-F1 {:.4} at epoch {epoch}; checkpoint {}",
            outcome.history[epoch - 1].test_f1,
            a.out.display()
        ),
        None => log::info!("no epochs run; wrote initial parameters to {}", a.out.display()),
    }
    Ok(())
}

fn history_path(checkpoint: &Path) -> PathBuf {
    let mut name = checkpoint.file_stem().unwrap_or_default().to_os_string();
    name.push(".history.csv");
    checkpoint.with_file_name(name)
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let embeddings = load_embeddings(&a.embeddings)?;
    let params = load_checkpoint(&a.checkpoint)?;
    let samples: Vec<GraphSample> = read_mlns(&a.graphs)?
        .iter()
        .map(|m| GraphSample::new(m, &embeddings))
        .collect();
    let (report, _) = evaluation::evaluate(&samples, &params, 32)?;
    print!("{report}");
    if let Some(path) = &a.json {
        write_json(path, &report)?;
    }
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let p = prepare(&a.training, true)?;
    let report = evaluation::ablation(&p.train, &p.test, &p.config, a.training.model.heads)?;
    print!("{report}");
    if let Some(path) = &a.json {
        write_json(path, &report)?;
    }
    Ok(())
}

fn pair_baseline(a: PairBaselineArgs) -> Result<()> {
    let embeddings = load_embeddings(&a.embeddings)?;
    let params = load_checkpoint(&a.checkpoint)?;
    let pairs = read_mlns(&a.graphs)?;
    let mut external = Vec::new();
    for spec in &a.external {
        let (name, path) = spec
            .split_once('=')
            .ok_or_else(|| CommandError::Usage(format!("--external expects NAME=FILE, got {spec:?}")))?;
        external.push(ExternalPredictions {
            name: name.to_string(),
            predictions: read_predictions(path)?,
        });
    }
    let report = evaluation::pair_baseline(&pairs, &embeddings, &params, &external)?;
    println!("{report}");
    if let Some(path) = &a.json {
        write_json(path, &report)?;
    }
    Ok(())
}

fn gen_synth(a: GenSynthArgs) -> Result<()> {
    let corpus = generate(&GenConfig {
        tweets_per_class: a.tweets_per_class,
        vocab_per_class: a.vocab_per_class,
        shared_vocab: a.shared_vocab,
        hashtag_rate: a.hashtag_rate,
        noise_rate: a.noise_rate,
        shared_rate: a.shared_rate,
        hashtags_per_class: a.hashtags_per_class,
        dimension: a.dim,
        seed: a.seed,
    })?;
    write_corpus(&a.out_corpus, &corpus.tweets)?;
    write_table(&a.out_embeddings, &corpus.embeddings)?;
    log::info!(
        "wrote {} tweets and {} embeddings",
        corpus.tweets.len(),
        corpus.embeddings.len()
    );
    Ok(())
}

fn toy_sample(rng: &mut ChaCha8Rng, dim: usize, label: usize) -> Result<GraphSample> {
    let mut layer = |directed: bool| -> Result<(mlta_core::autodiff::Matrix, Adjacency)> {
        let n = rng.random_range(1..6);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in 0..n {
                if u != v && (directed || u < v) && rng.random_bool(0.4) {
                    edges.push((u, v));
                }
            }
        }
        let x = mlta_core::autodiff::Matrix::from_fn(n, dim, |_, _| rng.random_range(-1.0..1.0));
        Ok((x, Adjacency::new(n, edges, directed)?))
    };
    let (x1, a1) = layer(false)?;
    let (x2, a2) = layer(true)?;
    let (x3, a3) = layer(false)?;
    Ok(GraphSample {
        features: mlta_core::embedding::MlnFeatures { layers: [x1, x2, x3] },
        adjacency: [a1, a2, a3],
        label,
    })
}

fn grad_check(a: GradCheckArgs) -> Result<()> {
    if a.graphs == 0 {
        return Err(CommandError::Usage("--graphs must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let samples = (0..a.graphs)
        .map(|i| toy_sample(&mut rng, a.dim, i % NUM_CLASSES))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&GraphSample> = samples.iter().collect();
    let batch = GraphBatch::new(&refs)?;
    let mut params = ModelParams::init(ModelConfig {
        conv: conv_kind(a.conv, a.heads),
        in_dim: a.dim,
        conv_dim: a.hidden,
        fc1_dim: 2 * a.hidden,
        fc2_dim: a.hidden + 1,
        seed: a.seed,
        ..ModelConfig::default()
    })?;
    let report = model_grad_check(&mut params, &batch, &[1.0; NUM_CLASSES], a.epsilon, a.tolerance)?;
    println!(
        "{}: {} entries, max relative error {:.3e}, max absolute error {:.3e}",
        params.config.conv, report.entries, report.max_rel_error, report.max_abs_error
    );
    if report.passed() {
        Ok(())
    } else {
        let (name, index) = report.worst.unwrap_or_default();
        Err(CommandError::Numerical(format!(
            "gradient check failed: relative error {:.3e} >= {:.1e} at {name}[{index}]",
            report.max_rel_error, a.tolerance
        )))
    }
}
