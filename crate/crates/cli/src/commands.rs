use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;

use structconf::apps::active::{active_learning_run, ActiveLearnConfig, Selection};
use structconf::apps::entities::entity_prf;
use structconf::apps::tradeoff::{
    best_entity_labels, threshold_grid, tradeoff_sweep, TradeoffDirection, TradeoffInput,
};
use structconf::apps::tune::{tune, Grid};
use structconf::confidence::{ConfidenceAnnotation, ConfidenceConfig, ConfidenceEstimator, Method};
use structconf::corpus::{
    generate_synthetic, write_conll_chain, write_conll_dependency, ChainFeaturizer, ChainTemplates,
    FeatureIndex, RawSentence, SynthConfig, SynthMode, TreeFeaturizer, TreeTemplates,
};
use structconf::eval::{
    average_precision, bernstein_epsilon, calibration_bins, calibration_rmse, chernoff_k,
    precision_recall_curve, RankedUnit,
};
use structconf::learn::{train_with_observer, Algorithm, EpochStats, TrainConfig};
use structconf::report::{Cell, Table};
use structconf::store::{load_model, save_model, StoredModel, Task};
use structconf::{Error, LinearModel, Result, Structured};

use crate::data::{featurize, has_gold, output_name, read_corpus, task, Featurized};
use crate::{Cli, Command, ConfidenceArgs, CorpusArgs, TrainArgs};

pub fn run(cli: &Cli) -> Result<()> {
    let table = match &cli.command {
        Command::Synth {
            task: t,
            train,
            dev,
            test,
            min_len,
            max_len,
            categories,
            vocab,
            tags,
            noise,
            out_dir,
        } => {
            let cfg = SynthConfig {
                mode: match task(*t) {
                    Task::Chain => SynthMode::Chain,
                    Task::Tree => SynthMode::Tree,
                },
                train: *train,
                dev: *dev,
                test: *test,
                min_len: *min_len,
                max_len: *max_len,
                categories: *categories,
                vocab: *vocab,
                tags: *tags,
                noise: *noise,
                seed: cli.seed,
            };
            synth(&cfg, out_dir)?
        }
        Command::Train {
            task: t,
            data,
            model,
            corpus,
            train: args,
        } => train(
            task(*t),
            data,
            model,
            corpus,
            &train_config(args, cli.seed)?,
        )?,
        Command::Predict {
            model,
            data,
            corpus,
            final_weights,
        } => predict(model, data, corpus, !final_weights)?,
        Command::Confidence {
            model,
            data,
            corpus,
            conf,
        } => confidence(model, data, corpus, &confidence_config(conf, cli.seed)?)?,
        Command::EvalRank { input } => eval_rank(input)?,
        Command::EvalCalib { input } => eval_calib(input)?,
        Command::Bounds {
            chernoff,
            bernstein,
            eps,
            delta,
            n,
            gamma,
            k,
        } => bounds(*chernoff, *bernstein, *eps, *delta, *n, *gamma, *k)?,
        Command::Tradeoff {
            model,
            data,
            corpus,
            conf,
            direction,
            merge,
            steps,
        } => tradeoff(
            model,
            data,
            corpus,
            &confidence_config(conf, cli.seed)?,
            direction.parse()?,
            *merge,
            *steps,
        )?,
        Command::ActiveLearn {
            task: t,
            pool,
            test,
            corpus,
            train: args,
            conf,
            random,
            initial,
            candidates,
            batch,
            eval_every,
            stop_at,
        } => {
            let cfg = ActiveLearnConfig {
                initial_labeled: *initial,
                candidate_sample: *candidates,
                batch: *batch,
                eval_every_sentences: *eval_every,
                stop_at: *stop_at,
                selection: if *random {
                    Selection::Random
                } else {
                    Selection::Confidence(confidence_config(conf, cli.seed)?)
                },
                train: train_config(args, cli.seed)?,
                seed: cli.seed,
            };
            active_learn(task(*t), pool, test, corpus, &cfg)?
        }
        Command::Tune {
            model,
            data,
            corpus,
            conf,
        } => tune_command(model, data, corpus, &confidence_config(conf, cli.seed)?)?,
    };
    match &cli.output {
        Some(path) => {
            let mut out = BufWriter::new(File::create(path)?);
            table.write(cli.format.into(), &mut out)?;
            out.flush()?;
        }
        None => table.write(cli.format.into(), io::stdout().lock())?,
    }
    Ok(())
}

fn train_config(args: &TrainArgs, seed: u64) -> Result<TrainConfig> {
    let cfg = TrainConfig {
        algorithm: args.algorithm.parse::<Algorithm>()?,
        c: args.aggressiveness,
        phi: args.phi,
        initial_variance: args.initial_variance,
        nbest_k: args.nbest_k,
        epochs: args.epochs,
        seed,
        averaging: !args.no_averaging,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn confidence_config(args: &ConfidenceArgs, seed: u64) -> Result<ConfidenceConfig> {
    let cfg = ConfidenceConfig {
        method: args.method.parse::<Method>()?,
        k: args.k,
        s: args.s,
        c: args.c,
        combo_weight: args.combo_weight,
        seed,
        averaged: !args.final_weights,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn synth(cfg: &SynthConfig, out_dir: &Path) -> Result<Table> {
    let splits = generate_synthetic(cfg)?;
    fs::create_dir_all(out_dir)?;
    let extension = match cfg.mode {
        SynthMode::Chain => "txt",
        SynthMode::Tree => "conllx",
    };
    let mut table = Table::new(["split", "sentences", "words", "path"]);
    for (name, sentences) in [
        ("train", &splits.train),
        ("dev", &splits.dev),
        ("test", &splits.test),
    ] {
        let path = out_dir.join(format!("{name}.{extension}"));
        let mut out = BufWriter::new(File::create(&path)?);
        match cfg.mode {
            SynthMode::Chain => write_conll_chain(&mut out, sentences)?,
            SynthMode::Tree => write_conll_dependency(&mut out, sentences)?,
        }
        out.flush()?;
        let words: usize = sentences.iter().map(RawSentence::len).sum();
        table.push(vec![
            name.into(),
            sentences.len().into(),
            words.into(),
            path.display().to_string().into(),
        ])?;
    }
    Ok(table)
}

fn epoch_table() -> Table {
    Table::new(["epoch", "mistakes", "loss", "words", "error_rate"])
}

fn push_epoch(table: &mut Table, s: &EpochStats) {
    let rate = if s.units == 0 {
        0.0
    } else {
        s.total_loss as f64 / s.units as f64
    };
    log::info!(
        "epoch {}: {} mistakes, word error rate {rate:.4}",
        s.epoch,
        s.mistakes
    );
    table
        .push(vec![
            s.epoch.into(),
            s.mistakes.into(),
            s.total_loss.into(),
            s.units.into(),
            rate.into(),
        ])
        .expect("row matches header");
}

fn train(
    t: Task,
    data: &Path,
    model_path: &Path,
    corpus: &CorpusArgs,
    cfg: &TrainConfig,
) -> Result<Table> {
    let sentences = read_corpus(t, data, corpus)?;
    if let Some(i) = sentences.iter().position(|s| !has_gold(t, s)) {
        return Err(Error::InvalidInstance(format!(
            "training sentence {} has no gold annotation",
            i + 1
        )));
    }
    let mut table = epoch_table();
    let stored = match t {
        Task::Chain => {
            let mut featurizer =
                ChainFeaturizer::from_corpus(ChainTemplates::default(), &sentences)?;
            let instances = featurizer.extract_all(&sentences)?;
            featurizer.freeze();
            let model = train_with_observer(&instances, featurizer.dimension(), cfg, |s| {
                push_epoch(&mut table, s)
            })?;
            StoredModel::chain(&featurizer, model, cfg.clone())
        }
        Task::Tree => {
            let mut featurizer = TreeFeaturizer::new(TreeTemplates::default(), FeatureIndex::new());
            let instances = featurizer.extract_all(&sentences)?;
            featurizer.freeze();
            let model = train_with_observer(&instances, featurizer.dimension(), cfg, |s| {
                push_epoch(&mut table, s)
            })?;
            StoredModel::tree(&featurizer, model, cfg.clone())
        }
    };
    save_model(model_path, &stored)?;
    log::info!(
        "wrote {} ({} features)",
        model_path.display(),
        stored.header.dimension
    );
    Ok(table)
}

fn load(
    model: &Path,
    data: &Path,
    corpus: &CorpusArgs,
) -> Result<(StoredModel, Vec<RawSentence>, Featurized)> {
    let stored = load_model(model)?;
    let sentences = read_corpus(stored.header.task, data, corpus)?;
    let featurized = featurize(&stored, &sentences)?;
    Ok((stored, sentences, featurized))
}

fn decode_all(featurized: &Featurized, weights: &[f64]) -> Result<Vec<Vec<usize>>> {
    match featurized {
        Featurized::Chain { instances, .. } => {
            instances.iter().map(|x| Ok(x.decode(weights)?.0)).collect()
        }
        Featurized::Tree(instances) => instances.iter().map(|x| Ok(x.decode(weights)?.0)).collect(),
    }
}

fn predict(model: &Path, data: &Path, corpus: &CorpusArgs, averaged: bool) -> Result<Table> {
    let (stored, sentences, featurized) = load(model, data, corpus)?;
    let outputs = decode_all(&featurized, stored.model.prediction_weights(averaged))?;
    let mut table = Table::new(["sentence", "unit", "form", "predicted", "gold"]);
    for (i, (sentence, output)) in sentences.iter().zip(&outputs).enumerate() {
        for (u, (token, &value)) in sentence.tokens.iter().zip(output).enumerate() {
            table.push(vec![
                (i + 1).into(),
                (u + 1).into(),
                token.form.as_str().into(),
                output_name(&featurized, value).into(),
                gold_cell(stored.header.task, token),
            ])?;
        }
    }
    Ok(table)
}

fn gold_cell(t: Task, token: &structconf::corpus::Token) -> Cell {
    match t {
        Task::Chain => token.tag.clone().into(),
        Task::Tree => token.head.into(),
    }
}

fn annotate(
    featurized: &Featurized,
    model: &LinearModel,
    cfg: &ConfidenceConfig,
) -> Result<Vec<Vec<ConfidenceAnnotation>>> {
    let mut estimator = ConfidenceEstimator::new(model, cfg)?;
    match featurized {
        Featurized::Chain { instances, .. } => estimator.annotate_batch(instances),
        Featurized::Tree(instances) => estimator.annotate_batch(instances),
    }
}

fn confidence(
    model: &Path,
    data: &Path,
    corpus: &CorpusArgs,
    cfg: &ConfidenceConfig,
) -> Result<Table> {
    let (stored, sentences, featurized) = load(model, data, corpus)?;
    let annotations = annotate(&featurized, &stored.model, cfg)?;
    let t = stored.header.task;
    let mut table = Table::new([
        "sentence",
        "unit",
        "form",
        "predicted",
        "gold",
        "nu",
        "correct",
    ]);
    for (i, (sentence, anns)) in sentences.iter().zip(&annotations).enumerate() {
        let known = has_gold(t, sentence);
        for (token, a) in sentence.tokens.iter().zip(anns) {
            table.push(vec![
                (i + 1).into(),
                (a.unit + 1).into(),
                token.form.as_str().into(),
                output_name(&featurized, a.predicted).into(),
                gold_cell(t, token),
                a.nu.into(),
                a.is_correct.filter(|_| known).into(),
            ])?;
        }
    }
    Ok(table)
}

/// `(nu, correct)` pairs from a confidence CSV; rows with unknown
/// correctness are skipped.
fn read_scores(path: &Path) -> Result<Vec<(f64, bool)>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                path: path.to_owned(),
                line: 1,
                message: format!("missing `{name}` column"),
            })
    };
    let (nu_col, ok_col) = (column("nu")?, column("correct")?);
    let mut scores = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |message: String| Error::Parse {
            path: path.to_owned(),
            line: row + 2,
            message,
        };
        let correct = match record.get(ok_col).unwrap_or("") {
            "" => continue,
            "true" | "1" => true,
            "false" | "0" => false,
            other => {
                return Err(bad(format!(
                    "`correct` must be true or false, got `{other}`"
                )))
            }
        };
        let raw = record.get(nu_col).unwrap_or("");
        let nu: f64 = raw
            .parse()
            .map_err(|_| bad(format!("`nu` is not a number: `{raw}`")))?;
        scores.push((nu, correct));
    }
    Ok(scores)
}

fn eval_rank(input: &Path) -> Result<Table> {
    let units: Vec<RankedUnit> = read_scores(input)?
        .into_iter()
        .map(|(nu, ok)| RankedUnit { nu, is_error: !ok })
        .collect();
    let ap = average_precision(&units)?;
    let errors = units.iter().filter(|u| u.is_error).count();
    let mut table = Table::new(["measure", "recall", "value"]);
    table.push(vec!["average_precision".into(), Cell::Empty, ap.into()])?;
    table.push(vec!["units".into(), Cell::Empty, units.len().into()])?;
    table.push(vec!["errors".into(), Cell::Empty, errors.into()])?;
    for p in precision_recall_curve(&units)? {
        table.push(vec![
            "precision".into(),
            p.recall.into(),
            p.precision.into(),
        ])?;
    }
    Ok(table)
}

fn eval_calib(input: &Path) -> Result<Table> {
    let bins = calibration_bins(read_scores(input)?)?;
    let rmse = calibration_rmse(&bins)?;
    let mut table = Table::new(["bin", "center", "count", "accuracy"]);
    for b in &bins {
        table.push(vec![
            b.index.into(),
            b.center.into(),
            b.count.into(),
            b.accuracy.into(),
        ])?;
    }
    table.push(vec![
        "rmse".into(),
        Cell::Empty,
        bins.iter().map(|b| b.count).sum::<usize>().into(),
        rmse.into(),
    ])?;
    Ok(table)
}

fn bounds(
    chernoff: bool,
    bernstein: bool,
    eps: Option<f64>,
    delta: f64,
    n: u64,
    gamma: Option<f64>,
    k: Option<u64>,
) -> Result<Table> {
    let mut table = Table::new(["bound", "epsilon", "delta", "n", "gamma", "k"]);
    if bernstein {
        let gamma = gamma.ok_or_else(|| Error::Config("--bernstein needs --gamma".into()))?;
        let k = k.ok_or_else(|| Error::Config("--bernstein needs --k".into()))?;
        let eps = bernstein_epsilon(gamma, k, n, delta)?;
        table.push(vec![
            "bernstein".into(),
            eps.into(),
            delta.into(),
            n.into(),
            gamma.into(),
            k.into(),
        ])?;
    } else {
        if !chernoff {
            log::debug!("no bound selected, defaulting to chernoff");
        }
        let eps = eps.ok_or_else(|| Error::Config("--chernoff needs --eps".into()))?;
        let k = chernoff_k(eps, delta, n)?;
        table.push(vec![
            "chernoff".into(),
            eps.into(),
            delta.into(),
            n.into(),
            Cell::Empty,
            k.into(),
        ])?;
    }
    Ok(table)
}

fn tradeoff(
    model: &Path,
    data: &Path,
    corpus: &CorpusArgs,
    cfg: &ConfidenceConfig,
    direction: TradeoffDirection,
    merge: bool,
    steps: usize,
) -> Result<Table> {
    if !cfg.method.is_absolute() {
        return Err(Error::Config(format!(
            "`{}` scores are not probabilities and cannot be thresholded",
            cfg.method.name()
        )));
    }
    let (stored, sentences, featurized) = load(model, data, corpus)?;
    let Featurized::Chain {
        featurizer,
        instances,
    } = &featurized
    else {
        return Err(Error::Config(
            "threshold tradeoffs need a chain model".into(),
        ));
    };
    let annotations = annotate(&featurized, &stored.model, cfg)?;
    let labels: Vec<String> = featurizer.labels().map(str::to_owned).collect();
    let weights = stored.model.prediction_weights(cfg.averaged);
    let mut inputs = Vec::with_capacity(sentences.len());
    for ((sentence, x), anns) in sentences.iter().zip(instances).zip(&annotations) {
        let gold = sentence
            .tags()
            .ok_or_else(|| Error::InvalidInstance("tradeoff sentences need gold tags".into()))?;
        let predicted: Vec<usize> = anns.iter().map(|a| a.predicted).collect();
        inputs.push(TradeoffInput {
            gold: gold.into_iter().map(str::to_owned).collect(),
            predicted: featurizer.label_names(&predicted),
            nu: anns.iter().map(|a| a.nu).collect(),
            runner_up: match direction {
                TradeoffDirection::RecallGain => best_entity_labels(x, weights, &labels)?,
                TradeoffDirection::PrecisionGain => Vec::new(),
            },
        });
    }
    let mut table = Table::new(["t", "precision", "recall", "f1", "replaced"]);
    for p in tradeoff_sweep(&inputs, &threshold_grid(steps), direction, merge)? {
        table.push(vec![
            p.t.into(),
            p.precision.into(),
            p.recall.into(),
            p.f1.into(),
            p.replaced.into(),
        ])?;
    }
    Ok(table)
}

fn active_learn(
    t: Task,
    pool_path: &Path,
    test_path: &Path,
    corpus: &CorpusArgs,
    cfg: &ActiveLearnConfig,
) -> Result<Table> {
    let pool = read_corpus(t, pool_path, corpus)?;
    let test = read_corpus(t, test_path, corpus)?;
    if pool.iter().chain(&test).any(|s| !has_gold(t, s)) {
        return Err(Error::InvalidInstance(
            "active learning needs gold annotation everywhere".into(),
        ));
    }
    let averaged = cfg.train.averaging;
    let curve = match t {
        Task::Chain => {
            let mut featurizer = ChainFeaturizer::from_corpus(ChainTemplates::default(), &pool)?;
            let pool_x = featurizer.extract_all(&pool)?;
            featurizer.freeze();
            let test_x = featurizer.extract_all(&test)?;
            let gold: Vec<Vec<&str>> = test.iter().filter_map(RawSentence::tags).collect();
            active_learning_run(&pool_x, featurizer.dimension(), cfg, |model| {
                let w = model.prediction_weights(averaged);
                let predicted = test_x
                    .iter()
                    .map(|x| Ok(featurizer.label_names(&x.decode(w)?.0)))
                    .collect::<Result<Vec<_>>>()?;
                Ok(entity_prf(&gold, &predicted)?.f1)
            })?
        }
        Task::Tree => {
            let mut featurizer = TreeFeaturizer::new(TreeTemplates::default(), FeatureIndex::new());
            let pool_x = featurizer.extract_all(&pool)?;
            featurizer.freeze();
            let test_x = featurizer.extract_all(&test)?;
            active_learning_run(&pool_x, featurizer.dimension(), cfg, |model| {
                let w = model.prediction_weights(averaged);
                let (mut right, mut total) = (0usize, 0usize);
                for x in &test_x {
                    let heads = x.decode(w)?.0;
                    right += heads.iter().zip(x.gold()).filter(|(a, b)| a == b).count();
                    total += heads.len();
                }
                Ok(right as f64 / total.max(1) as f64)
            })?
        }
    };
    if curve.exhausted {
        log::warn!("pool exhausted before {} sentences", cfg.stop_at);
    }
    let mut table = Table::new(["sentences", "words", "metric"]);
    for p in &curve.points {
        table.push(vec![p.sentences.into(), p.words.into(), p.metric.into()])?;
    }
    Ok(table)
}

fn tune_command(
    model: &Path,
    data: &Path,
    corpus: &CorpusArgs,
    base: &ConfidenceConfig,
) -> Result<Table> {
    let (stored, _, featurized) = load(model, data, corpus)?;
    let grid = Grid::default();
    let result = match &featurized {
        Featurized::Chain { instances, .. } => tune(instances, &stored.model, base, &grid)?,
        Featurized::Tree(instances) => tune(instances, &stored.model, base, &grid)?,
    };
    let mut table = Table::new(["method", "s", "k", "c", "average_precision", "best"]);
    for (cfg, ap) in &result.trials {
        table.push(vec![
            cfg.method.name().into(),
            cfg.s.into(),
            cfg.k.into(),
            cfg.c.into(),
            (*ap).into(),
            (*cfg == result.config).into(),
        ])?;
    }
    Ok(table)
}
