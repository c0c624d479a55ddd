//! `structconf`: train structured predictors, score per-word confidence and
//! evaluate it from the command line.

mod commands;
mod data;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use structconf::report::Format;
use structconf::Error;

#[derive(Parser, Debug)]
#[command(
    name = "structconf",
    version,
    about = "Online structured learning with per-word confidence"
)]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Report format.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,

    /// Write the report here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Chain,
    Tree,
}

/// Column layout of chunking/NER files.
#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ColumnsArg {
    /// `word POS ... tag`, the tag in the last column.
    Last,
    /// `word POS chunk`
    Chunking,
    /// `word POS chunk entity`
    Ner,
}

#[derive(Args, Debug, Clone)]
pub struct CorpusArgs {
    /// Chain file layout.
    #[arg(long, value_enum, default_value_t = ColumnsArg::Last)]
    pub columns: ColumnsArg,
}

#[derive(Args, Debug, Clone)]
pub struct ConfidenceArgs {
    /// delta, gamma, kb, wkb, kd-fix, kd-pc, kd-fix-delta or random.
    #[arg(long, default_value = "kd-fix")]
    pub method: String,
    /// Alternatives per sentence.
    #[arg(long, default_value_t = 50)]
    pub k: usize,
    /// Covariance scale of sampled weight vectors.
    #[arg(long, default_value_t = 0.1)]
    pub s: f64,
    /// Temperature of marginal probabilities.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Weight of the sampling score in kd-fix-delta.
    #[arg(long, default_value_t = 0.99)]
    pub combo_weight: f64,
    /// Score with the final rather than the averaged weights.
    #[arg(long)]
    pub final_weights: bool,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    /// perceptron, pa, cw or nbest-pa.
    #[arg(long, default_value = "cw")]
    pub algorithm: String,
    /// PA aggressiveness.
    #[arg(long, default_value_t = 1.0)]
    pub aggressiveness: f64,
    /// CW confidence parameter.
    #[arg(long, default_value_t = 1.0)]
    pub phi: f64,
    /// CW initial variance.
    #[arg(long, default_value_t = 1.0)]
    pub initial_variance: f64,
    /// Outputs per update for nbest-pa.
    #[arg(long, default_value_t = 5)]
    pub nbest_k: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// Keep the final weights instead of their average.
    #[arg(long)]
    pub no_averaging: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate seeded synthetic train/dev/test corpora.
    Synth {
        #[arg(long, value_enum, default_value_t = TaskArg::Chain)]
        task: TaskArg,
        #[arg(long, default_value_t = 1000)]
        train: usize,
        #[arg(long, default_value_t = 200)]
        dev: usize,
        #[arg(long, default_value_t = 200)]
        test: usize,
        #[arg(long, default_value_t = 5)]
        min_len: usize,
        #[arg(long, default_value_t = 25)]
        max_len: usize,
        /// Entity categories (chains).
        #[arg(long, default_value_t = 4)]
        categories: usize,
        /// Words per label or POS tag.
        #[arg(long, default_value_t = 50)]
        vocab: usize,
        /// POS tags (trees).
        #[arg(long, default_value_t = 8)]
        tags: usize,
        /// Share of ambiguous words (chains) or edge score noise (trees), in [0, 1].
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        /// Directory for train, dev and test files.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a model on a corpus.
    Train {
        #[arg(long, value_enum, default_value_t = TaskArg::Chain)]
        task: TaskArg,
        #[arg(long)]
        data: PathBuf,
        /// Where to write the model.
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Predict labels or heads for a corpus.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Score with the final rather than the averaged weights.
        #[arg(long)]
        final_weights: bool,
    },
    /// Per-word confidence records.
    Confidence {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        conf: ConfidenceArgs,
    },
    /// Average precision and precision at recall deciles of error detection.
    EvalRank {
        /// Confidence records in CSV with `nu` and `correct` columns.
        #[arg(long)]
        input: PathBuf,
    },
    /// Twenty-bin calibration table and RMSE.
    EvalCalib {
        /// Confidence records in CSV with `nu` and `correct` columns.
        #[arg(long)]
        input: PathBuf,
    },
    /// Sample-size bounds for estimating per-word correctness probabilities.
    Bounds {
        /// Samples needed for accuracy eps with confidence 1 - delta over n words.
        #[arg(long, conflicts_with = "bernstein")]
        chernoff: bool,
        /// Interval half-width for a word with correctness probability gamma.
        #[arg(long)]
        bernstein: bool,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        n: u64,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        k: Option<u64>,
    },
    /// Sweep the confidence threshold and report entity precision and recall.
    Tradeoff {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        conf: ConfidenceArgs,
        /// precision or recall.
        #[arg(long, default_value = "precision")]
        direction: String,
        /// Collapse entity categories (recall direction).
        #[arg(long)]
        merge: bool,
        /// Threshold steps between 0 and 1.
        #[arg(long, default_value_t = 20)]
        steps: usize,
    },
    /// Simulate pool-based active learning.
    ActiveLearn {
        #[arg(long, value_enum, default_value_t = TaskArg::Chain)]
        task: TaskArg,
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        conf: ConfidenceArgs,
        /// Choose sentences at random instead of by confidence.
        #[arg(long)]
        random: bool,
        #[arg(long, default_value_t = 50)]
        initial: usize,
        #[arg(long, default_value_t = 1000)]
        candidates: usize,
        #[arg(long, default_value_t = 10)]
        batch: usize,
        #[arg(long, default_value_t = 100)]
        eval_every: usize,
        #[arg(long, default_value_t = 5000)]
        stop_at: usize,
    },
    /// Grid-search confidence parameters on held-out data.
    Tune {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        conf: ConfidenceArgs,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::UnsupportedMethod(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
