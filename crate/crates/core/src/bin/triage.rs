//! `triage` -- severity triage over radiology report text.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use triage_core::classic::ModelKindName;
use triage_core::cli::{
    cmd_compare, cmd_evaluate, cmd_predict, cmd_synth, cmd_train, TrainOptions,
};
use triage_core::corpus::{CorpusFormat, Scheme};
use triage_core::error::{Error, Result};
use triage_core::eval::{render_comparison_text, render_text, ExperimentConfig, MetricName};
use triage_core::model_file::load_pipeline;
use triage_core::serve::Server;

#[derive(Parser)]
#[command(
    name = "triage",
    version,
    about = "Estimate severity of dental radiology reports from text"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SeedArg {
    /// Master random seed (falls back to TRIAGE_SEED).
    #[arg(long)]
    seed: Option<u64>,
}

impl SeedArg {
    fn resolve(&self) -> Result<u64> {
        if let Some(seed) = self.seed {
            return Ok(seed);
        }
        match std::env::var("TRIAGE_SEED") {
            Ok(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("TRIAGE_SEED is not an integer: {v:?}"))),
            Err(_) => Err(Error::Config(
                "no seed given: pass --seed or set TRIAGE_SEED".into(),
            )),
        }
    }
}

#[derive(Args)]
struct CorpusArgs {
    /// Corpus file path.
    #[arg(long)]
    corpus: PathBuf,
    /// Corpus file format.
    #[arg(long, default_value = "jsonl")]
    format: String,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus.
    Synth {
        /// Number of documents.
        #[arg(long, default_value_t = 1134)]
        n: usize,
        /// Class weights for labels 1-4, comma separated.
        #[arg(long, default_value = "0.15,0.2,0.3,0.35")]
        weights: String,
        /// Output JSONL path.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Train one model and write a model file.
    Train {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Model to train: mnb, logreg, lsvc, svm_rbf, dtree, rforest, mlp, cnn_lstm.
        #[arg(long)]
        model: String,
        /// Label scheme: two_class or four_class.
        #[arg(long, default_value = "two_class")]
        scheme: String,
        /// Output model path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 200)]
        max_len: usize,
        #[arg(long, default_value_t = 1)]
        min_freq: usize,
        #[arg(long, default_value_t = 0.2)]
        test_frac: f64,
        /// Feed TF-IDF vectors to multinomial NB instead of raw counts.
        #[arg(long)]
        mnb_tfidf: bool,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Run the cross-validated evaluation grid and write report files.
    Evaluate {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Output directory for report.json / report.txt.
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Evaluate, then compare models with ANOVA and Tukey HSD.
    Compare {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Output directory for report and comparison files.
        #[arg(long)]
        out_dir: PathBuf,
        /// Cell scheme to compare.
        #[arg(long, default_value = "two_class")]
        scheme: String,
        /// Compare the balanced cell (default) or the imbalanced one.
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        balanced: bool,
        /// Metric: accuracy, precision, recall, f_measure, roc_auc.
        #[arg(long, default_value = "accuracy")]
        metric: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[command(flatten)]
        seed: SeedArg,
    },
    /// Predict the severity of one document.
    Predict {
        /// Model file written by `triage train`.
        #[arg(long)]
        model: PathBuf,
        /// Document text (mutually exclusive with --file).
        #[arg(long)]
        text: Option<String>,
        /// Read the document from a file.
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Serve predictions over HTTP.
    Serve {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
}

#[derive(Args)]
struct GridArgs {
    /// Schemes to evaluate, comma separated (two_class, four_class).
    #[arg(long, default_value = "four_class,two_class")]
    schemes: String,
    /// Cell modes, comma separated (imbalanced, balanced).
    #[arg(long, default_value = "imbalanced,balanced")]
    modes: String,
    /// Models to evaluate, comma separated (default: all eight).
    #[arg(long, default_value = "all")]
    models: String,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 200)]
    max_len: usize,
    #[arg(long, default_value_t = 1)]
    min_freq: usize,
    /// Oversample the whole corpus before splitting (balance-first protocol).
    #[arg(long)]
    paper_mode: bool,
    /// Feed TF-IDF vectors to multinomial NB instead of raw counts.
    #[arg(long)]
    mnb_tfidf: bool,
}

fn parse_scheme(s: &str) -> Result<Scheme> {
    match s {
        "two_class" => Ok(Scheme::TwoClass),
        "four_class" => Ok(Scheme::FourClass),
        other => Err(Error::Config(format!(
            "unknown scheme {other:?} (expected two_class or four_class)"
        ))),
    }
}

fn parse_weights(s: &str) -> Result<[f64; 4]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("bad weight {p:?}")))
        })
        .collect::<Result<_>>()?;
    if parts.len() != 4 {
        return Err(Error::Config(format!(
            "expected 4 class weights, got {}",
            parts.len()
        )));
    }
    Ok([parts[0], parts[1], parts[2], parts[3]])
}

impl GridArgs {
    fn to_config(&self, seed: u64) -> Result<ExperimentConfig> {
        let schemes = self
            .schemes
            .split(',')
            .map(|s| parse_scheme(s.trim()))
            .collect::<Result<Vec<_>>>()?;
        let modes = self
            .modes
            .split(',')
            .map(|m| match m.trim() {
                "balanced" => Ok(true),
                "imbalanced" => Ok(false),
                other => Err(Error::Config(format!("unknown mode {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let models = if self.models == "all" {
            ModelKindName::ALL.to_vec()
        } else {
            self.models
                .split(',')
                .map(|m| m.trim().parse())
                .collect::<Result<Vec<_>>>()?
        };
        Ok(ExperimentConfig {
            schemes,
            modes,
            models,
            k: self.k,
            epochs: self.epochs,
            batch_size: self.batch_size,
            max_len: self.max_len,
            min_freq: self.min_freq,
            seed,
            paper_mode: self.paper_mode,
            mnb_tfidf: self.mnb_tfidf,
            verbose: true,
        })
    }
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Synth {
            n,
            weights,
            out,
            seed,
        } => {
            let seed = seed.resolve()?;
            let weights = parse_weights(&weights)?;
            let written = cmd_synth(n, seed, weights, &out)?;
            println!("wrote {written} documents to {}", out.display());
        }
        Command::Train {
            corpus,
            model,
            scheme,
            out,
            epochs,
            batch_size,
            max_len,
            min_freq,
            test_frac,
            mnb_tfidf,
            seed,
        } => {
            let options = TrainOptions {
                scheme: parse_scheme(&scheme)?,
                epochs,
                batch_size,
                max_len,
                min_freq,
                test_frac,
                mnb_tfidf,
                seed: seed.resolve()?,
            };
            let format: CorpusFormat = corpus.format.parse()?;
            let kind: ModelKindName = model.parse()?;
            let summary = cmd_train(&corpus.corpus, format, kind, &options, &out)?;
            match summary.final_loss {
                Some(loss) => println!(
                    "trained {} ({}): final loss {:.6}, train accuracy {:.4}, test accuracy {:.4}",
                    summary.model,
                    summary.scheme,
                    loss,
                    summary.train_accuracy,
                    summary.test_accuracy
                ),
                None => println!(
                    "trained {} ({}): train accuracy {:.4}, test accuracy {:.4}",
                    summary.model, summary.scheme, summary.train_accuracy, summary.test_accuracy
                ),
            }
            println!("model written to {}", out.display());
        }
        Command::Evaluate {
            corpus,
            grid,
            out_dir,
            seed,
        } => {
            let config = grid.to_config(seed.resolve()?)?;
            let format: CorpusFormat = corpus.format.parse()?;
            let (report, paths) = cmd_evaluate(&corpus.corpus, format, &config, &out_dir)?;
            print!("{}", render_text(&report));
            println!(
                "report written to {} and {}",
                paths.json_path.display(),
                paths.text_path.display()
            );
        }
        Command::Compare {
            corpus,
            grid,
            out_dir,
            scheme,
            balanced,
            metric,
            alpha,
            seed,
        } => {
            let config = grid.to_config(seed.resolve()?)?;
            let format: CorpusFormat = corpus.format.parse()?;
            let metric: MetricName = metric.parse()?;
            let cell_scheme = parse_scheme(&scheme)?;
            let (comparison, path) = cmd_compare(
                &corpus.corpus,
                format,
                &config,
                cell_scheme,
                balanced,
                metric,
                alpha,
                &out_dir,
            )?;
            print!("{}", render_comparison_text(&comparison));
            println!("comparison written to {}", path.display());
        }
        Command::Predict { model, text, file } => {
            let text = match (text, file) {
                (Some(t), None) => t,
                (None, Some(f)) => std::fs::read_to_string(f)?,
                _ => return Err(Error::Config("pass exactly one of --text or --file".into())),
            };
            let prediction = cmd_predict(&model, &text)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&prediction)
                    .map_err(|e| Error::Validation(e.to_string()))?
            );
        }
        Command::Serve { model, port } => {
            let pipeline = load_pipeline(&model)?;
            let server = Server::bind(pipeline, &format!("0.0.0.0:{port}"))?;
            println!("listening on {}", server.addr);
            server.run()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
