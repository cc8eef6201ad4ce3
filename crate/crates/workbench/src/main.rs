use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use topicbench::ctxembed::{EmbeddingProvider, FileProvider, StubProvider};
use topicbench::Backend;
use topicbench_workbench::experiment::{self, RunOptions};
use topicbench_workbench::{provider_http, server, ExperimentConfig, Store};

#[derive(Parser)]
#[command(name = "topicbench", version, about = "Topic classification experiments with LIME review")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, adjudicate and preprocess a corpus and print a summary.
    Ingest {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the corpus path from the config.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Write the prepared corpus (with tokens) as JSON lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full pipeline and write a run directory.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        backend: Option<Backend>,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory that receives `<run id>/`.
        #[arg(long, default_value = "runs")]
        out: PathBuf,
        #[arg(long)]
        overwrite: bool,
        /// Fit the embedding on all documents before splitting.
        #[arg(long)]
        paper_faithful: bool,
        #[arg(long)]
        no_explain: bool,
    },
    /// Pick the LDA topic count or word2vec dimension by cross-validated F1
    /// on the training split.
    Tune {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        backend: Option<Backend>,
        #[arg(long)]
        seed: Option<u64>,
        /// Candidate sizes, e.g. `50,100,150`.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
    },
    /// Print the explanations of a finished run.
    Explain {
        #[arg(long)]
        run_dir: PathBuf,
        /// Only this document.
        #[arg(long)]
        doc: Option<String>,
    },
    /// Agreement score of one or more runs.
    Score {
        #[arg(long, required = true, num_args = 1..)]
        run_dir: Vec<PathBuf>,
        #[arg(long)]
        reviewer: Option<String>,
        /// Count unjudged test documents as not logical.
        #[arg(long)]
        complete: bool,
    },
    /// Serve the review API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// A run directory or a directory of runs.
        #[arg(long, default_value = "runs")]
        run_dir: PathBuf,
    },
    /// Serve contextual embeddings over HTTP from the stub or a record directory.
    StubProvider {
        #[arg(long, default_value = "127.0.0.1:8090")]
        addr: SocketAddr,
        #[arg(long, default_value_t = 12)]
        layers: usize,
        #[arg(long, default_value_t = 768)]
        dim: usize,
        /// Serve records from this directory instead of computing them.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Write stub embeddings for a corpus as file-binding records.
    StubExport {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        layers: usize,
        #[arg(long, default_value_t = 768)]
        dim: usize,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig> {
    match path {
        Some(p) => Ok(ExperimentConfig::load(p)?),
        None => Ok(ExperimentConfig::default()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { config, corpus, out } => {
            let mut config = load_config(config.as_ref())?;
            if let Some(c) = corpus {
                config.corpus = c;
            }
            let prepared = experiment::prepare_corpus(&config)?;
            let c = &prepared.corpus;
            println!("documents: {} ingested, {} with agreed labels", prepared.n_ingested, c.len());
            for (label, n) in c.label_counts() {
                println!("  {label}: {n}");
            }
            let tokens: usize = c.iter().map(|d| d.tokens.len()).sum();
            println!("tokens: {tokens} ({:.1} per document)", tokens as f64 / c.len().max(1) as f64);
            println!("phrases: {}", prepared.phrases.len());
            println!("fingerprint: {}", c.fingerprint());
            if let Some(out) = out {
                let lines: String = c
                    .iter()
                    .map(|d| serde_json::to_string(d).map(|s| s + "\n"))
                    .collect::<Result<_, _>>()?;
                std::fs::write(&out, lines).with_context(|| format!("writing {}", out.display()))?;
            }
        }
        Command::Run {
            config,
            backend,
            seed,
            out,
            overwrite,
            paper_faithful,
            no_explain,
        } => {
            let mut config = load_config(config.as_ref())?;
            if let Some(b) = backend {
                config.backend = b;
            }
            if let Some(s) = seed {
                config.seed = s;
            }
            config.paper_faithful |= paper_faithful;
            let options = RunOptions {
                overwrite,
                skip_explanations: no_explain,
            };
            let report = experiment::run_experiment(&config, &out, &options)?;
            let t = &report.test;
            println!("run {}", report.run_id);
            println!(
                "test ({} docs): accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}",
                report.n_test, t.accuracy, t.precision, t.recall, t.f1
            );
            println!("cv mean f1 {:.4}; {} explanations", report.cv.mean_f1, report.n_explanations);
            println!("written to {}", experiment::run_dir(&out, &report.run_id).display());
        }
        Command::Tune {
            config,
            backend,
            seed,
            sizes,
        } => {
            let mut config = load_config(config.as_ref())?;
            if let Some(b) = backend {
                config.backend = b;
            }
            if let Some(s) = seed {
                config.seed = s;
            }
            let (best, scores) = experiment::tune_embedding_size(&config, &sizes)?;
            for s in &scores {
                println!("{}\t{:.4}", s.size, s.mean_f1);
            }
            println!("best {best}");
        }
        Command::Explain { run_dir, doc } => {
            let store = Store::open(&run_dir)?;
            let runs = store.runs();
            let Some(run) = runs.first() else {
                bail!("no completed run in {}", run_dir.display());
            };
            let mut shown = 0;
            for e in store.explanations(&run.run_id, None)? {
                if doc.as_deref().is_some_and(|d| d != e.document_id) {
                    continue;
                }
                shown += 1;
                let x = &e.explanation;
                println!("{}  predicted {}  (true {})", e.document_id, x.predicted, e.true_label.map(|l| l.to_string()).unwrap_or("?".into()));
                for c in &x.contributions {
                    let terms: Vec<String> = c.weights.iter().map(|w| format!("{} {:+.3}", w.token, w.weight)).collect();
                    println!("  {:<17} {:.2}  {}", c.class.as_str(), x.probability(c.class), terms.join(", "));
                }
            }
            if shown == 0 {
                bail!("no matching explanations");
            }
        }
        Command::Score {
            run_dir,
            reviewer,
            complete,
        } => {
            for dir in run_dir {
                let store = Store::open(&dir)?;
                for run in store.runs() {
                    let r = store.agreement(&run.run_id, reviewer.as_deref(), complete)?;
                    println!(
                        "{}\t{}\t{}/{} = {}\t(judged {} of {})",
                        run.run_id, run.backend, r.overall.c, r.overall.denominator, r.overall.score_display, r.overall.n_judged, r.n_test
                    );
                }
            }
        }
        Command::Serve { addr, run_dir } => {
            let store = Store::open(&run_dir)?;
            if store.runs().is_empty() {
                log::warn!("no completed runs in {}", run_dir.display());
            }
            tokio::runtime::Runtime::new()?
                .block_on(server::serve(addr, store))
                .with_context(|| format!("serving on {addr}"))?;
        }
        Command::StubProvider {
            addr,
            layers,
            dim,
            records,
        } => {
            let provider: Arc<dyn EmbeddingProvider> = match records {
                Some(dir) => Arc::new(FileProvider::new(dir, layers, dim)),
                None => Arc::new(StubProvider::new(layers, dim)),
            };
            tokio::runtime::Runtime::new()?.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
                log::info!("provider listening on {}", listener.local_addr()?);
                axum::serve(listener, provider_http::provider_router(provider)).await?;
                Ok::<_, anyhow::Error>(())
            })?;
        }
        Command::StubExport { config, out, layers, dim } => {
            let config = load_config(config.as_ref())?;
            let prepared = experiment::prepare_corpus(&config)?;
            std::fs::create_dir_all(&out)?;
            StubProvider::new(layers, dim).export_dir(&prepared.corpus, &out)?;
            println!("{} records written to {}", prepared.corpus.len(), out.display());
        }
    }
    Ok(())
}
