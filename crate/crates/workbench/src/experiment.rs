//! The end-to-end run: corpus → embedding → forest → evaluation → LIME,
//! with every artifact written to a run directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use topicbench::corpus::{self, build_vocabulary, detect_bigrams, Corpus, PhraseTable, Preprocessor, TopicLabel};
use topicbench::ctxembed::{self, fetch_token_embeddings, EmbeddingProvider, FileProvider, PoolingConfig, StubProvider, TokenVectors};
use topicbench::forest::{self, CvReport, EvalReport, ForestModel, GridSearchResult};
use topicbench::lda::{self, LdaModel};
use topicbench::lime::{self, Pipeline, PipelineError};
use topicbench::word2vec::{self, W2vModel};
use topicbench::{fingerprint, Backend, EmbeddingMatrix};

use crate::config::{ExperimentConfig, ProviderConfig};
use crate::provider_http::HttpProvider;
use crate::store::ExplanationRecord;

pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Adjudicate,
    Preprocess,
    Phrase,
    Split,
    Embed,
    GridSearch,
    Fit,
    CrossValidate,
    Evaluate,
    Explain,
    Persist,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Adjudicate => "adjudicate",
            Stage::Preprocess => "preprocess",
            Stage::Phrase => "phrase",
            Stage::Split => "split",
            Stage::Embed => "embed",
            Stage::GridSearch => "grid_search",
            Stage::Fit => "fit",
            Stage::CrossValidate => "cross_validate",
            Stage::Evaluate => "evaluate",
            Stage::Explain => "explain",
            Stage::Persist => "persist",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("[{stage}] {message}")]
pub struct ExperimentError {
    pub stage: Stage,
    pub message: String,
}

fn at<E: fmt::Display>(stage: Stage) -> impl Fn(E) -> ExperimentError {
    move |e| ExperimentError {
        stage,
        message: e.to_string(),
    }
}

/// Adjudicated, preprocessed and phrased corpus.
pub struct PreparedCorpus {
    pub corpus: Corpus,
    pub phrases: PhraseTable,
    /// Documents in the input file, before adjudication.
    pub n_ingested: usize,
}

/// ingest → adjudicate → preprocess → phrase.
pub fn prepare_corpus(config: &ExperimentConfig) -> Result<PreparedCorpus, ExperimentError> {
    let raw = corpus::ingest(&config.corpus).map_err(at(Stage::Ingest))?;
    let n_ingested = raw.len();
    let mut corpus = corpus::adjudicate(&raw).map_err(at(Stage::Adjudicate))?;
    log::info!("{} of {n_ingested} documents have agreed labels", corpus.len());
    let preprocessor = Preprocessor::new(config.preprocess.clone()).map_err(at(Stage::Preprocess))?;
    corpus.tokenize(&preprocessor);
    let phrases = detect_bigrams(&corpus, config.phrases.min_count, config.phrases.threshold).map_err(at(Stage::Phrase))?;
    corpus.apply_phrases(&phrases);
    log::info!("{} phrases detected", phrases.len());
    Ok(PreparedCorpus {
        corpus,
        phrases,
        n_ingested,
    })
}

pub fn provider_from_config(config: &ProviderConfig) -> Box<dyn EmbeddingProvider> {
    match config {
        ProviderConfig::Stub { layers, dim } => Box::new(StubProvider::new(*layers, *dim)),
        ProviderConfig::File { dir, layers, dim } => Box::new(FileProvider::new(dir, *layers, *dim)),
        ProviderConfig::Http { url, layers, dim } => Box::new(HttpProvider::new(url.clone(), *layers, *dim)),
    }
}

/// A fitted embedding stage, usable on any token sequence.
pub enum Embedder {
    Lda { model: LdaModel, iterations: usize, seed: u64 },
    Word2vec(W2vModel),
    Contextual { provider: Box<dyn EmbeddingProvider>, pooling: PoolingConfig },
}

impl Embedder {
    pub fn backend(&self) -> Backend {
        match self {
            Embedder::Lda { .. } => Backend::Lda,
            Embedder::Word2vec(_) => Backend::Word2vec,
            Embedder::Contextual { .. } => Backend::Contextual,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Embedder::Lda { model, .. } => model.topics(),
            Embedder::Word2vec(m) => m.dim(),
            Embedder::Contextual { provider, pooling } => ctxembed::pooled_dim(provider.dim(), pooling),
        }
    }

    /// Embeds an arbitrary token sequence. Sequences with nothing the model
    /// knows map to a fixed vector (uniform topics for LDA, zeros otherwise)
    /// so that every LIME perturbation has an embedding.
    pub fn embed(&self, doc_id: &str, tokens: &[String]) -> Result<Vec<f64>, String> {
        match self {
            Embedder::Lda { model, iterations, seed } => match model.infer_topics(tokens, *iterations, *seed) {
                Ok(theta) => Ok(theta),
                Err(lda::LdaError::NoKnownTokens) => Ok(vec![1.0 / model.topics() as f64; model.topics()]),
                Err(e) => Err(e.to_string()),
            },
            Embedder::Word2vec(m) => match m.doc_embedding(tokens) {
                Ok(v) => Ok(v),
                Err(word2vec::W2vError::NoKnownTokens) => Ok(vec![0.0; m.dim()]),
                Err(e) => Err(e.to_string()),
            },
            Embedder::Contextual { provider, pooling } => {
                if tokens.is_empty() {
                    return Ok(vec![0.0; self.dim()]);
                }
                let emb = fetch_token_embeddings(provider.as_ref(), doc_id, tokens).map_err(|e| e.to_string())?;
                ctxembed::pool(&emb, pooling).map_err(|e| e.to_string())
            }
        }
    }

    pub fn embed_corpus(&self, corpus: &Corpus) -> Result<EmbeddingMatrix, String> {
        if let Embedder::Contextual { provider, pooling } = self {
            return ctxembed::ctx_doc_matrix(provider.as_ref(), corpus, pooling, 4).map_err(|e| e.to_string());
        }
        let rows = corpus
            .iter()
            .map(|d| self.embed(&d.id, &d.tokens))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(matrix(self.backend(), rows, self.dim()))
    }
}

fn matrix(backend: Backend, rows: Vec<Vec<f64>>, cols: usize) -> EmbeddingMatrix {
    let n = rows.len();
    EmbeddingMatrix::from_flat(backend, n, cols, rows.into_iter().flatten().collect())
}

/// Embeddings for both halves of the split plus the fitted embedder.
pub struct Embedded {
    pub embedder: Embedder,
    pub train: EmbeddingMatrix,
    pub test: EmbeddingMatrix,
}

/// Fits the configured backend on `train` (or on `train ∪ test` when
/// `paper_faithful`) and embeds both halves.
pub fn embed_split(config: &ExperimentConfig, full: &Corpus, train_idx: &[usize], test_idx: &[usize]) -> Result<Embedded, ExperimentError> {
    let config = config.resolved();
    let train = full.select(train_idx);
    let test = full.select(test_idx);
    let fit_on = if config.paper_faithful { full } else { &train };
    let embedder = match config.backend {
        Backend::Lda => {
            let vocab = build_vocabulary(fit_on, config.vocab_min_freq).map_err(at(Stage::Embed))?;
            let model = lda::fit_lda(fit_on, &vocab, &config.lda).map_err(at(Stage::Embed))?;
            Embedder::Lda {
                model,
                iterations: config.lda.inference_iterations,
                seed: config.seed,
            }
        }
        Backend::Word2vec => {
            let vocab = build_vocabulary(fit_on, config.vocab_min_freq).map_err(at(Stage::Embed))?;
            Embedder::Word2vec(word2vec::fit_word2vec(fit_on, &vocab, &config.word2vec).map_err(at(Stage::Embed))?)
        }
        Backend::Contextual => Embedder::Contextual {
            provider: provider_from_config(&config.contextual.provider),
            pooling: config.contextual.pooling.clone(),
        },
    };
    let (train_m, test_m) = match (&embedder, config.paper_faithful) {
        // use the fitted document-topic rows as they are
        (Embedder::Lda { model, .. }, true) => {
            let all = model.doc_embeddings();
            (all.select_rows(train_idx), all.select_rows(test_idx))
        }
        (Embedder::Lda { model, .. }, false) => (model.doc_embeddings(), embedder.embed_corpus(&test).map_err(at(Stage::Embed))?),
        _ => (embedder.embed_corpus(&train).map_err(at(Stage::Embed))?, embedder.embed_corpus(&test).map_err(at(Stage::Embed))?),
    };
    if !train_m.all_finite() || !test_m.all_finite() {
        return Err(at(Stage::Embed)("embedding has non-finite values"));
    }
    Ok(Embedded {
        embedder,
        train: train_m,
        test: test_m,
    })
}

/// Embedding stage followed by the forest, as one black box for LIME.
pub struct DocPipeline<'a> {
    embedder: &'a Embedder,
    forest: &'a ForestModel,
    doc_id: &'a str,
    /// Layer-pooled token vectors of the full document (contextual only).
    cached: Option<TokenVectors>,
}

impl<'a> DocPipeline<'a> {
    pub fn new(embedder: &'a Embedder, forest: &'a ForestModel, doc_id: &'a str, tokens: &[String]) -> Result<Self, String> {
        let cached = match embedder {
            Embedder::Contextual { provider, pooling } if !tokens.is_empty() => {
                let emb = fetch_token_embeddings(provider.as_ref(), doc_id, tokens).map_err(|e| e.to_string())?;
                Some(ctxembed::token_vectors(&emb, pooling).map_err(|e| e.to_string())?)
            }
            _ => None,
        };
        Ok(DocPipeline {
            embedder,
            forest,
            doc_id,
            cached,
        })
    }

    fn classify(&self, x: &[f64]) -> Result<[f64; 4], PipelineError> {
        self.forest.predict_proba(x).map_err(|e| PipelineError(e.to_string()))
    }
}

impl Pipeline for DocPipeline<'_> {
    fn predict(&self, tokens: &[String]) -> Result<[f64; 4], PipelineError> {
        let x = self.embedder.embed(self.doc_id, tokens).map_err(PipelineError)?;
        self.classify(&x)
    }

    fn predict_masked(&self, tokens: &[String], keep: &[bool]) -> Result<[f64; 4], PipelineError> {
        match &self.cached {
            // provider tokens may be fewer than ours after truncation
            Some(tv) => {
                let x = match tv.mean(|t| keep.get(t).copied().unwrap_or(false)) {
                    Ok(x) => x,
                    Err(ctxembed::CtxError::NoTokens) => vec![0.0; tv.width()],
                    Err(e) => return Err(PipelineError(e.to_string())),
                };
                self.classify(&x)
            }
            None => {
                let kept: Vec<String> = tokens.iter().zip(keep).filter(|(_, &k)| k).map(|(t, _)| t.clone()).collect();
                self.predict(&kept)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub run_id: String,
    pub backend: Backend,
    pub seed: u64,
    pub paper_faithful: bool,
    pub config_fingerprint: String,
    pub corpus_fingerprint: String,
    pub n_ingested: usize,
    pub n_documents: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub embedding_dim: usize,
    pub grid: Vec<GridEntry>,
    pub best: forest::ForestParams,
    pub cv: CvReport,
    pub test: EvalReport,
    pub n_explanations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub params: forest::ForestParams,
    pub mean_f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub seed: u64,
    pub train_fraction: f64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub backend: Backend,
    pub seed: u64,
    pub n_test: usize,
    pub config_fingerprint: String,
    pub corpus_fingerprint: String,
    pub config: ExperimentConfig,
    /// File name → SHA-256 of its bytes.
    pub artifacts: Vec<(String, String)>,
}

/// `{backend}-s{seed}-{first 8 hex digits of the config fingerprint}`.
pub fn run_id(config: &ExperimentConfig) -> String {
    format!("{}-s{}-{}", config.backend, config.seed, fingerprint::short(&config.fingerprint(), 8))
}

/// Options that do not change results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replace an existing run directory of the same id.
    pub overwrite: bool,
    /// Skip the LIME stage.
    pub skip_explanations: bool,
}

/// Runs the whole pipeline and writes `runs_root/<run id>/`.
///
/// The directory holds an `INCOMPLETE` marker until every artifact is in
/// place; on failure the marker is left behind with the error in it.
pub fn run_experiment(config: &ExperimentConfig, runs_root: &Path, options: &RunOptions) -> Result<ExperimentReport, ExperimentError> {
    config.validate().map_err(at(Stage::Config))?;
    config.check_paths().map_err(at(Stage::Config))?;
    let config = config.resolved();
    let run_id = run_id(&config);
    let dir = runs_root.join(&run_id);
    if dir.exists() {
        if !options.overwrite {
            return Err(at(Stage::Persist)(format!("{} already exists", dir.display())));
        }
        fs::remove_dir_all(&dir).map_err(at(Stage::Persist))?;
    }
    fs::create_dir_all(dir.join("models")).map_err(at(Stage::Persist))?;
    fs::write(dir.join(INCOMPLETE_MARKER), "running\n").map_err(at(Stage::Persist))?;
    match execute(&config, &run_id, &dir, options) {
        Ok(report) => {
            fs::remove_file(dir.join(INCOMPLETE_MARKER)).map_err(at(Stage::Persist))?;
            Ok(report)
        }
        Err(e) => {
            let _ = fs::write(dir.join(INCOMPLETE_MARKER), format!("{e}\n"));
            Err(e)
        }
    }
}

fn execute(config: &ExperimentConfig, run_id: &str, dir: &Path, options: &RunOptions) -> Result<ExperimentReport, ExperimentError> {
    let prepared = prepare_corpus(config)?;
    let full = &prepared.corpus;
    let labels = full.labels().map_err(at(Stage::Split))?;
    let (train_idx, test_idx) =
        corpus::stratified_split_indices(&labels, config.split_fraction, config.seed).map_err(at(Stage::Split))?;
    let ids = |idx: &[usize]| idx.iter().map(|&i| full.documents()[i].id.clone()).collect::<Vec<_>>();
    let split = SplitRecord {
        seed: config.seed,
        train_fraction: config.split_fraction,
        train: ids(&train_idx),
        test: ids(&test_idx),
    };
    log::info!("split: {} train, {} test", train_idx.len(), test_idx.len());

    let embedded = embed_split(config, full, &train_idx, &test_idx)?;
    log::info!("embedded with {} ({} dims)", config.backend, embedded.train.cols());
    let y_train: Vec<TopicLabel> = train_idx.iter().map(|&i| labels[i]).collect();
    let y_test: Vec<TopicLabel> = test_idx.iter().map(|&i| labels[i]).collect();

    let grid = config.forest.candidates(config.seed);
    let search: GridSearchResult =
        forest::grid_search(&embedded.train, &y_train, &grid, config.cv_folds, config.seed).map_err(at(Stage::GridSearch))?;
    log::info!("best forest: {:?}", search.best);
    let mut model = forest::fit_forest(&embedded.train, &y_train, &search.best).map_err(at(Stage::Fit))?;
    model.set_corpus_hash(full.fingerprint());
    let cv = forest::cross_validate(&embedded.train, &y_train, &search.best, config.cv_folds, config.seed)
        .map_err(at(Stage::CrossValidate))?;
    let predictions = model.predict_matrix(&embedded.test).map_err(at(Stage::Evaluate))?;
    let test_report = forest::evaluate_labels(&y_test, &predictions).map_err(at(Stage::Evaluate))?;
    log::info!("test accuracy {:.4}, macro f1 {:.4}", test_report.accuracy, test_report.f1);

    let mut explanations = Vec::new();
    if !options.skip_explanations {
        for (n, &i) in test_idx.iter().enumerate() {
            let doc = &full.documents()[i];
            let pipeline = DocPipeline::new(&embedded.embedder, &model, &doc.id, &doc.tokens).map_err(at(Stage::Explain))?;
            let e = lime::explain(&pipeline, doc, &config.lime).map_err(at(Stage::Explain))?;
            explanations.push(ExplanationRecord::new(run_id, doc, e));
            if (n + 1) % 10 == 0 {
                log::info!("explained {}/{}", n + 1, test_idx.len());
            }
        }
    }

    let report = ExperimentReport {
        run_id: run_id.to_string(),
        backend: config.backend,
        seed: config.seed,
        paper_faithful: config.paper_faithful,
        config_fingerprint: config.fingerprint(),
        corpus_fingerprint: full.fingerprint(),
        n_ingested: prepared.n_ingested,
        n_documents: full.len(),
        n_train: train_idx.len(),
        n_test: test_idx.len(),
        embedding_dim: embedded.train.cols(),
        grid: grid
            .iter()
            .zip(&search.mean_f1)
            .map(|(p, &f)| GridEntry { params: p.clone(), mean_f1: f })
            .collect(),
        best: search.best.clone(),
        cv,
        test: test_report,
        n_explanations: explanations.len(),
    };
    persist(dir, config, &report, &split, &prepared.phrases, &embedded.embedder, &model, &explanations).map_err(at(Stage::Persist))?;
    Ok(report)
}

fn json_pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializable");
    out.push(b'\n');
    out
}

#[allow(clippy::too_many_arguments)]
fn persist(
    dir: &Path,
    config: &ExperimentConfig,
    report: &ExperimentReport,
    split: &SplitRecord,
    phrases: &PhraseTable,
    embedder: &Embedder,
    model: &ForestModel,
    explanations: &[ExplanationRecord],
) -> std::io::Result<()> {
    let mut files: Vec<(String, Vec<u8>)> = vec![
        ("config.toml".into(), config.to_toml().into_bytes()),
        ("split.json".into(), json_pretty(split)),
        ("metrics.json".into(), json_pretty(report)),
        ("metrics.jsonl".into(), report.test.to_jsonl().into_bytes()),
        (
            "explanations.jsonl".into(),
            explanations.iter().map(|e| format!("{}\n", e.to_json_line())).collect::<String>().into_bytes(),
        ),
        ("models/phrases.json".into(), json_pretty(phrases)),
        ("models/forest.json".into(), serde_json::to_vec(model).expect("serializable")),
    ];
    let model_path = |name: &str| dir.join("models").join(name);
    match embedder {
        Embedder::Lda { model, .. } => model.save(model_path("lda.bin")).map_err(std::io::Error::other)?,
        Embedder::Word2vec(m) => m.save(model_path("word2vec.bin")).map_err(std::io::Error::other)?,
        Embedder::Contextual { .. } => {}
    }
    for (name, bytes) in &files {
        fs::write(dir.join(name), bytes)?;
    }
    let judgments = dir.join(crate::store::JUDGMENTS_FILE);
    if !judgments.exists() {
        fs::write(&judgments, b"")?;
    }
    for name in ["lda.bin", "word2vec.bin"] {
        if let Ok(bytes) = fs::read(model_path(name)) {
            files.push((format!("models/{name}"), bytes));
        }
    }
    let manifest = RunManifest {
        run_id: report.run_id.clone(),
        backend: report.backend,
        seed: report.seed,
        n_test: report.n_test,
        config_fingerprint: report.config_fingerprint.clone(),
        corpus_fingerprint: report.corpus_fingerprint.clone(),
        config: config.clone(),
        artifacts: files.iter().map(|(n, b)| (n.clone(), fingerprint::sha256_hex(b))).collect(),
    };
    fs::write(dir.join("manifest.json"), json_pretty(&manifest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeScore {
    pub size: usize,
    /// Best mean cross-validated macro-F1 over the forest grid.
    pub mean_f1: f64,
    pub best: forest::ForestParams,
}

/// Chooses the embedding size (LDA topics or word2vec dimension) by
/// downstream classification.
///
/// Each candidate embedding is fit on the training split and scored by the
/// best mean cross-validated macro-F1 of the forest grid. The test split is
/// never used. Ties go to the smaller size.
pub fn tune_embedding_size(config: &ExperimentConfig, sizes: &[usize]) -> Result<(usize, Vec<SizeScore>), ExperimentError> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(at(Stage::Config)("sizes must be non-empty and positive"));
    }
    if config.backend == Backend::Contextual {
        return Err(at(Stage::Config)("the contextual width is fixed by the provider"));
    }
    config.validate().map_err(at(Stage::Config))?;
    config.check_paths().map_err(at(Stage::Config))?;
    let base = ExperimentConfig {
        paper_faithful: false,
        ..config.resolved()
    };
    let prepared = prepare_corpus(&base)?;
    let full = &prepared.corpus;
    let labels = full.labels().map_err(at(Stage::Split))?;
    let (train_idx, _) = corpus::stratified_split_indices(&labels, base.split_fraction, base.seed).map_err(at(Stage::Split))?;
    let y_train: Vec<TopicLabel> = train_idx.iter().map(|&i| labels[i]).collect();
    let grid = base.forest.candidates(base.seed);

    let mut scores = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let mut c = base.clone();
        match c.backend {
            Backend::Lda => c.lda.topics = size,
            _ => c.word2vec.dim = size,
        }
        let embedded = embed_split(&c, full, &train_idx, &[])?;
        let search = forest::grid_search(&embedded.train, &y_train, &grid, c.cv_folds, c.seed).map_err(at(Stage::GridSearch))?;
        let mean_f1 = search.mean_f1[search.best_index];
        log::info!("size {size}: cv mean f1 {mean_f1:.4}");
        scores.push(SizeScore { size, mean_f1, best: search.best });
    }
    let best = scores
        .iter()
        .max_by(|a, b| a.mean_f1.total_cmp(&b.mean_f1).then(b.size.cmp(&a.size)))
        .map(|s| s.size)
        .expect("non-empty");
    Ok((best, scores))
}

pub fn run_dir(runs_root: &Path, run_id: &str) -> PathBuf {
    runs_root.join(run_id)
}
