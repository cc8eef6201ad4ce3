#![allow(dead_code)]

use std::path::{Path, PathBuf};

use topicbench::corpus::{Document, TopicLabel};
use topicbench::lime::{ClassContributions, Explanation, LimeConfig, TokenWeight};
use topicbench::Backend;
use topicbench_workbench::config::{ForestGrid, MaxDepth, ProviderConfig};
use topicbench_workbench::experiment::RunManifest;
use topicbench_workbench::store::ExplanationRecord;
use topicbench_workbench::ExperimentConfig;

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// Bundled corpus with every stage shrunk so a run takes a second or two.
pub fn fast_config(backend: Backend, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        corpus: data("energetics_abstracts.jsonl"),
        backend,
        seed,
        ..Default::default()
    };
    c.preprocess.pos_lexicon_path = Some(data("pos_lexicon.tsv"));
    c.lda.topics = 8;
    c.lda.iterations = 60;
    c.lda.burn_in = 40;
    c.lda.inference_iterations = 10;
    c.word2vec.dim = 16;
    c.word2vec.epochs = 2;
    c.contextual.provider = ProviderConfig::Stub { layers: 2, dim: 16 };
    c.contextual.pooling.last_layers = 2;
    c.forest = ForestGrid {
        max_depths: vec![MaxDepth(Some(6))],
        n_estimators: vec![15],
        criteria: vec![topicbench::forest::Criterion::Gini],
        ..Default::default()
    };
    c.lime = LimeConfig {
        n_samples: 120,
        ..Default::default()
    };
    c
}

fn explanation(doc: &str, probs: [f64; 4]) -> Explanation {
    Explanation {
        document_id: doc.into(),
        class_probabilities: probs,
        predicted: TopicLabel::ALL[probs.iter().enumerate().fold(0, |b, (i, &p)| if p > probs[b] { i } else { b })],
        contributions: TopicLabel::ALL
            .iter()
            .map(|&class| ClassContributions {
                class,
                intercept: 0.25,
                weights: vec![TokenWeight {
                    token: format!("{doc}-term"),
                    weight: 0.01 * (class.index() as f64 + 1.0),
                }],
            })
            .collect(),
        config_fingerprint: "fixture".into(),
    }
}

/// Hand-written run directory with `n` explanations and no judgments.
pub fn fixture_run(root: &Path, run_id: &str, n: usize) -> PathBuf {
    let dir = root.join(run_id);
    std::fs::create_dir_all(&dir).unwrap();
    let mut lines = String::new();
    for i in 0..n {
        let mut doc = Document::labeled(format!("d{i}"), TopicLabel::ALL[i % 4], &["bond", "ring_opening"]);
        doc.title = format!("Title {i}");
        let e = explanation(&doc.id, [0.1, 0.42, 0.2, 0.28]);
        lines.push_str(&ExplanationRecord::new(run_id, &doc, e).to_json_line());
        lines.push('\n');
    }
    std::fs::write(dir.join("explanations.jsonl"), lines).unwrap();
    let manifest = RunManifest {
        run_id: run_id.into(),
        backend: Backend::Word2vec,
        seed: 0,
        n_test: n,
        config_fingerprint: "cfg".into(),
        corpus_fingerprint: "corpus".into(),
        config: ExperimentConfig::default(),
        artifacts: vec![],
    };
    std::fs::write(dir.join("manifest.json"), serde_json::to_vec(&manifest).unwrap()).unwrap();
    std::fs::write(dir.join("metrics.json"), br#"{"test":{"accuracy":0.5}}"#).unwrap();
    dir
}
