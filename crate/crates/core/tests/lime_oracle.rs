use rand::Rng;
use topicbench::lime::{explain_tokens, LimeConfig, PipelineError};

// Linear bag-of-words black box over 10 tokens: presence of token j shifts
// class 0 by coef[j] and class 1 by -coef[j].
fn plant(seed: u64) -> [f64; 10] {
    let mut rng = topicbench::rng::seeded(seed);
    let raw: [f64; 10] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let scale = 0.24 / raw.iter().map(|c| c.abs()).sum::<f64>();
    raw.map(|c| c * scale)
}

fn top5(coef: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..coef.len()).collect();
    idx.sort_by(|&a, &b| coef[b].abs().total_cmp(&coef[a].abs()));
    idx.truncate(5);
    idx
}

#[test]
fn planted_linear_pipeline_is_recovered() {
    let words: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
    for plant_seed in 0..5 {
        let coef = plant(plant_seed);
        let pipeline = |t: &[String]| -> Result<[f64; 4], PipelineError> {
            let s: f64 = words.iter().zip(coef).filter(|(w, _)| t.contains(w)).map(|(_, c)| c).sum();
            Ok([0.25 + s, 0.25 - s, 0.25, 0.25])
        };
        let config = LimeConfig {
            n_samples: 2000,
            top_k: 5,
            seed: plant_seed,
            ..LimeConfig::default()
        };
        let e = explain_tokens(&pipeline, "planted", &words, &config).unwrap();
        let truth = top5(&coef);
        let found = e.contributions[0].weights.iter().filter(|w| {
            let j: usize = w.token[1..].parse().unwrap();
            truth.contains(&j)
        });
        let mut hits = 0;
        for w in found {
            let j: usize = w.token[1..].parse().unwrap();
            assert_eq!(w.weight.signum(), coef[j].signum(), "plant {plant_seed} token {j}");
            hits += 1;
        }
        assert!(hits >= 4, "plant {plant_seed}: {hits} of 5");
    }
}
