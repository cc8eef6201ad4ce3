use rand::seq::SliceRandom;

use super::{Corpus, CorpusError, TopicLabel};

/// Train/test split preserving label proportions.
///
/// The test side gets `ceil((1 - train_fraction) * n)` documents, shared out
/// across labels by largest remainder so every label's test count is within
/// one document of its proportional share. Which documents land in the test
/// side is decided by a seeded shuffle inside each label. Both halves keep
/// corpus order.
pub fn stratified_split(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<(Corpus, Corpus), CorpusError> {
    let labels = corpus.labels()?;
    let (train, test) = stratified_split_indices(&labels, train_fraction, seed)?;
    Ok((corpus.select(&train), corpus.select(&test)))
}

/// Index form of [`stratified_split`]; returns sorted (train, test) positions.
pub fn stratified_split_indices(
    labels: &[TopicLabel],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidArgument(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); TopicLabel::COUNT];
    for (i, label) in labels.iter().enumerate() {
        by_label[label.index()].push(i);
    }
    for (k, members) in by_label.iter().enumerate() {
        if !members.is_empty() && members.len() < 2 {
            return Err(CorpusError::Stratification {
                label: TopicLabel::ALL[k],
                count: members.len(),
                needed: 2,
            });
        }
    }

    let n = labels.len();
    let test_fraction = 1.0 - train_fraction;
    // 1e-9 absorbs representation error such as (1 - 0.7) * 10 = 3.0000000000000004
    let n_test = ((test_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;

    let quotas: Vec<f64> = by_label
        .iter()
        .map(|m| m.len() as f64 * n_test as f64 / n as f64)
        .collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = n_test - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..TopicLabel::COUNT).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if counts[k] < by_label[k].len() {
            counts[k] += 1;
            remaining -= 1;
        }
    }

    let mut rng = crate::rng::seeded(seed);
    let mut train = Vec::with_capacity(n - n_test);
    let mut test = Vec::with_capacity(n_test);
    for (members, &count) in by_label.iter_mut().zip(&counts) {
        members.shuffle(&mut rng);
        test.extend_from_slice(&members[..count]);
        train.extend_from_slice(&members[count..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
