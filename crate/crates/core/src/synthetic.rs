//! Small generated corpora for demos and tests.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::CaptionRecord;
use crate::embedding::{mock_embed, EmbeddingStore, ImageEmbedding};
use crate::error::Result;
use crate::text::TokenSequence;

fn record(id: String, words: &[&str], label: Option<&str>) -> Result<CaptionRecord> {
    CaptionRecord::new(id, TokenSequence::from_words(words.iter().copied())?, label.map(str::to_string))
}

/// A restaurant corpus in which `chicken` is a common opener that is always
/// followed by `and`, and `waffles` is the less frequent of the two words
/// after `chicken and`. A trigram agent decoded with a beam of two keeps
/// `chicken and waffles` alive next to `chicken and rice`.
pub fn naive_agent_corpus() -> Vec<CaptionRecord> {
    let captions: [&[&str]; 10] = [
        &["the", "burger"],
        &["the", "pizza"],
        &["the", "salad"],
        &["the", "steak"],
        &["the", "fries"],
        &["chicken", "and", "rice"],
        &["chicken", "and", "rice"],
        &["chicken", "and", "waffles"],
        &["pasta"],
        &["tacos"],
    ];
    captions
        .iter()
        .enumerate()
        .map(|(i, words)| record(format!("naive{i:02}"), words, Some("food")).expect("corpus words are valid"))
        .collect()
}

pub const TOPICS: [(&str, [&str; 9]); 5] = [
    ("food", ["pizza", "burger", "fries", "salad", "cheese", "sauce", "bread", "chicken", "plate"]),
    ("drink", ["beer", "wine", "glass", "cocktail", "coffee", "cup", "bottle", "ice", "tea"]),
    ("inside", ["table", "chairs", "booth", "bar", "room", "lights", "wall", "counter", "seating"]),
    ("outside", ["patio", "sign", "street", "door", "parking", "window", "building", "umbrella", "sidewalk"]),
    ("menu", ["menu", "board", "prices", "specials", "list", "page", "items", "chalk", "text"]),
];

pub const FUNCTION_WORDS: [&str; 5] = ["the", "a", "with", "and", "of"];

/// `count` captions over 50 content words in five topics. Each caption
/// draws 2 to 6 words from its topic, with a Zipf-like preference for the
/// first words of the list, joined by function words. Records are labelled
/// with their topic and keyed `img0000`, `img0001`, ...
pub fn topic_corpus(count: usize, seed: u64) -> Vec<CaptionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights: Vec<f64> = (1..=9).map(|r| 1.0 / r as f64).collect();
    let pick = WeightedIndex::new(&weights).expect("positive weights");
    (0..count)
        .map(|i| {
            let (label, words) = &TOPICS[i % TOPICS.len()];
            let n = rng.gen_range(2..=6);
            let mut caption = vec![FUNCTION_WORDS[rng.gen_range(0..2)]];
            for k in 0..n {
                if k > 0 && rng.gen_bool(0.4) {
                    caption.push(FUNCTION_WORDS[rng.gen_range(2..5)]);
                }
                caption.push(words[pick.sample(&mut rng)]);
            }
            record(format!("img{i:04}"), &caption, Some(label)).expect("corpus words are valid")
        })
        .collect()
}

/// Embeddings that cluster by label: a shared per-label centroid plus a
/// small per-photo perturbation, so images of one topic are close together.
/// Photos without a label share the centroid of the `none` label.
pub fn clustered_embeddings<'a, I>(photos: I, dim: usize, noise: f32, seed: u64) -> Result<EmbeddingStore>
where
    I: IntoIterator<Item = (&'a str, Option<&'a str>)>,
{
    let mut store = EmbeddingStore::new(dim);
    for (photo_id, label) in photos {
        let centroid = mock_embed(&format!("topic:{}", label.unwrap_or("none")), dim, seed);
        let jitter = mock_embed(photo_id, dim, seed);
        let values = centroid
            .values()
            .iter()
            .zip(jitter.values())
            .map(|(c, j)| c + noise * (j - 0.5))
            .collect();
        store.insert(photo_id, ImageEmbedding::new(values)?)?;
    }
    Ok(store)
}

/// [`clustered_embeddings`] for caption records.
pub fn record_embeddings(records: &[CaptionRecord], dim: usize, noise: f32, seed: u64) -> Result<EmbeddingStore> {
    clustered_embeddings(records.iter().map(|r| (r.photo_id.as_str(), r.label.as_deref())), dim, noise, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::Vocabulary;

    #[test]
    fn topic_corpus_shape() {
        let corpus = topic_corpus(500, 1);
        assert_eq!(corpus.len(), 500);
        let vocab = Vocabulary::build(corpus.iter().map(|r| &r.tokens), 1).unwrap();
        assert!(vocab.len() <= 4 + 50);
        assert_eq!(topic_corpus(500, 1), corpus);
        assert_ne!(topic_corpus(500, 2), corpus);
    }

    #[test]
    fn embeddings_cluster_by_label() {
        let corpus = topic_corpus(10, 0);
        let store = record_embeddings(&corpus, 8, 0.1, 0).unwrap();
        let dist = |a: &str, b: &str| {
            let (x, y) = (store.get(a).unwrap().values(), store.get(b).unwrap().values());
            x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f32>()
        };
        // img0000 and img0005 share a topic, img0001 does not
        assert!(dist("img0000", "img0005") < dist("img0000", "img0001"));
    }
}
