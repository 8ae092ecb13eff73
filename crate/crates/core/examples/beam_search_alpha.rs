// How the length discount alpha shifts caption length under beam search.

use caption_forge::decoder::{beam_search, score_candidate, BeamConfig};
use caption_forge::embedding::{mock_embed, ImageEmbedding};
use caption_forge::scorer::{NextTokenDistribution, RandomTableScorer, Scorer};
use caption_forge::text::{EncodedCaption, END_INDEX};
use caption_forge::Result;

/// Random tables with extra probability on `<endseq>`, so captions end at
/// varied lengths instead of running to the cap.
struct EagerToStop {
    inner: RandomTableScorer,
    stop: f64,
}

impl Scorer for EagerToStop {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn predict_next(&self, image: &ImageEmbedding, prefix: &EncodedCaption) -> Result<NextTokenDistribution> {
        let mut p: Vec<f64> = self
            .inner
            .predict_next(image, prefix)?
            .probs()
            .iter()
            .map(|p| p * (1.0 - self.stop))
            .collect();
        p[END_INDEX] += self.stop;
        Ok(NextTokenDistribution::from_weights(p))
    }
}

pub fn run_example() -> Result<()> {
    println!("score of (0.9, 0.8):");
    for alpha in [0.6, 0.7, 0.8, 1.0] {
        println!("  alpha {alpha}: {:.4}", score_candidate(&[0.9, 0.8], alpha)?);
    }

    let scorer = EagerToStop {
        inner: RandomTableScorer::new(12, 3),
        stop: 0.2,
    };
    let images: Vec<_> = (0..100).map(|i| mock_embed(&format!("img{i}"), 16, 3)).collect();
    println!("\nmean generated tokens over {} images:", images.len());
    for alpha in [0.6, 0.7, 0.8] {
        let cfg = BeamConfig {
            alpha,
            beta: 3,
            kappa: 3,
            max_len: 15,
        };
        let mut total = 0;
        for img in &images {
            total += beam_search(&scorer, img, &cfg)?[0].generated();
        }
        println!("  alpha {alpha}: {:.2}", total as f64 / images.len() as f64);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
