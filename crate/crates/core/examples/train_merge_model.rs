// Trains a small merge-concat model on a topic corpus with clustered
// image embeddings, then captions a few held-out images.

use caption_forge::dataset::{expand_all, split};
use caption_forge::decoder::{caption_image, BeamConfig};
use caption_forge::neural::{train, ArchitectureKind, ArchitectureSpec, NeuralModel, TrainConfig};
use caption_forge::synthetic::{record_embeddings, topic_corpus};
use caption_forge::text::Vocabulary;
use caption_forge::Result;

pub fn run_example() -> Result<()> {
    let corpus = topic_corpus(200, 11);
    let (train_set, val_set) = split(&corpus, 0.2, 11)?;
    let vocab = Vocabulary::build(train_set.iter().map(|r| &r.tokens), 1)?;
    let store = record_embeddings(&corpus, 16, 0.2, 11)?;
    let train_examples = expand_all(&train_set, &vocab, 15).examples;
    let val_examples = expand_all(&val_set, &vocab, 15).examples;

    let spec = ArchitectureSpec {
        max_len: 15,
        ..ArchitectureSpec::uniform(ArchitectureKind::MergeConcat, 16, vocab.len(), store.dim())
    };
    let cfg = TrainConfig {
        batch_size: 16,
        max_epochs: 8,
        seed: 11,
        ..TrainConfig::default()
    };
    let outcome = train(spec, &train_examples, &val_examples, &store, &cfg)?;
    print!("{}", outcome.history_csv());
    println!("best epoch {}", outcome.best_epoch);

    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("merge.nicm");
    outcome.model.save(&path)?;
    let model = NeuralModel::load(&path)?;

    let beam = BeamConfig::default();
    for r in val_set.iter().take(5) {
        let c = caption_image(&model, store.require(&r.photo_id)?, &beam, &vocab)?;
        println!("[{}] {:<40} reference: {}", r.label.as_deref().unwrap_or("-"), c.text(), r.tokens.words().join(" "));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
