// Splits a caption corpus and expands it into next-token examples.

use caption_forge::dataset::{expand, expand_all, split};
use caption_forge::synthetic::topic_corpus;
use caption_forge::text::{Vocabulary, DEFAULT_MAX_LEN};
use caption_forge::Result;

pub fn run_example() -> Result<()> {
    let corpus = topic_corpus(500, 7);
    let (train, val) = split(&corpus, 0.2, 7)?;
    println!("{} captions: {} train, {} validation", corpus.len(), train.len(), val.len());

    let vocab = Vocabulary::build(train.iter().map(|r| &r.tokens), 1)?;
    let first = &train[0];
    println!("\n{}:", first.tokens);
    for ex in expand(first, &vocab, DEFAULT_MAX_LEN) {
        let prefix = vocab.decode_indices(ex.prefix.tokens())?;
        println!("  {prefix} -> {}", vocab.token(ex.target).unwrap_or("?"));
    }

    let expanded = expand_all(&train, &vocab, DEFAULT_MAX_LEN);
    println!(
        "\n{} examples, {:.2} per caption",
        expanded.len(),
        expanded.examples_per_caption()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
