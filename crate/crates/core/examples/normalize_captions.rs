// Normalizes a few raw captions, builds a vocabulary and encodes them.

use caption_forge::text::{cleanse, normalize_caption, Vocabulary};
use caption_forge::Result;

pub fn run_example() -> Result<()> {
    let raw = [
        "Sweet & Spicy Chicken",
        "Gruyère mac and cheese",
        "Order online at www.pizzahut.com!",
        "2 slices for $5.99",
    ];
    let normalized: Vec<_> = raw.iter().map(|c| normalize_caption(c)).collect();
    for (r, n) in raw.iter().zip(&normalized) {
        println!("{r:40} -> {:?} -> {n}", cleanse(r));
    }

    let vocab = Vocabulary::build(&normalized, 1)?;
    println!("\nvocabulary ({} tokens):", vocab.len());
    for (i, tok) in vocab.tokens().enumerate() {
        println!("{i:>3} {tok} ({})", vocab.frequency(tok));
    }

    let encoded = vocab.encode(&normalized[0], 15);
    println!("\n{} -> {:?}", normalized[0], encoded.indices());
    assert_eq!(vocab.decode(&encoded)?, normalized[0]);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
