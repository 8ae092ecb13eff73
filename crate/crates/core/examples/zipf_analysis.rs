// Term frequencies, a Zipf fit and a phrase audit.

use caption_forge::analysis::{frequency_text, phrase_frequency_report, term_frequency, zipf_fit};
use caption_forge::synthetic::topic_corpus;
use caption_forge::Result;

pub fn run_example() -> Result<()> {
    let fit = zipf_fit(&[1000, 500, 333, 250, 200])?;
    println!("1000/rank counts: slope {:.4}, r^2 {:.5}\n", fit.slope, fit.r_squared);

    let corpus = topic_corpus(500, 3);
    let table = term_frequency(corpus.iter().map(|r| &r.tokens))?;
    print!("{}", frequency_text("top terms", &table[..10]));
    let counts: Vec<u64> = table.iter().map(|p| p.1).collect();
    let fit = zipf_fit(&counts)?;
    println!("corpus: slope {:.3}, intercept {:.3}, r^2 {:.3}", fit.slope, fit.intercept, fit.r_squared);

    let captions: Vec<Vec<String>> = corpus.iter().map(|r| r.tokens.words()).collect();
    let (n, frac) = phrase_frequency_report(&captions, &["with", "cheese"]);
    println!("\"with cheese\" in {n} captions ({:.1}%)", 100.0 * frac);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
