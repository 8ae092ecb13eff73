// BLEU, ROUGE-L and diversity on a handful of predictions, overall and
// per label.

use std::collections::HashMap;

use caption_forge::metrics::{bleu_n, evaluate_predictions, rouge_l, Reference, RougeMode};
use caption_forge::Result;

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub fn run_example() -> Result<()> {
    let cand = [words("the cat")];
    let reference = [words("the cat sat")];
    println!("BLEU-1      {:.6}", bleu_n(&cand, &reference, 1)?);
    println!("ROUGE-L r   {:.6}", rouge_l(&cand, &reference, RougeMode::Recall)?);
    println!("ROUGE-L f1  {:.6}\n", rouge_l(&cand, &reference, RougeMode::F1)?);

    let refs: HashMap<String, Reference> = [
        ("a", "a cheese pizza with basil", "food"),
        ("b", "pint of beer on the bar", "drink"),
        ("c", "the patio at night", "outside"),
        ("d", "chicken and waffles", "food"),
    ]
    .into_iter()
    .map(|(id, text, label)| {
        (
            id.to_string(),
            Reference {
                words: words(text),
                label: Some(label.to_string()),
            },
        )
    })
    .collect();
    let preds: Vec<(String, Vec<String>)> = [
        ("a", "a pizza with cheese"),
        ("b", "a beer on the bar"),
        ("c", "the patio"),
        ("d", "chicken and waffles"),
    ]
    .into_iter()
    .map(|(id, text)| (id.to_string(), words(text)))
    .collect();

    let report = evaluate_predictions(&preds, &refs, true, RougeMode::F1)?;
    print!("{}", report.to_table("example", Some(0.6)));
    println!("\n{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
