// The whole pipeline through the command-line entry point: raw captions
// to an evaluation report, in a temporary directory.

use std::fmt::Write as _;
use std::path::Path;

use caption_forge::cli;
use caption_forge::synthetic::topic_corpus;
use caption_forge::{Error, Result};

fn step(dir: &Path, args: &[&str]) -> Result<()> {
    println!("\n$ caption-forge {}", args.join(" "));
    let argv = std::iter::once("caption-forge".to_string()).chain(args.iter().map(|a| {
        // bare file names live in the work directory
        if a.contains('.') && !a.starts_with('-') && a.parse::<f64>().is_err() {
            dir.join(a).display().to_string()
        } else {
            a.to_string()
        }
    }));
    match cli::run(argv.collect::<Vec<_>>()) {
        0 => Ok(()),
        code => Err(Error::InvalidArgument(format!("{} exited with {code}", args[0]))),
    }
}

pub fn run_example() -> Result<()> {
    let tmp = tempfile::tempdir().expect("temp dir");
    let dir = tmp.path();
    let mut raw = String::new();
    for r in topic_corpus(300, 5) {
        let caption = r.tokens.words().join(" ");
        let line = serde_json::json!({ "photo_id": r.photo_id, "caption": caption, "label": r.label });
        let _ = writeln!(raw, "{line}");
    }
    std::fs::write(dir.join("captions.jsonl"), raw).expect("write captions");

    step(dir, &["preprocess", "--in", "captions.jsonl", "--out", "tokens.jsonl", "--min-freq", "1"])?;
    step(dir, &["--seed", "5", "split", "--in", "tokens.jsonl", "--train-out", "train.jsonl", "--val-out", "val.jsonl"])?;
    step(dir, &["expand", "--in", "train.jsonl", "--vocab", "tokens.vocab", "--out", "train.nicd"])?;
    step(dir, &["--seed", "5", "mock-embed", "--in", "tokens.jsonl", "--out", "images.nice", "--dim", "16", "--cluster-noise", "0.2"])?;
    step(dir, &["train-ngram", "--in", "train.jsonl", "--vocab", "tokens.vocab", "--out", "trigram.ngram"])?;
    step(
        dir,
        &[
            "--seed", "5", "train-neural", "--train", "train.jsonl", "--val", "val.jsonl", "--vocab", "tokens.vocab",
            "--embeddings", "images.nice", "--out", "merge.nicm", "--arch", "merge-concat", "--dim", "16",
            "--batch-size", "16", "--max-epochs", "5", "--history-out", "history.csv",
        ],
    )?;
    for (model, out) in [("merge.nicm", "neural.jsonl"), ("trigram.ngram", "ngram.jsonl")] {
        step(
            dir,
            &[
                "caption", "--model", model, "--vocab", "tokens.vocab", "--embeddings", "images.nice", "--ids", "val.jsonl",
                "--out", out, "--alpha", "0.6", "--beta", "3", "--kappa", "3", "--jobs", "2",
            ],
        )?;
    }
    step(
        dir,
        &[
            "evaluate", "--predictions", "neural.jsonl", "--references", "val.jsonl", "--group-by-label", "--json-out",
            "report.json", "--name", "merge-concat", "--alpha", "0.6",
        ],
    )?;
    step(dir, &["evaluate", "--predictions", "ngram.jsonl", "--references", "val.jsonl", "--name", "trigram", "--alpha", "0.6"])?;
    step(
        dir,
        &["analyze", "--in", "tokens.jsonl", "--top", "5", "--ngram", "trigram.ngram", "--vocab", "tokens.vocab", "--context", "", "--context", "the"],
    )
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
