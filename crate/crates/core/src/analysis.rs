//! Corpus statistics: term frequencies, Zipf fits and phrase audits.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::dataset::TrainingExample;
use crate::error::{Error, Result};
use crate::text::{is_reserved, TokenSequence};

/// Token counts, descending, ties broken lexicographically. Markers are
/// not counted.
pub fn term_frequency<'a, I>(corpus: I) -> Result<Vec<(String, u64)>>
where
    I: IntoIterator<Item = &'a TokenSequence>,
{
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut captions = 0usize;
    for seq in corpus {
        captions += 1;
        for tok in seq.tokens() {
            if !is_reserved(tok) {
                *counts.entry(tok.as_str()).or_default() += 1;
            }
        }
    }
    if captions == 0 {
        return Err(Error::EmptyCorpus);
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().map(|(t, c)| (t.to_string(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZipfFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares line through `(ln rank, ln count)` for ranks `1..`.
/// Zero counts are rejected since their logarithm is undefined.
pub fn zipf_fit(counts: &[u64]) -> Result<ZipfFit> {
    if counts.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "Zipf fit needs at least 3 ranks, got {}",
            counts.len()
        )));
    }
    if counts.contains(&0) {
        return Err(Error::InvalidArgument("Zipf fit needs positive counts".into()));
    }
    let pts: Vec<(f64, f64)> = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (((i + 1) as f64).ln(), (c as f64).ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    // a flat line explains a flat series perfectly
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(ZipfFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// How many predictions contain `phrase` contiguously, and what fraction
/// of all predictions that is. An empty phrase matches everything.
pub fn phrase_frequency_report<S: AsRef<str>>(predictions: &[Vec<String>], phrase: &[S]) -> (usize, f64) {
    if predictions.is_empty() {
        return (0, 0.0);
    }
    let count = predictions
        .iter()
        .filter(|p| {
            phrase.is_empty()
                || p.windows(phrase.len())
                    .any(|w| w.iter().zip(phrase).all(|(a, b)| a == b.as_ref()))
        })
        .count();
    (count, count as f64 / predictions.len() as f64)
}

/// Entropy in nats of the next-token targets: the loss of a model that
/// ignores both image and prefix and predicts the target marginal.
pub fn unigram_entropy(examples: &[TrainingExample]) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: HashMap<usize, u64> = HashMap::new();
    for e in examples {
        *counts.entry(e.target).or_default() += 1;
    }
    let n = examples.len() as f64;
    let mut probs: Vec<f64> = counts.values().map(|&c| c as f64 / n).collect();
    probs.sort_by(f64::total_cmp);
    Ok(-probs.iter().map(|p| p * p.ln()).sum::<f64>())
}

/// `rank,token,count` CSV.
pub fn frequency_csv(table: &[(String, u64)]) -> String {
    let mut out = String::from("rank,token,count\n");
    for (i, (tok, c)) in table.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", i + 1, tok, c);
    }
    out
}

/// The same table with aligned columns, for terminals.
pub fn frequency_text(title: &str, table: &[(String, u64)]) -> String {
    let width = table.iter().map(|(t, _)| t.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{title}\n{:>4}  {:<width$}  {:>8}\n", "rank", "token", "count");
    for (i, (tok, c)) in table.iter().enumerate() {
        let _ = writeln!(out, "{:>4}  {:<width$}  {:>8}", i + 1, tok, c);
    }
    out
}
