//! Caption quality metrics: corpus BLEU-N, ROUGE-L, and vocabulary
//! diversity statistics, plus the run-level report that combines them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::read_jsonl;
use crate::error::{Error, Result};
use crate::text::{normalize_caption, strip_markers};

pub const MAX_BLEU_ORDER: usize = 4;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_default() += 1;
        }
    }
    counts
}

/// Corpus BLEU with any number of references per candidate.
///
/// Clipped n-gram matches and candidate n-gram totals are pooled over the
/// corpus for each order `1..=n`; the score is their geometric mean times
/// the brevity penalty `min(1, exp(1 - r / c))`, where `r` sums, per
/// candidate, the reference length closest to the candidate length. No
/// smoothing: any order without a match scores 0.
pub fn corpus_bleu(candidates: &[Vec<String>], references: &[Vec<Vec<String>>], n: usize) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidArgument("BLEU order must be >= 1".into()));
    }
    if candidates.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if candidates.len() != references.len() {
        return Err(Error::InvalidArgument(format!(
            "{} candidates but {} reference sets",
            candidates.len(),
            references.len()
        )));
    }

    // per-candidate statistics are independent; gather them in order so the
    // pooled sums do not depend on the thread count
    let stats: Vec<(usize, usize, Vec<usize>)> = candidates
        .par_iter()
        .zip(references)
        .map(|(cand, refs)| {
            let closest = refs
                .iter()
                .map(Vec::len)
                .min_by_key(|&r| (r.abs_diff(cand.len()), r))
                .unwrap_or(0);
            let clipped = (1..=n)
                .map(|k| {
                    let mut max_ref: HashMap<&[String], usize> = HashMap::new();
                    for r in refs {
                        for (gram, c) in ngram_counts(r, k) {
                            let e = max_ref.entry(gram).or_default();
                            *e = (*e).max(c);
                        }
                    }
                    ngram_counts(cand, k)
                        .into_iter()
                        .map(|(gram, c)| c.min(max_ref.get(gram).copied().unwrap_or(0)))
                        .sum()
                })
                .collect();
            (cand.len(), closest, clipped)
        })
        .collect();

    let mut matches = vec![0usize; n];
    let mut totals = vec![0usize; n];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (c, r, clipped) in &stats {
        cand_len += c;
        ref_len += r;
        for k in 1..=n {
            matches[k - 1] += clipped[k - 1];
            totals[k - 1] += c.saturating_sub(k - 1);
        }
    }

    if cand_len == 0 || matches.contains(&0) {
        return Ok(0.0);
    }
    let log_precision: f64 = matches
        .iter()
        .zip(&totals)
        .map(|(&m, &t)| (m as f64 / t as f64).ln())
        .sum::<f64>()
        / n as f64;
    let brevity = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    Ok(brevity * log_precision.exp())
}

/// Corpus BLEU-N with one reference per candidate.
pub fn bleu_n(candidates: &[Vec<String>], references: &[Vec<String>], n: usize) -> Result<f64> {
    let refs: Vec<Vec<Vec<String>>> = references.iter().map(|r| vec![r.clone()]).collect();
    corpus_bleu(candidates, &refs, n)
}

/// Clipped (modified) n-gram precision of the whole corpus, single reference.
pub fn modified_precision(candidates: &[Vec<String>], references: &[Vec<String>], n: usize) -> (usize, usize) {
    let mut matched = 0;
    let mut total = 0;
    for (cand, reference) in candidates.iter().zip(references) {
        let ref_counts = ngram_counts(reference, n);
        for (gram, c) in ngram_counts(cand, n) {
            matched += c.min(ref_counts.get(gram).copied().unwrap_or(0));
        }
        total += cand.len().saturating_sub(n - 1);
    }
    (matched, total)
}

/// Length of the longest common subsequence.
pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RougeMode {
    Recall,
    #[default]
    F1,
}

impl FromStr for RougeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recall" => Ok(RougeMode::Recall),
            "f1" => Ok(RougeMode::F1),
            _ => Err(Error::InvalidArgument(format!("unknown ROUGE mode {s:?}"))),
        }
    }
}

/// ROUGE-L for a single pair.
pub fn rouge_l_pair(candidate: &[String], reference: &[String], mode: RougeMode) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let l = lcs_len(candidate, reference) as f64;
    let recall = l / reference.len() as f64;
    match mode {
        RougeMode::Recall => recall,
        RougeMode::F1 => {
            let precision = l / candidate.len() as f64;
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        }
    }
}

/// Mean per-pair ROUGE-L over the corpus.
pub fn rouge_l(candidates: &[Vec<String>], references: &[Vec<String>], mode: RougeMode) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if candidates.len() != references.len() {
        return Err(Error::InvalidArgument("candidate/reference count mismatch".into()));
    }
    let scores: Vec<f64> = candidates
        .par_iter()
        .zip(references)
        .map(|(c, r)| rouge_l_pair(c, r, mode))
        .collect();
    let total: f64 = scores.iter().sum();
    Ok(total / candidates.len() as f64)
}

/// `(distinct tokens across all candidates, mean candidate length)`.
pub fn diversity_stats(candidates: &[Vec<String>]) -> (usize, f64) {
    if candidates.is_empty() {
        return (0, 0.0);
    }
    let terms: HashSet<&String> = candidates.iter().flatten().collect();
    let total: usize = candidates.iter().map(Vec::len).sum();
    (terms.len(), total as f64 / candidates.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub count: usize,
    /// BLEU-1 through BLEU-4.
    pub bleu: BTreeMap<usize, f64>,
    pub rouge_l: f64,
    pub rouge_mode: RougeMode,
    pub terms_generated: usize,
    pub avg_caption_len: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_label: BTreeMap<String, EvaluationReport>,
}

impl EvaluationReport {
    /// Scores prediction/reference pairs (markers already stripped).
    pub fn compute(candidates: &[Vec<String>], references: &[Vec<String>], mode: RougeMode) -> Result<Self> {
        let mut bleu = BTreeMap::new();
        for n in 1..=MAX_BLEU_ORDER {
            bleu.insert(n, bleu_n(candidates, references, n)?);
        }
        let (terms_generated, avg_caption_len) = diversity_stats(candidates);
        Ok(EvaluationReport {
            count: candidates.len(),
            bleu,
            rouge_l: rouge_l(candidates, references, mode)?,
            rouge_mode: mode,
            terms_generated,
            avg_caption_len,
            per_label: BTreeMap::new(),
        })
    }

    /// Text table with one row for the run and one per label.
    pub fn to_table(&self, name: &str, alpha: Option<f64>) -> String {
        let alpha = alpha.map_or_else(|| "-".to_string(), |a| format!("{a}"));
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:>5} {:>8} {:>8} {:>8} {:>8} {:>8} {:>16} {:>30}",
            "Model", "alpha", "BLEU-1", "BLEU-2", "BLEU-3", "BLEU-4", "ROUGE-L", "Terms Generated",
            "Average Caption Token Length"
        );
        let row = |out: &mut String, label: &str, r: &EvaluationReport| {
            let b = |n| r.bleu.get(&n).copied().unwrap_or(0.0);
            let _ = writeln!(
                out,
                "{:<16} {:>5} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>16} {:>30.2}",
                label, alpha, b(1), b(2), b(3), b(4), r.rouge_l, r.terms_generated, r.avg_caption_len
            );
        };
        row(&mut out, name, self);
        for (label, sub) in &self.per_label {
            row(&mut out, &format!("  [{label}]"), sub);
        }
        out
    }
}

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub photo_id: String,
    pub caption: String,
    pub score: f64,
    pub omegas: Vec<f64>,
}

/// One line of a references file: either normalized `tokens` or a raw
/// `caption` that is normalized on read.
#[derive(Debug, Clone, Deserialize)]
struct ReferenceLine {
    photo_id: String,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    #[serde(default)]
    caption: Option<String>,
    #[serde(default)]
    label: Option<String>,
}

/// A reference caption with its optional category label.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub words: Vec<String>,
    pub label: Option<String>,
}

/// Scores predictions against references keyed by photo id. With
/// `group_by_label`, adds a sub-report for every label that occurs among
/// the predicted images.
pub fn evaluate_predictions(
    predictions: &[(String, Vec<String>)],
    references: &HashMap<String, Reference>,
    group_by_label: bool,
    mode: RougeMode,
) -> Result<EvaluationReport> {
    let mut cands = Vec::with_capacity(predictions.len());
    let mut refs = Vec::with_capacity(predictions.len());
    let mut groups: BTreeMap<String, (Vec<Vec<String>>, Vec<Vec<String>>)> = BTreeMap::new();
    for (id, words) in predictions {
        let reference = references
            .get(id)
            .ok_or_else(|| Error::MissingReference(id.clone()))?;
        cands.push(words.clone());
        refs.push(reference.words.clone());
        if let (true, Some(label)) = (group_by_label, &reference.label) {
            let g = groups.entry(label.clone()).or_default();
            g.0.push(words.clone());
            g.1.push(reference.words.clone());
        }
    }
    let mut report = EvaluationReport::compute(&cands, &refs, mode)?;
    for (label, (c, r)) in groups {
        report.per_label.insert(label, EvaluationReport::compute(&c, &r, mode)?);
    }
    Ok(report)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>> {
    read_jsonl(path.as_ref(), "predictions file")
}

pub fn read_references(path: impl AsRef<Path>) -> Result<HashMap<String, Reference>> {
    let lines: Vec<ReferenceLine> = read_jsonl(path.as_ref(), "references file")?;
    let mut out = HashMap::with_capacity(lines.len());
    for (n, line) in lines.into_iter().enumerate() {
        let words = match (line.tokens, line.caption) {
            (Some(tokens), _) => strip_markers(&tokens),
            (None, Some(caption)) => normalize_caption(&caption).words(),
            (None, None) => {
                return Err(Error::Parse {
                    what: "references file",
                    line: n + 1,
                    detail: "needs a tokens or caption field".into(),
                })
            }
        };
        out.insert(
            line.photo_id,
            Reference {
                words,
                label: line.label,
            },
        );
    }
    Ok(out)
}

/// Reads a predictions file and a references file and scores them.
pub fn evaluate_run(
    predictions: impl AsRef<Path>,
    references: impl AsRef<Path>,
    group_by_label: bool,
    mode: RougeMode,
) -> Result<EvaluationReport> {
    let preds: Vec<(String, Vec<String>)> = read_predictions(predictions)?
        .into_iter()
        .map(|p| {
            let words = p.caption.split_whitespace().map(str::to_string).collect::<Vec<_>>();
            (p.photo_id, strip_markers(&words))
        })
        .collect();
    let refs = read_references(references)?;
    evaluate_predictions(&preds, &refs, group_by_label, mode)
}
