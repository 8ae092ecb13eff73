//! Caption generation over any [`Scorer`]: greedy selection and beam search
//! ranked by the discounted probability sum
//!
//! ```text
//! score(w_1, ..., w_k) = sum_t  w_t * alpha^t
//! ```
//!
//! where `w_t` is the probability the model gave the `t`-th generated token.
//! Small `alpha` favours short captions; `alpha = 1` lets every extra token
//! add its full probability.

use std::cmp::Ordering;

use serde::Serialize;

use crate::embedding::ImageEmbedding;
use crate::error::{Error, Result};
use crate::scorer::{is_emittable, Scorer};
use crate::text::{strip_markers, EncodedCaption, Vocabulary, DEFAULT_MAX_LEN, END_INDEX, START_INDEX};

/// Discounted sum `sum_{t=1..k} omega_t * alpha^t`.
pub fn score_candidate(omegas: &[f64], alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if let Some(w) = omegas.iter().find(|w| !(**w > 0.0 && **w <= 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "token probability {w} outside (0, 1]"
        )));
    }
    Ok(discounted_sum(omegas, alpha))
}

fn discounted_sum(omegas: &[f64], alpha: f64) -> f64 {
    let mut weight = 1.0;
    let mut total = 0.0;
    for w in omegas {
        weight *= alpha;
        total += w * weight;
    }
    total
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha {alpha} outside (0, 1]")))
    }
}

/// A partial caption in the beam.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    /// Vocabulary indices, starting with `<startseq>`.
    pub tokens: Vec<usize>,
    /// Predicted probability of each token after `<startseq>`.
    pub omegas: Vec<f64>,
    pub finished: bool,
    pub score: f64,
    /// Iteration at which `<endseq>` was appended.
    #[serde(skip)]
    finished_at: Option<usize>,
}

impl Candidate {
    fn starter() -> Self {
        Candidate {
            tokens: vec![START_INDEX],
            omegas: Vec::new(),
            finished: false,
            score: 0.0,
            finished_at: None,
        }
    }

    fn extend(&self, token: usize, omega: f64, alpha: f64, iteration: usize) -> Self {
        let mut tokens = self.tokens.clone();
        tokens.push(token);
        let mut omegas = self.omegas.clone();
        omegas.push(omega);
        let score = discounted_sum(&omegas, alpha);
        let finished = token == END_INDEX;
        Candidate {
            tokens,
            omegas,
            finished,
            score,
            finished_at: finished.then_some(iteration),
        }
    }

    /// Number of tokens generated after `<startseq>`.
    pub fn generated(&self) -> usize {
        self.omegas.len()
    }

    /// The caption words with markers removed.
    pub fn words(&self, vocab: &Vocabulary) -> Vec<String> {
        let toks: Vec<&str> = self
            .tokens
            .iter()
            .map(|&i| vocab.token(i).unwrap_or("<unk>"))
            .collect();
        strip_markers(&toks)
    }

    fn rank(a: &Candidate, b: &Candidate) -> Ordering {
        b.score
            .total_cmp(&a.score)
            .then_with(|| match (a.finished_at, b.finished_at) {
                (Some(x), Some(y)) => x.cmp(&y),
                (Some(_), None) => Ordering::Less,
                (None, Some(_)) => Ordering::Greater,
                (None, None) => Ordering::Equal,
            })
            .then_with(|| a.tokens.cmp(&b.tokens))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    /// Beam width: population size kept after each iteration.
    pub beta: usize,
    /// Neighborhood size: children generated per unfinished candidate.
    pub kappa: usize,
    pub alpha: f64,
    /// Maximum number of generated tokens (`<startseq>` is free).
    pub max_len: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            beta: 3,
            kappa: 3,
            alpha: 0.6,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

impl BeamConfig {
    /// `beta = kappa = alpha = 1`: beam search degenerates to greedy.
    pub fn greedy(max_len: usize) -> Self {
        BeamConfig {
            beta: 1,
            kappa: 1,
            alpha: 1.0,
            max_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta < 1 || self.kappa < 1 {
            return Err(Error::InvalidArgument("beta and kappa must be >= 1".into()));
        }
        if self.max_len < 1 {
            return Err(Error::InvalidArgument("max_len must be >= 1".into()));
        }
        check_alpha(self.alpha)
    }
}

fn encode_prefix(tokens: &[usize], max_len: usize) -> EncodedCaption {
    EncodedCaption::from_indices(tokens, max_len.max(tokens.len()))
}

/// Appends the most probable token until `<endseq>` is chosen or
/// `max_len` tokens have been generated. Ties go to the lowest index.
pub fn greedy_select<S: Scorer + ?Sized>(
    scorer: &S,
    embedding: &ImageEmbedding,
    max_len: usize,
) -> Result<Vec<usize>> {
    let mut caption = vec![START_INDEX];
    while caption.len() - 1 < max_len {
        let dist = scorer.predict_next(embedding, &encode_prefix(&caption, max_len))?;
        let next = dist.argmax();
        caption.push(next);
        if next == END_INDEX {
            break;
        }
    }
    Ok(caption)
}

/// Population after each iteration of a traced beam search.
#[derive(Debug, Clone, Default)]
pub struct BeamTrace {
    pub iterations: Vec<Vec<Candidate>>,
}

/// Beam search; returns the final population ranked by score (ties: earlier
/// finish, then token order).
pub fn beam_search<S: Scorer + ?Sized>(
    scorer: &S,
    embedding: &ImageEmbedding,
    config: &BeamConfig,
) -> Result<Vec<Candidate>> {
    run_beam(scorer, embedding, config, None)
}

/// [`beam_search`] that also records the population after every iteration.
pub fn beam_search_traced<S: Scorer + ?Sized>(
    scorer: &S,
    embedding: &ImageEmbedding,
    config: &BeamConfig,
) -> Result<(Vec<Candidate>, BeamTrace)> {
    let mut trace = BeamTrace::default();
    let population = run_beam(scorer, embedding, config, Some(&mut trace))?;
    Ok((population, trace))
}

fn run_beam<S: Scorer + ?Sized>(
    scorer: &S,
    embedding: &ImageEmbedding,
    config: &BeamConfig,
    mut trace: Option<&mut BeamTrace>,
) -> Result<Vec<Candidate>> {
    config.validate()?;
    let emittable = (0..scorer.vocab_size()).filter(|&i| is_emittable(i)).count();
    let kappa = if config.kappa > emittable {
        log::warn!("kappa {} exceeds {emittable} emittable tokens; clamping", config.kappa);
        emittable
    } else {
        config.kappa
    };

    let mut population = vec![Candidate::starter()];
    for iteration in 0..config.max_len {
        if population.iter().all(|c| c.finished) {
            break;
        }
        let mut next = Vec::with_capacity(population.len() * kappa);
        for cand in population {
            if cand.finished {
                next.push(cand);
                continue;
            }
            let dist = scorer.predict_next(embedding, &encode_prefix(&cand.tokens, config.max_len))?;
            // zero-probability tokens never enter the beam
            for (tok, p) in dist.top_k(kappa) {
                next.push(cand.extend(tok, p, config.alpha, iteration));
            }
        }
        next.sort_by(Candidate::rank);
        next.truncate(config.beta);
        population = next;
        if let Some(t) = trace.as_deref_mut() {
            t.iterations.push(population.clone());
        }
    }
    Ok(population)
}

/// A finished caption ready for display.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Caption {
    pub words: Vec<String>,
    pub score: f64,
    pub omegas: Vec<f64>,
}

impl Caption {
    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}

/// Top beam-search candidate with markers stripped.
pub fn caption_image<S: Scorer + ?Sized>(
    scorer: &S,
    embedding: &ImageEmbedding,
    config: &BeamConfig,
    vocab: &Vocabulary,
) -> Result<Caption> {
    let population = beam_search(scorer, embedding, config)?;
    let top = population
        .into_iter()
        .next()
        .ok_or_else(|| Error::InvalidArgument("beam search produced no candidates".into()))?;
    Ok(Caption {
        words: top.words(vocab),
        score: top.score,
        omegas: top.omegas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::{LookupScorer, NextTokenDistribution, RandomTableScorer};
    use crate::text::{TokenSequence, NULL_INDEX};
    use proptest::prelude::*;

    fn dist(v: usize, mass: &[(usize, f64)]) -> NextTokenDistribution {
        let mut p = vec![0.0; v];
        for &(i, m) in mass {
            p[i] = m;
        }
        NextTokenDistribution::new(p).unwrap()
    }

    fn emb() -> ImageEmbedding {
        ImageEmbedding::zeros(3)
    }

    #[test]
    fn eq3_hand_values() {
        assert_eq!(score_candidate(&[0.7], 1.0).unwrap(), 0.7);
        assert!((score_candidate(&[0.9, 0.8], 0.6).unwrap() - 0.828).abs() < 1e-12);
        assert_eq!(score_candidate(&[], 0.5).unwrap(), 0.0);
        assert!(score_candidate(&[0.5], 0.0).is_err());
        assert!(score_candidate(&[0.5], 1.1).is_err());
        assert!(score_candidate(&[0.0], 0.5).is_err());
        assert!(score_candidate(&[1.2], 0.5).is_err());
    }

    #[test]
    fn greedy_follows_forced_path() {
        // vocab: 0 null, 1 start, 2 end, 3 unk, 4 a, 5 b
        let mut s = LookupScorer::new(6, dist(6, &[(END_INDEX, 1.0)]));
        s.insert(vec![START_INDEX], dist(6, &[(4, 1.0)]));
        s.insert(vec![START_INDEX, 4], dist(6, &[(5, 1.0)]));
        assert_eq!(greedy_select(&s, &emb(), 15).unwrap(), vec![START_INDEX, 4, 5, END_INDEX]);
    }

    #[test]
    fn greedy_immediate_stop_and_length_cap() {
        let stop = LookupScorer::new(6, dist(6, &[(END_INDEX, 0.6), (4, 0.4)]));
        assert_eq!(greedy_select(&stop, &emb(), 15).unwrap(), vec![START_INDEX, END_INDEX]);

        let never = LookupScorer::new(6, dist(6, &[(END_INDEX, 0.1), (4, 0.9)]));
        let cap = greedy_select(&never, &emb(), 15).unwrap();
        assert_eq!(cap.len() - 1, 15);
        assert!(!cap.contains(&END_INDEX));
    }

    #[test]
    fn beam_keeps_finished_candidates_competing() {
        // start -> {end 0.6, a 0.4}; a -> {b 1.0}; b -> end
        let mut s = LookupScorer::new(6, dist(6, &[(END_INDEX, 1.0)]));
        s.insert(vec![START_INDEX], dist(6, &[(END_INDEX, 0.6), (4, 0.4)]));
        s.insert(vec![START_INDEX, 4], dist(6, &[(5, 1.0)]));
        let cfg = BeamConfig {
            beta: 2,
            kappa: 2,
            alpha: 0.5,
            max_len: 5,
        };
        let (pop, trace) = beam_search_traced(&s, &emb(), &cfg).unwrap();
        // [a b end] = .4*.5 + 1*.25 + 1*.125 = .575 ; [end] = .3
        assert_eq!(pop[0].tokens, vec![START_INDEX, 4, 5, END_INDEX]);
        assert!((pop[0].score - 0.575).abs() < 1e-12);
        assert_eq!(pop[1].tokens, vec![START_INDEX, END_INDEX]);
        assert!(pop.iter().all(|c| c.finished));
        assert_eq!(trace.iterations.len(), 3);
        assert!(trace.iterations.iter().all(|p| p.len() <= 2));
    }

    #[test]
    fn kappa_is_clamped_to_emittable_tokens() {
        let s = RandomTableScorer::new(5, 1);
        let cfg = BeamConfig {
            beta: 50,
            kappa: 50,
            alpha: 0.9,
            max_len: 2,
        };
        let pop = beam_search(&s, &emb(), &cfg).unwrap();
        // 3 emittable tokens: 1 finished after step 1 + 2 unfinished x 3
        assert_eq!(pop.len(), 1 + 2 * 3);
    }

    #[test]
    fn caption_image_strips_markers() {
        let s = LookupScorer::new(6, dist(6, &[(END_INDEX, 0.8), (4, 0.2)]));
        let vocab = crate::text::Vocabulary::build([&TokenSequence::from_words(["a", "b"]).unwrap()], 1).unwrap();
        let c = caption_image(&s, &emb(), &BeamConfig { alpha: 0.6, ..BeamConfig::default() }, &vocab).unwrap();
        assert!(c.words.is_empty());
        assert_eq!(c.text(), "");
        assert!((c.score - 0.8 * 0.6).abs() < 1e-12);
    }

    #[test]
    fn invalid_config_rejected() {
        let s = RandomTableScorer::new(5, 1);
        for cfg in [
            BeamConfig { beta: 0, ..BeamConfig::default() },
            BeamConfig { kappa: 0, ..BeamConfig::default() },
            BeamConfig { alpha: 0.0, ..BeamConfig::default() },
        ] {
            assert!(beam_search(&s, &emb(), &cfg).is_err());
        }
    }

    proptest! {
        #[test]
        fn score_strictly_increases_with_alpha(
            omegas in proptest::collection::vec(0.001f64..=1.0, 1..10),
            a in 0.01f64..0.99,
            step in 0.001f64..0.5,
        ) {
            let b = (a + step).min(1.0);
            prop_assert!(score_candidate(&omegas, a).unwrap() < score_candidate(&omegas, b).unwrap());
        }

        #[test]
        fn dominance(
            pairs in proptest::collection::vec((0.001f64..=1.0, 0.0f64..=1.0), 1..8),
            extra in proptest::collection::vec(0.001f64..=1.0, 0..4),
            alpha in 0.01f64..=1.0,
        ) {
            let b: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let mut a: Vec<f64> = pairs.iter().map(|p| (p.0 + p.1 * (1.0 - p.0)).min(1.0)).collect();
            a.extend(extra);
            prop_assert!(score_candidate(&a, alpha).unwrap() >= score_candidate(&b, alpha).unwrap());
        }

        #[test]
        fn beam_population_structure(seed in 0u64..500, beta in 1usize..5, kappa in 1usize..5) {
            let s = RandomTableScorer::new(8, seed);
            let cfg = BeamConfig { beta, kappa, alpha: 0.8, max_len: 6 };
            let (pop, trace) = beam_search_traced(&s, &emb(), &cfg).unwrap();
            let mut prev = vec![Candidate::starter()];
            for step in &trace.iterations {
                prop_assert!(step.len() <= beta);
                for c in step {
                    prop_assert_eq!(c.omegas.len(), c.tokens.len() - 1);
                    prop_assert!(c.omegas.iter().all(|w| *w > 0.0 && *w <= 1.0));
                    prop_assert!((c.score - score_candidate(&c.omegas, cfg.alpha).unwrap()).abs() < 1e-12);
                    prop_assert!(!c.tokens.contains(&NULL_INDEX));
                    let unchanged = prev.iter().any(|p| p.finished && p.tokens == c.tokens);
                    let extends = prev.iter().any(|p| !p.finished && c.tokens.len() == p.tokens.len() + 1 && c.tokens.starts_with(&p.tokens));
                    prop_assert!(unchanged || extends);
                }
                prev = step.clone();
            }
            prop_assert_eq!(pop, prev);
        }
    }
}
